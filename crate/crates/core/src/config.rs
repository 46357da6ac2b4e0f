//! Run configuration and the trading calendar.

use std::fmt;

/// Trading days per year.
pub const DAYS_PER_YEAR: usize = 252;
/// Trading days per month.
pub const DAYS_PER_MONTH: usize = 21;
/// Trading days per week.
pub const DAYS_PER_WEEK: usize = 5;

/// Initial market price of every stock.
pub const INITIAL_PRICE: f64 = 100.0;

/// Longest admissible investment horizon (six months).
pub const MAX_HORIZON: usize = 6 * DAYS_PER_MONTH;

/// `step_count` must exceed this so that every horizon and memory draw fits.
pub const MIN_STEP_COUNT: usize = 6 * DAYS_PER_MONTH + 4 * DAYS_PER_WEEK;

/// All global constants and hyperparameters of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub agent_count: usize,
    pub stock_count: usize,
    /// Trading days per run.
    pub step_count: usize,
    pub run_count: usize,
    /// Proportional fee charged to both sides of every trade.
    pub broker_fee: f64,
    pub annual_risk_free: f64,
    pub annual_dividend: f64,
    /// Multiplies each agent's transaction gesture.
    pub gesture_scalar: f64,
    /// Amplitude of fundamental-value jumps.
    pub fundamental_amplitude: f64,
    /// Percentage points added to every agent's drawdown limit.
    pub drawdown_threshold: f64,
    pub master_seed: u64,
    /// Agents act uniformly at random and never learn.
    pub noise_agent_mode: bool,
    /// Use the unmodified percentile-to-reward table for trade cashflows
    /// (rewards the worst cashflows); off by default.
    pub literal_trade_reward: bool,
    /// Hindsight trade updates count a counterfactual order only if it would
    /// have crossed that day's clearing price; by default every order is
    /// assumed to fill at its own limit.
    pub fill_aware_hindsight: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            agent_count: 500,
            stock_count: 1,
            step_count: 2875,
            run_count: 20,
            broker_fee: 0.0001,
            annual_risk_free: 0.01,
            annual_dividend: 0.02,
            gesture_scalar: 2.0,
            fundamental_amplitude: 0.5,
            drawdown_threshold: -10.0,
            master_seed: 0,
            noise_agent_mode: false,
            literal_trade_reward: false,
            fill_aware_hindsight: false,
        }
    }
}

/// One violated configuration bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl SimConfig {
    /// Checks every invariant, reporting all violations at once.
    pub fn validate(self) -> Result<SimConfig, Vec<ConfigViolation>> {
        let mut errs = Vec::new();
        let mut bad = |field: &'static str, message: String| {
            errs.push(ConfigViolation { field, message });
        };
        if self.agent_count < 1 {
            bad("agent_count", "agent_count must be ≥ 1".into());
        }
        if self.stock_count < 1 {
            bad("stock_count", "stock_count must be ≥ 1".into());
        }
        if self.step_count <= MIN_STEP_COUNT {
            bad("step_count", format!("step_count too small for horizon bounds (must exceed {MIN_STEP_COUNT})"));
        }
        if self.run_count < 1 {
            bad("run_count", "run_count must be ≥ 1".into());
        }
        if !(0.0..1.0).contains(&self.broker_fee) {
            bad("broker_fee", "broker_fee must lie in [0, 1)".into());
        }
        if !self.annual_risk_free.is_finite() || self.annual_risk_free <= -1.0 {
            bad("annual_risk_free", "annual_risk_free must be finite and > -1".into());
        }
        if !self.annual_dividend.is_finite() || self.annual_dividend < 0.0 {
            bad("annual_dividend", "annual_dividend must be finite and ≥ 0".into());
        }
        if !(self.gesture_scalar.is_finite() && self.gesture_scalar > 0.0) {
            bad("gesture_scalar", "gesture_scalar must be positive".into());
        }
        if !(self.fundamental_amplitude.is_finite() && self.fundamental_amplitude > 0.0) {
            bad("fundamental_amplitude", "fundamental_amplitude must be positive".into());
        }
        if !self.drawdown_threshold.is_finite() {
            bad("drawdown_threshold", "drawdown_threshold must be finite".into());
        }
        if errs.is_empty() {
            Ok(self)
        } else {
            Err(errs)
        }
    }

    /// Per-step growth factor of bond holdings.
    pub fn daily_interest_factor(&self) -> f64 {
        (1.0 + self.annual_risk_free).powf(1.0 / DAYS_PER_YEAR as f64)
    }

    /// Per-step dividend yield on the market value of holdings.
    pub fn daily_dividend_yield(&self) -> f64 {
        self.annual_dividend / DAYS_PER_YEAR as f64
    }
}
