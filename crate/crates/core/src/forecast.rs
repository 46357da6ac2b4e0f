//! The forecasting learner: 27 states built from volatility percentiles and
//! the agent's valuation gap, 27 actions choosing a technical forecasting
//! tool, its look-back and its blend with the fundamental view.
//!
//! State index radix is `(3, 3, 3)` over `(long vol, short vol, gap)`;
//! action index radix is `(3, 3, 3)` over `(tool, interval, blend)`.

use std::collections::VecDeque;

use crate::error::{Result, SimError};
use crate::history::PriceHistory;
use crate::policy::reward_for_percentile;
use crate::window::RollingPercentileWindow;

pub const FORECAST_STATES: usize = 27;
pub const FORECAST_ACTIONS: usize = 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ForecastState {
    pub long_vol: u8,
    pub short_vol: u8,
    pub gap: u8,
}

impl ForecastState {
    pub fn index(self) -> usize {
        usize::from(self.long_vol) * 9 + usize::from(self.short_vol) * 3 + usize::from(self.gap)
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < FORECAST_STATES);
        Self { long_vol: (i / 9) as u8, short_vol: (i / 3 % 3) as u8, gap: (i % 3) as u8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ForecastAction {
    /// 0 mean-reverting, 1 moving average, 2 trend-following.
    pub tool: u8,
    /// Look-back multiplier: interval is `(1 + interval) * horizon / 2`.
    pub interval: u8,
    /// Weight of the technical forecast in the blend.
    pub blend: u8,
}

impl ForecastAction {
    pub fn index(self) -> usize {
        usize::from(self.tool) * 9 + usize::from(self.interval) * 3 + usize::from(self.blend)
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < FORECAST_ACTIONS);
        Self { tool: (i / 9) as u8, interval: (i / 3 % 3) as u8, blend: (i % 3) as u8 }
    }
}

/// 0 below the 25th percentile, 2 above the 75th, else 1.
pub fn volatility_band(percentile: f64) -> u8 {
    if percentile < 0.25 {
        0
    } else if percentile > 0.75 {
        2
    } else {
        1
    }
}

/// 0 below 10% mean relative gap, 2 above 30%, else 1.
pub fn gap_band(mean_gap: f64) -> u8 {
    if mean_gap < 0.10 {
        0
    } else if mean_gap > 0.30 {
        2
    } else {
        1
    }
}

pub fn encode_state(long_vol_pct: f64, short_vol_pct: f64, mean_gap: f64) -> ForecastState {
    ForecastState {
        long_vol: volatility_band(long_vol_pct),
        short_vol: volatility_band(short_vol_pct),
        gap: gap_band(mean_gap),
    }
}

/// Look-back length for interval action `a1` at horizon `tau`.
pub fn interval_length(a1: u8, tau: usize) -> usize {
    (((1 + usize::from(a1)) * tau) as f64 / 2.0).round().max(1.0) as usize
}

/// First step at which every interval action has enough history.
/// This is `3τ`, plus one when `τ` is odd and the longest interval rounds up.
pub fn warmup_length(tau: usize) -> usize {
    2 * interval_length(2, tau)
}

/// Technical forecast at step `t` from the means of `[t-2L, t-L]` and `[t-L, t]`.
pub fn technical_forecast(history: &PriceHistory, t: usize, tool: u8, len: usize) -> Result<f64> {
    if len < 1 {
        return Err(SimError::MalformedHorizon(len));
    }
    if t < 2 * len || t >= history.len() {
        return Err(SimError::SeriesTooShort { needed: 2 * len + 1, got: history.len().min(t + 1) });
    }
    let older = history.mean(t - 2 * len, t - len);
    let recent = history.mean(t - len, t);
    let p = history.at(t);
    Ok(match tool {
        0 => p + older - recent,
        1 => 0.5 * (older + recent),
        _ => p - older + recent,
    })
}

/// Weight of the technical forecast for reflexivity `rho` and blend action.
pub fn blend_weight(rho: f64, blend: u8) -> f64 {
    if rho <= 0.5 {
        [0.0, rho, 2.0 * rho][usize::from(blend)]
    } else {
        [2.0 * rho - 1.0, rho, 1.0][usize::from(blend)]
    }
}

pub fn blend_forecast(technical: f64, view: f64, rho: f64, blend: u8) -> f64 {
    let alpha = blend_weight(rho, blend);
    alpha * technical + (1.0 - alpha) * view
}

/// Full forecast for one action at step `t`.
pub fn forecast_for_action(
    history: &PriceHistory,
    t: usize,
    view: f64,
    rho: f64,
    tau: usize,
    action: ForecastAction,
) -> Result<f64> {
    let len = interval_length(action.interval, tau);
    let technical = technical_forecast(history, t, action.tool, len)?;
    Ok(blend_forecast(technical, view, rho, action.blend))
}

/// Relative forecast error, recorded into `errors`; returns the reward.
pub fn forecast_reward(past_forecast: f64, price_now: f64, errors: &mut RollingPercentileWindow) -> Result<i32> {
    if price_now <= 0.0 || price_now.is_nan() {
        return Err(SimError::NonPositivePrice { index: 0, price: price_now });
    }
    let e = (past_forecast - price_now).abs() / price_now;
    Ok(reward_for_percentile(errors.insert_and_rank(e)))
}

/// Action that would have minimized `|H - price_now|` had it been taken at
/// `t_past`. Ties go to the lowest index.
pub fn best_action_hindsight(
    history: &PriceHistory,
    t_past: usize,
    view_past: f64,
    rho: f64,
    tau: usize,
    price_now: f64,
) -> Result<usize> {
    let mut best = (0, f64::INFINITY);
    for a in 0..FORECAST_ACTIONS {
        let h = forecast_for_action(history, t_past, view_past, rho, tau, ForecastAction::from_index(a))?;
        let err = (h - price_now).abs();
        if err < best.1 {
            best = (a, err);
        }
    }
    Ok(best.0)
}

/// Per-stock rolling memories of one forecaster.
#[derive(Debug, Clone)]
pub struct ForecastMemory {
    pub long_vol: RollingPercentileWindow,
    pub short_vol: RollingPercentileWindow,
    pub errors: RollingPercentileWindow,
    /// `|P - B| / P` over the last `3τ + 1` steps.
    gaps: VecDeque<f64>,
    tau: usize,
}

/// Percentiles computed for one step's observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolatilityReading {
    pub long_pct: f64,
    pub short_pct: f64,
    pub mean_gap: f64,
}

impl ForecastMemory {
    pub fn new(memory: usize, tau: usize) -> Self {
        Self {
            long_vol: RollingPercentileWindow::new(memory),
            short_vol: RollingPercentileWindow::new(memory),
            errors: RollingPercentileWindow::new(memory),
            gaps: VecDeque::with_capacity(3 * tau + 1),
            tau,
        }
    }

    /// Records step `t`'s volatilities and valuation gap. Windows with less
    /// than a full look-back use whatever history exists.
    pub fn observe(&mut self, history: &PriceHistory, t: usize, view: f64) -> VolatilityReading {
        let tau = self.tau;
        let price = history.at(t);
        let long = history.variance(t.saturating_sub(3 * tau), t);
        let short = history.variance(t.saturating_sub(tau), t);
        if self.gaps.len() == 3 * tau + 1 {
            self.gaps.pop_front();
        }
        self.gaps.push_back((price - view).abs() / price);
        VolatilityReading {
            long_pct: self.long_vol.insert_and_rank(long),
            short_pct: self.short_vol.insert_and_rank(short),
            mean_gap: self.gaps.iter().sum::<f64>() / self.gaps.len() as f64,
        }
    }
}
