//! Investor initialization, portfolio accounting and bankruptcy.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{SimConfig, DAYS_PER_WEEK, MAX_HORIZON};
use crate::rng::{stream, Purpose};

/// Scale of the half-normal initial bond holdings.
pub const BOND_SCALE: f64 = 1.0e4;
/// Scale of the discrete half-normal initial share holdings.
pub const SHARE_SCALE: f64 = 100.0;

const MIN_DRAWDOWN_LIMIT: f64 = 0.01;
const MAX_DRAWDOWN_LIMIT: f64 = 0.99;

/// Fixed behavioral parameters of one investor.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    /// Maximum tolerated year-to-date drawdown of NAV.
    pub drawdown_limit: f64,
    /// Weight of chartist against fundamentalist pricing, in `[0, 1]`.
    pub reflexivity: f64,
    /// Days after which an open position is liquidated.
    pub horizon: usize,
    /// Days of patience used by the entry gate.
    pub trading_window: usize,
    /// Capacity of every rolling memory.
    pub memory: usize,
    /// Concession from the agent's valuation, in units of the prior spread.
    pub gesture: f64,
    pub learning_rate: f64,
}

/// Shares bought in one step that await liquidation at the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lot {
    pub quantity: u64,
    pub price: f64,
    pub opened: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub params: AgentParams,
    pub bonds: f64,
    pub holdings: Vec<u64>,
    pub initial_bonds: f64,
    pub initial_equity: f64,
    pub year_peak: f64,
    pub bankrupt: bool,
    /// Days since the last cleared trade, per stock.
    pub since_trade: Vec<usize>,
    /// Open lots per stock, oldest first.
    pub lots: Vec<VecDeque<Lot>>,
}

/// Draws every agent of a run from its own stream.
pub fn init_agents(cfg: &SimConfig, seed: u64, prices: &[f64]) -> Vec<AgentState> {
    (0..cfg.agent_count)
        .map(|id| {
            let mut rng = stream(seed, Purpose::AgentInit, id, 0);
            init_agent(cfg, id, prices, &mut rng)
        })
        .collect()
}

fn half_normal<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (z * scale).abs()
}

pub fn init_agent<R: Rng + ?Sized>(cfg: &SimConfig, id: usize, prices: &[f64], rng: &mut R) -> AgentState {
    let bonds = half_normal(BOND_SCALE, rng);
    let holdings: Vec<u64> = (0..cfg.stock_count).map(|_| half_normal(SHARE_SCALE, rng).round() as u64).collect();
    let drawdown_limit =
        (rng.random_range(0.5..0.6) + cfg.drawdown_threshold / 100.0).clamp(MIN_DRAWDOWN_LIMIT, MAX_DRAWDOWN_LIMIT);
    let reflexivity = rng.random_range(0.0..=1.0);
    let horizon = rng.random_range(DAYS_PER_WEEK..=MAX_HORIZON);
    let trading_window = rng.random_range(DAYS_PER_WEEK..=horizon);
    let memory_max = cfg.step_count.saturating_sub(horizon + 2 * DAYS_PER_WEEK).max(DAYS_PER_WEEK);
    let memory = rng.random_range(DAYS_PER_WEEK..=memory_max);
    let gesture = rng.random_range(0.2..0.8) * cfg.gesture_scalar;
    let learning_rate = rng.random_range(0.05..0.20);
    let equity = equity_value(&holdings, prices);
    AgentState {
        id,
        params: AgentParams { drawdown_limit, reflexivity, horizon, trading_window, memory, gesture, learning_rate },
        bonds,
        initial_bonds: bonds,
        initial_equity: equity,
        year_peak: bonds + equity,
        bankrupt: false,
        since_trade: vec![0; cfg.stock_count],
        lots: vec![VecDeque::new(); cfg.stock_count],
        holdings,
    }
}

pub fn equity_value(holdings: &[u64], prices: &[f64]) -> f64 {
    holdings.iter().zip(prices).map(|(&q, &p)| q as f64 * p).sum()
}

impl AgentState {
    pub fn equity(&self, prices: &[f64]) -> f64 {
        equity_value(&self.holdings, prices)
    }

    /// Bonds plus marked-to-market holdings.
    pub fn net_asset_value(&self, prices: &[f64]) -> f64 {
        self.bonds + self.equity(prices)
    }

    /// Flags the agent bankrupt when its drawdown from the year peak exceeds
    /// its limit. Bankruptcy is permanent.
    pub fn check_bankruptcy(&mut self, nav: f64) -> bool {
        if self.bankrupt {
            return true;
        }
        if self.year_peak <= 0.0 {
            self.bankrupt = true;
            return true;
        }
        if (self.year_peak - nav) / self.year_peak > self.params.drawdown_limit {
            self.bankrupt = true;
        }
        self.bankrupt
    }

    /// Raises the year peak, or resets it at a year boundary.
    pub fn track_peak(&mut self, nav: f64, year_start: bool) {
        if year_start || nav > self.year_peak {
            self.year_peak = nav;
        }
    }

    /// Credits one day of interest and dividends; returns `(interest, dividends)`.
    pub fn accrue(&mut self, prices: &[f64], cfg: &SimConfig) -> (f64, f64) {
        if self.bankrupt {
            return (0.0, 0.0);
        }
        let interest = self.bonds * (cfg.daily_interest_factor() - 1.0);
        let dividends = self.equity(prices) * cfg.daily_dividend_yield();
        self.bonds += interest;
        self.bonds += dividends;
        (interest, dividends)
    }

    /// Removes `quantity` shares from the open lots of `stock`, oldest first.
    pub fn consume_lots(&mut self, stock: usize, mut quantity: u64) {
        let lots = &mut self.lots[stock];
        while quantity > 0 {
            let Some(front) = lots.front_mut() else { break };
            let take = front.quantity.min(quantity);
            front.quantity -= take;
            quantity -= take;
            if front.quantity == 0 {
                lots.pop_front();
            }
        }
    }

    /// Shares in lots of `stock` opened at least `horizon` days before `t`.
    pub fn due_exit_quantity(&self, stock: usize, t: usize) -> u64 {
        self.lots[stock].iter().take_while(|l| l.opened + self.params.horizon <= t).map(|l| l.quantity).sum()
    }
}
