//! The trading learner: 108 states, 9 actions mapping a forecast to a limit
//! order, the entry gate, and cashflow rewards.
//!
//! State index radix is `(3, 3, 2, 2, 3)` over `(direction, volatility,
//! bonds health, equity health, volume)`; action index is `side * 3 + stance`
//! with side 0 sell / 1 hold / 2 buy and stance 0 soft / 1 neutral / 2 hard.

use crate::orderbook::{LimitOrder, Side};
use crate::policy::{reward_for_percentile, ActionValueTable};
use crate::window::RollingPercentileWindow;

pub const TRADE_STATES: usize = 108;
pub const TRADE_ACTIONS: usize = 9;

const MIN_ORDER_PRICE: f64 = 0.01;
/// Bonds or equity below this fraction of their starting value flag the
/// corresponding state component.
const HEALTH_FRACTION: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TradeState {
    /// 0 forecast down, 1 flat, 2 up.
    pub direction: u8,
    pub volatility: u8,
    pub bonds_ok: u8,
    pub equity_ok: u8,
    /// 0 no volume, 1 quiet, 2 active.
    pub volume: u8,
}

impl TradeState {
    pub fn index(self) -> usize {
        let mut i = usize::from(self.direction);
        i = i * 3 + usize::from(self.volatility);
        i = i * 2 + usize::from(self.bonds_ok);
        i = i * 2 + usize::from(self.equity_ok);
        i * 3 + usize::from(self.volume)
    }

    pub fn from_index(mut i: usize) -> Self {
        assert!(i < TRADE_STATES);
        let volume = (i % 3) as u8;
        i /= 3;
        let equity_ok = (i % 2) as u8;
        i /= 2;
        let bonds_ok = (i % 2) as u8;
        i /= 2;
        let volatility = (i % 3) as u8;
        let direction = (i / 3) as u8;
        Self { direction, volatility, bonds_ok, equity_ok, volume }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TradeAction {
    pub side: u8,
    pub stance: u8,
}

impl TradeAction {
    pub fn index(self) -> usize {
        usize::from(self.side) * 3 + usize::from(self.stance)
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < TRADE_ACTIONS);
        Self { side: (i / 3) as u8, stance: (i % 3) as u8 }
    }
}

/// Per-stock rolling memories of one trader.
#[derive(Debug, Clone)]
pub struct TradeMemory {
    pub falling: RollingPercentileWindow,
    pub rising: RollingPercentileWindow,
    pub volume: RollingPercentileWindow,
    pub gate: RollingPercentileWindow,
    pub cashflow: RollingPercentileWindow,
}

impl TradeMemory {
    pub fn new(memory: usize) -> Self {
        Self {
            falling: RollingPercentileWindow::new(memory),
            rising: RollingPercentileWindow::new(memory),
            volume: RollingPercentileWindow::new(memory),
            gate: RollingPercentileWindow::new(memory),
            cashflow: RollingPercentileWindow::new(memory),
        }
    }

    /// Records the expected move `(H - P) / P` and classifies its direction.
    /// Zero counts as a rise.
    pub fn direction(&mut self, forecast: f64, price: f64) -> u8 {
        let mu = (forecast - price) / price;
        if mu < 0.0 {
            if self.falling.insert_and_rank(mu) < 0.95 {
                0
            } else {
                1
            }
        } else if self.rising.insert_and_rank(mu) < 0.05 {
            1
        } else {
            2
        }
    }

    /// Records the day's volume and classifies the activity level.
    pub fn volume_band(&mut self, volume: u64) -> u8 {
        let p = self.volume.insert_and_rank(volume as f64);
        if volume == 0 {
            0
        } else if p < 0.33 {
            1
        } else {
            2
        }
    }
}

/// 0 below the 33rd percentile, 2 above the 67th, else 1.
pub fn volatility_tercile(percentile: f64) -> u8 {
    if percentile < 0.33 {
        0
    } else if percentile > 0.67 {
        2
    } else {
        1
    }
}

/// Portfolio inputs to the trading state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Health {
    pub bonds: f64,
    pub initial_bonds: f64,
    pub equity: f64,
    pub initial_equity: f64,
}

impl Health {
    fn flags(&self) -> (u8, u8) {
        let ok = |now: f64, start: f64| u8::from(now >= HEALTH_FRACTION * start);
        (ok(self.bonds, self.initial_bonds), ok(self.equity, self.initial_equity))
    }
}

/// Encodes the trading state, updating the direction and volume memories.
pub fn encode_state(
    memory: &mut TradeMemory,
    forecast: f64,
    price: f64,
    long_vol_pct: f64,
    health: Health,
    volume: u64,
) -> TradeState {
    let direction = memory.direction(forecast, price);
    let (bonds_ok, equity_ok) = health.flags();
    TradeState {
        direction,
        volatility: volatility_tercile(long_vol_pct),
        bonds_ok,
        equity_ok,
        volume: memory.volume_band(volume),
    }
}

/// Bid and ask quotes for a stance: soft stances concede `g·S` toward the
/// other side, hard stances demand it.
pub fn quotes(forecast: f64, price: f64, gesture: f64, prev_spread: f64, stance: u8) -> (f64, f64) {
    let lo = forecast.min(price);
    let hi = forecast.max(price);
    let d = gesture * prev_spread;
    let (bid, ask) = match stance {
        0 => (lo + d, hi - d),
        1 => (lo, hi),
        _ => (lo - d, hi + d),
    };
    (bid.max(MIN_ORDER_PRICE), ask.max(MIN_ORDER_PRICE))
}

/// What one trading decision is based on; recorded so the decision can be
/// re-evaluated in hindsight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderContext {
    pub forecast: f64,
    pub price: f64,
    pub prev_spread: f64,
    pub gesture: f64,
    pub holdings: u64,
    pub bonds: f64,
    pub stock_count: usize,
}

impl OrderContext {
    /// Side, price and quantity the action would request, before skipping
    /// empty orders.
    pub fn proposal(&self, action: TradeAction) -> Option<(Side, f64, u64)> {
        if !self.forecast.is_finite() {
            return None;
        }
        let (bid, ask) = quotes(self.forecast, self.price, self.gesture, self.prev_spread, action.stance);
        match action.side {
            0 => Some((Side::Ask, ask, self.holdings)),
            1 => None,
            _ => {
                let qty =
                    if self.bonds > 0.0 { (self.bonds / (ask * self.stock_count as f64)).floor() as u64 } else { 0 };
                Some((Side::Bid, bid, qty))
            }
        }
    }

    /// The limit order for `action`, or `None` to hold.
    pub fn order(&self, action: TradeAction, agent: usize, stock: usize) -> Option<LimitOrder> {
        let (side, price, quantity) = self.proposal(action)?;
        (quantity > 0).then_some(LimitOrder { agent, stock, side, price, quantity })
    }

    /// Cashflow the action would have realized by `price_now` under the
    /// given execution assumption.
    pub fn hindsight_cashflow(&self, action: TradeAction, price_now: f64, execution: Execution) -> f64 {
        let Some((side, limit, q)) = self.proposal(action) else { return 0.0 };
        let fill = match execution {
            Execution::AtLimit => limit,
            Execution::Clearing(clear) => {
                let crosses = match side {
                    Side::Bid => limit >= clear,
                    Side::Ask => limit <= clear,
                };
                if !crosses {
                    return 0.0;
                }
                0.5 * (limit + clear)
            }
        };
        match side {
            Side::Ask => -(q as f64) * (price_now - fill),
            Side::Bid => q as f64 * (price_now - fill),
        }
    }
}

/// How a counterfactual order is assumed to execute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Execution {
    /// In full at its own limit price.
    AtLimit,
    /// Only if its limit crosses the day's clearing price, then at the
    /// mid-price between the two.
    Clearing(f64),
}

/// Action with the largest hindsight cashflow; ties go to the lowest index.
pub fn best_action_hindsight(ctx: &OrderContext, price_now: f64, execution: Execution) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for a in 0..TRADE_ACTIONS {
        let c = ctx.hindsight_cashflow(TradeAction::from_index(a), price_now, execution);
        if c > best.1 {
            best = (a, c);
        }
    }
    best.0
}

/// Records the best action value of `state` and lets an entry order through
/// only if its percentile is below `since_trade / window`.
pub fn gate(
    window: &mut RollingPercentileWindow,
    values: &ActionValueTable,
    state: usize,
    since_trade: usize,
    trading_window: usize,
) -> bool {
    let p = window.insert_and_rank(values.row_max(state));
    p < since_trade as f64 / trading_window as f64
}

/// Realized cashflow of a fill `horizon` days later: `qty · (P_now - P_fill)`
/// with `qty` negative for sales.
pub fn cashflow(signed_quantity: i64, fill_price: f64, price_now: f64) -> f64 {
    signed_quantity as f64 * (price_now - fill_price)
}

/// Records a cashflow and maps its percentile to a reward. By default larger
/// cashflows earn larger rewards; `literal` applies the forecast-error table
/// unchanged, which rewards the smallest cashflows.
pub fn trade_reward(value: f64, window: &mut RollingPercentileWindow, literal: bool) -> i32 {
    let p = window.insert_and_rank(value);
    let r = reward_for_percentile(p);
    if literal {
        r
    } else {
        -r
    }
}
