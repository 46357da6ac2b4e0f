//! Batch double-auction clearing, run once per stock per trading day.
//!
//! Bids are ranked by descending price and asks by ascending price, ties
//! keeping submission order. The two sides are walked from the top and every
//! crossing pair (`bid >= ask`) trades the smaller residual quantity at the
//! pair's mid-price. The last mid-price cleared becomes the next market
//! price; unmatched residuals are discarded.

use crate::agents::{AgentState, Lot};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Bid,
    Ask,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitOrder {
    pub agent: usize,
    pub stock: usize,
    pub side: Side,
    pub price: f64,
    pub quantity: u64,
}

impl LimitOrder {
    pub fn validate(&self) -> Result<()> {
        if !(self.price.is_finite() && self.price > 0.0) {
            return Err(SimError::InvalidOrder { agent: self.agent, reason: format!("price {}", self.price) });
        }
        if self.quantity == 0 {
            return Err(SimError::InvalidOrder { agent: self.agent, reason: "zero quantity".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trade {
    pub buyer: usize,
    pub seller: usize,
    pub stock: usize,
    pub price: f64,
    pub quantity: u64,
    /// Submission index of the matched bid.
    pub bid: usize,
    /// Submission index of the matched ask.
    pub ask: usize,
}

/// One step's book for one stock and its clearing outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderBookFrame {
    /// Submission indices of bids, best first.
    pub bid_rank: Vec<usize>,
    /// Submission indices of asks, best first.
    pub ask_rank: Vec<usize>,
    pub trades: Vec<Trade>,
    pub next_price: f64,
    pub next_volume: u64,
    pub next_spread: f64,
}

/// Clears a book with unlimited buyer budgets.
pub fn clear(bids: &[LimitOrder], asks: &[LimitOrder], prev_price: f64) -> Result<OrderBookFrame> {
    clear_with_budgets(bids, &vec![f64::INFINITY; bids.len()], asks, prev_price, 0.0)
}

/// Clears a book where bid `i` may spend at most `budgets[i]` including the
/// proportional `fee`. A bid whose remaining budget cannot buy one share at
/// the current mid-price drops out.
pub fn clear_with_budgets(
    bids: &[LimitOrder],
    budgets: &[f64],
    asks: &[LimitOrder],
    prev_price: f64,
    fee: f64,
) -> Result<OrderBookFrame> {
    assert_eq!(bids.len(), budgets.len());
    for o in bids.iter().chain(asks) {
        o.validate()?;
    }
    let mut bid_rank: Vec<usize> = (0..bids.len()).collect();
    bid_rank.sort_by(|&a, &b| bids[b].price.total_cmp(&bids[a].price));
    let mut ask_rank: Vec<usize> = (0..asks.len()).collect();
    ask_rank.sort_by(|&a, &b| asks[a].price.total_cmp(&asks[b].price));
    if let Some(level) = bid_rank.windows(2).position(|w| bids[w[0]].price < bids[w[1]].price) {
        return Err(SimError::SortViolation { level });
    }
    if let Some(level) = ask_rank.windows(2).position(|w| asks[w[0]].price > asks[w[1]].price) {
        return Err(SimError::SortViolation { level });
    }

    let mut trades = Vec::new();
    let mut bid_left: Vec<u64> = bids.iter().map(|o| o.quantity).collect();
    let mut ask_left: Vec<u64> = asks.iter().map(|o| o.quantity).collect();
    let mut budget_left = budgets.to_vec();
    let (mut i, mut j) = (0, 0);
    while i < bid_rank.len() && j < ask_rank.len() {
        let (b, a) = (bid_rank[i], ask_rank[j]);
        if bids[b].price < asks[a].price {
            break;
        }
        let mid = 0.5 * (bids[b].price + asks[a].price);
        let affordable = if budget_left[b].is_finite() {
            (budget_left[b].max(0.0) / (mid * (1.0 + fee))).floor() as u64
        } else {
            u64::MAX
        };
        let q = bid_left[b].min(ask_left[a]).min(affordable);
        if q == 0 {
            // budget exhausted
            i += 1;
            continue;
        }
        trades.push(Trade {
            buyer: bids[b].agent,
            seller: asks[a].agent,
            stock: bids[b].stock,
            price: mid,
            quantity: q,
            bid: b,
            ask: a,
        });
        bid_left[b] -= q;
        ask_left[a] -= q;
        budget_left[b] -= q as f64 * mid * (1.0 + fee);
        if bid_left[b] == 0 {
            i += 1;
        }
        if ask_left[a] == 0 {
            j += 1;
        }
    }
    let next_price = trades.last().map_or(prev_price, |t| t.price);
    let next_volume = trades.iter().map(|t| t.quantity).sum();
    Ok(OrderBookFrame { bid_rank, ask_rank, trades, next_price, next_volume, next_spread: spread(bids, asks) })
}

/// `|mean bid price - mean ask price|`, zero when a side is empty.
pub fn spread(bids: &[LimitOrder], asks: &[LimitOrder]) -> f64 {
    if bids.is_empty() || asks.is_empty() {
        return 0.0;
    }
    let mean = |os: &[LimitOrder]| os.iter().map(|o| o.price).sum::<f64>() / os.len() as f64;
    (mean(bids) - mean(asks)).abs()
}

/// Applies a frame's trades to the agents' books; returns total fees paid.
///
/// Every buy opens a lot that comes due at the buyer's horizon; sells close
/// lots oldest first.
pub fn settle(frame: &OrderBookFrame, agents: &mut [AgentState], fee: f64, t: usize) -> Result<f64> {
    let mut fees = 0.0;
    for tr in &frame.trades {
        let value = tr.quantity as f64 * tr.price;
        let seller = &mut agents[tr.seller];
        let held = seller.holdings[tr.stock];
        if held < tr.quantity {
            return Err(SimError::Oversold { agent: tr.seller, stock: tr.stock, needed: tr.quantity, held });
        }
        seller.holdings[tr.stock] -= tr.quantity;
        seller.bonds += value - value * fee;
        seller.since_trade[tr.stock] = 0;
        seller.consume_lots(tr.stock, tr.quantity);

        let buyer = &mut agents[tr.buyer];
        buyer.holdings[tr.stock] += tr.quantity;
        buyer.bonds -= value + value * fee;
        buyer.since_trade[tr.stock] = 0;
        buyer.lots[tr.stock].push_back(Lot { quantity: tr.quantity, price: tr.price, opened: t });
        fees += 2.0 * value * fee;
    }
    Ok(fees)
}
