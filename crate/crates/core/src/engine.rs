//! The per-step market loop and run orchestration.
//!
//! One step at day `t`, with `P(t)`, `V(t)` and `S(t)` known:
//!
//! 1. solvent agents accrue interest and dividends;
//! 2. each solvent agent refreshes its memories, forecasts, encodes its
//!    trading state and forms at most one order per stock;
//! 3. every stock's book is cleared and settled in stock order, producing
//!    `P(t+1)`, `V(t+1)`, `S(t+1)`;
//! 4. rewards that have come due are delivered and policies updated;
//! 5. NAVs are marked at `P(t+1)` and drawdowns checked.
//!
//! A run of `T` days starts at `P(0) = 100` and performs `T - 1` steps.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::agents::{init_agents, AgentParams, AgentState};
use crate::config::{SimConfig, DAYS_PER_MONTH, DAYS_PER_YEAR, INITIAL_PRICE};
use crate::error::{Result, SimError};
use crate::forecast::{self, ForecastAction, ForecastMemory, FORECAST_ACTIONS, FORECAST_STATES};
use crate::fundamentals::{generate_fundamental, BiasProcess, ViewParams};
use crate::history::PriceHistory;
use crate::orderbook::{clear_with_budgets, settle, LimitOrder, OrderBookFrame, Side};
use crate::policy::{ActionValueTable, PolicyTable};
use crate::rng::{stream, Purpose, SimRng};
use crate::trade::{self, Execution, Health, OrderContext, TradeAction, TradeMemory, TRADE_ACTIONS, TRADE_STATES};

/// Switches that change what a run records, never what it computes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineOptions {
    /// Re-verify every hindsight action by exhaustive comparison.
    pub debug_checks: bool,
    /// Keep per-decision, per-reward and order-book traces.
    pub trace: bool,
}

/// One agent decision, kept for `τ` days so it can be rewarded.
#[derive(Debug, Clone, Copy)]
struct Decision {
    t: usize,
    view: f64,
    forecast_state: usize,
    forecast_action: usize,
    forecast: f64,
    trade_state: usize,
    trade_action: usize,
    context: OrderContext,
}

/// Fill of a policy order awaiting its cashflow reward.
#[derive(Debug, Clone, Copy)]
struct PendingFill {
    due: usize,
    state: usize,
    action: usize,
    signed_quantity: i64,
    price: f64,
}

#[derive(Debug, Clone)]
struct StockMemory {
    forecast: ForecastMemory,
    trade: TradeMemory,
    bias: BiasProcess,
    bias_rng: SimRng,
    view: f64,
    decisions: VecDeque<Decision>,
    fills: VecDeque<PendingFill>,
}

#[derive(Debug, Clone)]
struct Learner {
    forecast_policy: PolicyTable,
    trade_policy: PolicyTable,
    action_values: ActionValueTable,
    forecast_rng: SimRng,
    trade_rng: SimRng,
    first_active: Option<usize>,
    stocks: Vec<StockMemory>,
}

/// Why an order was submitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderKind {
    /// Chosen by the trading policy.
    Policy,
    /// Liquidation of lots that reached the horizon.
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionTrace {
    pub t: usize,
    pub agent: usize,
    pub stock: usize,
    pub forecast_state: usize,
    pub forecast_action: usize,
    pub forecast: f64,
    pub trade_state: usize,
    pub trade_action: usize,
    pub order: Option<(Side, f64, u64, OrderKind)>,
    pub gate_passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Forecast,
    Trade,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTrace {
    pub t: usize,
    pub agent: usize,
    pub stock: usize,
    pub learner: LearnerKind,
    pub state: usize,
    pub action: usize,
    pub reward: i32,
    pub hindsight: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BookLevel {
    pub t: usize,
    pub stock: usize,
    pub side: Side,
    pub level: usize,
    pub price: f64,
    pub quantity: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Traces {
    pub decisions: Vec<DecisionTrace>,
    pub rewards: Vec<RewardTrace>,
    pub book: Vec<BookLevel>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub hindsight_checks: u64,
    pub hindsight_violations: u64,
    pub trades: u64,
}

/// Cash flows of one step, summed over agents.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepAccounting {
    pub bonds_before: f64,
    pub interest: f64,
    pub dividends: f64,
    pub fees: f64,
    pub bonds_after: f64,
}

/// End-of-run record of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSummary {
    pub id: usize,
    pub params: AgentParams,
    pub initial_nav: f64,
    pub final_nav: f64,
    pub bankrupt: bool,
}

/// Full trajectory of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: SimConfig,
    pub seed: u64,
    /// `prices[j][t]`, one series of `T` days per stock.
    pub prices: Vec<Vec<f64>>,
    pub volumes: Vec<Vec<u64>>,
    pub spreads: Vec<Vec<f64>>,
    pub fundamentals: Vec<Vec<f64>>,
    /// `nav[i][t]`; frozen from the bankruptcy day on.
    pub nav: Vec<Vec<f64>>,
    /// `(agent, day)` in order of occurrence.
    pub bankruptcies: Vec<(usize, usize)>,
    pub agents: Vec<AgentSummary>,
    pub diagnostics: Diagnostics,
    pub traces: Option<Traces>,
}

/// A simulation in progress.
#[derive(Debug, Clone)]
pub struct World {
    cfg: SimConfig,
    seed: u64,
    options: EngineOptions,
    t: usize,
    fundamentals: Vec<Vec<f64>>,
    history: Vec<PriceHistory>,
    volumes: Vec<Vec<u64>>,
    spreads: Vec<Vec<f64>>,
    agents: Vec<AgentState>,
    learners: Vec<Learner>,
    nav: Vec<Vec<f64>>,
    initial_nav: Vec<f64>,
    bankruptcies: Vec<(usize, usize)>,
    diagnostics: Diagnostics,
    traces: Traces,
}

/// What happened in one call to [`World::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub t: usize,
    pub accounting: StepAccounting,
    pub frames: Vec<OrderBookFrame>,
}

impl World {
    /// Builds the initial state without validating `cfg`.
    pub fn new(cfg: SimConfig, seed: u64, options: EngineOptions) -> Self {
        let stocks = cfg.stock_count;
        let fundamentals: Vec<Vec<f64>> = (0..stocks)
            .map(|j| {
                let mut rng = stream(seed, Purpose::Fundamental, 0, j);
                generate_fundamental(cfg.step_count.max(1), cfg.fundamental_amplitude, &mut rng).values
            })
            .collect();
        let prices = vec![INITIAL_PRICE; stocks];
        let agents = init_agents(&cfg, seed, &prices);
        let learners = agents
            .iter()
            .map(|a| Learner {
                forecast_policy: PolicyTable::uniform(FORECAST_STATES, FORECAST_ACTIONS),
                trade_policy: PolicyTable::uniform(TRADE_STATES, TRADE_ACTIONS),
                action_values: ActionValueTable::new(TRADE_STATES, TRADE_ACTIONS),
                forecast_rng: stream(seed, Purpose::ForecastPolicy, a.id, 0),
                trade_rng: stream(seed, Purpose::TradePolicy, a.id, 0),
                first_active: None,
                stocks: (0..stocks)
                    .map(|j| {
                        let mut bias_rng = stream(seed, Purpose::FundamentalView, a.id, j);
                        let bias = BiasProcess::new(ViewParams::default(), &mut bias_rng);
                        StockMemory {
                            forecast: ForecastMemory::new(a.params.memory, a.params.horizon),
                            trade: TradeMemory::new(a.params.memory),
                            view: bias.view(fundamentals[j][0]),
                            bias,
                            bias_rng,
                            decisions: VecDeque::with_capacity(a.params.horizon + 1),
                            fills: VecDeque::new(),
                        }
                    })
                    .collect(),
            })
            .collect();
        let initial_nav: Vec<f64> = agents.iter().map(|a| a.net_asset_value(&prices)).collect();
        let mut nav: Vec<Vec<f64>> = initial_nav
            .iter()
            .map(|&v| {
                let mut series = Vec::with_capacity(cfg.step_count);
                series.push(v);
                series
            })
            .collect();
        nav.shrink_to_fit();
        Self {
            history: (0..stocks).map(|_| PriceHistory::from_prices(&[INITIAL_PRICE])).collect(),
            volumes: vec![vec![0]; stocks],
            spreads: vec![vec![0.0]; stocks],
            fundamentals,
            agents,
            learners,
            nav,
            initial_nav,
            bankruptcies: Vec::new(),
            diagnostics: Diagnostics::default(),
            traces: Traces::default(),
            cfg,
            seed,
            options,
            t: 0,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Current day: prices are known up to and including it.
    pub fn day(&self) -> usize {
        self.t
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn prices(&self, stock: usize) -> &[f64] {
        self.history[stock].prices()
    }

    pub fn volumes(&self, stock: usize) -> &[u64] {
        &self.volumes[stock]
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    /// Whether every policy table is still exactly uniform.
    pub fn policies_uniform(&self) -> bool {
        self.learners.iter().all(|l| l.forecast_policy.is_uniform() && l.trade_policy.is_uniform())
    }

    pub fn policies_stochastic(&self) -> bool {
        self.learners.iter().all(|l| l.forecast_policy.is_stochastic() && l.trade_policy.is_stochastic())
    }

    /// Total shares of each stock held across agents.
    pub fn shares_outstanding(&self) -> Vec<u64> {
        (0..self.cfg.stock_count).map(|j| self.agents.iter().map(|a| a.holdings[j]).sum()).collect()
    }

    pub fn total_bonds(&self) -> f64 {
        self.agents.iter().map(|a| a.bonds).sum()
    }

    fn current_prices(&self) -> Vec<f64> {
        self.history.iter().map(|h| h.at(self.t)).collect()
    }

    /// Advances one day.
    pub fn step(&mut self) -> Result<StepReport> {
        let t = self.t;
        self.step_inner().map_err(|e| SimError::InRun { seed: self.seed, step: t, source: Box::new(e) })
    }

    fn step_inner(&mut self) -> Result<StepReport> {
        let t = self.t;
        let stocks = self.cfg.stock_count;
        let prices = self.current_prices();
        let mut acct = StepAccounting { bonds_before: self.total_bonds(), ..StepAccounting::default() };

        for a in self.agents.iter_mut() {
            let (interest, dividends) = a.accrue(&prices, &self.cfg);
            acct.interest += interest;
            acct.dividends += dividends;
        }

        let mut bids: Vec<Vec<(LimitOrder, OrderKind)>> = vec![Vec::new(); stocks];
        let mut asks: Vec<Vec<(LimitOrder, OrderKind)>> = vec![Vec::new(); stocks];
        for i in 0..self.agents.len() {
            self.decide(i, t, &prices, &mut bids, &mut asks)?;
        }

        let mut frames = Vec::with_capacity(stocks);
        for j in 0..stocks {
            let bid_orders: Vec<LimitOrder> = bids[j].iter().map(|(o, _)| *o).collect();
            let ask_orders: Vec<LimitOrder> = asks[j].iter().map(|(o, _)| *o).collect();
            let budgets: Vec<f64> = bid_orders.iter().map(|o| self.agents[o.agent].bonds).collect();
            let frame = clear_with_budgets(&bid_orders, &budgets, &ask_orders, prices[j], self.cfg.broker_fee)?;
            acct.fees += settle(&frame, &mut self.agents, self.cfg.broker_fee, t)?;
            self.record_fills(j, t, &frame, &bids[j], &asks[j]);
            if self.options.trace {
                self.trace_book(t, j, &frame, &bid_orders, &ask_orders);
            }
            self.diagnostics.trades += frame.trades.len() as u64;
            self.history[j].push(frame.next_price);
            self.volumes[j].push(frame.next_volume);
            self.spreads[j].push(frame.next_spread);
            frames.push(frame);
        }
        self.t += 1;
        let now = self.t;

        if !self.cfg.noise_agent_mode {
            for i in 0..self.agents.len() {
                if !self.agents[i].bankrupt {
                    self.learn(i, now)?;
                }
            }
        }

        let next_prices = self.current_prices();
        let year_end = now.is_multiple_of(DAYS_PER_YEAR);
        for (i, a) in self.agents.iter_mut().enumerate() {
            let series = &mut self.nav[i];
            if a.bankrupt {
                let frozen = *series.last().expect("nav starts non-empty");
                series.push(frozen);
                continue;
            }
            let v = a.net_asset_value(&next_prices);
            a.track_peak(v, false);
            if a.check_bankruptcy(v) {
                self.bankruptcies.push((i, now));
            } else if year_end {
                a.track_peak(v, true);
            }
            series.push(v);
        }
        acct.bonds_after = self.total_bonds();
        Ok(StepReport { t, accounting: acct, frames })
    }

    fn decide(
        &mut self,
        i: usize,
        t: usize,
        prices: &[f64],
        bids: &mut [Vec<(LimitOrder, OrderKind)>],
        asks: &mut [Vec<(LimitOrder, OrderKind)>],
    ) -> Result<()> {
        let agent = &mut self.agents[i];
        let learner = &mut self.learners[i];
        let params = agent.params.clone();
        let tau = params.horizon;
        let active = !agent.bankrupt && t >= forecast::warmup_length(tau);
        let equity = agent.equity(prices);

        for (j, mem) in learner.stocks.iter_mut().enumerate() {
            if t > 0 {
                mem.bias.advance(&mut mem.bias_rng);
            }
            mem.view = mem.bias.view(self.fundamentals[j][t.min(self.fundamentals[j].len() - 1)]);
            if agent.bankrupt {
                continue;
            }
            agent.since_trade[j] += 1;
            let history = &self.history[j];
            let reading = mem.forecast.observe(history, t, mem.view);
            let volume = self.volumes[j][t];
            if !active {
                mem.trade.volume_band(volume);
                continue;
            }
            learner.first_active.get_or_insert(t);

            let f_state = forecast::encode_state(reading.long_pct, reading.short_pct, reading.mean_gap).index();
            let f_action = learner.forecast_policy.sample(f_state, &mut learner.forecast_rng);
            let h = forecast::forecast_for_action(
                history,
                t,
                mem.view,
                params.reflexivity,
                tau,
                ForecastAction::from_index(f_action),
            )?;

            let health = Health {
                bonds: agent.bonds,
                initial_bonds: agent.initial_bonds,
                equity,
                initial_equity: agent.initial_equity,
            };
            let t_state = trade::encode_state(&mut mem.trade, h, prices[j], reading.long_pct, health, volume).index();
            let t_action = learner.trade_policy.sample(t_state, &mut learner.trade_rng);
            let gate_passed = trade::gate(
                &mut mem.trade.gate,
                &learner.action_values,
                t_state,
                agent.since_trade[j],
                params.trading_window,
            );

            let context = OrderContext {
                forecast: h,
                price: prices[j],
                prev_spread: self.spreads[j][t],
                gesture: params.gesture,
                holdings: agent.holdings[j],
                bonds: agent.bonds,
                stock_count: self.cfg.stock_count,
            };
            let action = TradeAction::from_index(t_action);
            let exit_quantity = agent.due_exit_quantity(j, t).min(agent.holdings[j]);
            // a due exit pre-empts any new entry on the same stock
            let submitted = match (action.side, exit_quantity) {
                (0, _) => context.order(action, i, j).map(|o| (o, OrderKind::Policy)),
                (_, q) if q > 0 => {
                    let (_, ask) = trade::quotes(h, prices[j], params.gesture, context.prev_spread, 1);
                    Some((LimitOrder { agent: i, stock: j, side: Side::Ask, price: ask, quantity: q }, OrderKind::Exit))
                }
                (2, _) if gate_passed => context.order(action, i, j).map(|o| (o, OrderKind::Policy)),
                _ => None,
            };
            if let Some((order, kind)) = submitted {
                match order.side {
                    Side::Bid => bids[j].push((order, kind)),
                    Side::Ask => asks[j].push((order, kind)),
                }
            }
            if self.options.trace {
                self.traces.decisions.push(DecisionTrace {
                    t,
                    agent: i,
                    stock: j,
                    forecast_state: f_state,
                    forecast_action: f_action,
                    forecast: h,
                    trade_state: t_state,
                    trade_action: t_action,
                    order: submitted.map(|(o, k)| (o.side, o.price, o.quantity, k)),
                    gate_passed,
                });
            }

            if mem.decisions.len() == tau + 1 {
                mem.decisions.pop_front();
            }
            mem.decisions.push_back(Decision {
                t,
                view: mem.view,
                forecast_state: f_state,
                forecast_action: f_action,
                forecast: h,
                trade_state: t_state,
                trade_action: t_action,
                context,
            });
        }
        Ok(())
    }

    /// Queues cashflow rewards for fills of policy orders.
    fn record_fills(
        &mut self,
        stock: usize,
        t: usize,
        frame: &OrderBookFrame,
        bids: &[(LimitOrder, OrderKind)],
        asks: &[(LimitOrder, OrderKind)],
    ) {
        // (agent, signed quantity, notional) aggregated per agent
        let mut fills: Vec<(usize, i64, f64)> = Vec::new();
        let mut add = |agent: usize, q: i64, price: f64| match fills.iter_mut().find(|f| f.0 == agent) {
            Some(f) => {
                f.1 += q;
                f.2 += q.unsigned_abs() as f64 * price;
            }
            None => fills.push((agent, q, q.unsigned_abs() as f64 * price)),
        };
        for tr in &frame.trades {
            if bids[tr.bid].1 == OrderKind::Policy {
                add(tr.buyer, tr.quantity as i64, tr.price);
            }
            if asks[tr.ask].1 == OrderKind::Policy {
                add(tr.seller, -(tr.quantity as i64), tr.price);
            }
        }
        for (agent, q, notional) in fills {
            let learner = &mut self.learners[agent];
            let tau = self.agents[agent].params.horizon;
            let mem = &mut learner.stocks[stock];
            let d = mem.decisions.back().expect("fill without a decision");
            debug_assert_eq!(d.t, t);
            mem.fills.push_back(PendingFill {
                due: t + tau,
                state: d.trade_state,
                action: d.trade_action,
                signed_quantity: q,
                price: notional / q.unsigned_abs() as f64,
            });
        }
    }

    fn trace_book(&mut self, t: usize, stock: usize, frame: &OrderBookFrame, bids: &[LimitOrder], asks: &[LimitOrder]) {
        for (level, &b) in frame.bid_rank.iter().enumerate() {
            self.traces.book.push(BookLevel {
                t,
                stock,
                side: Side::Bid,
                level,
                price: bids[b].price,
                quantity: bids[b].quantity,
            });
        }
        for (level, &a) in frame.ask_rank.iter().enumerate() {
            self.traces.book.push(BookLevel {
                t,
                stock,
                side: Side::Ask,
                level,
                price: asks[a].price,
                quantity: asks[a].quantity,
            });
        }
    }

    /// Delivers rewards due at day `now` and runs scheduled hindsight updates.
    fn learn(&mut self, i: usize, now: usize) -> Result<()> {
        let params = &self.agents[i].params;
        let (tau, beta, rho) = (params.horizon, params.learning_rate, params.reflexivity);
        let learner = &mut self.learners[i];
        let Some(first) = learner.first_active else { return Ok(()) };
        let cadence = tau / DAYS_PER_MONTH + 2;
        let hindsight_due = (now - first).is_multiple_of(cadence);
        let debug = self.options.debug_checks;
        let trace = self.options.trace;

        for (j, mem) in learner.stocks.iter_mut().enumerate() {
            let history = &self.history[j];
            let price_now = history.at(now);

            while let Some(fill) = mem.fills.front().copied().filter(|f| f.due <= now) {
                mem.fills.pop_front();
                let value = trade::cashflow(fill.signed_quantity, fill.price, price_now);
                let r = trade::trade_reward(value, &mut mem.trade.cashflow, self.cfg.literal_trade_reward);
                learner.trade_policy.update(fill.state, fill.action, r, beta);
                learner.action_values.update(fill.state, fill.action, value);
                if trace {
                    self.traces.rewards.push(RewardTrace {
                        t: now,
                        agent: i,
                        stock: j,
                        learner: LearnerKind::Trade,
                        state: fill.state,
                        action: fill.action,
                        reward: r,
                        hindsight: false,
                    });
                }
            }

            while mem.decisions.front().is_some_and(|d| d.t + tau < now) {
                mem.decisions.pop_front();
            }
            let Some(d) = mem.decisions.front().copied().filter(|d| d.t + tau == now) else { continue };
            let r = forecast::forecast_reward(d.forecast, price_now, &mut mem.forecast.errors)?;
            learner.forecast_policy.update(d.forecast_state, d.forecast_action, r, beta);
            if trace {
                self.traces.rewards.push(RewardTrace {
                    t: now,
                    agent: i,
                    stock: j,
                    learner: LearnerKind::Forecast,
                    state: d.forecast_state,
                    action: d.forecast_action,
                    reward: r,
                    hindsight: false,
                });
            }
            if !hindsight_due {
                continue;
            }

            let best_f = forecast::best_action_hindsight(history, d.t, d.view, rho, tau, price_now)?;
            learner.forecast_policy.update(d.forecast_state, best_f, 4, beta);
            let execution = if self.cfg.fill_aware_hindsight {
                Execution::Clearing(history.at(d.t + 1))
            } else {
                Execution::AtLimit
            };
            let best_t = trade::best_action_hindsight(&d.context, price_now, execution);
            learner.trade_policy.update(d.trade_state, best_t, 4, beta);
            if debug {
                let err = |a: usize| -> Result<f64> {
                    let h =
                        forecast::forecast_for_action(history, d.t, d.view, rho, tau, ForecastAction::from_index(a))?;
                    Ok((h - price_now).abs())
                };
                let chosen = err(best_f)?;
                let mut ok = true;
                for a in 0..FORECAST_ACTIONS {
                    ok &= chosen <= err(a)?;
                }
                let cash = |a: usize| d.context.hindsight_cashflow(TradeAction::from_index(a), price_now, execution);
                let chosen_cash = cash(best_t);
                ok &= (0..TRADE_ACTIONS).all(|a| chosen_cash >= cash(a));
                self.diagnostics.hindsight_checks += 2;
                if !ok {
                    self.diagnostics.hindsight_violations += 1;
                }
            }
            if trace {
                for (learner_kind, state, action) in
                    [(LearnerKind::Forecast, d.forecast_state, best_f), (LearnerKind::Trade, d.trade_state, best_t)]
                {
                    self.traces.rewards.push(RewardTrace {
                        t: now,
                        agent: i,
                        stock: j,
                        learner: learner_kind,
                        state,
                        action,
                        reward: 4,
                        hindsight: true,
                    });
                }
            }
        }
        Ok(())
    }

    /// Steps until day `T - 1` is known.
    pub fn run_to_end(&mut self) -> Result<()> {
        while self.t + 1 < self.cfg.step_count {
            self.step()?;
        }
        Ok(())
    }

    pub fn into_result(self) -> RunResult {
        let final_prices = self.current_prices();
        let agents = self
            .agents
            .iter()
            .map(|a| AgentSummary {
                id: a.id,
                params: a.params.clone(),
                initial_nav: self.initial_nav[a.id],
                final_nav: *self.nav[a.id].last().unwrap_or(&a.net_asset_value(&final_prices)),
                bankrupt: a.bankrupt,
            })
            .collect();
        let len = self.history.first().map_or(0, |h| h.len());
        RunResult {
            seed: self.seed,
            prices: self.history.iter().map(|h| h.prices().to_vec()).collect(),
            volumes: self.volumes,
            spreads: self.spreads,
            fundamentals: self
                .fundamentals
                .into_iter()
                .map(|mut f| {
                    f.truncate(len);
                    f
                })
                .collect(),
            nav: self.nav,
            bankruptcies: self.bankruptcies,
            agents,
            diagnostics: self.diagnostics,
            traces: self.options.trace.then_some(self.traces),
            config: self.cfg,
        }
    }
}

/// Runs one simulation of a validated configuration.
pub fn run(cfg: &SimConfig, seed: u64) -> Result<RunResult> {
    run_with(cfg, seed, EngineOptions::default())
}

pub fn run_with(cfg: &SimConfig, seed: u64, options: EngineOptions) -> Result<RunResult> {
    let cfg = cfg.clone().validate().map_err(SimError::InvalidConfig)?;
    let mut world = World::new(cfg, seed, options);
    world.run_to_end()?;
    Ok(world.into_result())
}

/// Runs one simulation per seed in parallel; results follow the seed order
/// and each failure is reported in its own slot.
pub fn run_batch(cfg: &SimConfig, seeds: &[u64]) -> Vec<Result<RunResult>> {
    seeds.par_iter().map(|&seed| run(cfg, seed)).collect()
}

/// Seeds of a batch: `run_count` consecutive seeds from `master_seed`.
pub fn batch_seeds(cfg: &SimConfig) -> Vec<u64> {
    (0..cfg.run_count as u64).map(|k| cfg.master_seed.wrapping_add(k)).collect()
}
