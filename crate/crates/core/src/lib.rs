//! Multi-agent stock market simulator.
//!
//! Each investor runs two coupled direct-policy-search learners: one picks a
//! forecasting rule for its horizon, the other turns that forecast into a
//! limit order. Orders for every stock are batch-cleared once per trading
//! day at mid-price, which sets the next day's price, volume and spread.
//! The [`analytics`] module computes market-microstructure statistics for
//! simulated or real daily data, and [`calibration`] sweeps the
//! hyperparameter grid against them.

pub mod agents;
pub mod analytics;
pub mod calibration;
pub mod config;
pub mod engine;
pub mod error;
pub mod forecast;
pub mod fundamentals;
pub mod history;
pub mod io;
pub mod orderbook;
pub mod policy;
pub mod rng;
pub mod trade;
pub mod window;

pub use agents::{AgentParams, AgentState};
pub use config::SimConfig;
pub use engine::{run, run_batch, RunResult, World};
pub use error::{Result, SimError};
pub use orderbook::{LimitOrder, OrderBookFrame, Side, Trade};
pub use policy::{ActionValueTable, PolicyTable};
pub use window::RollingPercentileWindow;
