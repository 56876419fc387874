//! Zero-intelligence traders that learn, by softmax reinforcement, which of
//! two double-auction markets to trade in and whether to buy or sell.
//!
//! The crate covers both the stochastic agent-based model (single periods,
//! full runs, seeded ensembles) and its deterministic large-population limit
//! (expected returns, flow, fixed points, critical temperature).

pub mod auction;
pub mod engine;
pub mod learning;
pub mod meanfield;
pub mod observables;
pub mod params;
pub mod report;
pub mod rng;

pub use auction::{clear_market, set_price, ClearingCounts, ClearingResult, Match, Order};
pub use engine::{
    run_ensemble, run_period, run_simulation, AgentState, BinderEstimate, EnsembleStats, Recording,
    RunOptions, Trajectory,
};
pub use learning::{choice_probabilities, update_attractions};
pub use observables::{binder_cumulant, downward_crossing, persistence_times, reduce_coords, Histogram2d, ReducedCoords};
pub use params::{Action, Market, ModelParams, ParamError, Side, Variant};
