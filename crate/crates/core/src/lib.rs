//! Incentive analysis of the Greedy-Mine attack on Bitcoin-NG.
//!
//! * [`model`]: the episode state machine shared by everything else.
//! * [`analytics`]: closed-form fee bounds, reach probabilities, revenues,
//!   relative extra reward and the profitability threshold.
//! * [`oracle`]: exact absorption probabilities of the truncated chain with
//!   rigorous lower/upper bounds.
//! * [`simulation`]: seeded, order-independent Monte Carlo episodes.
//! * [`experiments`]: sweeps, the published table, and CSV/JSON export.
//! * [`cli`]: the `greedy-mine` command line.

pub mod analytics;
pub mod cli;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod simulation;

pub use analytics::{
    analytic_report, greedy_revenue, honest_revenue, incentive_bounds, rer, state_probabilities,
    threshold_alpha, AnalyticReport, IncentiveBounds, StateProbabilities,
};
pub use model::{ChainState, Finder, Outcome, StrategyParams, TieChoice};
pub use oracle::{absorption_bounds, descent_probability, AbsorptionBounds};
pub use simulation::{estimate, SimConfig, SimStats};
