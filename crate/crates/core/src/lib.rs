//! Simulation and verification toolkit for a two-stage task-delegation
//! mechanism.
//!
//! A principal wants tasks done in its own priority order. Each candidate
//! agent privately knows how far its preferred order is from the
//! principal's (its misalignment). Agents report a misalignment, the lowest
//! report wins, and the winner is paid as a function of the second-lowest
//! report and the misalignment it actually realizes. The [`verify`] module
//! checks incentive compatibility, participation and welfare claims about
//! that mechanism by exhaustive grid search.

pub mod agents;
pub mod engine;
mod error;
pub mod grid;
pub mod mechanism;
pub mod model;
mod notation;
pub mod verify;

pub use agents::{
    best_realization, best_response_bid, evaluate_report, feasible_realizations, Environment,
    RealizationChoice, ReportEvaluation, TieBreakPolicy,
};
pub use engine::{
    generate_scenario, run_batch, run_game, social_welfare, Outcome, Scenario, ScenarioConfig,
    ScenarioMode,
};
pub use error::{MechError, Result};
pub use grid::Grid;
pub use mechanism::{
    check_payment_property, compute_payment, select_winner, Affine, PaymentPropertyReport,
    PaymentScheme, SchemeKind,
};
pub use model::{
    effort_cost, misalignment, profit, AgentId, AgentProfile, Bid, CostModel, MisalignmentMetric,
    Policy, PriorityVector, ProfitModel, Realization, RealizationRule,
};

/// Margin separating a strict improvement from a float tie in every
/// utility and payment comparison.
pub const DECISION_MARGIN: f64 = 1e-9;
