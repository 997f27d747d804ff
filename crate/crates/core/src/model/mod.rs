//! Scenario description, policies, and the analytic delivery and energy functionals.

mod eval;
mod fast;
mod policy;
mod scenario;

pub use eval::{
    beacon_energy, binomial_laplace, delivery_probability, energy_spent, evaluate,
    expected_holding, expected_received, holding_laplace, holding_prob, q_no_receive,
    transmission_energy, PolicyEvaluation,
};
pub use fast::{ProfileCost, ThresholdEvaluator};
pub use policy::{expand_threshold, Policy, PolicyError, ThresholdPolicy};
pub use scenario::{
    contact_rate, mobility_rate, NodeClass, Scenario, ScenarioBuilder, ScenarioError, Technology,
    DEFAULT_SPEED_CONSTANT, FEASIBILITY_RTOL,
};
