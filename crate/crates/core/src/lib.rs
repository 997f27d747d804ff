//! Solvers, bounds, and a Monte Carlo validator for budget-constrained two-hop
//! forwarding in multi-class delay tolerant networks.

pub mod baselines;
pub mod greedy;
pub mod gridsearch;
pub mod mcsim;
pub mod model;
pub mod roots;
