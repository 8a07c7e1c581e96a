//! Two-stage stochastic planning of QKD key-relay resources over
//! space-air-ground networks, solved as a deterministic-equivalent MILP.

mod numeric;

pub mod builder;
pub mod cost_model;
pub mod experiment;
pub mod instance;
pub mod scenario;
pub mod recourse;
pub mod report;
pub mod solution;
pub mod synthetic;
pub mod topology;

pub use qkd_milp::Rational;
