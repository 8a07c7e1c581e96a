//! Exact mixed-integer linear programming.
//!
//! A bounded-variable primal simplex and a branch-and-bound driver, both
//! generic over [`Scalar`] so the same code runs on exact rationals or on
//! floats. A separate enumeration routine solves tiny pure-integer models
//! without any LP machinery and serves as a reference answer in tests.

pub mod branch_bound;
pub mod error;
pub mod exhaustive;
pub mod lp_format;
pub mod model;
pub mod scalar;
pub mod simplex;

pub use branch_bound::{solve_milp, BranchingRule, MilpResult, MilpStatus, NodeSelection, SolverParams};
pub use error::{LpParseError, ModelError, SolveError};
pub use exhaustive::{solve_exhaustive, EnumerationCaps};
pub use lp_format::{export_lp_format, parse_lp_format};
pub use model::{Column, MilpModel, Row, RowSense, VarKind};
pub use scalar::{format_exact, parse_exact, Scalar};
pub use simplex::{solve_lp, BasicVar, LpSolution, LpStatus};

pub use num_rational::BigRational;

pub type Rational = BigRational;
pub type ExactModel = MilpModel<Rational>;
pub type FloatModel = MilpModel<f64>;
pub type ExactResult = MilpResult<Rational>;
