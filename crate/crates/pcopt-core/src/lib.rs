//! Polynomial chaos methods for smooth stochastic optimization.
//!
//! Decision variables are expanded in orthonormal polynomial bases of the
//! problem's random parameters; Gauss quadrature turns the stochastic program
//! into a deterministic one over expansion coefficients, whose solution
//! carries the full distribution of the optimizer. A Monte Carlo baseline,
//! moment reports, and interchange-gap diagnostics round out the toolkit.

pub(crate) mod compile;
pub mod diagnostics;
pub mod error;
pub mod examples;
pub mod expr;
pub mod mc;
pub mod orthopoly;
pub mod pce;
pub mod problem;
pub mod quadrature;
pub mod report;
pub mod run;
pub mod solver;
pub mod transform;

pub use diagnostics::{ConvexityReport, GapBoundReport};
pub use error::{Error, Result};
pub use mc::{McRun, McSample, SampleStats};
pub use orthopoly::{Basis, PolynomialFamily};
pub use pce::{Expansion, MomentSummary};
pub use problem::{parse_problem, Distribution, Sense, StochasticProblem};
pub use quadrature::{gauss_rule, GaussRule, QuadratureGrid};
pub use report::{AggregateStat, Method, RunReport};
pub use run::{compare_text, run_mc, solve_pc, PcSettings};
pub use solver::{KKTReport, SolveOptions, SolveResult};
pub use transform::{transform, transform_with, ConstraintMode, DeterministicProblem};
