//! Serializable run reports. A report captures everything a run produced —
//! problem digest, method, moments, solver details — and round-trips
//! losslessly through JSON. Timing is the only field excluded from
//! byte-for-byte comparisons between runs.

use serde::{Deserialize, Serialize};

use crate::diagnostics::GapBoundReport;
use crate::error::Result;
use crate::orthopoly::PolynomialFamily;
use crate::pce::MomentSummary;
use crate::problem::{Sense, StochasticProblem};
use crate::solver::KKTReport;
use crate::transform::ConstraintMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDigest {
    pub decision: Vec<String>,
    pub random: Vec<String>,
    pub d: usize,
    pub p: usize,
    pub inequalities: usize,
    pub equalities: usize,
    pub sense: Sense,
}

impl ProblemDigest {
    pub fn of(prob: &StochasticProblem) -> Self {
        ProblemDigest {
            decision: prob.decisions().to_vec(),
            random: prob.randoms().iter().map(|(n, _)| n.clone()).collect(),
            d: prob.d(),
            p: prob.p(),
            inequalities: prob.num_inequalities(),
            equalities: prob.num_equalities(),
            sense: prob.sense(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pc,
    Mc,
}

/// Expansion-side solve details. `objective_value` is in the problem's
/// original sense (maximization values are reported un-negated).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcReport {
    pub families: Vec<PolynomialFamily>,
    pub order: usize,
    /// Quadrature nodes per random dimension.
    pub quadrature_nodes: usize,
    pub constraint_mode: ConstraintMode,
    /// One row of expansion coefficients per decision variable.
    pub coefficients: Vec<Vec<f64>>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt: KKTReport,
    /// Present only for constrained problems.
    pub dual_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McReport {
    pub samples: usize,
    pub seed: u64,
    pub excluded: usize,
    pub start: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub standard_error: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateStat {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: ProblemDigest,
    pub method: Method,
    pub moments: MomentSummary,
    pub pc: Option<PcReport>,
    pub mc: Option<McReport>,
    /// Named linear functionals of the decision vector (e.g. schedule
    /// completion percentages), when the instance defines them.
    pub aggregates: Option<Vec<AggregateStat>>,
    pub diagnostics: Option<GapBoundReport>,
    pub warnings: Vec<String>,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| crate::Error::Invalid(format!("report serialization failed: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| crate::Error::Invalid(format!("report deserialization failed: {e}")))
    }

    /// Copy with the timing field zeroed, for byte comparisons between runs.
    pub fn timeless(&self) -> RunReport {
        let mut r = self.clone();
        r.wall_seconds = 0.0;
        r
    }
}
