//! Stochastic optimization problems: decision variables, random parameters
//! with declared distributions, objective and constraints, plus the text
//! file format.
//!
//! File format (line oriented, `#` starts a comment):
//! ```text
//! [decision]
//! x1, x2
//! [random]
//! lambda ~ normal(0.0, 0.1)
//! [objective]
//! minimize (1 + lambda)*x1^2 + x1
//! [constraints]
//! x1 + x2 - 1 <= 0
//! x1 - x2 == 0
//! ```
//! Constraints accept `<=`, `>=` (negated into `<=` form) and `==`.

use crate::error::{Error, Result};
use crate::expr::{parse_expression_at, Expr};
use crate::orthopoly::PolynomialFamily;
use serde::{Deserialize, Serialize};

/// Law of one random parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    Normal { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Distribution {
    fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Normal { std, .. } if std <= 0.0 => Err(Error::Invalid(format!(
                "normal standard deviation must be positive, got {std}"
            ))),
            Distribution::Uniform { lo, hi } if hi <= lo => Err(Error::Invalid(format!(
                "uniform bounds must satisfy lo < hi, got [{lo}, {hi}]"
            ))),
            _ => Ok(()),
        }
    }

    /// Polynomial family orthonormal under this law's standardized form.
    pub fn family(&self) -> PolynomialFamily {
        match self {
            Distribution::Normal { .. } => PolynomialFamily::Hermite,
            Distribution::Uniform { .. } => PolynomialFamily::Legendre,
        }
    }

    /// Maps a standardized point (standard normal draw, or uniform on
    /// [-1, 1]) to the physical parameter value.
    pub fn standardize(&self, xi: f64) -> Result<f64> {
        if !xi.is_finite() {
            return Err(Error::Numerical(format!("non-finite standardized point {xi}")));
        }
        match *self {
            Distribution::Normal { mean, std } => Ok(mean + std * xi),
            Distribution::Uniform { lo, hi } => {
                if xi.abs() > 1.0 {
                    Err(Error::Invalid(format!(
                        "standardized point {xi} outside [-1, 1] for a uniform parameter"
                    )))
                } else {
                    Ok(lo + (hi - lo) * (xi + 1.0) / 2.0)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Normal { mean, .. } => mean,
            Distribution::Uniform { lo, hi } => (lo + hi) / 2.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Normal { std, .. } => std * std,
            Distribution::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Optimization problem whose objective and constraints may reference both
/// decision variables and random parameters. Inequalities are stored in
/// `g <= 0` form.
#[derive(Debug, Clone)]
pub struct StochasticProblem {
    decisions: Vec<String>,
    randoms: Vec<(String, Distribution)>,
    sense: Sense,
    objective: Expr,
    inequalities: Vec<Expr>,
    equalities: Vec<Expr>,
}

impl StochasticProblem {
    pub fn new(
        decisions: Vec<String>,
        randoms: Vec<(String, Distribution)>,
        sense: Sense,
        objective: Expr,
        inequalities: Vec<Expr>,
        equalities: Vec<Expr>,
    ) -> Result<Self> {
        let p = StochasticProblem {
            decisions,
            randoms,
            sense,
            objective,
            inequalities,
            equalities,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.decisions.is_empty() {
            return Err(Error::Invalid("problem declares no decision variables".into()));
        }
        if self.randoms.is_empty() {
            return Err(Error::Invalid("problem declares no random parameters".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in self
            .decisions
            .iter()
            .chain(self.randoms.iter().map(|(n, _)| n))
        {
            if !is_identifier(name) {
                return Err(Error::Invalid(format!("`{name}` is not a valid identifier")));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Invalid(format!("duplicate identifier `{name}`")));
            }
        }
        for (_, dist) in &self.randoms {
            dist.validate()?;
        }
        let check = |e: &Expr, what: &str| -> Result<()> {
            for var in e.variables() {
                if !seen.contains(var) {
                    return Err(Error::Invalid(format!(
                        "undeclared identifier `{var}` in {what}"
                    )));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, g) in self.inequalities.iter().enumerate() {
            check(g, &format!("inequality constraint {}", i + 1))?;
        }
        for (j, h) in self.equalities.iter().enumerate() {
            check(h, &format!("equality constraint {}", j + 1))?;
        }
        Ok(())
    }

    pub fn decisions(&self) -> &[String] {
        &self.decisions
    }

    pub fn randoms(&self) -> &[(String, Distribution)] {
        &self.randoms
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn objective(&self) -> &Expr {
        &self.objective
    }

    pub fn inequalities(&self) -> &[Expr] {
        &self.inequalities
    }

    pub fn equalities(&self) -> &[Expr] {
        &self.equalities
    }

    /// Number of decision variables.
    pub fn d(&self) -> usize {
        self.decisions.len()
    }

    /// Number of random parameters.
    pub fn p(&self) -> usize {
        self.randoms.len()
    }

    pub fn num_inequalities(&self) -> usize {
        self.inequalities.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    /// One polynomial family per random parameter, in declaration order.
    pub fn families(&self) -> Vec<PolynomialFamily> {
        self.randoms.iter().map(|(_, d)| d.family()).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_problem(text)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Decision,
    Random,
    Objective,
    Constraints,
}

/// Parses the problem file format. Errors carry 1-based line/column.
pub fn parse_problem(text: &str) -> Result<StochasticProblem> {
    let mut decisions: Vec<String> = Vec::new();
    let mut randoms: Vec<(String, Distribution)> = Vec::new();
    let mut objective: Option<(Sense, Expr)> = None;
    let mut inequalities = Vec::new();
    let mut equalities = Vec::new();
    let mut section = Section::None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        if line.trim().is_empty() {
            continue;
        }
        let content_start = col_of(line, line.len() - line.trim_start().len());
        let trimmed = line.trim();

        if trimmed.starts_with('[') {
            section = match trimmed {
                "[decision]" => Section::Decision,
                "[random]" => Section::Random,
                "[objective]" => Section::Objective,
                "[constraints]" => Section::Constraints,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        column: content_start,
                        message: format!("unknown section `{other}`"),
                    })
                }
            };
            continue;
        }

        match section {
            Section::None => {
                return Err(Error::Parse {
                    line: line_no,
                    column: content_start,
                    message: "expected a section header like `[decision]`".into(),
                })
            }
            Section::Decision => {
                let mut offset = 0;
                for piece in line.split(',') {
                    let name = piece.trim();
                    let col = col_of(line, offset + (piece.len() - piece.trim_start().len()));
                    if !is_identifier(name) {
                        return Err(Error::Parse {
                            line: line_no,
                            column: col,
                            message: format!("`{name}` is not a valid identifier"),
                        });
                    }
                    decisions.push(name.to_string());
                    offset += piece.len() + 1;
                }
            }
            Section::Random => {
                let tilde = line.find('~').ok_or_else(|| Error::Parse {
                    line: line_no,
                    column: content_start,
                    message: "random parameter lines look like `name ~ normal(m, s)`".into(),
                })?;
                let name = line[..tilde].trim();
                if !is_identifier(name) {
                    return Err(Error::Parse {
                        line: line_no,
                        column: content_start,
                        message: format!("`{name}` is not a valid identifier"),
                    });
                }
                let dist = parse_distribution(&line[tilde + 1..], line_no, col_of(line, tilde + 1))?;
                randoms.push((name.to_string(), dist));
            }
            Section::Objective => {
                if objective.is_some() {
                    return Err(Error::Parse {
                        line: line_no,
                        column: content_start,
                        message: "duplicate objective".into(),
                    });
                }
                let (keyword, sense) = if let Some(rest) = trimmed.strip_prefix("minimize") {
                    (rest, Sense::Minimize)
                } else if let Some(rest) = trimmed.strip_prefix("maximize") {
                    (rest, Sense::Maximize)
                } else {
                    return Err(Error::Parse {
                        line: line_no,
                        column: content_start,
                        message: "objective must start with `minimize` or `maximize`".into(),
                    });
                };
                let rest_pos = line.len() - keyword.len() - (line.len() - line.trim_end().len());
                let expr = parse_expression_at(keyword, line_no, col_of(line, rest_pos))?;
                objective = Some((sense, expr));
            }
            Section::Constraints => {
                let (pos, op) = ["<=", ">=", "=="]
                    .iter()
                    .filter_map(|op| line.find(op).map(|p| (p, *op)))
                    .min_by_key(|(p, _)| *p)
                    .ok_or_else(|| Error::Parse {
                        line: line_no,
                        column: content_start,
                        message: "constraint needs `<=`, `>=`, or `==`".into(),
                    })?;
                let lhs = parse_expression_at(&line[..pos], line_no, 1)?;
                let rhs =
                    parse_expression_at(&line[pos + 2..], line_no, col_of(line, pos + 2))?;
                let normalized = |a: Expr, b: Expr| {
                    if b == Expr::Const(0.0) {
                        a
                    } else {
                        Expr::Sub(Box::new(a), Box::new(b))
                    }
                };
                match op {
                    "<=" => inequalities.push(normalized(lhs, rhs)),
                    ">=" => inequalities.push(normalized(rhs, lhs)),
                    _ => equalities.push(normalized(lhs, rhs)),
                }
            }
        }
    }

    let (sense, objective) = objective.ok_or_else(|| Error::Invalid(
        "problem has no [objective] section".into(),
    ))?;
    StochasticProblem::new(decisions, randoms, sense, objective, inequalities, equalities)
}

fn col_of(line: &str, byte_pos: usize) -> usize {
    line[..byte_pos].chars().count() + 1
}

fn parse_distribution(spec: &str, line: usize, col: usize) -> Result<Distribution> {
    let err = |message: String| Error::Parse { line, column: col, message };
    let spec_trimmed = spec.trim();
    let open = spec_trimmed
        .find('(')
        .ok_or_else(|| err("expected `normal(m, s)` or `uniform(lo, hi)`".into()))?;
    let close = spec_trimmed
        .rfind(')')
        .ok_or_else(|| err("unclosed `(` in distribution".into()))?;
    if close < open || !spec_trimmed[close + 1..].trim().is_empty() {
        return Err(err("malformed distribution".into()));
    }
    let name = spec_trimmed[..open].trim();
    let args: Vec<&str> = spec_trimmed[open + 1..close].split(',').collect();
    if args.len() != 2 {
        return Err(err(format!(
            "distribution `{name}` takes two arguments, got {}",
            args.len()
        )));
    }
    let mut nums = [0.0; 2];
    for (slot, arg) in nums.iter_mut().zip(&args) {
        *slot = arg
            .trim()
            .parse::<f64>()
            .map_err(|_| err(format!("malformed number `{}`", arg.trim())))?;
    }
    let dist = match name {
        "normal" => Distribution::Normal { mean: nums[0], std: nums[1] },
        "uniform" => Distribution::Uniform { lo: nums[0], hi: nums[1] },
        other => return Err(err(format!("unknown distribution `{other}`"))),
    };
    dist.validate().map_err(|e| err(e.to_string()))?;
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::eval_expr;
    use crate::quadrature::gauss_rule;
    use std::collections::HashMap;

    const QUADRATIC: &str = "\
# toy stochastic quadratic
[decision]
x
[random]
lambda ~ normal(0.0, 0.1)
[objective]
minimize (1 + lambda)*x^2 + x
";

    #[test]
    fn parses_quadratic_file() {
        let p = parse_problem(QUADRATIC).unwrap();
        assert_eq!(p.d(), 1);
        assert_eq!(p.p(), 1);
        assert_eq!(p.num_inequalities(), 0);
        assert_eq!(p.num_equalities(), 0);
        assert_eq!(p.sense(), Sense::Minimize);
        let env: HashMap<String, f64> =
            [("x".to_string(), -0.5), ("lambda".to_string(), 0.0)].into();
        let v = eval_expr(p.objective(), &env).unwrap();
        assert!((v + 0.25).abs() < 1e-15);
    }

    #[test]
    fn parses_constraints_and_normalizes_sense() {
        let text = "\
[decision]
x1, x2
[random]
u ~ uniform(-1.0, 1.0)
[objective]
maximize x1 + x2
[constraints]
x1 + x2 - 1 <= 0
2 - x1 >= 0
x1 - x2 == 0
";
        let p = parse_problem(text).unwrap();
        assert_eq!(p.sense(), Sense::Maximize);
        assert_eq!(p.num_inequalities(), 2);
        assert_eq!(p.num_equalities(), 1);
        let env: HashMap<String, f64> = [
            ("x1".to_string(), 3.0),
            ("x2".to_string(), 1.0),
            ("u".to_string(), 0.0),
        ]
        .into();
        // First: x1 + x2 - 1; second normalized from `2 - x1 >= 0` to x1 - 2 <= 0.
        assert!((eval_expr(&p.inequalities()[0], &env).unwrap() - 3.0).abs() < 1e-15);
        assert!((eval_expr(&p.inequalities()[1], &env).unwrap() - 1.0).abs() < 1e-15);
        assert!((eval_expr(&p.equalities()[0], &env).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_distributions_rejected() {
        let text = "[decision]\nx\n[random]\ny ~ normal(0, -1)\n[objective]\nminimize x^2\n";
        let err = parse_problem(text).unwrap_err();
        assert!(err.to_string().contains("positive"), "{err}");

        let text = "[decision]\nx\n[random]\ny ~ uniform(2, 1)\n[objective]\nminimize x^2\n";
        assert!(parse_problem(text).is_err());

        let text = "[decision]\nx\n[random]\ny ~ cauchy(0, 1)\n[objective]\nminimize x^2\n";
        let err = parse_problem(text).unwrap_err();
        assert!(err.to_string().contains("cauchy"), "{err}");
    }

    #[test]
    fn undeclared_and_duplicate_identifiers_rejected() {
        let text = "[decision]\nx\n[random]\nu ~ normal(0, 1)\n[objective]\nminimize x + z\n";
        let err = parse_problem(text).unwrap_err();
        assert!(err.to_string().contains("`z`"), "{err}");

        let text = "[decision]\nx, x\n[random]\nu ~ normal(0, 1)\n[objective]\nminimize x\n";
        let err = parse_problem(text).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        let text = "[decision]\nx\n[random]\nx ~ normal(0, 1)\n[objective]\nminimize x\n";
        assert!(parse_problem(text).is_err());
    }

    #[test]
    fn structural_errors_carry_position() {
        let text = "[decision]\nx\n[random]\nu ~ normal(0, 1)\n[objective]\nminimize x +\n";
        match parse_problem(text).unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (6, 13)),
            other => panic!("{other:?}"),
        }

        let text = "[decision]\nx\n[stuff]\n";
        match parse_problem(text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }

        assert!(parse_problem("x\n").is_err());
        assert!(parse_problem("[decision]\nx\n[random]\nu normal(0,1)\n").is_err());
        let text = "[decision]\nx\n[random]\nu ~ normal(0, 1)\n[objective]\nminimize x\n[constraints]\nx + 1\n";
        assert!(parse_problem(text).is_err());
        let no_objective = "[decision]\nx\n[random]\nu ~ normal(0, 1)\n";
        assert!(parse_problem(no_objective).is_err());
    }

    #[test]
    fn standardize_known_points() {
        let n = Distribution::Normal { mean: 0.0, std: 0.1 };
        assert!((n.standardize(1.0).unwrap() - 0.1).abs() < 1e-15);
        let u = Distribution::Uniform { lo: 0.0, hi: 2.0 };
        assert!((u.standardize(0.0).unwrap() - 1.0).abs() < 1e-15);
        let beta = Distribution::Normal { mean: 1.0, std: 0.2 };
        assert!((beta.standardize(-1.0).unwrap() - 0.8).abs() < 1e-15);
        assert!(u.standardize(1.5).is_err());
        assert!(n.standardize(f64::NAN).is_err());
    }

    #[test]
    fn standardize_preserves_mean_and_variance() {
        for dist in [
            Distribution::Normal { mean: 1.0, std: 0.2 },
            Distribution::Uniform { lo: -0.5, hi: 2.5 },
        ] {
            let rule = gauss_rule(dist.family(), 3).unwrap();
            let mean: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&t, &w)| w * dist.standardize(t).unwrap())
                .sum();
            let var: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&t, &w)| {
                    let v = dist.standardize(t).unwrap() - mean;
                    w * v * v
                })
                .sum();
            assert!((mean - dist.mean()).abs() < 1e-10, "{dist:?}: {mean}");
            assert!((var - dist.variance()).abs() < 1e-10, "{dist:?}: {var}");
        }
    }

    #[test]
    fn family_selection() {
        assert_eq!(
            Distribution::Normal { mean: 0.0, std: 1.0 }.family(),
            PolynomialFamily::Hermite
        );
        assert_eq!(
            Distribution::Uniform { lo: -1.0, hi: 1.0 }.family(),
            PolynomialFamily::Legendre
        );
    }
}
