//! Orthonormal polynomial families and total-degree tensor bases.
//!
//! Both families are normalized against probability densities: Hermite
//! against the standard normal density on the real line, Legendre against
//! the constant density 1/2 on [-1, 1]. With that convention the degree-0
//! polynomial is identically 1 and distinct degrees integrate to 0.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Supported univariate orthonormal families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolynomialFamily {
    /// Orthonormal w.r.t. the standard normal density.
    Hermite,
    /// Orthonormal w.r.t. the uniform density 1/2 on [-1, 1].
    Legendre,
}

impl PolynomialFamily {
    /// Coefficients (alpha, beta) of the monic three-term recurrence
    /// p_{k+1}(t) = (t - alpha_k) p_k(t) - beta_k p_{k-1}(t).
    ///
    /// beta[0] holds the total mass of the weight, which is 1 for both
    /// families because the weights are probability densities.
    pub fn recurrence_coeffs(self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let alpha = vec![0.0; n];
        let beta = (0..n)
            .map(|k| match self {
                PolynomialFamily::Hermite => {
                    if k == 0 {
                        1.0
                    } else {
                        k as f64
                    }
                }
                PolynomialFamily::Legendre => {
                    if k == 0 {
                        1.0
                    } else {
                        let k2 = (k * k) as f64;
                        k2 / (4.0 * k2 - 1.0)
                    }
                }
            })
            .collect();
        (alpha, beta)
    }

    /// Value of the orthonormal polynomial of the given degree at `t`,
    /// evaluated through the recurrence (stable for the degrees used here).
    pub fn eval_orthonormal(self, degree: usize, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Numerical(format!(
                "polynomial evaluation at non-finite point {t}"
            )));
        }
        let (alpha, beta) = self.recurrence_coeffs(degree + 1);
        // Orthonormal recurrence: sqrt(b_{k+1}) q_{k+1} = (t - a_k) q_k - sqrt(b_k) q_{k-1}.
        let mut prev = 0.0;
        let mut cur = 1.0; // q_0 = 1 since beta[0] = 1
        for k in 0..degree {
            let next = ((t - alpha[k]) * cur - beta[k].sqrt() * prev) / beta[k + 1].sqrt();
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }
}

/// Exponent tuple of one multivariate basis term.
pub type MultiIndex = Vec<usize>;

/// All multi-indices of dimension `p` with total degree at most `r`,
/// ordered by total degree and then by descending leading exponents, so
/// the all-zero index comes first and for p = 2, r = 1 the set reads
/// [(0,0), (1,0), (0,1)].
pub fn total_degree_indices(p: usize, r: usize) -> Vec<MultiIndex> {
    if p == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut cur = vec![0usize; p];
    for degree in 0..=r {
        push_indices(&mut out, &mut cur, 0, degree);
    }
    out
}

fn push_indices(out: &mut Vec<MultiIndex>, cur: &mut [usize], dim: usize, remaining: usize) {
    if dim + 1 == cur.len() {
        cur[dim] = remaining;
        out.push(cur.to_vec());
        return;
    }
    for v in (0..=remaining).rev() {
        cur[dim] = v;
        push_indices(out, cur, dim + 1, remaining - v);
    }
}

/// Total-degree product basis with one family per random dimension.
#[derive(Debug, Clone)]
pub struct Basis {
    families: Vec<PolynomialFamily>,
    order: usize,
    index_set: Vec<MultiIndex>,
}

impl Basis {
    /// Builds the total-degree basis of the given order. Requires at least
    /// one dimension.
    pub fn new(families: Vec<PolynomialFamily>, order: usize) -> Result<Self> {
        if families.is_empty() {
            return Err(Error::Invalid(
                "basis needs at least one random dimension".into(),
            ));
        }
        let index_set = total_degree_indices(families.len(), order);
        Ok(Basis {
            families,
            order,
            index_set,
        })
    }

    /// Number of random dimensions p.
    pub fn dimension(&self) -> usize {
        self.families.len()
    }

    /// Maximum total degree r.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of basis terms (r+p)! / (r! p!).
    pub fn len(&self) -> usize {
        self.index_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_set.is_empty()
    }

    pub fn families(&self) -> &[PolynomialFamily] {
        &self.families
    }

    pub fn index_set(&self) -> &[MultiIndex] {
        &self.index_set
    }

    /// Value of one multivariate term: the product of univariate
    /// orthonormal polynomials selected by the multi-index.
    pub fn eval_index(&self, idx: &MultiIndex, point: &[f64]) -> Result<f64> {
        if idx.len() != self.dimension() || point.len() != self.dimension() {
            return Err(Error::Invalid(format!(
                "basis term of dimension {} evaluated with index of length {} at point of length {}",
                self.dimension(),
                idx.len(),
                point.len()
            )));
        }
        let mut prod = 1.0;
        for (dim, (&deg, &t)) in idx.iter().zip(point).enumerate() {
            prod *= self.families[dim].eval_orthonormal(deg, t)?;
        }
        Ok(prod)
    }

    /// Value of the `term`-th basis term in index-set order.
    pub fn eval_term(&self, term: usize, point: &[f64]) -> Result<f64> {
        let idx = self.index_set.get(term).ok_or_else(|| {
            Error::Invalid(format!(
                "basis term {term} out of range ({} terms)",
                self.index_set.len()
            ))
        })?;
        self.eval_index(idx, point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn binomial(n: usize, k: usize) -> usize {
        let mut acc = 1usize;
        for i in 0..k {
            acc = acc * (n - i) / (i + 1);
        }
        acc
    }

    #[test]
    fn hermite_recurrence_coeffs() {
        let (alpha, beta) = PolynomialFamily::Hermite.recurrence_coeffs(3);
        assert_eq!(alpha, vec![0.0, 0.0, 0.0]);
        assert_eq!(beta, vec![1.0, 1.0, 2.0]);
    }

    #[test]
    fn legendre_recurrence_coeffs() {
        let (alpha, beta) = PolynomialFamily::Legendre.recurrence_coeffs(3);
        assert_eq!(alpha, vec![0.0, 0.0, 0.0]);
        assert!((beta[0] - 1.0).abs() < 1e-15);
        assert!((beta[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((beta[2] - 4.0 / 15.0).abs() < 1e-15);
    }

    // Closed forms for the first degrees, normalized against the
    // probability weights used by this crate.
    fn hermite_explicit(k: usize, t: f64) -> f64 {
        match k {
            0 => 1.0,
            1 => t,
            2 => (t * t - 1.0) / 2.0_f64.sqrt(),
            3 => (t * t * t - 3.0 * t) / 6.0_f64.sqrt(),
            _ => unreachable!(),
        }
    }

    fn legendre_explicit(k: usize, t: f64) -> f64 {
        match k {
            0 => 1.0,
            1 => 3.0_f64.sqrt() * t,
            2 => 5.0_f64.sqrt() * 0.5 * (3.0 * t * t - 1.0),
            3 => 7.0_f64.sqrt() * 0.5 * (5.0 * t * t * t - 3.0 * t),
            _ => unreachable!(),
        }
    }

    #[test]
    fn recurrence_matches_explicit_polynomials() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(42);
        for _ in 0..100 {
            let t_h: f64 = rng.random_range(-3.0..3.0);
            let t_l: f64 = rng.random_range(-1.0..1.0);
            for k in 0..=3 {
                let h = PolynomialFamily::Hermite.eval_orthonormal(k, t_h).unwrap();
                assert!(
                    (h - hermite_explicit(k, t_h)).abs() <= 1e-12,
                    "hermite degree {k} at {t_h}: {h}"
                );
                let l = PolynomialFamily::Legendre.eval_orthonormal(k, t_l).unwrap();
                assert!(
                    (l - legendre_explicit(k, t_l)).abs() <= 1e-12,
                    "legendre degree {k} at {t_l}: {l}"
                );
            }
        }
    }

    #[test]
    fn known_point_values() {
        let h2 = PolynomialFamily::Hermite.eval_orthonormal(2, 0.0).unwrap();
        assert!((h2 + 1.0 / 2.0_f64.sqrt()).abs() < 1e-15);
        let l1 = PolynomialFamily::Legendre.eval_orthonormal(1, 1.0).unwrap();
        assert!((l1 - 3.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn non_finite_point_rejected() {
        assert!(PolynomialFamily::Hermite
            .eval_orthonormal(2, f64::NAN)
            .is_err());
    }

    #[test]
    fn index_ordering_examples() {
        assert_eq!(
            total_degree_indices(2, 1),
            vec![vec![0, 0], vec![1, 0], vec![0, 1]]
        );
        assert_eq!(
            total_degree_indices(2, 2),
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        assert_eq!(total_degree_indices(1, 2), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn index_count_matches_binomial() {
        for p in 1..=4 {
            for r in 0..=6 {
                let got = total_degree_indices(p, r).len();
                assert_eq!(got, binomial(r + p, p), "p={p} r={r}");
            }
        }
    }

    #[test]
    fn zero_index_first() {
        for p in 1..=3 {
            let set = total_degree_indices(p, 3);
            assert!(set[0].iter().all(|&e| e == 0));
        }
    }

    #[test]
    fn multivariate_term_is_product() {
        let basis = Basis::new(
            vec![PolynomialFamily::Hermite, PolynomialFamily::Hermite],
            2,
        )
        .unwrap();
        let v = basis.eval_index(&vec![2, 0], &[0.0, 5.0]).unwrap();
        assert!((v + 1.0 / 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mismatched_dimension_rejected() {
        let basis = Basis::new(vec![PolynomialFamily::Hermite], 2).unwrap();
        assert!(basis.eval_index(&vec![1, 1], &[0.0]).is_err());
        assert!(basis.eval_index(&vec![1], &[0.0, 1.0]).is_err());
    }
}
