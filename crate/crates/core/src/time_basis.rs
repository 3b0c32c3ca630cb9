//! Temporal trial/test bases of the continuous Galerkin–Petrov method.
//!
//! On the reference interval `[0, 1]` the trial space is spanned by the
//! degree-`r` Lagrange polynomials on `{0, t_1, .., t_r}` where `t_i` are the
//! `r` Gauss points; the test space by the degree-`(r-1)` Lagrange polynomials
//! on the Gauss points alone. Applying the Gauss rule to the time integrals
//! of one interval collapses them to the tables
//!
//! ```text
//! alpha[i][j] = w_i * phi_j'(t_i)      i = 1..r, j = 0..r
//! beta[i]     = w_i                    i = 1..r
//! ```
//!
//! Gauss points are indexed from 1 in every accessor so that trial index `j`
//! and test index `i` refer to the same time node when equal.

use crate::error::{Error, Result};
use crate::lagrange::Lagrange1D;
use crate::quadrature::gauss_legendre_unit;

pub const MAX_TIME_DEGREE: usize = 5;

/// Nodes `0 = t_0 < t_1 < ... < t_N = T`. Interval `n` (zero based) is
/// `[t_n, t_{n+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePartition {
    nodes: Vec<f64>,
}

impl TimePartition {
    pub fn uniform(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time > 0.0) || steps == 0 {
            return Err(Error::invalid(format!(
                "uniform partition needs T > 0 and N > 0, got T={final_time}, N={steps}"
            )));
        }
        let tau = final_time / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps).map(|n| n as f64 * tau).collect();
        nodes[steps] = final_time;
        Ok(TimePartition { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 {
            return Err(Error::invalid(
                "partition must start at 0 and have at least one interval",
            ));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("partition nodes must be strictly increasing"));
        }
        Ok(TimePartition { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn final_time(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn start(&self, n: usize) -> f64 {
        self.nodes[n]
    }

    pub fn end(&self, n: usize) -> f64 {
        self.nodes[n + 1]
    }

    pub fn step(&self, n: usize) -> f64 {
        self.nodes[n + 1] - self.nodes[n]
    }

    pub fn max_step(&self) -> f64 {
        (0..self.len()).map(|n| self.step(n)).fold(0.0, f64::max)
    }

    /// Physical time of reference coordinate `that` in interval `n`.
    pub fn time_at(&self, n: usize, that: f64) -> f64 {
        self.nodes[n] + that * self.step(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalBasis {
    r: usize,
    trial: Lagrange1D,
    test: Lagrange1D,
    weights: Vec<f64>,
    alpha: Vec<Vec<f64>>,
    beta: Vec<f64>,
}

pub fn build_basis(r: usize) -> Result<TemporalBasis> {
    if !(1..=MAX_TIME_DEGREE).contains(&r) {
        return Err(Error::invalid(format!(
            "temporal degree r must lie in 1..={MAX_TIME_DEGREE}, got {r}"
        )));
    }
    let gauss = gauss_legendre_unit(r)?;
    let mut trial_nodes = vec![0.0];
    trial_nodes.extend_from_slice(gauss.points());
    let trial = Lagrange1D::new(trial_nodes);
    let test = Lagrange1D::new(gauss.points().to_vec());
    let weights = gauss.weights().to_vec();
    let alpha = (1..=r)
        .map(|i| (0..=r).map(|j| weights[i - 1] * trial.deriv_at_node(j, i)).collect())
        .collect();
    Ok(TemporalBasis {
        r,
        trial,
        test,
        beta: weights.clone(),
        weights,
        alpha,
    })
}

impl TemporalBasis {
    pub fn degree(&self) -> usize {
        self.r
    }

    /// `{0, t_1, .., t_r}` on `[0, 1]`.
    pub fn trial_nodes(&self) -> &[f64] {
        self.trial.nodes()
    }

    /// Gauss points `{t_1, .., t_r}` on `[0, 1]`.
    pub fn test_nodes(&self) -> &[f64] {
        self.test.nodes()
    }

    /// Gauss weight of point `i` in `1..=r`.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i - 1]
    }

    /// `alpha_ij` for `i` in `1..=r`, `j` in `0..=r`.
    pub fn alpha(&self, i: usize, j: usize) -> f64 {
        self.alpha[i - 1][j]
    }

    /// Diagonal `beta_ii` for `i` in `1..=r`.
    pub fn beta(&self, i: usize) -> f64 {
        self.beta[i - 1]
    }

    pub fn eval_trial(&self, j: usize, that: f64) -> f64 {
        self.trial.eval(j, that)
    }

    pub fn eval_trial_deriv(&self, j: usize, that: f64) -> f64 {
        self.trial.deriv(j, that)
    }

    /// Test function `i` in `1..=r`.
    pub fn eval_test(&self, i: usize, that: f64) -> f64 {
        self.test.eval(i - 1, that)
    }

    /// Trial basis values at the right end point `that = 1`.
    pub fn endpoint_weights(&self) -> Vec<f64> {
        self.trial.eval_all(1.0)
    }

    /// Combines `r + 1` coefficient vectors with the trial basis at `that`.
    pub fn combine<V: AsRef<[f64]>>(&self, coeffs: &[V], that: f64) -> Vec<f64> {
        let phi = self.trial.eval_all(that);
        combine_with(coeffs, &phi)
    }

    /// Evaluates the expansion of interval `n` at physical time `t`.
    pub fn reconstruct<V: AsRef<[f64]>>(
        &self,
        coeffs: &[V],
        partition: &TimePartition,
        n: usize,
        t: f64,
    ) -> Result<Vec<f64>> {
        if coeffs.len() != self.r + 1 {
            return Err(Error::invalid(format!(
                "expected {} coefficient vectors, got {}",
                self.r + 1,
                coeffs.len()
            )));
        }
        if n >= partition.len() {
            return Err(Error::invalid(format!("interval {n} out of range")));
        }
        let (a, b) = (partition.start(n), partition.end(n));
        if !(a..=b).contains(&t) {
            return Err(Error::invalid(format!("time {t} outside interval [{a}, {b}]")));
        }
        let that = (t - a) / (b - a);
        Ok(self.combine(coeffs, that))
    }
}

pub(crate) fn combine_with<V: AsRef<[f64]>>(coeffs: &[V], phi: &[f64]) -> Vec<f64> {
    let len = coeffs.first().map_or(0, |c| c.as_ref().len());
    let mut out = vec![0.0; len];
    for (c, &w) in coeffs.iter().zip(phi) {
        if w == 0.0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(c.as_ref()) {
            *o += w * v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_one_tables() {
        let b = build_basis(1).unwrap();
        assert_eq!(b.trial_nodes(), &[0.0, 0.5]);
        // Lagrange basis on {0, 1/2}: 1 - 2t and 2t.
        assert_eq!(b.alpha(1, 0), -2.0);
        assert_eq!(b.alpha(1, 1), 2.0);
        assert_eq!(b.beta(1), 1.0);
        assert_eq!(b.endpoint_weights(), vec![-1.0, 2.0]);
    }

    #[test]
    fn degree_two_tables() {
        let b = build_basis(2).unwrap();
        assert!((b.beta(1) - 0.5).abs() < 1e-15);
        assert!((b.beta(2) - 0.5).abs() < 1e-15);
        let s3 = 3f64.sqrt();
        // Hand differentiation of the quadratic Lagrange polynomials on
        // {0, (3 - sqrt3)/6, (3 + sqrt3)/6}.
        let expected = [[-s3, 1.5, s3 - 1.5], [s3, -s3 - 1.5, 1.5]];
        for i in 1..=2 {
            for (j, &want) in expected[i - 1].iter().enumerate() {
                assert!((b.alpha(i, j) - want).abs() < 1e-14);
                // Central differences as a second route.
                let h = 1e-6;
                let t = b.trial_nodes()[i];
                let fd = (b.eval_trial(j, t + h) - b.eval_trial(j, t - h)) / (2.0 * h);
                assert!((b.weight(i) * fd - b.alpha(i, j)).abs() < 1e-8);
            }
        }
        let ends = b.endpoint_weights();
        for (got, want) in ends.iter().zip([1.0, -s3, s3]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn range_checks() {
        assert!(build_basis(0).is_err());
        assert!(build_basis(6).is_err());
        assert!(TimePartition::uniform(0.0, 3).is_err());
        assert!(TimePartition::from_nodes(vec![0.0, 0.5, 0.5]).is_err());
    }

    #[test]
    fn cardinal_properties() {
        for r in 1..=MAX_TIME_DEGREE {
            let b = build_basis(r).unwrap();
            for j in 0..=r {
                for k in 0..=r {
                    let v = b.eval_trial(j, b.trial_nodes()[k]);
                    assert_eq!(v, if j == k { 1.0 } else { 0.0 });
                }
            }
            let s: f64 = (0..=r).map(|j| b.eval_trial(j, 0.37)).sum();
            assert!((s - 1.0).abs() < 1e-14);
            for i in 1..=r {
                assert_eq!(b.eval_test(i, b.test_nodes()[i - 1]), 1.0);
            }
        }
        let b1 = build_basis(1).unwrap();
        assert_eq!(b1.eval_test(1, 0.123), 1.0);
        let b2 = build_basis(2).unwrap();
        assert_eq!(b2.eval_test(1, b2.test_nodes()[1]), 0.0);
    }

    #[test]
    fn alpha_rows_sum_to_zero_and_beta_bounds() {
        for r in 1..=MAX_TIME_DEGREE {
            let b = build_basis(r).unwrap();
            let lower = 2.0 / ((r * (r + 1)) as f64).powi(2);
            for i in 1..=r {
                let s: f64 = (0..=r).map(|j| b.alpha(i, j)).sum();
                assert!(s.abs() < 1e-14, "r={r} i={i} sum={s}");
                assert!(lower <= b.beta(i) && b.beta(i) <= 1.0);
                assert_eq!(b.beta(i), b.weight(i));
            }
        }
    }

    #[test]
    fn reconstruct_contract() {
        let b = build_basis(2).unwrap();
        let part = TimePartition::uniform(1.0, 4).unwrap();
        let c = vec![vec![3.0, -1.0]; 3];
        let v = b.reconstruct(&c, &part, 1, 0.3).unwrap();
        assert!((v[0] - 3.0).abs() < 1e-14 && (v[1] + 1.0).abs() < 1e-14);

        let c = vec![vec![1.25], vec![2.0], vec![7.0]];
        assert_eq!(b.reconstruct(&c, &part, 2, 0.5).unwrap(), vec![1.25]);

        let (a, bb) = (0.4, -0.7);
        let c = vec![vec![0.0], vec![a], vec![bb]];
        let v = b.reconstruct(&c, &part, 3, 1.0).unwrap();
        let s3 = 3f64.sqrt();
        assert!((v[0] - (-s3 * a + s3 * bb)).abs() < 1e-14);

        assert!(b.reconstruct(&c, &part, 0, 0.3).is_err());
        assert!(b.reconstruct(&c[..2], &part, 0, 0.1).is_err());
    }

    #[test]
    fn degree_one_is_crank_nicolson() {
        // u' = lambda u with one Gauss unknown U1:
        //   alpha_10 u0 + alpha_11 U1 = tau beta_11 lambda U1,  u1 = sum_j U^j phi_j(1).
        let b = build_basis(1).unwrap();
        for (lambda, tau, u0) in [(-3.0, 0.1, 1.0), (2.5, 0.02, -0.4), (-40.0, 0.05, 2.0)] {
            let big_u1 = -b.alpha(1, 0) * u0 / (b.alpha(1, 1) - tau * b.beta(1) * lambda);
            let ends = b.endpoint_weights();
            let u1 = ends[0] * u0 + ends[1] * big_u1;
            let cn = (1.0 + tau * lambda / 2.0) / (1.0 - tau * lambda / 2.0) * u0;
            assert!((u1 - cn).abs() < 1e-14);
        }
    }
}
