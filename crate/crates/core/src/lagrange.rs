/// Lagrange cardinal polynomials on a set of distinct nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Lagrange1D {
    nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl Lagrange1D {
    /// Panics if two nodes coincide.
    pub fn new(nodes: Vec<f64>) -> Self {
        let bary = (0..nodes.len())
            .map(|j| {
                let prod: f64 = nodes
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, &xk)| {
                        let d = nodes[j] - xk;
                        assert!(d != 0.0, "Lagrange nodes must be distinct");
                        d
                    })
                    .product();
                1.0 / prod
            })
            .collect();
        Lagrange1D { nodes, bary }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of basis functions (polynomial degree plus one).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn node_index(&self, t: f64) -> Option<usize> {
        self.nodes.iter().position(|&x| x == t)
    }

    pub fn eval(&self, j: usize, t: f64) -> f64 {
        if let Some(i) = self.node_index(t) {
            return if i == j { 1.0 } else { 0.0 };
        }
        // Product form: the quotient form overflows when `t` is within a
        // subnormal distance of a node.
        self.nodes
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .fold(self.bary[j], |acc, (_, &x)| acc * (t - x))
    }

    /// Values of all basis functions at `t`.
    pub fn eval_all(&self, t: f64) -> Vec<f64> {
        (0..self.len()).map(|j| self.eval(j, t)).collect()
    }

    pub fn deriv(&self, j: usize, t: f64) -> f64 {
        if let Some(i) = self.node_index(t) {
            return self.deriv_at_node(j, i);
        }
        // Product rule on bary_j * prod_{k != j} (t - x_k).
        let n = self.len();
        let mut sum = 0.0;
        for m in (0..n).filter(|&m| m != j) {
            let mut prod = 1.0;
            for k in (0..n).filter(|&k| k != j && k != m) {
                prod *= t - self.nodes[k];
            }
            sum += prod;
        }
        self.bary[j] * sum
    }

    pub fn deriv_all(&self, t: f64) -> Vec<f64> {
        (0..self.len()).map(|j| self.deriv(j, t)).collect()
    }

    /// Derivative of basis `j` at node `i` from the barycentric
    /// differentiation matrix; the diagonal is the negated off-diagonal row
    /// sum so that constants have zero derivative to rounding.
    pub fn deriv_at_node(&self, j: usize, i: usize) -> f64 {
        let off = |j: usize| (self.bary[j] / self.bary[i]) / (self.nodes[i] - self.nodes[j]);
        if j != i {
            off(j)
        } else {
            -(0..self.len()).filter(|&k| k != i).map(off).sum::<f64>()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinal_and_partition_of_unity() {
        let l = Lagrange1D::new(vec![0.0, 0.2, 0.7, 1.0]);
        for j in 0..4 {
            for k in 0..4 {
                let v = l.eval(j, l.nodes()[k]);
                assert_eq!(v, if j == k { 1.0 } else { 0.0 });
            }
        }
        for t in [0.1, 0.37, 0.9, 1.3] {
            let s: f64 = l.eval_all(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            let ds: f64 = l.deriv_all(t).iter().sum();
            assert!(ds.abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let l = Lagrange1D::new(vec![0.0, 0.3, 0.55, 0.95]);
        let h = 1e-6;
        for j in 0..4 {
            for t in [0.0, 0.1, 0.3, 0.8, 1.0] {
                let fd = (l.eval(j, t + h) - l.eval(j, t - h)) / (2.0 * h);
                assert!((fd - l.deriv(j, t)).abs() < 1e-7, "j={j} t={t}");
            }
        }
    }

    #[test]
    fn finite_next_to_nodes() {
        let l = Lagrange1D::new(vec![0.0, 0.5, 1.0]);
        for t in [5e-324, -5e-324, 1.0 - f64::EPSILON] {
            assert!(l.eval_all(t).iter().all(|v| v.is_finite()));
        }
        assert!((l.eval(0, 5e-324) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reproduces_polynomials() {
        let l = Lagrange1D::new(vec![0.1, 0.4, 0.8]);
        let p = |x: f64| 2.0 - 3.0 * x + 0.5 * x * x;
        let dp = |x: f64| -3.0 + x;
        for t in [0.0, 0.25, 0.4, 0.6, 1.0] {
            let v: f64 = (0..3).map(|j| p(l.nodes()[j]) * l.eval(j, t)).sum();
            let d: f64 = (0..3).map(|j| p(l.nodes()[j]) * l.deriv(j, t)).sum();
            assert!((v - p(t)).abs() < 1e-14);
            assert!((d - dp(t)).abs() < 1e-13);
        }
    }
}
