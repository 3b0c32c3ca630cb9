//! Gauss–Legendre rules on `[-1, 1]` and `[0, 1]`, plus tensor-product rules
//! on the unit square.
//!
//! Nodes are the roots of the Legendre polynomial `P_n`, found by Newton
//! iteration from Chebyshev initial guesses. Weights use the closed form
//! `2 / ((1 - x_i^2) P_n'(x_i)^2)`.

use crate::error::{Error, Result};

/// Largest supported number of points per rule.
pub const MAX_ORDER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interval {
    /// `[-1, 1]`
    Symmetric,
    /// `[0, 1]`
    Unit,
}

impl Interval {
    pub fn length(self) -> f64 {
        match self {
            Interval::Symmetric => 2.0,
            Interval::Unit => 1.0,
        }
    }

    pub fn bounds(self) -> (f64, f64) {
        match self {
            Interval::Symmetric => (-1.0, 1.0),
            Interval::Unit => (0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule1D {
    points: Vec<f64>,
    weights: Vec<f64>,
    interval: Interval,
}

/// Evaluates `(P_n(x), P_n'(x))` by the three-term recurrence.
pub(crate) fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1); only used away from +-1.
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<GaussRule1D> {
    if !(1..=MAX_ORDER).contains(&n) {
        return Err(Error::invalid(format!(
            "Gauss-Legendre order must lie in 1..={MAX_ORDER}, got {n}"
        )));
    }
    let nf = n as f64;
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Roots come out in decreasing order for i = 0..n; fill from the back.
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[n - 1 - i] = x;
        points[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        // The middle root is exactly zero by symmetry.
        points[n / 2] = 0.0;
        let (_, dp) = legendre_with_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (dp * dp);
    }
    Ok(GaussRule1D {
        points,
        weights,
        interval: Interval::Symmetric,
    })
}

/// Affine image of a `[-1, 1]` rule on `[0, 1]`: `t = (x + 1) / 2`, `w = w / 2`.
pub fn map_to_unit(rule: &GaussRule1D) -> GaussRule1D {
    match rule.interval {
        Interval::Unit => rule.clone(),
        Interval::Symmetric => GaussRule1D {
            points: rule.points.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            weights: rule.weights.iter().map(|w| 0.5 * w).collect(),
            interval: Interval::Unit,
        },
    }
}

/// `n`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Result<GaussRule1D> {
    gauss_legendre(n).map(|r| map_to_unit(&r))
}

impl GaussRule1D {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Tensor-product rule on `[0, 1]^2`. Points are ordered with the `x` index
/// running slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRule2D {
    rule_x: GaussRule1D,
    rule_y: GaussRule1D,
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

pub fn tensor(rx: &GaussRule1D, ry: &GaussRule1D) -> Result<TensorRule2D> {
    if rx.interval != Interval::Unit || ry.interval != Interval::Unit {
        return Err(Error::invalid("tensor rules are built from [0,1] rules"));
    }
    let mut points = Vec::with_capacity(rx.order() * ry.order());
    let mut weights = Vec::with_capacity(rx.order() * ry.order());
    for (x, wx) in rx.iter() {
        for (y, wy) in ry.iter() {
            points.push([x, y]);
            weights.push(wx * wy);
        }
    }
    Ok(TensorRule2D {
        rule_x: rx.clone(),
        rule_y: ry.clone(),
        points,
        weights,
    })
}

/// Square `n x n` Gauss rule on the unit square.
pub fn square_rule(n: usize) -> Result<TensorRule2D> {
    let r = gauss_legendre_unit(n)?;
    tensor(&r, &r)
}

impl TensorRule2D {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule_x(&self) -> &GaussRule1D {
        &self.rule_x
    }

    pub fn rule_y(&self) -> &GaussRule1D {
        &self.rule_y
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.iter().map(|([x, y], w)| w * f(x, y)).sum()
    }
}
