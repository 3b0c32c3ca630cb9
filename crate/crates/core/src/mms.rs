//! Manufactured solutions, space-time error norms and convergence orders.
//!
//! Every solution here is separable, `u(x, t) = θ(t) s(x)`, with a constant
//! diffusion tensor `D`, so `q = −θ D∇s`, `∇·q = −θ (D : ∇²s)` and
//! `f = θ' s − θ (D : ∇²s)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::assembly::CoefficientField;
use crate::error::{Error, Result};
use crate::mesh::QuadMesh;
use crate::quadrature::{gauss_legendre_unit, square_rule};
use crate::spaces::{eval_div_flux, eval_flux, eval_scalar, FeFunction};
use crate::time_basis::combine_with;
use crate::timeloop::{ProblemData, SpaceTimeSolution};

/// Angular frequency of the reference study.
pub const DEFAULT_OMEGA: f64 = 10.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Profile {
    /// `sin(ωt) sin(πx) sin(πy)`
    Oscillating { omega: f64 },
    /// `t² x(1−x) y(1−y)`
    Polynomial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedSolution {
    profile: Profile,
    d: Matrix2<f64>,
}

fn constant_tensor(coeff: &CoefficientField) -> Result<Matrix2<f64>> {
    coeff
        .as_constant()
        .ok_or_else(|| Error::Unsupported("manufactured solutions need a constant diffusion tensor".into()))
}

/// `u = sin(ωt) sin(πx₁) sin(πx₂)`.
pub fn mms_standard(coeff: &CoefficientField, omega: f64) -> Result<ManufacturedSolution> {
    if !omega.is_finite() {
        return Err(Error::invalid("omega must be finite"));
    }
    Ok(ManufacturedSolution {
        profile: Profile::Oscillating { omega },
        d: constant_tensor(coeff)?,
    })
}

/// `u = t² x₁(1−x₁) x₂(1−x₂)`, reproduced exactly by `r ≥ 2`, `p ≥ 2`.
pub fn mms_polynomial(coeff: &CoefficientField) -> Result<ManufacturedSolution> {
    Ok(ManufacturedSolution {
        profile: Profile::Polynomial,
        d: constant_tensor(coeff)?,
    })
}

impl ManufacturedSolution {
    fn theta(&self, t: f64) -> (f64, f64) {
        match self.profile {
            Profile::Oscillating { omega } => ((omega * t).sin(), omega * (omega * t).cos()),
            Profile::Polynomial => (t * t, 2.0 * t),
        }
    }

    /// `(s, ∇s, ∇²s)` at `x`.
    fn shape(&self, x: [f64; 2]) -> (f64, [f64; 2], Matrix2<f64>) {
        match self.profile {
            Profile::Oscillating { .. } => {
                let (sx, cx) = (PI * x[0]).sin_cos();
                let (sy, cy) = (PI * x[1]).sin_cos();
                let pp = PI * PI;
                (
                    sx * sy,
                    [PI * cx * sy, PI * sx * cy],
                    Matrix2::new(-pp * sx * sy, pp * cx * cy, pp * cx * cy, -pp * sx * sy),
                )
            }
            Profile::Polynomial => {
                let (a, b) = (x[0] * (1.0 - x[0]), x[1] * (1.0 - x[1]));
                let (da, db) = (1.0 - 2.0 * x[0], 1.0 - 2.0 * x[1]);
                (
                    a * b,
                    [da * b, a * db],
                    Matrix2::new(-2.0 * b, da * db, da * db, -2.0 * a),
                )
            }
        }
    }

    pub fn diffusion(&self) -> Matrix2<f64> {
        self.d
    }

    pub fn u(&self, x: [f64; 2], t: f64) -> f64 {
        self.theta(t).0 * self.shape(x).0
    }

    pub fn grad_u(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let th = self.theta(t).0;
        let g = self.shape(x).1;
        [th * g[0], th * g[1]]
    }

    /// `q = −D∇u`
    pub fn q(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let g = self.grad_u(x, t);
        let d = self.d;
        [
            -(d[(0, 0)] * g[0] + d[(0, 1)] * g[1]),
            -(d[(1, 0)] * g[0] + d[(1, 1)] * g[1]),
        ]
    }

    pub fn div_q(&self, x: [f64; 2], t: f64) -> f64 {
        -self.theta(t).0 * self.d.component_mul(&self.shape(x).2).sum()
    }

    pub fn f(&self, x: [f64; 2], t: f64) -> f64 {
        let (th, dth) = self.theta(t);
        let (s, _, hess) = self.shape(x);
        dth * s - th * self.d.component_mul(&hess).sum()
    }

    /// Problem data on `(0, final_time)` with this solution's initial datum
    /// and source.
    pub fn problem_data(&self, final_time: f64) -> Result<ProblemData> {
        let coefficient = CoefficientField::matrix(self.d)?;
        let (a, b, c) = (Arc::new(self.clone()), Arc::new(self.clone()), Arc::new(self.clone()));
        Ok(ProblemData {
            coefficient: match self.d {
                d if d[(0, 1)] == 0.0 && d[(1, 0)] == 0.0 && d[(0, 0)] == d[(1, 1)] => {
                    CoefficientField::scalar(d[(0, 0)])?
                }
                _ => coefficient,
            },
            u0: Arc::new(move |x| a.u(x, 0.0)),
            grad_u0: Arc::new(move |x| b.grad_u(x, 0.0)),
            f: Arc::new(move |x, t| c.f(x, t)),
            final_time,
        })
    }
}

/// Space-time error norms of a discrete solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    /// `‖u − u_τh‖_{L²(I;L²)}`
    pub u: f64,
    /// `‖q − q_τh‖_{L²(I;L²)}`
    pub q: f64,
    /// `‖∇·(q − q_τh)‖_{L²(I;L²)}`
    pub div_q: f64,
}

impl ErrorNorms {
    /// `‖q − q_τh‖_{L²(I;V)}`
    pub fn q_v(&self) -> f64 {
        self.q.hypot(self.div_q)
    }
}

/// Errors with `r + 3` Gauss points per interval and `(p + 3)²` per cell.
pub fn error_norms(solution: &SpaceTimeSolution, exact: &ManufacturedSolution) -> Result<ErrorNorms> {
    error_norms_with(
        solution,
        exact,
        solution.basis.degree() + 3,
        solution.scalar.degree() + 3,
    )
}

/// Errors with explicit time and space quadrature orders.
pub fn error_norms_with(
    solution: &SpaceTimeSolution,
    exact: &ManufacturedSolution,
    time_points: usize,
    space_points: usize,
) -> Result<ErrorNorms> {
    let time_rule = gauss_legendre_unit(time_points)?;
    let rule = square_rule(space_points)?;
    let (ws, vs) = (&solution.scalar, &solution.flux);
    let mesh = ws.mesh();
    let (nw, nv) = (ws.local_dim(), vs.local_dim());
    let stab = ws.tabulate(rule.points());
    let vtab = vs.tabulate(rule.points());
    // Per cell and point: physical point, Jacobian, determinant.
    type PointGeometry = ([f64; 2], Matrix2<f64>, f64);
    let geometry: Vec<Vec<PointGeometry>> = (0..mesh.num_cells())
        .map(|k| {
            let map = mesh.cell_map(k);
            rule.points()
                .iter()
                .map(|&xh| {
                    let (j, det) = map.jacobian(xh);
                    (map.map(xh), j, det)
                })
                .collect()
        })
        .collect();
    let (mut eu, mut eq, mut ed) = (0.0, 0.0, 0.0);
    for n in 0..solution.intervals() {
        let tau = solution.partition.step(n);
        for (that, wt) in time_rule.iter() {
            let t = solution.partition.time_at(n, that);
            let phi: Vec<f64> = (0..=solution.basis.degree())
                .map(|j| solution.basis.eval_trial(j, that))
                .collect();
            let uc = combine_with(&solution.u[n], &phi);
            let qc = combine_with(&solution.q[n], &phi);
            let (mut su, mut sq, mut sd) = (0.0, 0.0, 0.0);
            for (k, geo) in geometry.iter().enumerate() {
                let wdofs = ws.cell_dofs(k);
                let vdofs = vs.cell_dofs(k);
                for (qp, ((x, j, det), w)) in geo.iter().zip(rule.weights()).enumerate() {
                    let uh: f64 = wdofs
                        .clone()
                        .zip(&stab[qp * nw..(qp + 1) * nw])
                        .map(|(d, phi)| uc[d] * phi)
                        .sum();
                    let (mut vh, mut dh) = ([0.0; 2], 0.0);
                    for (i, &(g, s)) in vdofs.iter().enumerate() {
                        let c = s * qc[g];
                        let val = vtab.values[qp * nv + i];
                        vh[0] += c * val[0];
                        vh[1] += c * val[1];
                        dh += c * vtab.divs[qp * nv + i];
                    }
                    let qh = [
                        (j[(0, 0)] * vh[0] + j[(0, 1)] * vh[1]) / det,
                        (j[(1, 0)] * vh[0] + j[(1, 1)] * vh[1]) / det,
                    ];
                    let dq = exact.q(*x, t);
                    let wd = w * det;
                    su += wd * (exact.u(*x, t) - uh).powi(2);
                    sq += wd * ((dq[0] - qh[0]).powi(2) + (dq[1] - qh[1]).powi(2));
                    sd += wd * (exact.div_q(*x, t) - dh / det).powi(2);
                }
            }
            eu += tau * wt * su;
            eq += tau * wt * sq;
            ed += tau * wt * sd;
        }
    }
    Ok(ErrorNorms {
        u: eu.sqrt(),
        q: eq.sqrt(),
        div_q: ed.sqrt(),
    })
}

/// `‖u − u_τh‖_{L²(I;L²)}`
pub fn error_u(solution: &SpaceTimeSolution, exact: &ManufacturedSolution) -> Result<f64> {
    Ok(error_norms(solution, exact)?.u)
}

/// `‖q − q_τh‖_{L²(I;V)}`
pub fn error_q_v(solution: &SpaceTimeSolution, exact: &ManufacturedSolution) -> Result<f64> {
    Ok(error_norms(solution, exact)?.q_v())
}

/// Spatial `L²` norms of `g − v_h` for one function, with `(p + 3)²`
/// points per cell.
fn spatial_error(
    mesh: &QuadMesh,
    degree: usize,
    mut defect: impl FnMut(usize, [f64; 2], [f64; 2]) -> Result<f64>,
) -> Result<f64> {
    let rule = square_rule(degree + 3)?;
    let mut sum = 0.0;
    for k in 0..mesh.num_cells() {
        let map = mesh.cell_map(k);
        for (xh, w) in rule.iter() {
            sum += w * map.jacobian(xh).1 * defect(k, xh, map.map(xh))?;
        }
    }
    Ok(sum.sqrt())
}

/// `‖g − w_h‖_{L²}` for a scalar function.
pub fn l2_error_scalar(wh: &FeFunction, g: impl Fn([f64; 2]) -> f64) -> Result<f64> {
    let space = wh.scalar_space()?;
    spatial_error(space.mesh(), space.degree(), |k, xh, x| {
        Ok((g(x) - eval_scalar(wh, k, xh)?).powi(2))
    })
}

/// `‖g − v_h‖_{L²}` for a flux.
pub fn l2_error_flux(vh: &FeFunction, g: impl Fn([f64; 2]) -> [f64; 2]) -> Result<f64> {
    let space = vh.flux_space()?;
    spatial_error(space.mesh(), space.degree(), |k, xh, x| {
        let (e, h) = (g(x), eval_flux(vh, k, xh)?);
        Ok((e[0] - h[0]).powi(2) + (e[1] - h[1]).powi(2))
    })
}

/// `‖div_g − ∇·v_h‖_{L²}`, `div_g` being the exact divergence.
pub fn l2_error_div(vh: &FeFunction, div_g: impl Fn([f64; 2]) -> f64) -> Result<f64> {
    let space = vh.flux_space()?;
    spatial_error(space.mesh(), space.degree(), |k, xh, x| {
        Ok((div_g(x) - eval_div_flux(vh, k, xh)?).powi(2))
    })
}

/// `log₂(e_{l−1} / e_l)` per level; `None` for the first level and wherever
/// an error is zero.
pub fn eoc(errors: &[f64]) -> Vec<Option<f64>> {
    std::iter::once(None)
        .chain(errors.windows(2).map(|w| {
            if w[0] > 0.0 && w[1] > 0.0 {
                Some((w[0] / w[1]).log2())
            } else {
                None
            }
        }))
        .take(errors.len())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_mesh;
    use crate::timeloop::{run, RunOptions};

    fn standard() -> ManufacturedSolution {
        mms_standard(&CoefficientField::identity(), DEFAULT_OMEGA).unwrap()
    }

    #[test]
    fn closed_forms() {
        let m = standard();
        for x in [[0.2, 0.7], [0.5, 0.1], [1.0, 0.3]] {
            assert_eq!(m.u(x, 0.0), 0.0);
        }
        let q = m.q([0.5, 0.5], 0.37);
        assert!(q[0].abs() < 1e-15 && q[1].abs() < 1e-15);
        let s2 = (PI / 4.0).sin().powi(2);
        let w = DEFAULT_OMEGA;
        let want = w * (w * 0.1).cos() * s2 + 2.0 * PI * PI * (w * 0.1).sin() * s2;
        assert!((m.f([0.25, 0.25], 0.1) - want).abs() < 1e-12);
        let var = CoefficientField::function(|_| Matrix2::identity(), 1.0, 1.0).unwrap();
        assert!(matches!(mms_standard(&var, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let d = CoefficientField::matrix(Matrix2::new(2.0, 0.3, 0.3, 1.0)).unwrap();
        for m in [standard(), mms_standard(&d, 3.0).unwrap(), mms_polynomial(&d).unwrap()] {
            let h = 1e-5;
            for (x, t) in [([0.3, 0.6], 0.21), ([0.8, 0.15], 0.77)] {
                let dt = (m.u(x, t + h) - m.u(x, t - h)) / (2.0 * h);
                let qx = |x: [f64; 2]| m.q(x, t);
                let div = (qx([x[0] + h, x[1]])[0] - qx([x[0] - h, x[1]])[0]) / (2.0 * h)
                    + (qx([x[0], x[1] + h])[1] - qx([x[0], x[1] - h])[1]) / (2.0 * h);
                let gx = (m.u([x[0] + h, x[1]], t) - m.u([x[0] - h, x[1]], t)) / (2.0 * h);
                let scale = 1.0 + m.f(x, t).abs();
                assert!((m.div_q(x, t) - div).abs() < 1e-6 * scale);
                assert!((m.f(x, t) - (dt + div)).abs() < 1e-6 * scale);
                assert!((m.grad_u(x, t)[0] - gx).abs() < 1e-6 * scale);
            }
        }
    }

    #[test]
    fn spatial_errors_of_exact_fields() {
        let mesh = std::sync::Arc::new(crate::mesh::distort(&unit_square_mesh(2).unwrap(), 0.2, 3).unwrap());
        let (ws, vs) = crate::spaces::build_pair(mesh, 1).unwrap();
        let one = crate::spaces::l2_project_scalar(|_| 1.0, &ws).unwrap();
        assert!(l2_error_scalar(&one, |_| 1.0).unwrap() < 1e-13);
        let zero = FeFunction::zero(crate::spaces::SpaceRef::Scalar(ws.clone()));
        assert!((l2_error_scalar(&zero, |_| 1.0).unwrap() - 1.0).abs() < 1e-13);
        let lin = crate::spaces::rt_interpolate(|x| [x[0], 0.0], &vs).unwrap();
        assert!(l2_error_flux(&lin, |x| [x[0], 0.0]).unwrap() < 1e-12);
        assert!(l2_error_div(&lin, |_| 1.0).unwrap() < 1e-12);
        assert!(l2_error_flux(&one, |_| [0.0; 2]).is_err());
    }

    #[test]
    fn eoc_values() {
        let e = eoc(&[4.0298e-02, 1.1316e-02]);
        assert_eq!(e[0], None);
        assert!((e[1].unwrap() - 1.83).abs() < 5e-3);
        assert_eq!(eoc(&[8.0, 1.0])[1], Some(3.0));
        let e = eoc(&[2.8876e-02, 3.6208e-03]);
        assert!((e[1].unwrap() - 3.00).abs() < 5e-3);
        assert_eq!(eoc(&[1.0, 0.0, 0.5]), vec![None, None, None]);
        assert!(eoc(&[]).is_empty());
    }

    #[test]
    fn polynomial_solution_is_reproduced() {
        let m = mms_polynomial(&CoefficientField::identity()).unwrap();
        let data = m.problem_data(1.0).unwrap();
        let sol = run(
            &data,
            std::sync::Arc::new(unit_square_mesh(1).unwrap()),
            2,
            2,
            3,
            RunOptions::default(),
        )
        .unwrap();
        let e = error_norms(&sol, &m).unwrap();
        assert!(e.u < 1e-9 && e.q_v() < 1e-9, "{e:?}");
    }

    #[test]
    fn refined_quadrature_changes_little() {
        let m = standard();
        let data = m.problem_data(1.0).unwrap();
        let sol = run(
            &data,
            std::sync::Arc::new(unit_square_mesh(2).unwrap()),
            2,
            2,
            40,
            RunOptions::default(),
        )
        .unwrap();
        let base = error_norms(&sol, &m).unwrap();
        let fine = error_norms_with(&sol, &m, 10, 10).unwrap();
        assert!(((base.u - fine.u) / fine.u).abs() < 1e-3);
        assert!(((base.q_v() - fine.q_v()) / fine.q_v()).abs() < 1e-3);
    }
}
