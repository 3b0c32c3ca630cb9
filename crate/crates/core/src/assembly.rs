//! Sparse assembly of the scalar mass `M_W`, the `D⁻¹`-weighted flux mass
//! `M_D`, the divergence coupling `B` and load vectors.
//!
//! Cells are visited in index order and local contributions are pushed in a
//! fixed order, so repeated assembly is bitwise reproducible.

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::quadrature::{square_rule, TensorRule2D};
use crate::spaces::{FluxSpace, ScalarSpace};
use crate::sparse::{SparseMatrix, TripletBuilder};

/// `(p + 3)`-point tensor rule used for every form of a degree-`p` pair.
pub fn default_rule(p: usize) -> Result<TensorRule2D> {
    square_rule(p + 3)
}

type MatrixFn = dyn Fn([f64; 2]) -> Matrix2<f64> + Send + Sync;

#[derive(Clone)]
enum Kind {
    Scalar(f64),
    Matrix(Matrix2<f64>),
    Function(Arc<MatrixFn>),
}

/// Symmetric positive definite diffusion tensor `D(x)` with ellipticity
/// bounds `d_min |ξ|² ≤ ξᵀ D ξ ≤ d_max |ξ|²`.
#[derive(Clone)]
pub struct CoefficientField {
    kind: Kind,
    d_min: f64,
    d_max: f64,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Scalar(d) => format!("{d} I"),
            Kind::Matrix(m) => format!("{m:?}"),
            Kind::Function(_) => "variable".to_string(),
        };
        f.debug_struct("CoefficientField")
            .field("kind", &kind)
            .field("d_min", &self.d_min)
            .field("d_max", &self.d_max)
            .finish()
    }
}

fn eigenvalues(m: &Matrix2<f64>) -> Option<(f64, f64)> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let scale = a.abs().max(d.abs()).max(b.abs());
    if (b - c).abs() > 1e-14 * scale.max(f64::MIN_POSITIVE) {
        return None;
    }
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    Some((mean - rad, mean + rad))
}

impl CoefficientField {
    pub fn identity() -> Self {
        CoefficientField {
            kind: Kind::Scalar(1.0),
            d_min: 1.0,
            d_max: 1.0,
        }
    }

    /// `D = d I` with `d > 0`.
    pub fn scalar(d: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::invalid(format!("diffusion constant must be positive, got {d}")));
        }
        Ok(CoefficientField {
            kind: Kind::Scalar(d),
            d_min: d,
            d_max: d,
        })
    }

    pub fn matrix(m: Matrix2<f64>) -> Result<Self> {
        match eigenvalues(&m) {
            Some((lo, hi)) if lo > 0.0 => Ok(CoefficientField {
                kind: Kind::Matrix(m),
                d_min: lo,
                d_max: hi,
            }),
            _ => Err(Error::InvalidCoefficient {
                x: f64::NAN,
                y: f64::NAN,
            }),
        }
    }

    /// Variable tensor; every evaluation is checked against the bounds.
    pub fn function(
        f: impl Fn([f64; 2]) -> Matrix2<f64> + Send + Sync + 'static,
        d_min: f64,
        d_max: f64,
    ) -> Result<Self> {
        if !(d_min > 0.0 && d_min <= d_max) {
            return Err(Error::invalid("ellipticity bounds need 0 < d_min <= d_max"));
        }
        Ok(CoefficientField {
            kind: Kind::Function(Arc::new(f)),
            d_min,
            d_max,
        })
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// `Some(d)` when `D = d I` everywhere.
    pub fn as_scalar(&self) -> Option<f64> {
        match self.kind {
            Kind::Scalar(d) => Some(d),
            _ => None,
        }
    }

    /// `Some(D)` when `D` does not depend on `x`.
    pub fn as_constant(&self) -> Option<Matrix2<f64>> {
        match self.kind {
            Kind::Scalar(d) => Some(Matrix2::identity() * d),
            Kind::Matrix(m) => Some(m),
            Kind::Function(_) => None,
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> Matrix2<f64> {
        match &self.kind {
            Kind::Scalar(d) => Matrix2::identity() * *d,
            Kind::Matrix(m) => *m,
            Kind::Function(f) => f(x),
        }
    }

    /// `D(x)⁻¹`, after checking symmetry and the ellipticity bounds.
    pub fn inverse_at(&self, x: [f64; 2]) -> Result<Matrix2<f64>> {
        let bad = || Error::InvalidCoefficient { x: x[0], y: x[1] };
        match &self.kind {
            Kind::Scalar(d) => Ok(Matrix2::identity() / *d),
            Kind::Matrix(m) => m.try_inverse().ok_or_else(bad),
            Kind::Function(f) => {
                let m = f(x);
                let slack = 1e-12 * self.d_max;
                match eigenvalues(&m) {
                    Some((lo, hi)) if lo >= self.d_min - slack && hi <= self.d_max + slack => {
                        m.try_inverse().ok_or_else(bad)
                    }
                    _ => Err(bad()),
                }
            }
        }
    }
}

/// `M_W[i, j] = ⟨w_j, w_i⟩`, block diagonal by cell.
pub fn assemble_mass_scalar(space: &ScalarSpace, rule: &TensorRule2D) -> SparseMatrix {
    let mesh = space.mesh();
    let n = space.local_dim();
    let tab = space.tabulate(rule.points());
    let mut b = TripletBuilder::with_capacity(space.dim(), space.dim(), mesh.num_cells() * n * n);
    let mut local = vec![0.0; n * n];
    for k in 0..mesh.num_cells() {
        let map = mesh.cell_map(k);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, (xh, w)) in rule.iter().enumerate() {
            let wd = w * map.jacobian(xh).1;
            let phi = &tab[q * n..(q + 1) * n];
            for i in 0..n {
                for j in i..n {
                    local[i * n + j] += wd * phi[i] * phi[j];
                }
            }
        }
        let dofs = space.cell_dofs(k);
        for i in 0..n {
            for j in 0..n {
                let v = if i <= j { local[i * n + j] } else { local[j * n + i] };
                b.push(dofs.start + i, dofs.start + j, v);
            }
        }
    }
    b.finalize()
}

/// `M_D[i, j] = ⟨D⁻¹ v_j, v_i⟩` with Piola-mapped basis functions.
pub fn assemble_weighted_mass_flux(
    space: &FluxSpace,
    coeff: &CoefficientField,
    rule: &TensorRule2D,
) -> Result<SparseMatrix> {
    let mesh = space.mesh();
    let n = space.local_dim();
    let tab = space.tabulate(rule.points());
    let mut b = TripletBuilder::with_capacity(space.dim(), space.dim(), mesh.num_cells() * n * n);
    let mut local = vec![0.0; n * n];
    for k in 0..mesh.num_cells() {
        let map = mesh.cell_map(k);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, (xh, w)) in rule.iter().enumerate() {
            let (j, det) = map.jacobian(xh);
            let dinv = coeff.inverse_at(map.map(xh))?;
            // (J v̂_i)ᵀ D⁻¹ (J v̂_j) / det² · det
            let g = j.transpose() * dinv * j * (w / det);
            let vals = &tab.values[q * n..(q + 1) * n];
            for i in 0..n {
                let gi = [
                    g[(0, 0)] * vals[i][0] + g[(1, 0)] * vals[i][1],
                    g[(0, 1)] * vals[i][0] + g[(1, 1)] * vals[i][1],
                ];
                for jj in i..n {
                    local[i * n + jj] += gi[0] * vals[jj][0] + gi[1] * vals[jj][1];
                }
            }
        }
        let dofs = space.cell_dofs(k);
        for (i, &(gi, si)) in dofs.iter().enumerate() {
            for (jj, &(gj, sj)) in dofs.iter().enumerate() {
                let v = if i <= jj { local[i * n + jj] } else { local[jj * n + i] };
                b.push(gi, gj, si * sj * v);
            }
        }
    }
    Ok(b.finalize())
}

/// `B[i_w, j_v] = ⟨∇·v_j, w_i⟩`. The Jacobian determinants cancel, so the
/// local block is the same on every cell up to edge signs.
pub fn assemble_div_coupling(flux: &FluxSpace, scalar: &ScalarSpace, rule: &TensorRule2D) -> Result<SparseMatrix> {
    if !Arc::ptr_eq(flux.mesh(), scalar.mesh()) && flux.mesh() != scalar.mesh() {
        return Err(Error::invalid("flux and scalar spaces live on different meshes"));
    }
    let nv = flux.local_dim();
    let nw = scalar.local_dim();
    let ftab = flux.tabulate(rule.points());
    let stab = scalar.tabulate(rule.points());
    let mut local = vec![0.0; nw * nv];
    for (q, w) in rule.weights().iter().enumerate() {
        let phi = &stab[q * nw..(q + 1) * nw];
        let div = &ftab.divs[q * nv..(q + 1) * nv];
        for i in 0..nw {
            for j in 0..nv {
                local[i * nv + j] += w * phi[i] * div[j];
            }
        }
    }
    let mesh = flux.mesh();
    let mut b = TripletBuilder::with_capacity(scalar.dim(), flux.dim(), mesh.num_cells() * nw * nv);
    for k in 0..mesh.num_cells() {
        let rows = scalar.cell_dofs(k);
        for (j, &(gj, sj)) in flux.cell_dofs(k).iter().enumerate() {
            for (i, gi) in rows.clone().enumerate() {
                b.push(gi, gj, sj * local[i * nv + j]);
            }
        }
    }
    Ok(b.finalize())
}

/// `⟨f(·, t), w_i⟩` for every scalar basis function.
pub fn assemble_load(space: &ScalarSpace, f: impl Fn([f64; 2], f64) -> f64, t: f64, rule: &TensorRule2D) -> Vec<f64> {
    let mesh = space.mesh();
    let n = space.local_dim();
    let tab = space.tabulate(rule.points());
    let mut out = vec![0.0; space.dim()];
    for k in 0..mesh.num_cells() {
        let map = mesh.cell_map(k);
        let dofs = space.cell_dofs(k);
        let local = &mut out[dofs];
        for (q, (xh, w)) in rule.iter().enumerate() {
            let fv = w * map.jacobian(xh).1 * f(map.map(xh), t);
            if fv == 0.0 {
                continue;
            }
            for (l, phi) in local.iter_mut().zip(&tab[q * n..(q + 1) * n]) {
                *l += fv * phi;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{distort, unit_square_mesh};
    use crate::spaces::{build_pair, eval_div_flux, eval_flux, eval_scalar, FeFunction};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(level: u32, p: usize, factor: f64) -> (Arc<ScalarSpace>, Arc<FluxSpace>) {
        let mut mesh = unit_square_mesh(level).unwrap();
        if factor > 0.0 {
            mesh = distort(&mesh, factor, 3).unwrap();
        }
        build_pair(Arc::new(mesh), p).unwrap()
    }

    fn unit(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn scalar_mass_entries() {
        let (w, _) = pair(2, 0, 0.0);
        let m = assemble_mass_scalar(&w, &default_rule(0).unwrap());
        assert_eq!(m.nnz(), 16);
        assert!((0..16).all(|i| (m.get(i, i) - 1.0 / 16.0).abs() < 1e-15));

        let (w, _) = pair(1, 2, 0.2);
        let rule = default_rule(2).unwrap();
        let m = assemble_mass_scalar(&w, &rule);
        let one = w.interpolate_nodal(|_| 1.0);
        let total: f64 = m.matvec(one.coeffs()).iter().sum();
        assert!((total - 1.0).abs() < 1e-13);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = w.dim();
        for _ in 0..30 {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let fi = FeFunction::scalar(&w, unit(n, i)).unwrap();
            let fj = FeFunction::scalar(&w, unit(n, j)).unwrap();
            let mut oracle = 0.0;
            for k in 0..w.mesh().num_cells() {
                let map = w.mesh().cell_map(k);
                for (xh, wt) in rule.iter() {
                    oracle +=
                        wt * map.jacobian(xh).1 * eval_scalar(&fi, k, xh).unwrap() * eval_scalar(&fj, k, xh).unwrap();
                }
            }
            assert!((m.get(i, j) - oracle).abs() <= 1e-12 * oracle.abs().max(1e-3));
        }
    }

    #[test]
    fn flux_mass_entries_and_scaling() {
        let (_, v) = pair(1, 2, 0.2);
        let rule = default_rule(2).unwrap();
        let m1 = assemble_weighted_mass_flux(&v, &CoefficientField::identity(), &rule).unwrap();
        let m2 = assemble_weighted_mass_flux(&v, &CoefficientField::scalar(2.0).unwrap(), &rule).unwrap();
        assert_eq!(m1.max_asymmetry(), 0.0);
        assert!(m1.is_structurally_symmetric());
        for (i, j, val) in m1.iter() {
            assert!((m2.get(i, j) - 0.5 * val).abs() <= 1e-15 * val.abs());
        }

        let d = Matrix2::new(2.0, 0.5, 0.5, 1.0);
        let md = assemble_weighted_mass_flux(&v, &CoefficientField::matrix(d).unwrap(), &rule).unwrap();
        let dinv = d.try_inverse().unwrap();
        let n = v.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let i = rng.gen_range(0..n);
            // Pick j sharing a cell with i.
            let cells: Vec<usize> = (0..v.mesh().num_cells())
                .filter(|&k| v.cell_dofs(k).iter().any(|d| d.0 == i))
                .collect();
            let k0 = cells[0];
            let j = v.cell_dofs(k0)[rng.gen_range(0..v.local_dim())].0;
            let fi = FeFunction::flux(&v, unit(n, i)).unwrap();
            let fj = FeFunction::flux(&v, unit(n, j)).unwrap();
            let mut oracle = 0.0;
            for k in 0..v.mesh().num_cells() {
                let map = v.mesh().cell_map(k);
                for (xh, wt) in rule.iter() {
                    let a = eval_flux(&fi, k, xh).unwrap();
                    let b = eval_flux(&fj, k, xh).unwrap();
                    let db = dinv * nalgebra::Vector2::new(b[0], b[1]);
                    oracle += wt * map.jacobian(xh).1 * (a[0] * db[0] + a[1] * db[1]);
                }
            }
            let got = md.get(i, j);
            assert!((got - oracle).abs() <= 1e-12 * oracle.abs().max(1e-3), "{got} {oracle}");
        }
    }

    #[test]
    fn coupling_entries_and_divergence_theorem() {
        let (w, v) = pair(1, 2, 0.2);
        let rule = default_rule(2).unwrap();
        let b = assemble_div_coupling(&v, &w, &rule).unwrap();
        assert_eq!((b.nrows(), b.ncols()), (w.dim(), v.dim()));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (nw, nv) = (w.dim(), v.dim());
        for _ in 0..30 {
            let k = rng.gen_range(0..w.mesh().num_cells());
            let i = w.cell_dofs(k).start + rng.gen_range(0..w.local_dim());
            let j = v.cell_dofs(k)[rng.gen_range(0..v.local_dim())].0;
            let fi = FeFunction::scalar(&w, unit(nw, i)).unwrap();
            let fj = FeFunction::flux(&v, unit(nv, j)).unwrap();
            let map = w.mesh().cell_map(k);
            let oracle: f64 = rule
                .iter()
                .map(|(xh, wt)| {
                    wt * map.jacobian(xh).1 * eval_scalar(&fi, k, xh).unwrap() * eval_div_flux(&fj, k, xh).unwrap()
                })
                .sum();
            assert!((b.get(i, j) - oracle).abs() <= 1e-12 * oracle.abs().max(1e-3));
        }

        // 1ᵀ B c equals the boundary flux of c.
        let one = w.interpolate_nodal(|_| 1.0);
        let c: Vec<f64> = (0..nv).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = FeFunction::flux(&v, c.clone()).unwrap();
        let total: f64 = b.matvec(&c).iter().zip(one.coeffs()).map(|(a, b)| a * b).sum();
        let boundary: f64 = (0..v.mesh().num_edges())
            .filter(|&e| v.mesh().edges()[e].is_boundary())
            .map(|e| v.edge_flux(&f, e).unwrap())
            .sum();
        assert!((total - boundary).abs() < 1e-12);

        let other = Arc::new(unit_square_mesh(1).unwrap());
        let (w2, _) = build_pair(other, 2).unwrap();
        assert!(assemble_div_coupling(&v, &w2, &rule).is_err());
    }

    #[test]
    fn divergence_free_reference_field_gives_zero_column() {
        // p = 1 interior x-function times interior y-function combination with
        // zero reference divergence: v̂ = (x̂ - 1/2, -(ŷ - 1/2)) has div 0.
        let (w, v) = pair(0, 1, 0.0);
        let rule = default_rule(1).unwrap();
        let b = assemble_div_coupling(&v, &w, &rule).unwrap();
        let f = crate::spaces::rt_interpolate(|x| [x[0] - 0.5, 0.5 - x[1]], &v).unwrap();
        for r in b.matvec(f.coeffs()) {
            assert!(r.abs() < 1e-14);
        }
    }

    #[test]
    fn loads() {
        let (w, _) = pair(2, 0, 0.0);
        let rule = default_rule(0).unwrap();
        assert!(assemble_load(&w, |_, _| 0.0, 0.3, &rule).iter().all(|&v| v == 0.0));
        let ones = assemble_load(&w, |_, _| 1.0, 0.3, &rule);
        assert!(ones.iter().all(|&v| (v - 1.0 / 16.0).abs() < 1e-15));

        let (w, _) = pair(1, 2, 0.2);
        let rule = default_rule(2).unwrap();
        let f = |x: [f64; 2], t: f64| (3.0 * x[0] * t).sin() + x[1] * x[1];
        let load = assemble_load(&w, f, 0.05, &rule);
        for i in [0, 7, 20, 35] {
            let fi = FeFunction::scalar(&w, unit(w.dim(), i)).unwrap();
            let k = i / w.local_dim();
            let map = w.mesh().cell_map(k);
            let oracle: f64 = rule
                .iter()
                .map(|(xh, wt)| wt * map.jacobian(xh).1 * f(map.map(xh), 0.05) * eval_scalar(&fi, k, xh).unwrap())
                .sum();
            assert!((load[i] - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_validation() {
        assert!(CoefficientField::scalar(0.0).is_err());
        assert!(CoefficientField::matrix(Matrix2::new(1.0, 2.0, 2.0, 1.0)).is_err());
        assert!(CoefficientField::matrix(Matrix2::new(1.0, 0.1, 0.0, 1.0)).is_err());
        let bad = CoefficientField::function(|x| Matrix2::identity() * (x[0] - 0.5), 0.1, 1.0).unwrap();
        let (_, v) = pair(1, 0, 0.0);
        let err = assemble_weighted_mass_flux(&v, &bad, &default_rule(0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidCoefficient { .. }));
    }

    #[test]
    fn assembly_is_deterministic_and_spd() {
        let (w, v) = pair(2, 1, 0.1);
        let rule = default_rule(1).unwrap();
        let a = assemble_weighted_mass_flux(&v, &CoefficientField::identity(), &rule).unwrap();
        let b = assemble_weighted_mass_flux(&v, &CoefficientField::identity(), &rule).unwrap();
        assert_eq!(a, b);
        let m = assemble_mass_scalar(&w, &rule);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for mat in [&a, &m] {
            for _ in 0..100 {
                let x: Vec<f64> = (0..mat.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let q: f64 = mat.matvec(&x).iter().zip(&x).map(|(a, b)| a * b).sum();
                assert!(q > 0.0);
            }
        }
    }
}
