//! Discontinuous scalar space `Q^{p,p}` and the Raviart–Thomas flux space
//! `RT_p` on quadrilateral meshes.
//!
//! # Reference elements
//!
//! Scalars use tensor Lagrange polynomials on the `p + 1` Gauss points of
//! `[0, 1]` in each direction. Local index `a * (p + 1) + b`, with `a` over
//! `x̂` nodes and `b` over `ŷ` nodes.
//!
//! Fluxes live in `Q^{p+1,p} x Q^{p,p+1}`. Each component is a tensor
//! Lagrange product on a *closed* node set `{0, g_1, .., g_p, 1}` (the
//! degree-`p+1` direction, `g` the `p`-point Gauss rule) and an *open* node set
//! (the `p + 1` Gauss points). Local indices:
//!
//! * `x` component: `a * (p + 1) + b`, `a` over closed `x̂` nodes, `b` over
//!   open `ŷ` nodes;
//! * `y` component: `(p + 2)(p + 1) + a * (p + 2) + b`, `a` over open `x̂`
//!   nodes, `b` over closed `ŷ` nodes.
//!
//! Functions sitting on the left (`a = 0`) and bottom (`b = 0`) edges are
//! negated, so every edge function has reference outward normal component
//! `+1` at its own Gauss node and `0` at the others. Interior functions have
//! zero normal trace.
//!
//! # Global numbering
//!
//! Edge `e` owns flux DoFs `e * (p + 1) .. (e + 1) * (p + 1)`, ordered along
//! the global edge direction (first to second vertex). Interior DoFs of cell
//! `k` follow all edge DoFs in blocks of `2p(p + 1)`. A global flux DoF
//! measures the normal component against the owner cell's outward normal.
//!
//! Physical fields use the contravariant Piola map `v = J v̂ / det J`, under
//! which `div v = div̂ v̂ / det J` and normal fluxes through edges are
//! preserved.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::assembly::{assemble_weighted_mass_flux, default_rule, CoefficientField};
use crate::error::{Error, Result};
use crate::lagrange::Lagrange1D;
use crate::mesh::{QuadMesh, REFERENCE_NORMALS};
use crate::quadrature::{gauss_legendre_unit, square_rule, tensor, TensorRule2D};
use crate::sparse::{relative_residual, CholeskySolver};

/// Largest supported spatial degree.
pub const MAX_SPACE_DEGREE: usize = 4;

/// Points per direction for the interpolant's edge and interior moments.
const MOMENT_POINTS: usize = 10;

/// Relative residual accepted for the global flux projection solve.
const PROJECTION_RESIDUAL: f64 = 1e-10;

fn gauss_nodes(n: usize) -> Vec<f64> {
    gauss_legendre_unit(n)
        .expect("rule order within range")
        .points()
        .to_vec()
}

/// Reference coordinates of local edge `l` at local parameter `s`.
pub fn edge_point(l: usize, s: f64) -> [f64; 2] {
    match l {
        0 => [s, 0.0],
        1 => [1.0, s],
        2 => [s, 1.0],
        3 => [0.0, s],
        _ => panic!("local edge index {l} out of range"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSpace {
    mesh: Arc<QuadMesh>,
    p: usize,
    basis: Lagrange1D,
}

impl ScalarSpace {
    pub fn new(mesh: Arc<QuadMesh>, p: usize) -> Result<Self> {
        check_degree(p)?;
        Ok(ScalarSpace {
            mesh,
            p,
            basis: Lagrange1D::new(gauss_nodes(p + 1)),
        })
    }

    pub fn mesh(&self) -> &Arc<QuadMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn local_dim(&self) -> usize {
        (self.p + 1) * (self.p + 1)
    }

    pub fn dim(&self) -> usize {
        self.mesh.num_cells() * self.local_dim()
    }

    /// Global DoFs of cell `k`, in local order.
    pub fn cell_dofs(&self, k: usize) -> std::ops::Range<usize> {
        let n = self.local_dim();
        k * n..(k + 1) * n
    }

    /// Reference node of local basis function `i`.
    pub fn local_node(&self, i: usize) -> [f64; 2] {
        let n = self.p + 1;
        [self.basis.nodes()[i / n], self.basis.nodes()[i % n]]
    }

    pub fn ref_value(&self, i: usize, xh: [f64; 2]) -> f64 {
        let n = self.p + 1;
        self.basis.eval(i / n, xh[0]) * self.basis.eval(i % n, xh[1])
    }

    pub fn ref_values(&self, xh: [f64; 2]) -> Vec<f64> {
        let lx = self.basis.eval_all(xh[0]);
        let ly = self.basis.eval_all(xh[1]);
        lx.iter().flat_map(|a| ly.iter().map(move |b| a * b)).collect()
    }

    /// Basis values at every point, row-major `points x local_dim`.
    pub fn tabulate(&self, points: &[[f64; 2]]) -> Vec<f64> {
        points.iter().flat_map(|&xh| self.ref_values(xh)).collect()
    }

    /// Interpolation at the reference nodes of every cell.
    pub fn interpolate_nodal(self: &Arc<Self>, g: impl Fn([f64; 2]) -> f64) -> FeFunction {
        let mut coeffs = vec![0.0; self.dim()];
        for k in 0..self.mesh.num_cells() {
            let map = self.mesh.cell_map(k);
            for (i, dof) in self.cell_dofs(k).enumerate() {
                coeffs[dof] = g(map.map(self.local_node(i)));
            }
        }
        FeFunction {
            space: SpaceRef::Scalar(self.clone()),
            coeffs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxSpace {
    mesh: Arc<QuadMesh>,
    p: usize,
    closed: Lagrange1D,
    open: Lagrange1D,
    edge_weights: Vec<f64>,
    /// `(global dof, sign)` for every local DoF of every cell.
    cell_dofs: Vec<(usize, f64)>,
}

impl FluxSpace {
    pub fn new(mesh: Arc<QuadMesh>, p: usize) -> Result<Self> {
        check_degree(p)?;
        let open_rule = gauss_legendre_unit(p + 1)?;
        let mut closed = vec![0.0];
        if p > 0 {
            closed.extend(gauss_nodes(p));
        }
        closed.push(1.0);
        let mut space = FluxSpace {
            mesh,
            p,
            closed: Lagrange1D::new(closed),
            open: Lagrange1D::new(open_rule.points().to_vec()),
            edge_weights: open_rule.weights().to_vec(),
            cell_dofs: Vec::new(),
        };
        space.cell_dofs = space.number_dofs();
        Ok(space)
    }

    fn number_dofs(&self) -> Vec<(usize, f64)> {
        let p = self.p;
        let ne = self.mesh.num_edges();
        let ld = self.local_dim();
        let ni = self.interior_dim();
        let mut out = vec![(usize::MAX, 0.0); self.mesh.num_cells() * ld];
        for k in 0..self.mesh.num_cells() {
            let slot = &mut out[k * ld..(k + 1) * ld];
            for l in 0..4 {
                let e = self.mesh.cell_edges(k)[l];
                let sign = self.mesh.edge_sign(k, l);
                let rev = self.mesh.edge_reversed(k, l);
                for b in 0..=p {
                    let along = if rev { p - b } else { b };
                    slot[self.edge_local_dof(l, b)] = (e * (p + 1) + along, sign);
                }
            }
            let free = slot.iter_mut().filter(|d| d.0 == usize::MAX);
            for (next, entry) in (ne * (p + 1) + k * ni..).zip(free) {
                *entry = (next, 1.0);
            }
        }
        out
    }

    pub fn mesh(&self) -> &Arc<QuadMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn local_dim(&self) -> usize {
        2 * (self.p + 1) * (self.p + 2)
    }

    pub fn interior_dim(&self) -> usize {
        2 * self.p * (self.p + 1)
    }

    pub fn dim(&self) -> usize {
        self.mesh.num_edges() * (self.p + 1) + self.mesh.num_cells() * self.interior_dim()
    }

    /// `(global dof, sign)` per local DoF of cell `k`.
    pub fn cell_dofs(&self, k: usize) -> &[(usize, f64)] {
        let ld = self.local_dim();
        &self.cell_dofs[k * ld..(k + 1) * ld]
    }

    /// Global DoFs of edge `e`, ordered along the edge.
    pub fn edge_dofs(&self, e: usize) -> std::ops::Range<usize> {
        e * (self.p + 1)..(e + 1) * (self.p + 1)
    }

    /// Gauss weights on `[0, 1]` paired with the DoFs of one edge.
    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_weights
    }

    /// Gauss nodes on `[0, 1]` at which edge DoFs sit.
    pub fn edge_nodes(&self) -> &[f64] {
        self.open.nodes()
    }

    /// Local DoF at node `b` (local parameter order) of local edge `l`.
    pub fn edge_local_dof(&self, l: usize, b: usize) -> usize {
        let p = self.p;
        let off = (p + 2) * (p + 1);
        match l {
            0 => off + b * (p + 2),
            1 => (p + 1) * (p + 1) + b,
            2 => off + b * (p + 2) + p + 1,
            3 => b,
            _ => panic!("local edge index {l} out of range"),
        }
    }

    pub fn ref_value(&self, i: usize, xh: [f64; 2]) -> [f64; 2] {
        let p = self.p;
        let off = (p + 2) * (p + 1);
        if i < off {
            let (a, b) = (i / (p + 1), i % (p + 1));
            let s = if a == 0 { -1.0 } else { 1.0 };
            [s * self.closed.eval(a, xh[0]) * self.open.eval(b, xh[1]), 0.0]
        } else {
            let j = i - off;
            let (a, b) = (j / (p + 2), j % (p + 2));
            let s = if b == 0 { -1.0 } else { 1.0 };
            [0.0, s * self.open.eval(a, xh[0]) * self.closed.eval(b, xh[1])]
        }
    }

    pub fn ref_div(&self, i: usize, xh: [f64; 2]) -> f64 {
        let p = self.p;
        let off = (p + 2) * (p + 1);
        if i < off {
            let (a, b) = (i / (p + 1), i % (p + 1));
            let s = if a == 0 { -1.0 } else { 1.0 };
            s * self.closed.deriv(a, xh[0]) * self.open.eval(b, xh[1])
        } else {
            let j = i - off;
            let (a, b) = (j / (p + 2), j % (p + 2));
            let s = if b == 0 { -1.0 } else { 1.0 };
            s * self.open.eval(a, xh[0]) * self.closed.deriv(b, xh[1])
        }
    }

    /// Reference values and divergences at every point, row-major
    /// `points x local_dim`.
    pub fn tabulate(&self, points: &[[f64; 2]]) -> FluxTable {
        let ld = self.local_dim();
        let mut values = Vec::with_capacity(points.len() * ld);
        let mut divs = Vec::with_capacity(points.len() * ld);
        for &xh in points {
            for i in 0..ld {
                values.push(self.ref_value(i, xh));
                divs.push(self.ref_div(i, xh));
            }
        }
        FluxTable { values, divs }
    }

    /// Outward normal flux of `v` through local edge `l` of cell `k`.
    pub fn cell_edge_outflow(&self, v: &FeFunction, k: usize, l: usize) -> Result<f64> {
        let c = v.flux_coeffs(self)?;
        let dofs = self.cell_dofs(k);
        Ok((0..=self.p)
            .map(|b| {
                let (g, s) = dofs[self.edge_local_dof(l, b)];
                s * c[g] * self.edge_weights[b]
            })
            .sum())
    }

    /// Flux of `v` through edge `e` along the owner's outward normal.
    pub fn edge_flux(&self, v: &FeFunction, e: usize) -> Result<f64> {
        let c = v.flux_coeffs(self)?;
        Ok(self.edge_dofs(e).zip(&self.edge_weights).map(|(g, w)| c[g] * w).sum())
    }
}

/// Reference flux basis tabulated at a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxTable {
    pub values: Vec<[f64; 2]>,
    pub divs: Vec<f64>,
}

fn check_degree(p: usize) -> Result<()> {
    if p > MAX_SPACE_DEGREE {
        return Err(Error::invalid(format!(
            "spatial degree p must lie in 0..={MAX_SPACE_DEGREE}, got {p}"
        )));
    }
    Ok(())
}

/// Builds `(W_h, V_h)` of degree `p` on `mesh`.
pub fn build_pair(mesh: Arc<QuadMesh>, p: usize) -> Result<(Arc<ScalarSpace>, Arc<FluxSpace>)> {
    check_degree(p)?;
    mesh.validity_check(&square_rule(p + 3)?).into_result()?;
    Ok((
        Arc::new(ScalarSpace::new(mesh.clone(), p)?),
        Arc::new(FluxSpace::new(mesh, p)?),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceRef {
    Scalar(Arc<ScalarSpace>),
    Flux(Arc<FluxSpace>),
}

impl SpaceRef {
    pub fn kind(&self) -> &'static str {
        match self {
            SpaceRef::Scalar(_) => "scalar",
            SpaceRef::Flux(_) => "flux",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpaceRef::Scalar(s) => s.dim(),
            SpaceRef::Flux(s) => s.dim(),
        }
    }
}

/// A member of a discrete space, stored by its global coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    space: SpaceRef,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: SpaceRef, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::invalid(format!(
                "coefficient vector has length {}, {} space has dimension {}",
                coeffs.len(),
                space.kind(),
                space.dim()
            )));
        }
        Ok(FeFunction { space, coeffs })
    }

    pub fn scalar(space: &Arc<ScalarSpace>, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(SpaceRef::Scalar(space.clone()), coeffs)
    }

    pub fn flux(space: &Arc<FluxSpace>, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(SpaceRef::Flux(space.clone()), coeffs)
    }

    pub fn zero(space: SpaceRef) -> Self {
        let n = space.dim();
        FeFunction {
            space,
            coeffs: vec![0.0; n],
        }
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn scalar_space(&self) -> Result<&Arc<ScalarSpace>> {
        match &self.space {
            SpaceRef::Scalar(s) => Ok(s),
            other => Err(Error::WrongSpaceKind {
                expected: "scalar",
                found: other.kind(),
            }),
        }
    }

    pub fn flux_space(&self) -> Result<&Arc<FluxSpace>> {
        match &self.space {
            SpaceRef::Flux(s) => Ok(s),
            other => Err(Error::WrongSpaceKind {
                expected: "flux",
                found: other.kind(),
            }),
        }
    }

    fn flux_coeffs(&self, space: &FluxSpace) -> Result<&[f64]> {
        let own = self.flux_space()?;
        if own.dim() != space.dim() {
            return Err(Error::invalid("function does not belong to this flux space"));
        }
        Ok(&self.coeffs)
    }
}

pub fn eval_scalar(f: &FeFunction, cell: usize, xh: [f64; 2]) -> Result<f64> {
    let space = f.scalar_space()?;
    Ok(space
        .cell_dofs(cell)
        .zip(space.ref_values(xh))
        .map(|(g, phi)| f.coeffs[g] * phi)
        .sum())
}

/// Reference-cell field `Σ c_i v̂_i` of `v` on `cell`.
fn flux_reference(v: &FeFunction, cell: usize, xh: [f64; 2]) -> Result<([f64; 2], f64)> {
    let space = v.flux_space()?;
    let mut val = [0.0; 2];
    let mut div = 0.0;
    for (i, &(g, s)) in space.cell_dofs(cell).iter().enumerate() {
        let c = s * v.coeffs[g];
        let phi = space.ref_value(i, xh);
        val[0] += c * phi[0];
        val[1] += c * phi[1];
        div += c * space.ref_div(i, xh);
    }
    Ok((val, div))
}

pub fn eval_flux(v: &FeFunction, cell: usize, xh: [f64; 2]) -> Result<[f64; 2]> {
    let (vh, _) = flux_reference(v, cell, xh)?;
    let (j, det) = v.flux_space()?.mesh.cell_map(cell).jacobian(xh);
    let pv = j * Vector2::new(vh[0], vh[1]) / det;
    Ok([pv[0], pv[1]])
}

pub fn eval_div_flux(v: &FeFunction, cell: usize, xh: [f64; 2]) -> Result<f64> {
    let (_, div) = flux_reference(v, cell, xh)?;
    let (_, det) = v.flux_space()?.mesh.cell_map(cell).jacobian(xh);
    Ok(div / det)
}

/// `P_h g`: cell-local `L²` projection onto `W_h`.
pub fn l2_project_scalar(g: impl Fn([f64; 2]) -> f64, space: &Arc<ScalarSpace>) -> Result<FeFunction> {
    let rule = default_rule(space.p)?;
    let tab = space.tabulate(rule.points());
    let n = space.local_dim();
    let mut coeffs = vec![0.0; space.dim()];
    for k in 0..space.mesh.num_cells() {
        let map = space.mesh.cell_map(k);
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for (q, (xh, w)) in rule.iter().enumerate() {
            let (_, det) = map.jacobian(xh);
            let phi = &tab[q * n..(q + 1) * n];
            let gv = g(map.map(xh));
            for i in 0..n {
                rhs[i] += w * det * gv * phi[i];
                for j in 0..n {
                    m[(i, j)] += w * det * phi[i] * phi[j];
                }
            }
        }
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Internal(format!("singular local mass matrix on cell {k}")))?;
        let x = chol.solve(&rhs);
        for (i, dof) in space.cell_dofs(k).enumerate() {
            coeffs[dof] = x[i];
        }
    }
    FeFunction::scalar(space, coeffs)
}

/// `P⃗_h g`: global `L²` projection onto `V_h`.
pub fn l2_project_flux(g: impl Fn([f64; 2]) -> [f64; 2], space: &Arc<FluxSpace>) -> Result<FeFunction> {
    let rule = default_rule(space.p)?;
    let mass = assemble_weighted_mass_flux(space, &CoefficientField::identity(), &rule)?;
    let rhs = flux_load(&g, space, &rule);
    let x = CholeskySolver::new(&mass)?.solve(&rhs);
    let res = relative_residual(&mass, &x, &rhs);
    if !(res <= PROJECTION_RESIDUAL) {
        return Err(Error::Internal(format!(
            "flux projection residual {res:e} exceeds {PROJECTION_RESIDUAL:e}"
        )));
    }
    FeFunction::flux(space, x)
}

/// Vector of `⟨g, v_i⟩` over the flux basis.
pub fn flux_load(g: impl Fn([f64; 2]) -> [f64; 2], space: &FluxSpace, rule: &TensorRule2D) -> Vec<f64> {
    let tab = space.tabulate(rule.points());
    let n = space.local_dim();
    let mut out = vec![0.0; space.dim()];
    for k in 0..space.mesh.num_cells() {
        let map = space.mesh.cell_map(k);
        let mut local = vec![0.0; n];
        for (q, (xh, w)) in rule.iter().enumerate() {
            let (j, _) = map.jacobian(xh);
            // v_i = J v̂_i / det, dx = det dx̂: the determinants cancel.
            let gv = g(map.map(xh));
            let jt_g = j.transpose() * Vector2::new(gv[0], gv[1]);
            for (i, l) in local.iter_mut().enumerate() {
                let phi = tab.values[q * n + i];
                *l += w * (jt_g[0] * phi[0] + jt_g[1] * phi[1]);
            }
        }
        for (&(gd, s), l) in space.cell_dofs(k).iter().zip(local) {
            out[gd] += s * l;
        }
    }
    out
}

/// Inverse Piola pullback `det J · J⁻¹ g` at reference point `xh`.
fn pullback(j: &Matrix2<f64>, g: [f64; 2]) -> [f64; 2] {
    // det J · J⁻¹ is the adjugate.
    [
        j[(1, 1)] * g[0] - j[(0, 1)] * g[1],
        -j[(1, 0)] * g[0] + j[(0, 0)] * g[1],
    ]
}

/// `Π_h g`: canonical Raviart–Thomas interpolant, from edge normal moments
/// against `Q_p` and interior moments against `Q^{p-1,p} x Q^{p,p-1}`.
pub fn rt_interpolate(g: impl Fn([f64; 2]) -> [f64; 2], space: &Arc<FluxSpace>) -> Result<FeFunction> {
    let p = space.p;
    let line = gauss_legendre_unit(MOMENT_POINTS)?;
    let mesh = &space.mesh;
    let mut coeffs = vec![0.0; space.dim()];

    // Edge DoFs from the owner cell.
    for (e, edge) in mesh.edges().iter().enumerate() {
        let k = edge.owner;
        let l = (0..4)
            .find(|&l| mesh.cell_edges(k)[l] == e)
            .expect("owner contains edge");
        let map = mesh.cell_map(k);
        let normal = REFERENCE_NORMALS[l];
        let rev = mesh.edge_reversed(k, l);
        for b in 0..=p {
            let m: f64 = line
                .iter()
                .map(|(s, w)| {
                    let xh = edge_point(l, s);
                    let (j, _) = map.jacobian(xh);
                    let gh = pullback(&j, g(map.map(xh)));
                    w * (gh[0] * normal[0] + gh[1] * normal[1]) * space.open.eval(b, s)
                })
                .sum();
            let along = if rev { p - b } else { b };
            coeffs[e * (p + 1) + along] = m / space.edge_weights[b];
        }
    }

    if p > 0 {
        let rule = tensor(&line, &line)?;
        let inner = Lagrange1D::new(gauss_nodes(p));
        for k in 0..mesh.num_cells() {
            interior_moments(space, &inner, &rule, k, &g, &mut coeffs)?;
        }
    }
    FeFunction::flux(space, coeffs)
}

fn interior_moments(
    space: &FluxSpace,
    inner: &Lagrange1D,
    rule: &TensorRule2D,
    k: usize,
    g: &impl Fn([f64; 2]) -> [f64; 2],
    coeffs: &mut [f64],
) -> Result<()> {
    let p = space.p;
    let map = space.mesh.cell_map(k);
    let dofs = space.cell_dofs(k);
    let ld = space.local_dim();
    let interior: Vec<usize> = (0..ld)
        .filter(|&i| (0..4).all(|l| (0..=p).all(|b| space.edge_local_dof(l, b) != i)))
        .collect();
    let is_interior = |i: usize| interior.contains(&i);
    // Test functions: x-directed inner(x̂) open(ŷ), then y-directed
    // open(x̂) inner(ŷ); same count and order convention as the interior DoFs.
    let ntest = interior.len();
    let test = |t: usize, xh: [f64; 2]| -> [f64; 2] {
        let half = ntest / 2;
        if t < half {
            [
                inner.eval(t / (p + 1), xh[0]) * space.open.eval(t % (p + 1), xh[1]),
                0.0,
            ]
        } else {
            let t = t - half;
            [0.0, space.open.eval(t / p, xh[0]) * inner.eval(t % p, xh[1])]
        }
    };
    let mut a = DMatrix::<f64>::zeros(ntest, ntest);
    let mut rhs = DVector::<f64>::zeros(ntest);
    for (xh, w) in rule.iter() {
        let (j, _) = map.jacobian(xh);
        let gh = pullback(&j, g(map.map(xh)));
        let phis: Vec<[f64; 2]> = (0..ld).map(|i| space.ref_value(i, xh)).collect();
        let known: [f64; 2] = (0..ld).filter(|&i| !is_interior(i)).fold([0.0; 2], |acc, i| {
            let (gd, s) = dofs[i];
            [
                acc[0] + s * coeffs[gd] * phis[i][0],
                acc[1] + s * coeffs[gd] * phis[i][1],
            ]
        });
        for t in 0..ntest {
            let psi = test(t, xh);
            rhs[t] += w * ((gh[0] - known[0]) * psi[0] + (gh[1] - known[1]) * psi[1]);
            for (c, &i) in interior.iter().enumerate() {
                a[(t, c)] += w * (phis[i][0] * psi[0] + phis[i][1] * psi[1]);
            }
        }
    }
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Internal(format!("singular interior moment system on cell {k}")))?;
    for (c, &i) in interior.iter().enumerate() {
        let (gd, s) = dofs[i];
        coeffs[gd] = s * x[c];
    }
    Ok(())
}

/// Maps a reference point on local edge `l` of cell `k` to the parameter of
/// the global edge, measured from its first vertex.
pub fn global_edge_parameter(mesh: &QuadMesh, k: usize, l: usize, s: f64) -> f64 {
    if mesh.edge_reversed(k, l) {
        1.0 - s
    } else {
        s
    }
}

/// Local edge of cell `k` that is global edge `e`, if any.
pub fn local_edge_of(mesh: &QuadMesh, k: usize, e: usize) -> Option<usize> {
    (0..4).find(|&l| mesh.cell_edges(k)[l] == e)
}
