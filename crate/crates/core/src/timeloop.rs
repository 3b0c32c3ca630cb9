//! cGP(r) time marching for the mixed problem.
//!
//! On interval `I_n` with step `τ` the unknowns are the trial coefficients
//! `U^1..U^r` (scalar) and `Q^1..Q^r` (flux), stored in that order. The
//! block rows are
//!
//! ```text
//! Σ_j α_ij M_W U^j + τ β_ii B Q^i = τ β_ii F(t_{n,i}) − α_i0 M_W U^0
//! M_D Q^i − Bᵀ U^i = 0
//! ```
//!
//! `U^0` of the first interval is `P_h u0`; afterwards it is the previous
//! expansion at its right end point. `Q^0` never enters the equations and is
//! stored for reconstruction only.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use crate::assembly::{
    assemble_div_coupling, assemble_load, assemble_mass_scalar, assemble_weighted_mass_flux, default_rule,
    CoefficientField,
};
use crate::error::{Error, Result};
use crate::mesh::QuadMesh;
use crate::quadrature::TensorRule2D;
use crate::spaces::{build_pair, l2_project_flux, l2_project_scalar, FeFunction, FluxSpace, ScalarSpace};
use crate::sparse::{gmres, norm, CholeskySolver, LuSolver, SparseMatrix, TripletBuilder};
use crate::time_basis::{build_basis, combine_with, TemporalBasis, TimePartition};

/// Default relative residual for a step solve.
pub const DEFAULT_STEP_TOL: f64 = 1e-12;

const MAX_REFINEMENT_STEPS: usize = 3;
const GMRES_RESTART: usize = 200;
const GMRES_MAX_ITER: usize = 2000;

pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;

/// Diffusion tensor, initial datum (with its gradient, for the initial
/// flux), source and final time.
#[derive(Clone)]
pub struct ProblemData {
    pub coefficient: CoefficientField,
    pub u0: ScalarFn,
    pub grad_u0: VectorFn,
    pub f: SpaceTimeFn,
    pub final_time: f64,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData")
            .field("coefficient", &self.coefficient)
            .field("final_time", &self.final_time)
            .finish_non_exhaustive()
    }
}

impl ProblemData {
    /// Zero initial datum and zero source.
    pub fn homogeneous(coefficient: CoefficientField, final_time: f64) -> Self {
        ProblemData {
            coefficient,
            u0: Arc::new(|_| 0.0),
            grad_u0: Arc::new(|_| [0.0, 0.0]),
            f: Arc::new(|_, _| 0.0),
            final_time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Sparse LU of the full block system.
    #[default]
    Direct,
    /// GMRES on the scalar unknowns after eliminating the fluxes.
    Schur,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SolverKind::Direct),
            "schur" => Ok(SolverKind::Schur),
            other => Err(Error::invalid(format!(
                "unknown solver `{other}`, expected direct or schur"
            ))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Direct => "direct",
            SolverKind::Schur => "schur",
        })
    }
}

/// Time-independent spatial operators of one space pair.
#[derive(Debug, Clone)]
pub struct Operators {
    pub scalar: Arc<ScalarSpace>,
    pub flux: Arc<FluxSpace>,
    pub rule: TensorRule2D,
    pub mass_scalar: SparseMatrix,
    pub mass_flux: SparseMatrix,
    pub coupling: SparseMatrix,
}

impl Operators {
    pub fn assemble(scalar: Arc<ScalarSpace>, flux: Arc<FluxSpace>, coefficient: &CoefficientField) -> Result<Self> {
        let rule = default_rule(scalar.degree())?;
        let mass_scalar = assemble_mass_scalar(&scalar, &rule);
        let mass_flux = assemble_weighted_mass_flux(&flux, coefficient, &rule)?;
        let coupling = assemble_div_coupling(&flux, &scalar, &rule)?;
        Ok(Operators {
            scalar,
            flux,
            rule,
            mass_scalar,
            mass_flux,
            coupling,
        })
    }

    pub fn dim_scalar(&self) -> usize {
        self.scalar.dim()
    }

    pub fn dim_flux(&self) -> usize {
        self.flux.dim()
    }
}

/// Block matrix of one step for a fixed `τ`.
#[derive(Debug, Clone)]
pub struct StepOperator {
    pub tau: f64,
    pub r: usize,
    pub dim_scalar: usize,
    pub dim_flux: usize,
    pub matrix: SparseMatrix,
}

impl StepOperator {
    pub fn new(basis: &TemporalBasis, ops: &Operators, tau: f64) -> Self {
        let r = basis.degree();
        let (nw, nv) = (ops.dim_scalar(), ops.dim_flux());
        let n = r * (nw + nv);
        let q0 = r * nw;
        let bt = ops.coupling.transpose();
        let mut b = TripletBuilder::new(n, n);
        for i in 1..=r {
            let row = (i - 1) * nw;
            for j in 1..=r {
                b.push_block(row, (j - 1) * nw, basis.alpha(i, j), &ops.mass_scalar);
            }
            b.push_block(row, q0 + (i - 1) * nv, tau * basis.beta(i), &ops.coupling);
            let frow = q0 + (i - 1) * nv;
            b.push_block(frow, frow, 1.0, &ops.mass_flux);
            b.push_block(frow, row, -1.0, &bt);
        }
        StepOperator {
            tau,
            r,
            dim_scalar: nw,
            dim_flux: nv,
            matrix: b.finalize(),
        }
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Right-hand side of the step on interval `n`.
#[derive(Debug, Clone)]
pub struct StepSystem<'a> {
    pub interval: usize,
    pub operator: &'a StepOperator,
    pub rhs: Vec<f64>,
}

impl StepSystem<'_> {
    /// `‖b − A x‖ / ‖b‖`, or `‖A x‖` for a zero right-hand side.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        crate::sparse::relative_residual(&self.operator.matrix, x, &self.rhs)
    }
}

pub fn build_step_system<'a>(
    n: usize,
    basis: &TemporalBasis,
    ops: &Operators,
    operator: &'a StepOperator,
    data: &ProblemData,
    partition: &TimePartition,
    u_start: &[f64],
) -> StepSystem<'a> {
    let r = basis.degree();
    let nw = ops.dim_scalar();
    let tau = operator.tau;
    let mut rhs = vec![0.0; operator.size()];
    let mu0 = ops.mass_scalar.matvec(u_start);
    for i in 1..=r {
        let t = partition.time_at(n, basis.test_nodes()[i - 1]);
        let load = assemble_load(&ops.scalar, |x, t| (data.f)(x, t), t, &ops.rule);
        let (a0, tb) = (basis.alpha(i, 0), tau * basis.beta(i));
        for (k, out) in rhs[(i - 1) * nw..i * nw].iter_mut().enumerate() {
            *out = tb * load[k] - a0 * mu0[k];
        }
    }
    StepSystem {
        interval: n,
        operator,
        rhs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Factorization or preconditioner data for one `StepOperator`.
pub enum StepSolver<'a> {
    Direct(LuSolver),
    Schur {
        ops: &'a Operators,
        basis: &'a TemporalBasis,
        tau: f64,
        mass_flux: CholeskySolver,
        mass_scalar: LuSolver,
    },
}

impl<'a> StepSolver<'a> {
    pub fn new(
        kind: SolverKind,
        operator: &StepOperator,
        ops: &'a Operators,
        basis: &'a TemporalBasis,
    ) -> Result<Self> {
        Ok(match kind {
            SolverKind::Direct => StepSolver::Direct(LuSolver::new(&operator.matrix)?),
            SolverKind::Schur => StepSolver::Schur {
                ops,
                basis,
                tau: operator.tau,
                mass_flux: CholeskySolver::new(&ops.mass_flux)?,
                mass_scalar: LuSolver::new(&ops.mass_scalar)?,
            },
        })
    }
}

/// Solves one step; the result is `[U^1..U^r, Q^1..Q^r]` stacked.
pub fn solve_step(system: &StepSystem, solver: &StepSolver, tol: f64) -> Result<(Vec<f64>, SolveStats)> {
    let (x, iterations) = match solver {
        StepSolver::Direct(lu) => {
            let mut x = lu.solve(&system.rhs);
            let mut steps = 0;
            // Iterative refinement when one LU solve misses the tolerance.
            while steps < MAX_REFINEMENT_STEPS && system.relative_residual(&x) > tol {
                let ax = system.operator.matrix.matvec(&x);
                let mut d: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                lu.solve_in_place(&mut d);
                x.iter_mut().zip(&d).for_each(|(x, d)| *x += d);
                steps += 1;
            }
            (x, steps)
        }
        StepSolver::Schur {
            ops,
            basis,
            tau,
            mass_flux,
            mass_scalar,
        } => schur_solve(system, ops, basis, *tau, mass_flux, mass_scalar, tol)?,
    };
    let res = system.relative_residual(&x);
    if !(res <= tol) {
        return Err(Error::SolverFailure {
            iterations,
            residual: res,
            reason: format!("step residual above tolerance {tol:e}"),
        });
    }
    Ok((
        x,
        SolveStats {
            iterations,
            relative_residual: res,
        },
    ))
}

fn schur_solve(
    system: &StepSystem,
    ops: &Operators,
    basis: &TemporalBasis,
    tau: f64,
    mass_flux: &CholeskySolver,
    mass_scalar: &LuSolver,
    tol: f64,
) -> Result<(Vec<f64>, usize)> {
    let r = basis.degree();
    let (nw, nv) = (ops.dim_scalar(), ops.dim_flux());
    let flux_of = |u: &[f64]| mass_flux.solve(&ops.coupling.matvec_transpose(u));
    // Reduced operator, right-preconditioned by the block-diagonal M_W⁻¹.
    let apply = |y: &[f64]| -> Result<Vec<f64>> {
        let u: Vec<Vec<f64>> = (0..r).map(|j| mass_scalar.solve(&y[j * nw..(j + 1) * nw])).collect();
        let mut out = vec![0.0; r * nw];
        for i in 1..=r {
            let blk = &mut out[(i - 1) * nw..i * nw];
            for j in 1..=r {
                let a = basis.alpha(i, j);
                // M_W M_W⁻¹ y_j = y_j
                blk.iter_mut()
                    .zip(&y[(j - 1) * nw..j * nw])
                    .for_each(|(o, v)| *o += a * v);
            }
            let s = ops.coupling.matvec(&flux_of(&u[i - 1]));
            let tb = tau * basis.beta(i);
            blk.iter_mut().zip(&s).for_each(|(o, v)| *o += tb * v);
        }
        Ok(out)
    };
    let b = &system.rhs[..r * nw];
    let scale = norm(&system.rhs);
    let inner_tol = if scale == 0.0 { 0.0 } else { 0.1 * tol };
    let (y, stats) = gmres(apply, b, vec![0.0; r * nw], inner_tol, GMRES_RESTART, GMRES_MAX_ITER)?;
    let mut x = vec![0.0; r * (nw + nv)];
    for j in 0..r {
        let u = mass_scalar.solve(&y[j * nw..(j + 1) * nw]);
        let q = flux_of(&u);
        x[j * nw..(j + 1) * nw].copy_from_slice(&u);
        x[r * nw + j * nv..r * nw + (j + 1) * nv].copy_from_slice(&q);
    }
    Ok((x, stats.iterations))
}

/// `(U_1^0, Q_1^0) = (P_h u0, P⃗_h(−D∇u0))`.
pub fn initial_coefficients(
    data: &ProblemData,
    scalar: &Arc<ScalarSpace>,
    flux: &Arc<FluxSpace>,
) -> Result<(FeFunction, FeFunction)> {
    let u0 = l2_project_scalar(|x| (data.u0)(x), scalar)?;
    let q0 = l2_project_flux(
        |x| {
            let g = (data.grad_u0)(x);
            let d = data.coefficient.eval(x);
            [
                -(d[(0, 0)] * g[0] + d[(0, 1)] * g[1]),
                -(d[(1, 0)] * g[0] + d[(1, 1)] * g[1]),
            ]
        },
        flux,
    )?;
    Ok((u0, q0))
}

/// Start coefficients of the next interval: the expansion at `t̂ = 1`.
pub fn advance<V: AsRef<[f64]>>(basis: &TemporalBasis, coeffs: &[V]) -> Vec<f64> {
    combine_with(coeffs, &basis.endpoint_weights())
}

/// Run configuration beyond the discretization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub solver: SolverKind,
    pub tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            solver: SolverKind::Direct,
            tol: DEFAULT_STEP_TOL,
        }
    }
}

/// Coefficients `U_n^{0..r}` and `Q_n^{0..r}` of every interval.
#[derive(Debug, Clone)]
pub struct SpaceTimeSolution {
    pub partition: TimePartition,
    pub basis: TemporalBasis,
    pub scalar: Arc<ScalarSpace>,
    pub flux: Arc<FluxSpace>,
    /// `u[n][j]`
    pub u: Vec<Vec<Vec<f64>>>,
    /// `q[n][j]`
    pub q: Vec<Vec<Vec<f64>>>,
    pub stats: Vec<SolveStats>,
}

impl SpaceTimeSolution {
    pub fn intervals(&self) -> usize {
        self.u.len()
    }

    /// Interval containing `t`; nodes belong to the interval on their left.
    pub fn interval_of(&self, t: f64) -> Result<usize> {
        let nodes = self.partition.nodes();
        if !(nodes[0]..=self.partition.final_time()).contains(&t) {
            return Err(Error::invalid(format!("time {t} outside the partition")));
        }
        Ok(nodes[1..].partition_point(|&b| b < t).min(self.intervals() - 1))
    }

    pub fn scalar_on(&self, n: usize, t: f64) -> Result<FeFunction> {
        let c = self.basis.reconstruct(&self.u[n], &self.partition, n, t)?;
        FeFunction::scalar(&self.scalar, c)
    }

    pub fn flux_on(&self, n: usize, t: f64) -> Result<FeFunction> {
        let c = self.basis.reconstruct(&self.q[n], &self.partition, n, t)?;
        FeFunction::flux(&self.flux, c)
    }

    pub fn scalar_at(&self, t: f64) -> Result<FeFunction> {
        self.scalar_on(self.interval_of(t)?, t)
    }

    pub fn flux_at(&self, t: f64) -> Result<FeFunction> {
        self.flux_on(self.interval_of(t)?, t)
    }

    /// Largest relative cellwise balance defect over all cells, intervals and
    /// Gauss times:
    /// `Σ_j α_ij ∫_K U^j + τ β_ii ∫_∂K Q^i·n − τ β_ii ∫_K f(t_{n,i})`,
    /// scaled by the largest term magnitude of the interval.
    pub fn local_balance(&self, data: &ProblemData) -> Result<f64> {
        let r = self.basis.degree();
        let mesh = self.scalar.mesh();
        let rule = default_rule(self.scalar.degree())?;
        let nw = self.scalar.local_dim();
        let tab = self.scalar.tabulate(rule.points());
        // ∫_K w_i for every scalar DoF.
        let mut integrals = vec![0.0; self.scalar.dim()];
        for k in 0..mesh.num_cells() {
            let map = mesh.cell_map(k);
            for (q, (xh, w)) in rule.iter().enumerate() {
                let det = map.jacobian(xh).1;
                for (i, dof) in self.scalar.cell_dofs(k).enumerate() {
                    integrals[dof] += w * det * tab[q * nw + i];
                }
            }
        }
        let mut worst: f64 = 0.0;
        for n in 0..self.intervals() {
            let tau = self.partition.step(n);
            let cell_sum = |c: &[f64], k: usize| -> f64 { self.scalar.cell_dofs(k).map(|d| c[d] * integrals[d]).sum() };
            for i in 1..=r {
                let t = self.partition.time_at(n, self.basis.test_nodes()[i - 1]);
                let f = &data.f;
                let load = assemble_load(&self.scalar, |x, t| f(x, t), t, &rule);
                let q = FeFunction::flux(&self.flux, self.q[n][i].clone())?;
                let tb = tau * self.basis.beta(i);
                let mut scale: f64 = 0.0;
                let mut defects = Vec::with_capacity(mesh.num_cells());
                for k in 0..mesh.num_cells() {
                    let storage: f64 = (0..=r)
                        .map(|j| self.basis.alpha(i, j) * cell_sum(&self.u[n][j], k))
                        .sum();
                    let outflow: f64 = (0..4)
                        .map(|l| self.flux.cell_edge_outflow(&q, k, l))
                        .sum::<Result<f64>>()?;
                    let source: f64 = self.scalar.cell_dofs(k).map(|d| load[d]).sum();
                    scale = scale
                        .max(storage.abs())
                        .max((tb * outflow).abs())
                        .max((tb * source).abs());
                    defects.push(storage + tb * outflow - tb * source);
                }
                if scale > 0.0 {
                    worst = defects.iter().fold(worst, |w, d| w.max(d.abs() / scale));
                }
            }
        }
        Ok(worst)
    }

    /// Text checkpoint: a header, then one line per interval and trial index
    /// `u|q <interval> <j> <values...>` with shortest round-trip formatting.
    pub fn write_checkpoint(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# checkpoint")?;
        writeln!(
            w,
            "r {} dims {} {} intervals {}",
            self.basis.degree(),
            self.scalar.dim(),
            self.flux.dim(),
            self.intervals()
        )?;
        for n in 0..self.intervals() {
            for (tag, data) in [("u", &self.u[n]), ("q", &self.q[n])] {
                for (j, v) in data.iter().enumerate() {
                    write!(w, "{tag} {n} {j}")?;
                    for x in v {
                        write!(w, " {x:e}")?;
                    }
                    writeln!(w)?;
                }
            }
        }
        Ok(())
    }

    pub fn write_checkpoint_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_checkpoint(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Coefficients read back from a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub r: usize,
    pub u: Vec<Vec<Vec<f64>>>,
    pub q: Vec<Vec<Vec<f64>>>,
}

pub fn read_checkpoint(reader: impl BufRead, path: &Path) -> Result<Checkpoint> {
    let parse_err = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {msg}"),
    };
    let mut header: Option<(usize, usize, usize, usize)> = None;
    let mut u = Vec::new();
    let mut q = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if header.is_none() {
            match fields.as_slice() {
                ["r", r, "dims", nw, nv, "intervals", n] => {
                    let num = |s: &str| s.parse::<usize>().map_err(|_| parse_err(ln + 1, "bad header"));
                    let h = (num(r)?, num(nw)?, num(nv)?, num(n)?);
                    u = vec![vec![Vec::new(); h.0 + 1]; h.3];
                    q = vec![vec![Vec::new(); h.0 + 1]; h.3];
                    header = Some(h);
                    continue;
                }
                _ => return Err(parse_err(ln + 1, "expected header")),
            }
        }
        let (r, nw, nv, n) = header.expect("header parsed");
        if fields.len() < 3 {
            return Err(parse_err(ln + 1, "expected `u|q interval j values`"));
        }
        let idx = |s: &str, max: usize| match s.parse::<usize>() {
            Ok(v) if v < max => Ok(v),
            _ => Err(parse_err(ln + 1, "index out of range")),
        };
        let (interval, j) = (idx(fields[1], n)?, idx(fields[2], r + 1)?);
        let values = fields[3..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| parse_err(ln + 1, "bad number")))
            .collect::<Result<Vec<f64>>>()?;
        let (target, want) = match fields[0] {
            "u" => (&mut u[interval][j], nw),
            "q" => (&mut q[interval][j], nv),
            _ => return Err(parse_err(ln + 1, "expected `u` or `q`")),
        };
        if values.len() != want {
            return Err(parse_err(ln + 1, "wrong vector length"));
        }
        *target = values;
    }
    let (r, ..) = header.ok_or_else(|| parse_err(0, "empty checkpoint"))?;
    if u.iter().chain(&q).flatten().any(|v| v.is_empty()) {
        return Err(parse_err(0, "missing vectors"));
    }
    Ok(Checkpoint { r, u, q })
}

/// All state needed to march a problem on a fixed space pair.
pub struct Stepper {
    pub ops: Operators,
    pub basis: TemporalBasis,
    pub partition: TimePartition,
}

impl Stepper {
    pub fn new(
        data: &ProblemData,
        scalar: Arc<ScalarSpace>,
        flux: Arc<FluxSpace>,
        r: usize,
        steps: usize,
    ) -> Result<Self> {
        let basis = build_basis(r)?;
        let partition = TimePartition::uniform(data.final_time, steps)?;
        let ops = Operators::assemble(scalar, flux, &data.coefficient)?;
        Ok(Stepper { ops, basis, partition })
    }

    pub fn operator(&self, n: usize) -> StepOperator {
        StepOperator::new(&self.basis, &self.ops, self.partition.step(n))
    }

    /// Marches all intervals.
    pub fn run(&self, data: &ProblemData, options: RunOptions) -> Result<SpaceTimeSolution> {
        let r = self.basis.degree();
        let (nw, nv) = (self.ops.dim_scalar(), self.ops.dim_flux());
        let (u0, q0) = initial_coefficients(data, &self.ops.scalar, &self.ops.flux)?;
        let (mut u_start, mut q_start) = (u0.into_coeffs(), q0.into_coeffs());
        let steps = self.partition.len();
        let mut us = Vec::with_capacity(steps);
        let mut qs = Vec::with_capacity(steps);
        let mut stats = Vec::with_capacity(steps);
        let mut current: Option<(StepOperator, StepSolver)> = None;
        for n in 0..steps {
            let tau = self.partition.step(n);
            let at = |e: Error| Error::Interval {
                interval: n,
                source: Box::new(e),
            };
            if current.as_ref().is_none_or(|(op, _)| op.tau != tau) {
                let op = self.operator(n);
                // The solver borrows only `ops` and `basis`, never `op`.
                let solver = StepSolver::new(options.solver, &op, &self.ops, &self.basis).map_err(at)?;
                current = Some((op, solver));
            }
            let (op, solver) = current.as_ref().expect("operator built");
            let system = build_step_system(n, &self.basis, &self.ops, op, data, &self.partition, &u_start);
            let (x, st) = solve_step(&system, solver, options.tol).map_err(at)?;
            let mut u = Vec::with_capacity(r + 1);
            let mut q = Vec::with_capacity(r + 1);
            u.push(std::mem::take(&mut u_start));
            q.push(std::mem::take(&mut q_start));
            for j in 0..r {
                u.push(x[j * nw..(j + 1) * nw].to_vec());
                q.push(x[r * nw + j * nv..r * nw + (j + 1) * nv].to_vec());
            }
            u_start = advance(&self.basis, &u);
            q_start = advance(&self.basis, &q);
            us.push(u);
            qs.push(q);
            stats.push(st);
        }
        Ok(SpaceTimeSolution {
            partition: self.partition.clone(),
            basis: self.basis.clone(),
            scalar: self.ops.scalar.clone(),
            flux: self.ops.flux.clone(),
            u: us,
            q: qs,
            stats,
        })
    }
}

/// Builds spaces of degree `p` on `mesh` and marches `steps` uniform
/// intervals of the degree-`r` scheme.
pub fn run(
    data: &ProblemData,
    mesh: Arc<QuadMesh>,
    p: usize,
    r: usize,
    steps: usize,
    options: RunOptions,
) -> Result<SpaceTimeSolution> {
    let (scalar, flux) = build_pair(mesh, p)?;
    Stepper::new(data, scalar, flux, r, steps)?.run(data, options)
}
