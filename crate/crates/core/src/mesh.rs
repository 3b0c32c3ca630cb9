//! Quadrilateral meshes of the unit square.
//!
//! Cells store their corners counter-clockwise starting at the corner that
//! maps from reference `(0, 0)`; the cell map is the bilinear interpolation
//! of the corners. Local edges are
//!
//! | local edge | corners | reference side | parameter |
//! |------------|---------|----------------|-----------|
//! | 0 (bottom) | 0 -> 1  | `y = 0`        | `x`       |
//! | 1 (right)  | 1 -> 2  | `x = 1`        | `y`       |
//! | 2 (top)    | 3 -> 2  | `y = 1`        | `x`       |
//! | 3 (left)   | 0 -> 3  | `x = 0`        | `y`       |
//!
//! Every global edge has an owner (the lower-indexed adjacent cell) and an
//! optional neighbour. The global edge normal points out of the owner.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::Matrix2;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::quadrature::TensorRule2D;

pub const MAX_LEVEL: u32 = 8;

/// Corner pairs of the four local edges.
pub const LOCAL_EDGES: [[usize; 2]; 4] = [[0, 1], [1, 2], [3, 2], [0, 3]];

/// Reference outward normals of the four local edges.
pub const REFERENCE_NORMALS: [[f64; 2]; 4] = [[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]];

const REFERENCE_CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// End points, ascending by vertex index. The edge parameter runs from
    /// `vertices[0]` to `vertices[1]`.
    pub vertices: [usize; 2],
    pub owner: usize,
    pub neighbor: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distortion {
    pub factor: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadMesh {
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 4]>,
    edges: Vec<Edge>,
    cell_edges: Vec<[usize; 4]>,
    boundary_vertex: Vec<bool>,
    level: u32,
    distortion: Option<Distortion>,
}

/// Uniform `2^level x 2^level` mesh of `[0, 1]^2`.
pub fn unit_square_mesh(level: u32) -> Result<QuadMesh> {
    if level > MAX_LEVEL {
        return Err(Error::Resource(format!(
            "mesh level {level} exceeds the supported maximum {MAX_LEVEL}"
        )));
    }
    let n = 1usize << level;
    let nf = n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / nf, j as f64 / nf]);
        }
    }
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }
    QuadMesh::from_parts(vertices, cells, level)
}

/// Moves every interior vertex of an undistorted mesh by a random vector.
///
/// The direction is uniform on `[0, 2 pi)`; the length is uniform on
/// `[0, factor * e_min]`, `e_min` being the shortest edge at that vertex.
/// Random numbers come from ChaCha8 seeded with
/// `seed + 0x9E3779B97F4A7C15 * (level + 1)` (wrapping), drawing for each
/// interior vertex in ascending index order first the angle then the
/// length. Each draw is `(next_u64 >> 11) * 2^-53`.
pub fn distort(mesh: &QuadMesh, factor: f64, seed: u64) -> Result<QuadMesh> {
    if mesh.distortion.is_some() {
        return Err(Error::invalid("mesh is already distorted"));
    }
    if !(0.0..0.5).contains(&factor) {
        return Err(Error::invalid(format!(
            "distortion factor must lie in [0, 0.5), got {factor}"
        )));
    }
    let mut shortest = vec![f64::INFINITY; mesh.vertices.len()];
    for e in &mesh.edges {
        let len = dist(mesh.vertices[e.vertices[0]], mesh.vertices[e.vertices[1]]);
        for &v in &e.vertices {
            shortest[v] = shortest[v].min(len);
        }
    }
    let stream = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(mesh.level as u64 + 1));
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let mut unit = || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);

    let mut vertices = mesh.vertices.clone();
    for (v, x) in vertices.iter_mut().enumerate() {
        if mesh.boundary_vertex[v] {
            continue;
        }
        let angle = std::f64::consts::TAU * unit();
        let length = factor * shortest[v] * unit();
        x[0] += length * angle.cos();
        x[1] += length * angle.sin();
    }
    let out = QuadMesh {
        vertices,
        distortion: Some(Distortion { factor, seed }),
        ..mesh.clone()
    };
    let rule = crate::quadrature::square_rule(5)?;
    out.validity_check(&rule).into_result()?;
    Ok(out)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    /// `(cell, det J, reference point)` of the worst point in each failing cell.
    pub failures: Vec<(usize, f64, [f64; 2])>,
    pub min_det: f64,
}

impl ValidityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.failures.first() {
            None => Ok(()),
            Some(&(cell, det, [x, y])) => Err(Error::InvalidMesh { cell, det, x, y }),
        }
    }
}

impl QuadMesh {
    /// Builds edge connectivity for counter-clockwise cells.
    pub fn from_parts(vertices: Vec<[f64; 2]>, cells: Vec<[usize; 4]>, level: u32) -> Result<Self> {
        let mut edges: Vec<Edge> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            if c.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::invalid(format!("cell {k} references a missing vertex")));
            }
            let mut local = [0; 4];
            for (l, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (va, vb) = (c[*a], c[*b]);
                let key = (va.min(vb), va.max(vb));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        owner: k,
                        neighbor: None,
                    });
                    edges.len() - 1
                });
                if edges[e].owner != k {
                    if edges[e].neighbor.is_some() {
                        return Err(Error::invalid(format!("edge {key:?} shared by more than two cells")));
                    }
                    edges[e].neighbor = Some(k);
                }
                local[l] = e;
            }
            cell_edges.push(local);
        }
        let mut boundary_vertex = vec![false; vertices.len()];
        for e in edges.iter().filter(|e| e.is_boundary()) {
            boundary_vertex[e.vertices[0]] = true;
            boundary_vertex[e.vertices[1]] = true;
        }
        Ok(QuadMesh {
            vertices,
            cells,
            edges,
            cell_edges,
            boundary_vertex,
            level,
            distortion: None,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Global edge indices of the local edges of cell `k`.
    pub fn cell_edges(&self, k: usize) -> [usize; 4] {
        self.cell_edges[k]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn distortion(&self) -> Option<Distortion> {
        self.distortion
    }

    /// `+1` if the outward normal of local edge `l` of cell `k` agrees with
    /// the global edge normal, `-1` otherwise.
    pub fn edge_sign(&self, k: usize, l: usize) -> f64 {
        if self.edges[self.cell_edges[k][l]].owner == k {
            1.0
        } else {
            -1.0
        }
    }

    /// Whether the local parameter of edge `l` in cell `k` runs against the
    /// global edge parameter.
    pub fn edge_reversed(&self, k: usize, l: usize) -> bool {
        let first = self.cells[k][LOCAL_EDGES[l][0]];
        first != self.edges[self.cell_edges[k][l]].vertices[0]
    }

    pub fn cell_map(&self, k: usize) -> CellMap {
        let c = self.cells[k];
        CellMap {
            cell: k,
            corners: [
                self.vertices[c[0]],
                self.vertices[c[1]],
                self.vertices[c[2]],
                self.vertices[c[3]],
            ],
        }
    }

    /// Largest corner-to-corner distance over all cells.
    pub fn h_max(&self) -> f64 {
        (0..self.num_cells())
            .map(|k| self.cell_map(k).diameter())
            .fold(0.0, f64::max)
    }

    /// Checks `det J > 0` at every point of `rule` and at the four corners
    /// of every cell.
    pub fn validity_check(&self, rule: &TensorRule2D) -> ValidityReport {
        let mut failures = Vec::new();
        let mut min_det = f64::INFINITY;
        for k in 0..self.num_cells() {
            let map = self.cell_map(k);
            let mut worst: Option<(f64, [f64; 2])> = None;
            for &xh in rule.points().iter().chain(REFERENCE_CORNERS.iter()) {
                let (_, det) = map.jacobian(xh);
                min_det = min_det.min(det);
                if !(det > 0.0) && worst.is_none_or(|(d, _)| det < d) {
                    worst = Some((det, xh));
                }
            }
            if let Some((det, xh)) = worst {
                failures.push((k, det, xh));
            }
        }
        ValidityReport { failures, min_det }
    }

    /// Plain-text listing: a `level` line, then `vertices N` followed by `N`
    /// lines `x y`, then `cells M` followed by `M` lines of four vertex
    /// indices. Lines starting with `#` are comments.
    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# quadrilateral mesh of the unit square")?;
        if let Some(d) = self.distortion {
            writeln!(w, "# distortion factor {} seed {}", d.factor, d.seed)?;
        }
        writeln!(w, "level {}", self.level)?;
        writeln!(w, "vertices {}", self.vertices.len())?;
        for [x, y] in &self.vertices {
            writeln!(w, "{x} {y}")?;
        }
        writeln!(w, "cells {}", self.cells.len())?;
        for c in &self.cells {
            writeln!(w, "{} {} {} {}", c[0], c[1], c[2], c[3])?;
        }
        Ok(())
    }

    pub fn write_text_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_text(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_text(r: impl BufRead, path: &Path) -> Result<QuadMesh> {
        let bad = |m: String| Error::Parse {
            path: path.to_path_buf(),
            message: m,
        };
        let mut lines = Vec::new();
        for line in r.lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let t = line.trim().to_string();
            if !t.is_empty() && !t.starts_with('#') {
                lines.push(t);
            }
        }
        let mut it = lines.into_iter();
        let mut header = |name: &str| -> Result<usize> {
            let l = it.next().ok_or_else(|| bad(format!("missing `{name}` line")))?;
            let mut parts = l.split_whitespace();
            if parts.next() != Some(name) {
                return Err(bad(format!("expected `{name}`, got `{l}`")));
            }
            parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(format!("bad `{name}` line `{l}`")))
        };
        let level = header("level")? as u32;
        let nv = header("vertices")?;
        let rest: Vec<String> = it.collect();
        if rest.len() < nv + 1 {
            return Err(bad("truncated vertex list".into()));
        }
        let mut vertices = Vec::with_capacity(nv);
        for l in &rest[..nv] {
            let v: Vec<f64> = l.split_whitespace().filter_map(|s| s.parse().ok()).collect();
            if v.len() != 2 {
                return Err(bad(format!("bad vertex line `{l}`")));
            }
            vertices.push([v[0], v[1]]);
        }
        let cl = &rest[nv];
        let nc: usize = cl
            .strip_prefix("cells")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad(format!("expected `cells`, got `{cl}`")))?;
        if rest.len() != nv + 1 + nc {
            return Err(bad("cell count does not match listing".into()));
        }
        let mut cells = Vec::with_capacity(nc);
        for l in &rest[nv + 1..] {
            let c: Vec<usize> = l.split_whitespace().filter_map(|s| s.parse().ok()).collect();
            if c.len() != 4 {
                return Err(bad(format!("bad cell line `{l}`")));
            }
            cells.push([c[0], c[1], c[2], c[3]]);
        }
        QuadMesh::from_parts(vertices, cells, level)
    }
}

/// Bilinear map from `[0, 1]^2` onto one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMap {
    pub cell: usize,
    pub corners: [[f64; 2]; 4],
}

impl CellMap {
    pub fn map(&self, xh: [f64; 2]) -> [f64; 2] {
        let [x, y] = xh;
        let n = [(1.0 - x) * (1.0 - y), x * (1.0 - y), x * y, (1.0 - x) * y];
        let mut out = [0.0; 2];
        for (ni, c) in n.iter().zip(&self.corners) {
            out[0] += ni * c[0];
            out[1] += ni * c[1];
        }
        out
    }

    /// Jacobian `J[(a, b)] = d x_a / d xh_b` and its determinant.
    pub fn jacobian(&self, xh: [f64; 2]) -> (Matrix2<f64>, f64) {
        let [x, y] = xh;
        let [p0, p1, p2, p3] = self.corners;
        let mut j = Matrix2::zeros();
        for a in 0..2 {
            j[(a, 0)] = (1.0 - y) * (p1[a] - p0[a]) + y * (p2[a] - p3[a]);
            j[(a, 1)] = (1.0 - x) * (p3[a] - p0[a]) + x * (p2[a] - p1[a]);
        }
        let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
        (j, det)
    }

    pub fn diameter(&self) -> f64 {
        let c = &self.corners;
        let mut d: f64 = 0.0;
        for a in 0..4 {
            for b in a + 1..4 {
                d = d.max(dist(c[a], c[b]));
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::square_rule;

    #[test]
    #[allow(clippy::approx_constant)] // five-digit reference values
    fn uniform_counts_and_h() {
        for (level, cells, h) in [(0, 1, 1.4142), (2, 16, 0.35355), (5, 1024, 0.044194)] {
            let m = unit_square_mesh(level).unwrap();
            assert_eq!(m.num_cells(), cells);
            let n = 1usize << level;
            assert_eq!(m.num_vertices(), (n + 1) * (n + 1));
            assert!((m.h_max() - h).abs() < 0.5e-4 * h.max(1.0));
            assert!((m.h_max() - 2f64.sqrt() / n as f64).abs() < 1e-15);
        }
        assert!((unit_square_mesh(3).unwrap().h_max() - 0.1768).abs() < 5e-5);
        assert!((unit_square_mesh(4).unwrap().h_max() - 0.0884).abs() < 5e-5);
        assert!(matches!(unit_square_mesh(9), Err(Error::Resource(_))));
    }

    #[test]
    fn topology() {
        for level in 0..=4 {
            let m = unit_square_mesh(level).unwrap();
            let euler = m.num_vertices() as i64 - m.num_edges() as i64 + m.num_cells() as i64;
            assert_eq!(euler, 1);
            for e in m.edges() {
                let a = m.vertices()[e.vertices[0]];
                let b = m.vertices()[e.vertices[1]];
                let on_boundary = |p: [f64; 2]| p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0;
                if e.is_boundary() {
                    assert!(on_boundary(a) && on_boundary(b));
                } else {
                    assert!(e.owner < e.neighbor.unwrap());
                }
            }
            assert!(m.validity_check(&square_rule(3).unwrap()).passed());
        }
    }

    #[test]
    fn edge_signs_cancel_on_interior_edges() {
        let m = unit_square_mesh(2).unwrap();
        let mut seen = vec![0.0; m.num_edges()];
        for k in 0..m.num_cells() {
            for l in 0..4 {
                seen[m.cell_edges(k)[l]] += m.edge_sign(k, l);
            }
        }
        for (e, s) in m.edges().iter().zip(seen) {
            assert_eq!(s, if e.is_boundary() { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn cell_map_jacobians() {
        let m = unit_square_mesh(0).unwrap();
        let map = m.cell_map(0);
        for xh in [[0.2, 0.9], [0.5, 0.5]] {
            let x = map.map(xh);
            assert!((x[0] - xh[0]).abs() < 1e-15 && (x[1] - xh[1]).abs() < 1e-15);
            let (j, det) = map.jacobian(xh);
            assert_eq!(j, Matrix2::identity());
            assert_eq!(det, 1.0);
        }
        let m = unit_square_mesh(3).unwrap();
        let (_, det) = m.cell_map(10).jacobian([0.3, 0.7]);
        assert_eq!(det, 1.0 / 64.0);

        let d = distort(&unit_square_mesh(2).unwrap(), 0.25, 7).unwrap();
        for k in 0..d.num_cells() {
            let map = d.cell_map(k);
            for (ci, xh) in REFERENCE_CORNERS.iter().enumerate() {
                let prev = map.corners[(ci + 3) % 4];
                let next = map.corners[(ci + 1) % 4];
                let here = map.corners[ci];
                let a = [next[0] - here[0], next[1] - here[1]];
                let b = [prev[0] - here[0], prev[1] - here[1]];
                let cross = a[0] * b[1] - a[1] * b[0];
                let (_, det) = map.jacobian(*xh);
                assert!((det - cross).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn distortion_contract() {
        let base = unit_square_mesh(3).unwrap();
        let same = distort(&base, 0.0, 11).unwrap();
        assert_eq!(same.vertices(), base.vertices());

        let a = distort(&base, 0.1, 42).unwrap();
        let b = distort(&base, 0.1, 42).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        let c = distort(&base, 0.1, 43).unwrap();
        assert_ne!(a.vertices(), c.vertices());

        for v in 0..base.num_vertices() {
            if base.is_boundary_vertex(v) {
                assert_eq!(a.vertices()[v], base.vertices()[v]);
            } else {
                let d = dist(a.vertices()[v], base.vertices()[v]);
                assert!(d <= 0.1 * 0.125 + 1e-16);
            }
        }
        assert_eq!(a.cells(), base.cells());
        assert_eq!(a.edges(), base.edges());

        assert!(distort(&a, 0.1, 1).is_err());
        assert!(distort(&base, 0.5, 1).is_err());
    }

    #[test]
    fn distorted_h_max_bounds() {
        let base = unit_square_mesh(1).unwrap();
        for seed in 0..50 {
            let m = distort(&base, 0.25, seed).unwrap();
            // Brute force over every pair of corners of every cell.
            let mut h: f64 = 0.0;
            for c in m.cells() {
                for a in c {
                    for b in c {
                        h = h.max(dist(m.vertices()[*a], m.vertices()[*b]));
                    }
                }
            }
            assert_eq!(h, m.h_max());
            assert!(h >= 0.5f64.sqrt() - 1e-15 && h <= 0.5f64.sqrt() * 1.5);
        }
    }

    #[test]
    fn moderate_distortion_is_always_valid() {
        let rule = square_rule(5).unwrap();
        for level in 1..=4 {
            let base = unit_square_mesh(level).unwrap();
            for seed in 0..100 {
                let m = distort(&base, 0.25, seed).expect("valid mesh");
                assert!(m.validity_check(&rule).passed());
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let m = distort(&unit_square_mesh(2).unwrap(), 0.1, 3).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = QuadMesh::read_text(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.level(), 2);
        assert!(QuadMesh::read_text(&b"level 0\nvertices 2\n0 0\n"[..], Path::new("mem")).is_err());
    }
}
