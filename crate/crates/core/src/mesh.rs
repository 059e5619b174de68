//! Structured, boundary-fitted triangulations of the basic cell `Y*` and of the
//! thin strip `R^ε`.
//!
//! Both domains are graphs over an interval, `0 < z < top(x)`, so a tensor
//! lattice `(x_i, s_j · top(x_i))` fits the curved boundary exactly at the
//! vertices. Each lattice quad is split along alternating diagonals.

use crate::profile::{BoundaryProfile, EpsilonValue};
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh needs nx >= {min_x} and nz >= 1 (got {nx} x {nz})")]
    TooCoarse { nx: usize, nz: usize, min_x: usize },
    #[error("triangle {0} has non-positive area")]
    DegenerateMesh(usize),
    #[error("mesh would have {requested} triangles, above the cap of {cap}")]
    ResourceLimit { requested: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BoundaryTag {
    /// Oscillating upper boundary `B1`.
    Top,
    /// Flat lower boundary `B2` (`z = 0` / `θ = 0`).
    Bottom,
    /// Left and right ends of the lattice; periodic for cell and strip meshes.
    Lateral,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Top => "B1_top",
            BoundaryTag::Bottom => "B2_bottom",
            BoundaryTag::Lateral => "lateral",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    /// Basic cell `Y*` with period `L`.
    Cell { period: f64 },
    /// Thin strip `R^ε`, `2π`-periodic in `φ`.
    Strip { eps: EpsilonValue },
    /// Plain rectangle without periodic identification (used for solver verification).
    Rectangle,
}

/// Boundary edge oriented counter-clockwise with respect to the domain, so the
/// outward normal is the tangent rotated by -90°.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub tag: BoundaryTag,
}

/// Index arithmetic of the underlying tensor lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    /// Number of lattice columns (the vertex row has `nx + 1` entries).
    pub nx: usize,
    pub nz: usize,
    pub x0: f64,
    pub dx: f64,
    /// Columns per oscillation cell; the diagonal pattern restarts at each cell.
    pub cols_per_cell: usize,
}

impl Lattice {
    #[inline]
    pub fn vertex(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// The two triangles of lattice quad `(i, j)` are `2q` and `2q + 1`.
    #[inline]
    pub fn quad(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    fn diagonal_up(&self, i: usize, j: usize) -> bool {
        ((i % self.cols_per_cell) + j).is_multiple_of(2)
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// `(slave, master)` pairs identifying the right lattice column with the left one.
    pub periodic: Vec<(usize, usize)>,
    pub boundary: Vec<BoundaryEdge>,
    pub kind: DomainKind,
    pub lattice: Lattice,
}

pub fn build_cell_mesh(profile: &BoundaryProfile, ny: usize, nz: usize) -> Result<TriMesh, MeshError> {
    if ny < 2 || nz < 1 {
        return Err(MeshError::TooCoarse { nx: ny, nz, min_x: 2 });
    }
    let period = profile.period();
    let xs: Vec<f64> = (0..=ny).map(|i| period * i as f64 / ny as f64).collect();
    let mut tops: Vec<f64> = xs.iter().map(|&y| profile.eval(y)).collect();
    tops[ny] = tops[0];
    graded_lattice(&xs, &tops, nz, ny, true, DomainKind::Cell { period })
}

pub fn build_strip_mesh(
    profile: &BoundaryProfile,
    eps: EpsilonValue,
    ny_per_cell: usize,
    nz: usize,
    max_triangles: usize,
) -> Result<TriMesh, MeshError> {
    if ny_per_cell < 2 || nz < 1 {
        return Err(MeshError::TooCoarse { nx: ny_per_cell, nz, min_x: 2 });
    }
    let nx = eps.cells(profile) * ny_per_cell;
    let requested = 2 * nx * nz;
    if requested > max_triangles {
        return Err(MeshError::ResourceLimit { requested, cap: max_triangles });
    }
    let e = eps.value();
    let xs: Vec<f64> = (0..=nx).map(|i| 2.0 * PI * i as f64 / nx as f64).collect();
    let mut tops: Vec<f64> = xs.iter().map(|&phi| e * profile.eval(phi / e)).collect();
    tops[nx] = tops[0];
    graded_lattice(&xs, &tops, nz, ny_per_cell, true, DomainKind::Strip { eps })
}

/// Non-periodic `[0, lx] x [0, ly]` rectangle with the same alternating split.
pub fn build_rectangle_mesh(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<TriMesh, MeshError> {
    if nx < 1 || ny < 1 {
        return Err(MeshError::TooCoarse { nx, nz: ny, min_x: 1 });
    }
    let xs: Vec<f64> = (0..=nx).map(|i| lx * i as f64 / nx as f64).collect();
    let tops = vec![ly; nx + 1];
    graded_lattice(&xs, &tops, ny, nx, false, DomainKind::Rectangle)
}

fn graded_lattice(
    xs: &[f64],
    tops: &[f64],
    nz: usize,
    cols_per_cell: usize,
    periodic: bool,
    kind: DomainKind,
) -> Result<TriMesh, MeshError> {
    let nx = xs.len() - 1;
    let lattice = Lattice { nx, nz, x0: xs[0], dx: (xs[nx] - xs[0]) / nx as f64, cols_per_cell };
    let mut vertices = Vec::with_capacity((nx + 1) * (nz + 1));
    for j in 0..=nz {
        let s = j as f64 / nz as f64;
        for i in 0..=nx {
            vertices.push([xs[i], s * tops[i]]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * nz);
    for j in 0..nz {
        for i in 0..nx {
            let a = lattice.vertex(i, j);
            let b = lattice.vertex(i + 1, j);
            let c = lattice.vertex(i + 1, j + 1);
            let d = lattice.vertex(i, j + 1);
            if lattice.diagonal_up(i, j) {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    let mut boundary = Vec::with_capacity(2 * nx + 2 * nz);
    for i in 0..nx {
        boundary.push(BoundaryEdge { v: [lattice.vertex(i, 0), lattice.vertex(i + 1, 0)], tag: BoundaryTag::Bottom });
    }
    for j in 0..nz {
        boundary.push(BoundaryEdge { v: [lattice.vertex(nx, j), lattice.vertex(nx, j + 1)], tag: BoundaryTag::Lateral });
    }
    for i in (0..nx).rev() {
        boundary.push(BoundaryEdge { v: [lattice.vertex(i + 1, nz), lattice.vertex(i, nz)], tag: BoundaryTag::Top });
    }
    for j in (0..nz).rev() {
        boundary.push(BoundaryEdge { v: [lattice.vertex(0, j + 1), lattice.vertex(0, j)], tag: BoundaryTag::Lateral });
    }
    let periodic = if periodic {
        (0..=nz).map(|j| (lattice.vertex(nx, j), lattice.vertex(0, j))).collect()
    } else {
        Vec::new()
    };
    let mesh = TriMesh { vertices, triangles, periodic, boundary, kind, lattice };
    if let Some(t) = (0..mesh.triangles.len()).find(|&t| mesh.signed_area(t) <= 0.0) {
        return Err(MeshError::DegenerateMesh(t));
    }
    Ok(mesh)
}

impl TriMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    #[inline]
    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    #[inline]
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.corners(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    /// Gradients of the three barycentric (P1 hat) functions on triangle `t`.
    #[inline]
    pub fn shape_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [p0, p1, p2] = self.corners(t);
        let two_a = 2.0 * self.signed_area(t);
        [
            [(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a],
            [(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a],
            [(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a],
        ]
    }

    #[inline]
    pub fn map_point(&self, t: usize, bary: [f64; 3]) -> [f64; 2] {
        let [p0, p1, p2] = self.corners(t);
        [
            bary[0] * p0[0] + bary[1] * p1[0] + bary[2] * p2[0],
            bary[0] * p0[1] + bary[1] * p1[1] + bary[2] * p2[1],
        ]
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Maximum edge length.
    pub fn h(&self) -> f64 {
        let len = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
        (0..self.triangles.len())
            .map(|t| {
                let [p0, p1, p2] = self.corners(t);
                len(p0, p1).max(len(p1, p2)).max(len(p2, p0))
            })
            .fold(0.0, f64::max)
    }

    /// Number of triangles sharing each undirected edge.
    pub fn edge_incidence(&self) -> HashMap<(usize, usize), usize> {
        let mut count = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        count
    }

    /// Horizontal period of the identification, if any.
    pub fn period(&self) -> Option<f64> {
        match self.kind {
            DomainKind::Cell { period } => Some(period),
            DomainKind::Strip { .. } => Some(2.0 * PI),
            DomainKind::Rectangle => None,
        }
    }

    /// Height of the piecewise-linear upper boundary above abscissa `x` (inside the lattice span).
    pub fn top_height(&self, x: f64) -> f64 {
        let (i, t) = self.column(x);
        let lat = &self.lattice;
        let (a, b) = (self.vertices[lat.vertex(i, lat.nz)][1], self.vertices[lat.vertex(i + 1, lat.nz)][1]);
        (1.0 - t) * a + t * b
    }

    fn column(&self, x: f64) -> (usize, f64) {
        let lat = &self.lattice;
        let u = (x - lat.x0) / lat.dx;
        let i = (u.floor().max(0.0) as usize).min(lat.nx - 1);
        let x_left = self.vertices[lat.vertex(i, 0)][0];
        let x_right = self.vertices[lat.vertex(i + 1, 0)][0];
        (i, (x - x_left) / (x_right - x_left))
    }

    /// Locates a point by lattice index arithmetic, returning the triangle and
    /// barycentric coordinates. Points slightly outside the polygonal boundary
    /// are attributed to the nearest boundary triangle (barycentrics may then be
    /// marginally negative).
    pub fn locate(&self, p: [f64; 2]) -> (usize, [f64; 3]) {
        let lat = &self.lattice;
        let (i, _) = self.column(p[0]);
        let top = self.top_height(p[0]);
        let s = if top > 0.0 { p[1] / top } else { 0.0 };
        let j = ((s * lat.nz as f64).floor().max(0.0) as usize).min(lat.nz - 1);
        let q = lat.quad(i, j);
        let (t0, t1) = (2 * q, 2 * q + 1);
        let b0 = self.barycentric(t0, p);
        let b1 = self.barycentric(t1, p);
        let min = |b: [f64; 3]| b[0].min(b[1]).min(b[2]);
        if min(b0) >= min(b1) {
            (t0, b0)
        } else {
            (t1, b1)
        }
    }

    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [p0, p1, p2] = self.corners(t);
        let two_a = 2.0 * self.signed_area(t);
        let l1 = ((p[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p[1] - p0[1])) / two_a;
        let l2 = ((p1[0] - p0[0]) * (p[1] - p0[1]) - (p[0] - p0[0]) * (p1[1] - p0[1])) / two_a;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Plain-text dump: `v x y`, `t i j k`, `p slave master`, `e id i j` and `b id tag`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let kind = match self.kind {
            DomainKind::Cell { period } => format!("cell period={period:.17e}"),
            DomainKind::Strip { eps } => format!("strip eps=1/{}", eps.m()),
            DomainKind::Rectangle => "rectangle".to_string(),
        };
        let _ = writeln!(out, "# oscilla mesh {kind}");
        let _ = writeln!(out, "# vertices={} triangles={}", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            let _ = writeln!(out, "v {:.17e} {:.17e}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "t {} {} {}", t[0], t[1], t[2]);
        }
        for (s, m) in &self.periodic {
            let _ = writeln!(out, "p {s} {m}");
        }
        for (id, e) in self.boundary.iter().enumerate() {
            let _ = writeln!(out, "e {id} {} {}", e.v[0], e.v[1]);
            let _ = writeln!(out, "b {id} {}", e.tag.as_str());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileSpec;

    fn reference() -> BoundaryProfile {
        ProfileSpec::reference().validate().unwrap()
    }

    fn assert_well_formed(mesh: &TriMesh) {
        for t in 0..mesh.num_triangles() {
            assert!(mesh.signed_area(t) > 0.0);
        }
        let boundary_edges: std::collections::HashSet<_> =
            mesh.boundary.iter().map(|e| (e.v[0].min(e.v[1]), e.v[0].max(e.v[1]))).collect();
        for (edge, n) in mesh.edge_incidence() {
            if boundary_edges.contains(&edge) {
                assert_eq!(n, 1, "boundary edge {edge:?}");
            } else {
                assert_eq!(n, 2, "interior edge {edge:?}");
            }
        }
    }

    #[test]
    fn flat_cell_counts_and_area() {
        let g = ProfileSpec::constant(1.0).validate().unwrap();
        let mesh = build_cell_mesh(&g, 2, 1).unwrap();
        assert_eq!(mesh.num_vertices(), 6);
        assert_eq!(mesh.num_triangles(), 4);
        assert!((mesh.area() - 2.0 * PI).abs() < 1e-12);
        assert_well_formed(&mesh);
    }

    #[test]
    fn oscillating_cell_area_converges_to_mean() {
        let g = reference();
        let coarse = build_cell_mesh(&g, 64, 16).unwrap();
        let fine = build_cell_mesh(&g, 256, 64).unwrap();
        let exact = 2.0 * PI;
        // the polygon area is the trapezoidal rule of a trigonometric polynomial
        // over a full period, which is exact once ny exceeds its degree
        assert!((coarse.area() - exact).abs() < 1e-12);
        assert!((fine.area() - exact).abs() < 1e-12);
        assert_well_formed(&fine);
    }

    #[test]
    fn periodic_pairs_and_top_boundary_are_exact() {
        let g = reference();
        let mesh = build_cell_mesh(&g, 32, 8).unwrap();
        for &(s, m) in &mesh.periodic {
            let (ps, pm) = (mesh.vertices[s], mesh.vertices[m]);
            assert_eq!(ps[1], pm[1]);
            assert_eq!(ps[0] - pm[0], g.period());
        }
        for e in mesh.boundary.iter().filter(|e| e.tag == BoundaryTag::Top) {
            for &v in &e.v {
                let p = mesh.vertices[v];
                assert!((p[1] - g.eval(p[0])).abs() <= 1e-12);
            }
        }

        let eps = EpsilonValue::new(4).unwrap();
        let strip = build_strip_mesh(&g, eps, 8, 4, usize::MAX).unwrap();
        for e in strip.boundary.iter().filter(|e| e.tag == BoundaryTag::Top) {
            for &v in &e.v {
                let p = strip.vertices[v];
                assert!((p[1] - 0.25 * g.eval(p[0] / 0.25)).abs() <= 1e-12);
            }
        }
        for &(s, m) in &strip.periodic {
            assert_eq!(strip.vertices[s][1], strip.vertices[m][1]);
            assert_eq!(strip.vertices[s][0] - strip.vertices[m][0], 2.0 * PI);
        }
        assert_well_formed(&strip);
    }

    #[test]
    fn flat_strip_area() {
        let g = ProfileSpec::constant(1.0).validate().unwrap();
        let mesh = build_strip_mesh(&g, EpsilonValue::new(4).unwrap(), 8, 4, usize::MAX).unwrap();
        assert!((mesh.area() - 2.0 * PI * 0.25).abs() < 1e-12);
    }

    #[test]
    fn oscillating_strip_area_approaches_integral() {
        // ε ∫ g(φ/ε) dφ over [0, 2π] = 2π ε a0, computed independently by a fine midpoint rule.
        let g = reference();
        let eps = EpsilonValue::new(3).unwrap();
        let n = 200_000;
        let quad: f64 = (0..n)
            .map(|i| {
                let phi = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                eps.value() * g.eval(phi / eps.value())
            })
            .sum::<f64>()
            * 2.0
            * PI
            / n as f64;
        assert!((quad - 2.0 * PI * eps.value()).abs() < 1e-10);
        let err = |ny| (build_strip_mesh(&g, eps, ny, 2, usize::MAX).unwrap().area() - quad).abs();
        assert!(err(16) < 1e-10 * quad);
        assert!(err(128) < 1e-10 * quad);
    }

    #[test]
    fn strip_contains_whole_cells() {
        let mut spec = ProfileSpec::reference();
        spec.a = 2;
        let g = spec.validate().unwrap();
        let eps = EpsilonValue::new(2).unwrap();
        let mesh = build_strip_mesh(&g, eps, 4, 2, usize::MAX).unwrap();
        assert_eq!(mesh.lattice.nx, 16);
        // top boundary repeats every 4 columns
        let top = |i| mesh.vertices[mesh.lattice.vertex(i, 2)][1];
        for i in 0..12 {
            assert!((top(i) - top(i + 4)).abs() < 1e-14);
        }
    }

    #[test]
    fn resource_cap() {
        let g = reference();
        let r = build_strip_mesh(&g, EpsilonValue::new(64).unwrap(), 32, 8, 10_000);
        assert!(matches!(r, Err(MeshError::ResourceLimit { .. })));
        assert!(build_cell_mesh(&g, 1, 4).is_err());
    }

    #[test]
    fn unit_triangle_area_and_refinement_h() {
        let mesh = build_rectangle_mesh(1.0, 1.0, 1, 1).unwrap();
        assert!((mesh.signed_area(0) - 0.5).abs() < 1e-15);
        let g = reference();
        let h1 = build_cell_mesh(&g, 32, 8).unwrap().h();
        let h2 = build_cell_mesh(&g, 64, 16).unwrap().h();
        assert!((h1 / h2 - 2.0).abs() < 0.1);
    }

    #[test]
    fn refinement_is_nested() {
        let g = reference();
        let coarse = build_cell_mesh(&g, 16, 4).unwrap();
        let fine = build_cell_mesh(&g, 32, 8).unwrap();
        for j in 0..=4 {
            for i in 0..=16 {
                let pc = coarse.vertices[coarse.lattice.vertex(i, j)];
                let pf = fine.vertices[fine.lattice.vertex(2 * i, 2 * j)];
                assert_eq!(pc, pf);
            }
        }
    }

    #[test]
    fn lattice_location_matches_brute_force() {
        let g = reference();
        let mesh = build_cell_mesh(&g, 24, 6).unwrap();
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10_000 {
            let y = next() * g.period();
            let z = next() * mesh.top_height(y);
            let (t, b) = mesh.locate([y, z]);
            assert!(b.iter().all(|&l| l >= -1e-12));
            let brute = (0..mesh.num_triangles())
                .find(|&s| mesh.barycentric(s, [y, z]).iter().all(|&l| l >= -1e-12))
                .unwrap();
            let bb = mesh.barycentric(brute, [y, z]);
            // either the same triangle or the point lies on a shared edge
            if brute != t {
                assert!(bb.iter().chain(b.iter()).any(|&l| l.abs() < 1e-9));
            }
        }
    }

    #[test]
    fn text_export_lists_all_entities() {
        let g = ProfileSpec::constant(1.0).validate().unwrap();
        let mesh = build_cell_mesh(&g, 2, 1).unwrap();
        let text = mesh.to_text();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 6);
        assert_eq!(text.lines().filter(|l| l.starts_with("t ")).count(), 4);
        assert_eq!(text.lines().filter(|l| l.starts_with("p ")).count(), 2);
        assert!(text.contains("b 0 B2_bottom"));
        assert!(text.contains("B1_top"));
    }
}
