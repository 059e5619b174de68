//! Corrector truncations `W₁ = w₀ − εX w₀'` and `W₂ = W₁ + ε²Θ w₀''` on the
//! strip, built from cell functions extended periodically in `y`, and the
//! rescaled weighted norms `|||·|||` with measure `ε⁻¹ cos θ dφ dθ`.

use crate::cell::CellSolution;
use crate::fem::{integrate, QuadPoint, ScalarField};
use crate::homogenized::TrigPoly;
use crate::mesh::{BoundaryTag, DomainKind, TriMesh};
use crate::profile::EpsilonValue;
use crate::quadrature::TriangleRule;
use serde::Serialize;
use std::cell::RefCell;
use std::f64::consts::PI;
use thiserror::Error;

/// Rule used for every norm and error integral on the strip.
pub const NORM_RULE: TriangleRule = TriangleRule::Radon7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrectorError {
    #[error("point (y, z) = ({y}, {z}) lies outside the basic cell")]
    OutOfDomain { y: f64, z: f64 },
    #[error("strip mesh was not built from the cell solution's profile (top vertex {vertex})")]
    MeshMismatch { vertex: usize },
    #[error("mesh is not a strip mesh")]
    NotAStrip,
    #[error("scaling bound violated for {0:?}")]
    BoundViolated(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSample {
    pub value: f64,
    pub grad_y: f64,
    pub grad_z: f64,
}

/// Evaluates a cell field at strip coordinates via `(y, z) = (φ/ε mod L, θ/ε)`.
pub fn cell_eval(field: &ScalarField, phi: f64, theta: f64, eps: f64) -> Result<CellSample, CorrectorError> {
    let mesh = field.mesh();
    let period = match mesh.kind {
        DomainKind::Cell { period } => period,
        _ => mesh.period().unwrap_or(f64::INFINITY),
    };
    let y = (phi / eps).rem_euclid(period);
    let z = theta / eps;
    // strip and cell polygons may differ by O(h²) near the curved boundary, so
    // points within half a top layer above the cell polygon are extrapolated
    let top = mesh.top_height(y);
    let slack = 0.5 * top / mesh.lattice.nz as f64;
    if z > top * (1.0 + 1e-10) + slack || z < -1e-12 {
        return Err(CorrectorError::OutOfDomain { y, z });
    }
    let (tri, bary) = mesh.locate([y, z]);
    let g = field.gradient(tri);
    Ok(CellSample { value: field.value_at(tri, bary), grad_y: g[0], grad_z: g[1] })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CorrectorOrder {
    First,
    Second,
}

/// Value and `(∂φ, ∂θ)` gradient of a truncation at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 2],
}

/// Pointwise evaluator of `W₁` / `W₂`.
pub struct Truncation<'a> {
    pub order: CorrectorOrder,
    pub w0: &'a TrigPoly,
    pub cell: &'a CellSolution,
    pub eps: f64,
}

impl Truncation<'_> {
    pub fn eval(&self, phi: f64, theta: f64) -> Result<Jet, CorrectorError> {
        let e = self.eps;
        let [w, d1, d2, d3, _] = self.w0.jet(phi);
        let x = cell_eval(&self.cell.x0, phi, theta, e)?;
        // ∂φ[X(φ/ε, θ/ε)] = (1/ε) ∂X/∂y, so −εX w₀' contributes an O(1) gradient
        let mut value = w - e * x.value * d1;
        let mut gphi = d1 - x.grad_y * d1 - e * x.value * d2;
        let mut gtheta = -x.grad_z * d1;
        if self.order == CorrectorOrder::Second {
            let t = cell_eval(&self.cell.theta, phi, theta, e)?;
            value += e * e * t.value * d2;
            gphi += e * t.grad_y * d2 + e * e * t.value * d3;
            gtheta += e * t.grad_z * d2;
        }
        Ok(Jet { value, grad: [gphi, gtheta] })
    }
}

/// A truncation sampled at every [`NORM_RULE`] node of the strip mesh.
#[derive(Debug, Clone)]
pub struct CorrectorField {
    pub order: CorrectorOrder,
    pub eps: EpsilonValue,
    pub nodes_per_triangle: usize,
    /// Indexed by `triangle * nodes_per_triangle + node`.
    pub samples: Vec<Jet>,
}

impl CorrectorField {
    #[inline]
    pub fn at(&self, q: &QuadPoint, node: usize) -> Jet {
        self.samples[q.tri * self.nodes_per_triangle + node]
    }
}

/// Checks that the strip's top vertices sit on `ε g(φ/ε)` for the cell's profile.
pub fn check_strip_matches(cell: &CellSolution, strip: &TriMesh) -> Result<EpsilonValue, CorrectorError> {
    let eps = match strip.kind {
        DomainKind::Strip { eps } => eps,
        _ => return Err(CorrectorError::NotAStrip),
    };
    let e = eps.value();
    for edge in strip.boundary.iter().filter(|b| b.tag == BoundaryTag::Top) {
        let p = strip.vertices[edge.v[0]];
        if (p[1] - e * cell.profile.eval(p[0] / e)).abs() > 1e-12 {
            return Err(CorrectorError::MeshMismatch { vertex: edge.v[0] });
        }
    }
    Ok(eps)
}

pub fn truncation(
    order: CorrectorOrder,
    w0: &TrigPoly,
    cell: &CellSolution,
    strip: &TriMesh,
) -> Result<CorrectorField, CorrectorError> {
    let eps = check_strip_matches(cell, strip)?;
    let eval = Truncation { order, w0, cell, eps: eps.value() };
    let nodes = NORM_RULE.nodes();
    let mut samples = Vec::with_capacity(strip.num_triangles() * nodes.len());
    for t in 0..strip.num_triangles() {
        for node in &nodes {
            let p = strip.map_point(t, node.bary);
            samples.push(eval.eval(p[0], p[1])?);
        }
    }
    Ok(CorrectorField { order, eps, nodes_per_triangle: nodes.len(), samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormKind {
    L2,
    H1,
}

/// `|||u|||` for `u` given as `(value, [∂φ u, ∂θ u])` at quadrature points.
pub fn norm_rescaled(
    strip: &TriMesh,
    eps: EpsilonValue,
    kind: NormKind,
    u: impl Fn(&QuadPoint) -> (f64, [f64; 2]),
) -> f64 {
    norm_sq_rescaled(strip, eps, kind, u).sqrt()
}

pub fn norm_sq_rescaled(
    strip: &TriMesh,
    eps: EpsilonValue,
    kind: NormKind,
    u: impl Fn(&QuadPoint) -> (f64, [f64; 2]),
) -> f64 {
    let total = integrate(strip, NORM_RULE, |q| {
        let c = q.pos[1].cos();
        let (v, g) = u(q);
        let density = match kind {
            NormKind::L2 => v * v,
            NormKind::H1 => v * v + g[1] * g[1] + g[0] * g[0] / (c * c),
        };
        density * c
    });
    total / eps.value()
}

/// `|||w − W|||` for a P1 strip field and a sampled truncation.
pub fn difference_norm(w: &ScalarField, corr: &CorrectorField, kind: NormKind) -> f64 {
    let nodes = NORM_RULE.nodes();
    let mesh = w.mesh();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let g = w.gradient(t);
        let mut local = 0.0;
        for (k, node) in nodes.iter().enumerate() {
            let p = mesh.map_point(t, node.bary);
            let c = p[1].cos();
            let jet = corr.samples[t * corr.nodes_per_triangle + k];
            let v = w.value_at(t, node.bary) - jet.value;
            let density = match kind {
                NormKind::L2 => v * v,
                NormKind::H1 => {
                    let (dp, dt) = (g[0] - jet.grad[0], g[1] - jet.grad[1]);
                    v * v + dt * dt + dp * dp / (c * c)
                }
            };
            local += node.weight * density * c;
        }
        total += mesh.signed_area(t) * local;
    }
    (total / corr.eps.value()).sqrt()
}

/// `|||w − w₀|||_{L²}` with `w₀` constant in `θ`.
pub fn homogenized_error_l2(w: &ScalarField, w0: &TrigPoly, eps: EpsilonValue) -> f64 {
    norm_rescaled(w.mesh(), eps, NormKind::L2, |q| (w.value_at(q.tri, q.bary) - w0.eval(q.pos[0]), [0.0; 2]))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingEntry {
    pub quantity: String,
    /// `‖q(φ/ε, θ/ε)‖²_{L²(R^ε, cos θ)}`.
    pub strip_norm_sq: f64,
    /// `‖q‖²_{L²(Y*)}`.
    pub cell_norm_sq: f64,
    /// `(ε/L) ‖q‖²_{L²(Y*)}`.
    pub bound: f64,
    /// `strip_norm_sq / bound`.
    pub ratio: f64,
    /// `strip_norm_sq / ((2π/(εL)) ε² ‖q‖²)`: the strip holds `2π/(εL)` scaled copies of `Y*`.
    pub ratio_cell_count: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub eps: f64,
    pub slack: f64,
    pub entries: Vec<ScalingEntry>,
}

impl ScalingReport {
    pub fn violations(&self) -> Vec<String> {
        self.entries.iter().filter(|e| !e.holds).map(|e| e.quantity.clone()).collect()
    }

    pub fn check(&self) -> Result<(), CorrectorError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CorrectorError::BoundViolated(v))
        }
    }
}

/// Compares strip norms of `X, ∂yX, ∂zX, Θ, ∂yΘ, ∂zΘ` with `(ε/L)` times their cell norms.
pub fn cell_scaling_check(
    cell: &CellSolution,
    strip: &TriMesh,
    slack: f64,
) -> Result<ScalingReport, CorrectorError> {
    let eps = check_strip_matches(cell, strip)?;
    let e = eps.value();
    let period = cell.period();
    let cells = 2.0 * PI / (e * period);
    let picks: [(&str, &ScalarField, usize); 6] = [
        ("X", &cell.x0, 0),
        ("dX/dy", &cell.x0, 1),
        ("dX/dz", &cell.x0, 2),
        ("Theta", &cell.theta, 0),
        ("dTheta/dy", &cell.theta, 1),
        ("dTheta/dz", &cell.theta, 2),
    ];
    let component = |s: CellSample, which: usize| match which {
        0 => s.value,
        1 => s.grad_y,
        _ => s.grad_z,
    };
    let mut entries = Vec::with_capacity(6);
    for (name, field, which) in picks {
        let failure = RefCell::new(None);
        let strip_norm_sq = integrate(strip, NORM_RULE, |q| match cell_eval(field, q.pos[0], q.pos[1], e) {
            Ok(s) => component(s, which).powi(2) * q.pos[1].cos(),
            Err(err) => {
                failure.borrow_mut().get_or_insert(err);
                0.0
            }
        });
        if let Some(err) = failure.into_inner() {
            return Err(err);
        }
        let cell_norm_sq = match which {
            0 => field.l2_norm_sq(),
            1 => field.grad_norms_sq().0,
            _ => field.grad_norms_sq().1,
        };
        let bound = e / period * cell_norm_sq;
        let ratio = if bound > 0.0 { strip_norm_sq / bound } else { 0.0 };
        let count_bound = cells * e * e * cell_norm_sq;
        let ratio_cell_count = if count_bound > 0.0 { strip_norm_sq / count_bound } else { 0.0 };
        entries.push(ScalingEntry {
            quantity: name.to_string(),
            strip_norm_sq,
            cell_norm_sq,
            bound,
            ratio,
            ratio_cell_count,
            holds: strip_norm_sq <= bound * (1.0 + slack),
        });
    }
    Ok(ScalingReport { eps: e, slack, entries })
}
