//! The full problem on the thin strip `R^ε` in `(φ, θ)` coordinates:
//!
//! ```text
//! −(1/cos θ) ∂θ(cos θ ∂θ w) − (1/cos²θ) ∂²φ w + w = f(φ)
//! ```
//!
//! with natural Neumann conditions and 2π-periodicity in `φ`. Multiplying by
//! `cos θ` gives the symmetric weak form assembled here.

use crate::fem::{assemble, integrate, solve_spd, FemError, Gauge, QuadPoint, ScalarField, SolveOptions, WeightedForm};
use crate::homogenized::TrigPoly;
use crate::mesh::{build_strip_mesh, MeshError, TriMesh};
use crate::profile::{BoundaryProfile, EpsilonValue, ProfileError};
use crate::quadrature::TriangleRule;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StripError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripMeshParams {
    /// Lattice columns per oscillation cell; fixed across ε.
    pub ny_per_cell: usize,
    /// Lattice layers across the thickness.
    pub nz: usize,
    #[serde(default = "default_max_triangles")]
    pub max_triangles: usize,
}

fn default_max_triangles() -> usize {
    4_000_000
}

impl Default for StripMeshParams {
    fn default() -> Self {
        Self { ny_per_cell: 256, nz: 8, max_triangles: default_max_triangles() }
    }
}

#[derive(Debug, Clone)]
pub struct StripSolution {
    pub field: ScalarField,
    pub eps: EpsilonValue,
    pub forcing: TrigPoly,
    pub solver_residual: f64,
    pub iterations: usize,
    pub dofs: usize,
}

pub fn strip_form(f: &TrigPoly) -> WeightedForm<'_> {
    WeightedForm::new(|q: &QuadPoint| 1.0 / q.pos[1].cos(), |q: &QuadPoint| q.pos[1].cos())
        .with_mass(|q: &QuadPoint| q.pos[1].cos())
        .with_load(move |q: &QuadPoint| f.eval(q.pos[0]) * q.pos[1].cos())
}

pub fn solve_thin(
    profile: &BoundaryProfile,
    eps: EpsilonValue,
    f: &TrigPoly,
    params: StripMeshParams,
    opts: &SolveOptions,
) -> Result<StripSolution, StripError> {
    eps.check_against(profile)?;
    let mesh = Arc::new(build_strip_mesh(profile, eps, params.ny_per_cell, params.nz, params.max_triangles)?);
    solve_thin_on(&mesh, eps, f, opts)
}

pub fn solve_thin_on(
    mesh: &Arc<TriMesh>,
    eps: EpsilonValue,
    f: &TrigPoly,
    opts: &SolveOptions,
) -> Result<StripSolution, StripError> {
    let system = assemble(mesh, &strip_form(f), Gauge::None)?;
    let (field, report) = solve_spd(&system, opts)?;
    Ok(StripSolution {
        field,
        eps,
        forcing: f.clone(),
        solver_residual: report.residual,
        iterations: report.iterations,
        dofs: system.n_dofs(),
    })
}

/// `(a_ε(w, w) − (w, f)_ε) / (w, f)_ε`, evaluated with the assembly quadrature.
///
/// Any Galerkin approximation on a subspace (including every CG iterate started
/// from zero) satisfies this identity, so a large value flags an inconsistent
/// field/load pair rather than an early-stopped solve.
pub fn energy_check(sol: &StripSolution) -> f64 {
    let w = &sol.field;
    let mesh = w.mesh();
    let f = &sol.forcing;
    let energy = integrate(mesh, TriangleRule::Gauss3, |q| {
        let g = w.gradient(q.tri);
        let v = w.value_at(q.tri, q.bary);
        let c = q.pos[1].cos();
        g[0] * g[0] / c + c * g[1] * g[1] + c * v * v
    });
    let work = integrate(mesh, TriangleRule::Gauss3, |q| w.value_at(q.tri, q.bary) * f.eval(q.pos[0]) * q.pos[1].cos());
    if work == 0.0 {
        if energy == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (energy - work) / work
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correctors::{norm_rescaled, NormKind};
    use crate::profile::ProfileSpec;

    fn params() -> StripMeshParams {
        StripMeshParams { ny_per_cell: 8, nz: 4, ..Default::default() }
    }

    #[test]
    fn zero_and_constant_forcing() {
        let g = ProfileSpec::reference().validate().unwrap();
        let eps = EpsilonValue::new(4).unwrap();
        let sol = solve_thin(&g, eps, &TrigPoly::default(), params(), &SolveOptions::default()).unwrap();
        assert_eq!(sol.field.max_abs(), 0.0);
        assert_eq!(energy_check(&sol), 0.0);

        let sol = solve_thin(&g, eps, &TrigPoly::constant(2.0), params(), &SolveOptions::default()).unwrap();
        for v in sol.field.values() {
            assert!((v - 2.0).abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn energy_identity_and_apriori_bound() {
        let g = ProfileSpec::reference().validate().unwrap();
        let eps = EpsilonValue::new(4).unwrap();
        let f = TrigPoly { c0: 0.5, modes: vec![crate::homogenized::TrigMode { k: 2, a: 1.0, b: -0.3 }] };
        let sol = solve_thin(&g, eps, &f, params(), &SolveOptions::default()).unwrap();
        assert!(energy_check(&sol).abs() <= 1e-8);

        let mesh = sol.field.mesh();
        let w_norm = norm_rescaled(mesh, eps, NormKind::L2, |q| (sol.field.value_at(q.tri, q.bary), [0.0; 2]));
        let f_norm = norm_rescaled(mesh, eps, NormKind::L2, |q| (f.eval(q.pos[0]), [0.0; 2]));
        assert!(w_norm <= f_norm);

        // a non-Galerkin perturbation breaks the identity
        let mut perturbed = sol.clone();
        let bumped: Vec<f64> = sol.field.values().iter().map(|v| 1.05 * v).collect();
        perturbed.field = ScalarField::new(Arc::clone(mesh), bumped).unwrap();
        assert!(energy_check(&perturbed).abs() > 1e-2);
    }

    #[test]
    fn truncated_solve_keeps_galerkin_identity_but_not_residual() {
        let g = ProfileSpec::reference().validate().unwrap();
        let eps = EpsilonValue::new(4).unwrap();
        let opts = SolveOptions { max_iter: Some(2), allow_unconverged: true, ..SolveOptions::default() };
        let sol = solve_thin(&g, eps, &TrigPoly::cos(1), params(), &opts).unwrap();
        assert!(sol.solver_residual > 1e-3);
        assert!(energy_check(&sol).abs() < 1e-10);
    }

    #[test]
    fn flat_strip_approaches_homogenized_limit() {
        // g ≡ 1 gives q₀ = 1, w₀ = cos φ / 2
        let g = ProfileSpec::constant(1.0).validate().unwrap();
        let err = |m: u32| {
            let eps = EpsilonValue::new(m).unwrap();
            let sol = solve_thin(&g, eps, &TrigPoly::cos(1), params(), &SolveOptions::default()).unwrap();
            sol.field.values().iter().zip(&sol.field.mesh().vertices).map(|(v, p)| (v - 0.5 * p[0].cos()).abs()).fold(0.0, f64::max)
        };
        let (e4, e16) = (err(4), err(16));
        assert!(e16 < e4 && e16 < 2e-3, "{e4} {e16}");
    }
}
