//! Cell problems on the basic cell `Y* = {0 < y < L, 0 < z < g(y)}` and the
//! homogenized coefficient `q₀`.
//!
//! All three problems are periodic in `y`, pure Neumann, and fixed by `∫ u = 0`:
//!
//! * `X⁰`:  `Δ X = 0`, `∂X/∂N = N₁` on the top boundary (so `y − X` has zero flux);
//! * `X^ε`: the same with weights `1/cos(εz)` on `∂y` and `cos(εz)` on `∂z`;
//! * `Θ`:   `-div(∇Θ − (X, 0)) = 1 − q₀ − ∂X/∂y` with zero total flux.

use crate::fem::{assemble, solve_spd, EdgePoint, FemError, Gauge, QuadPoint, ScalarField, SolveOptions, SolveReport, WeightedForm};
use crate::mesh::{build_cell_mesh, BoundaryTag, MeshError, TriMesh};
use crate::profile::{BoundaryProfile, ProfileError};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CellError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("Θ load is incompatible: ∫(1 − q₀ − ∂X/∂y) = {residual:.3e} (|Y*| = {area})")]
    ThetaIncompatible { residual: f64, area: f64 },
    #[error("ε·g₁ = {0} must be below π/2")]
    EpsilonTooLarge(f64),
}

/// How the top-boundary flux of the cell problems is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxGeometry {
    /// Flux through the polygonal mesh boundary, assembled in divergence form
    /// `∫ α ∂ψ/∂y`. Keeps `∫ g_h' = 0` and the q₀ energy identity exact on the mesh.
    #[default]
    Discrete,
    /// Line integral `−∫ g'(y) ψ dy` (divided by `cos(εg)` for `X^ε`) with the analytic `g'`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellMeshParams {
    pub ny: usize,
    pub nz: usize,
}

impl Default for CellMeshParams {
    fn default() -> Self {
        Self { ny: 128, nz: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Q0Values {
    /// `(1/|Y*|) ∫ (1 − ∂X/∂y)`.
    pub q0: f64,
    /// `1 − ‖∇X‖²/|Y*|`.
    pub q0_energy: f64,
    pub grad_energy: f64,
    pub cell_area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResiduals {
    pub x0_solver: f64,
    pub x0_iterations: usize,
    /// `|Σ load| / ‖load‖` of the `X⁰` problem.
    pub x0_load_mean: f64,
    pub theta_solver: f64,
    /// `|∫(1 − q₀ − ∂X/∂y)| / |Y*|`.
    pub theta_compatibility: f64,
}

#[derive(Debug, Clone)]
pub struct CellSolution {
    pub profile: BoundaryProfile,
    pub mesh: Arc<TriMesh>,
    pub x0: ScalarField,
    pub q0: Q0Values,
    pub theta: ScalarField,
    pub residuals: CellResiduals,
}

impl CellSolution {
    /// Builds the cell mesh and solves `X⁰`, `q₀` and `Θ`.
    pub fn solve(
        profile: &BoundaryProfile,
        params: CellMeshParams,
        flux: FluxGeometry,
        opts: &SolveOptions,
    ) -> Result<Self, CellError> {
        let mesh = Arc::new(build_cell_mesh(profile, params.ny, params.nz)?);
        Self::solve_on(profile, mesh, flux, opts)
    }

    pub fn solve_on(
        profile: &BoundaryProfile,
        mesh: Arc<TriMesh>,
        flux: FluxGeometry,
        opts: &SolveOptions,
    ) -> Result<Self, CellError> {
        let x0 = solve_x0(profile, &mesh, flux, opts)?;
        let q0 = compute_q0(&x0.field);
        let theta = solve_theta(&x0.field, q0.q0, opts)?;
        Ok(Self {
            profile: profile.clone(),
            mesh,
            residuals: CellResiduals {
                x0_solver: x0.report.residual,
                x0_iterations: x0.report.iterations,
                x0_load_mean: x0.load_mean,
                theta_solver: theta.report.residual,
                theta_compatibility: theta.compatibility,
            },
            x0: x0.field,
            q0,
            theta: theta.field,
        })
    }

    pub fn period(&self) -> f64 {
        self.profile.period()
    }
}

#[derive(Debug, Clone)]
pub struct CellFieldSolve {
    pub field: ScalarField,
    pub report: SolveReport,
    /// `|Σ load| / ‖load‖₂` before the compatibility projection.
    pub load_mean: f64,
}

fn relative_mean(rhs: &[f64]) -> f64 {
    let norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        rhs.iter().sum::<f64>().abs() / norm
    } else {
        0.0
    }
}

/// `X⁰`: harmonic, flux `−g'/√(1+g'²)` through the top boundary, periodic, mean zero.
pub fn solve_x0(
    profile: &BoundaryProfile,
    mesh: &Arc<TriMesh>,
    flux: FluxGeometry,
    opts: &SolveOptions,
) -> Result<CellFieldSolve, CellError> {
    solve_weighted_cell(profile, mesh, 0.0, flux, opts)
}

/// `X^ε`: the weighted auxiliary problem; reduces to `X⁰` at `ε = 0`.
pub fn solve_xeps(
    profile: &BoundaryProfile,
    eps: f64,
    mesh: &Arc<TriMesh>,
    flux: FluxGeometry,
    opts: &SolveOptions,
) -> Result<CellFieldSolve, CellError> {
    let top = eps * profile.g1();
    if top >= std::f64::consts::FRAC_PI_2 {
        return Err(CellError::EpsilonTooLarge(top));
    }
    solve_weighted_cell(profile, mesh, eps, flux, opts)
}

fn solve_weighted_cell(
    profile: &BoundaryProfile,
    mesh: &Arc<TriMesh>,
    eps: f64,
    flux: FluxGeometry,
    opts: &SolveOptions,
) -> Result<CellFieldSolve, CellError> {
    let alpha = move |q: &QuadPoint| 1.0 / (eps * q.pos[1]).cos();
    let beta = move |q: &QuadPoint| (eps * q.pos[1]).cos();
    let form = WeightedForm::new(alpha, beta);
    let form = match flux {
        // ∫_{∂Y*_h} (N₁/cos εz) ψ ds = ∫_{Y*_h} (1/cos εz) ∂ψ/∂y, since the weight is y-independent
        FluxGeometry::Discrete => form.with_flux_load(move |q: &QuadPoint| [alpha(q), 0.0]),
        FluxGeometry::Exact => form.with_neumann(move |e: &EdgePoint| {
            if e.tag == BoundaryTag::Top {
                // −g'(y) dy with dy = n_z ds; the √(1+g'²) of N₁ cancels against dS
                let y = e.pos[0];
                -profile.eval_deriv(y) * e.normal[1] / (eps * profile.eval(y)).cos()
            } else {
                0.0
            }
        }),
    };
    let system = assemble(mesh, &form, Gauge::MeanZero)?;
    let load_mean = relative_mean(&system.rhs);
    let (field, report) = solve_spd(&system, opts)?;
    Ok(CellFieldSolve { field, report, load_mean })
}

/// Direct and energy forms of the homogenized coefficient.
pub fn compute_q0(x0: &ScalarField) -> Q0Values {
    let mesh = x0.mesh();
    let (mut area, mut dy_integral, mut energy) = (0.0, 0.0, 0.0);
    for t in 0..mesh.num_triangles() {
        let a = mesh.signed_area(t);
        let g = x0.gradient(t);
        area += a;
        dy_integral += a * g[0];
        energy += a * (g[0] * g[0] + g[1] * g[1]);
    }
    Q0Values { q0: 1.0 - dy_integral / area, q0_energy: 1.0 - energy / area, grad_energy: energy, cell_area: area }
}

#[derive(Debug, Clone)]
pub struct ThetaSolve {
    pub field: ScalarField,
    pub report: SolveReport,
    /// `|∫(1 − q₀ − ∂X/∂y)| / |Y*|`.
    pub compatibility: f64,
}

/// `Θ` from `∫∇Θ·∇ψ = ∫ X ∂ψ/∂y + ∫ (1 − q₀ − ∂X/∂y) ψ`.
pub fn solve_theta(x0: &ScalarField, q0: f64, opts: &SolveOptions) -> Result<ThetaSolve, CellError> {
    let mesh = Arc::clone(x0.mesh());
    let (mut area, mut source) = (0.0, 0.0);
    for t in 0..mesh.num_triangles() {
        let a = mesh.signed_area(t);
        area += a;
        source += a * (1.0 - q0 - x0.gradient(t)[0]);
    }
    if source.abs() > 1e-8 * area {
        return Err(CellError::ThetaIncompatible { residual: source, area });
    }
    let form = WeightedForm::laplace()
        .with_flux_load(|q: &QuadPoint| [x0.value_at(q.tri, q.bary), 0.0])
        .with_load(|q: &QuadPoint| 1.0 - q0 - x0.gradient(q.tri)[0]);
    let system = assemble(&mesh, &form, Gauge::MeanZero)?;
    let (field, report) = solve_spd(&system, opts)?;
    Ok(ThetaSolve { field, report, compatibility: source.abs() / area })
}

/// Richardson extrapolation of a quantity computed on meshes refined by 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Richardson {
    pub values: [f64; 3],
    /// Observed order `log2((v0 − v1)/(v1 − v2))`.
    pub observed_order: f64,
    /// Extrapolations assuming second order from the coarse and fine pairs.
    pub extrapolated_coarse: f64,
    pub extrapolated_fine: f64,
}

impl Richardson {
    pub fn from_levels(values: [f64; 3]) -> Self {
        let [v0, v1, v2] = values;
        Self {
            values,
            observed_order: ((v0 - v1) / (v1 - v2)).abs().log2(),
            extrapolated_coarse: v1 + (v1 - v0) / 3.0,
            extrapolated_fine: v2 + (v2 - v1) / 3.0,
        }
    }

    /// Spread between the two second-order extrapolations.
    pub fn stability(&self) -> f64 {
        (self.extrapolated_fine - self.extrapolated_coarse).abs()
    }
}

/// `q₀` on three nested cell meshes `(ny, nz)`, `(2ny, 2nz)`, `(4ny, 4nz)`.
pub fn q0_richardson(
    profile: &BoundaryProfile,
    coarsest: CellMeshParams,
    opts: &SolveOptions,
) -> Result<Richardson, CellError> {
    let mut values = [0.0; 3];
    for (level, v) in values.iter_mut().enumerate() {
        let f = 1 << level;
        let mesh = Arc::new(build_cell_mesh(profile, coarsest.ny * f, coarsest.nz * f)?);
        let x0 = solve_x0(profile, &mesh, FluxGeometry::Discrete, opts)?;
        *v = compute_q0(&x0.field).q0;
    }
    Ok(Richardson::from_levels(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileSpec;

    fn reference() -> BoundaryProfile {
        ProfileSpec::reference().validate().unwrap()
    }

    fn opts() -> SolveOptions {
        SolveOptions { max_iter: Some(20_000), ..SolveOptions::with_tol(1e-11) }
    }

    #[test]
    fn flat_profile_has_trivial_cell_functions() {
        let g = ProfileSpec::constant(0.8).validate().unwrap();
        let cell = CellSolution::solve(&g, CellMeshParams { ny: 32, nz: 8 }, FluxGeometry::Discrete, &opts()).unwrap();
        assert!(cell.x0.h1_norm() <= 1e-9);
        assert!(cell.theta.h1_norm() <= 1e-9);
        assert!((cell.q0.q0 - 1.0).abs() <= 1e-12);
        let mesh = Arc::clone(&cell.mesh);
        let xe = solve_xeps(&g, 0.25, &mesh, FluxGeometry::Discrete, &opts()).unwrap();
        assert!(xe.field.h1_norm() <= 1e-9);
    }

    #[test]
    fn q0_identity_and_range_on_reference_profile() {
        let cell = CellSolution::solve(&reference(), CellMeshParams { ny: 64, nz: 16 }, FluxGeometry::Discrete, &opts())
            .unwrap();
        let q = cell.q0;
        assert!(q.q0 > 0.0 && q.q0 < 1.0, "q0 = {}", q.q0);
        assert!((q.q0 - q.q0_energy).abs() < 1e-9, "{} vs {}", q.q0, q.q0_energy);
        assert!(cell.residuals.x0_load_mean < 1e-12);
        assert!(cell.residuals.theta_compatibility < 1e-10);
        let area = q.cell_area;
        let max = cell.x0.max_abs();
        assert!(cell.x0.integral().abs() <= 1e-10 * area * max);
        assert!(cell.theta.integral().abs() <= 1e-10 * area * cell.theta.max_abs());
    }

    #[test]
    fn exact_and_discrete_flux_agree_to_second_order() {
        let g = reference();
        let diff = |ny: usize| {
            let mesh = Arc::new(build_cell_mesh(&g, ny, ny / 4).unwrap());
            let d = solve_x0(&g, &mesh, FluxGeometry::Discrete, &opts()).unwrap();
            let e = solve_x0(&g, &mesh, FluxGeometry::Exact, &opts()).unwrap();
            (compute_q0(&d.field).q0 - compute_q0(&e.field).q0).abs()
        };
        let (d1, d2) = (diff(32), diff(64));
        assert!(d2 < 1e-3);
        assert!(d1 / d2 > 3.0, "ratio {}", d1 / d2);
    }

    #[test]
    fn xeps_approaches_x0() {
        let g = reference();
        let mesh = Arc::new(build_cell_mesh(&g, 48, 12).unwrap());
        let x0 = solve_x0(&g, &mesh, FluxGeometry::Discrete, &opts()).unwrap().field;
        let errs: Vec<f64> = [0.25, 0.125, 0.0625]
            .iter()
            .map(|&e| solve_xeps(&g, e, &mesh, FluxGeometry::Discrete, &opts()).unwrap().field.sub(&x0).h1_norm())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
        // weights differ from 1 by O(ε²)
        assert!(errs[0] / errs[1] > 3.0);
        assert!(solve_xeps(&g, 2.0, &mesh, FluxGeometry::Discrete, &opts()).is_err());
    }

    #[test]
    fn inconsistent_q0_is_rejected_by_theta() {
        let g = reference();
        let mesh = Arc::new(build_cell_mesh(&g, 16, 4).unwrap());
        let x0 = solve_x0(&g, &mesh, FluxGeometry::Discrete, &opts()).unwrap().field;
        let q = compute_q0(&x0).q0;
        assert!(solve_theta(&x0, q, &opts()).is_ok());
        assert!(matches!(solve_theta(&x0, q + 1e-4, &opts()), Err(CellError::ThetaIncompatible { .. })));
    }

    #[test]
    fn richardson_on_exact_quadratic_sequence() {
        let r = Richardson::from_levels([1.0 + 0.16, 1.0 + 0.04, 1.0 + 0.01]);
        assert!((r.observed_order - 2.0).abs() < 1e-12);
        assert!((r.extrapolated_fine - 1.0).abs() < 1e-14);
        assert!(r.stability() < 1e-14);
    }
}
