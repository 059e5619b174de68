//! Numerical homogenization of the Neumann problem for `-Δv + v = f` on thin
//! spherical strips whose boundary oscillates with period `εL`.
//!
//! The pipeline, bottom-up:
//!
//! * [`profile`]: the oscillation profile `g` and admissible `ε = 1/m`;
//! * [`mesh`]: boundary-fitted periodic triangulations of the cell `Y*` and strip `R^ε`;
//! * [`fem`]: weighted P1 assembly and preconditioned CG;
//! * [`cell`]: cell functions `X⁰`, `X^ε`, `Θ` and the homogenized coefficient `q₀`;
//! * [`homogenized`]: the 1D limit equation `-q₀ w₀'' + w₀ = f`, solved in Fourier space;
//! * [`strip`]: the full problem on `R^ε` in `(φ, θ)` coordinates;
//! * [`correctors`]: first/second-order truncations and rescaled weighted norms;
//! * [`convergence`]: ε-sweeps, rate fits and reports;
//! * [`verify`]: the self-verification checks run by `oscilla verify`.

pub mod cell;
pub mod convergence;
pub mod correctors;
pub mod fem;
pub mod homogenized;
pub mod mesh;
pub mod profile;
pub mod quadrature;
pub mod strip;
pub mod verify;

pub use cell::{CellSolution, FluxGeometry};
pub use convergence::{fit_rate, run_sweep, ConvergenceReport, SweepConfig};
pub use fem::{ScalarField, SolveOptions};
pub use homogenized::TrigPoly;
pub use mesh::TriMesh;
pub use profile::{BoundaryProfile, EpsilonValue, ProfileSpec};
