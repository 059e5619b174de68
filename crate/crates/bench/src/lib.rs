//! Shared fixtures for the criterion benchmarks.

use oscilla::cell::{CellMeshParams, CellSolution, FluxGeometry};
use oscilla::profile::{BoundaryProfile, ProfileSpec};
use oscilla::SolveOptions;

pub fn reference_profile() -> BoundaryProfile {
    ProfileSpec::reference().validate().expect("reference profile is valid")
}

pub fn reference_cell(ny: usize, nz: usize) -> CellSolution {
    CellSolution::solve(&reference_profile(), CellMeshParams { ny, nz }, FluxGeometry::Discrete, &SolveOptions::default())
        .expect("reference cell solve")
}
