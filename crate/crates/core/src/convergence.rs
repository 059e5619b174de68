//! ε-sweeps: solve the strip problem on a ladder of `ε = 1/m`, measure the
//! distance to `w₀`, `W₁` and `W₂` in rescaled norms, and fit log-log rates.

use crate::cell::{CellError, CellMeshParams, CellSolution, FluxGeometry};
use crate::correctors::{difference_norm, homogenized_error_l2, truncation, CorrectorError, CorrectorOrder, NormKind};
use crate::fem::SolveOptions;
use crate::homogenized::{solve_homogenized, HomogenizedError, TrigPoly};
use crate::mesh::build_strip_mesh;
use crate::profile::{BoundaryProfile, EpsilonValue, ProfileError, ProfileSpec};
use crate::strip::{solve_thin_on, StripError, StripMeshParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

/// A row whose refined-mesh error differs by more than this fraction is mesh-limited.
pub const MESH_LIMIT_THRESHOLD: f64 = 0.2;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep config: {0}")]
    Config(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Homogenized(#[from] HomogenizedError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("rate fit needs at least 3 points (got {0})")]
    TooFewPoints(usize),
    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{curve} is not decreasing: {detail}")]
pub struct NonDecreasingError {
    pub curve: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Relative residual for strip solves. Fine thin strips cannot reach much
    /// below 1e-9 in double precision, so the sweep default sits at 1e-8.
    #[serde(default = "default_strip_tol")]
    pub strip_tol: f64,
    #[serde(default = "default_cell_tol")]
    pub cell_tol: f64,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

fn default_strip_tol() -> f64 {
    1e-8
}

fn default_cell_tol() -> f64 {
    1e-10
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { strip_tol: default_strip_tol(), cell_tol: default_cell_tol(), max_iter: None }
    }
}

impl SolverConfig {
    fn strip(&self) -> SolveOptions {
        SolveOptions { max_iter: self.max_iter, ..SolveOptions::with_tol(self.strip_tol) }
    }

    fn cell(&self) -> SolveOptions {
        SolveOptions { max_iter: self.max_iter, ..SolveOptions::with_tol(self.cell_tol) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
    /// Stem for the gnuplot `.dat`/`.plt` pair.
    #[serde(default)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "ProfileSpec::reference")]
    pub profile: ProfileSpec,
    #[serde(default = "default_forcing")]
    pub forcing: TrigPoly,
    /// Denominators `m` of `ε = 1/m`, strictly increasing.
    #[serde(default = "default_ladder")]
    pub ladder: Vec<EpsilonValue>,
    #[serde(default)]
    pub strip_mesh: StripMeshParams,
    /// Defaults to the strip's per-cell resolution, so the strip mesh is an
    /// exact ε-scaled copy of the cell mesh.
    #[serde(default)]
    pub cell_mesh: Option<CellMeshParams>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Repeat every row with `h` halved to detect discretization floors.
    #[serde(default = "default_true")]
    pub mesh_check: bool,
    #[serde(default)]
    pub output: OutputPaths,
}

fn default_forcing() -> TrigPoly {
    TrigPoly::cos(1)
}

fn default_ladder() -> Vec<EpsilonValue> {
    [4, 8, 16, 32].into_iter().map(|m| EpsilonValue::new(m).expect("nonzero")).collect()
}

fn default_true() -> bool {
    true
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            profile: ProfileSpec::reference(),
            forcing: default_forcing(),
            ladder: default_ladder(),
            strip_mesh: StripMeshParams::default(),
            cell_mesh: None,
            solver: SolverConfig::default(),
            mesh_check: true,
            output: OutputPaths::default(),
        }
    }
}

/// Size of one planned strip solve, for `--dry-run`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowPlan {
    pub m: u32,
    pub eps: f64,
    pub cells: usize,
    pub dofs: usize,
    pub triangles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPlan {
    pub cell_mesh: CellMeshParams,
    pub cell_dofs: usize,
    pub rows: Vec<RowPlan>,
    /// Same rows on the halved mesh, when the mesh check is enabled.
    pub check_rows: Vec<RowPlan>,
}

impl SweepConfig {
    pub fn cell_params(&self) -> CellMeshParams {
        self.cell_mesh.unwrap_or(CellMeshParams { ny: self.strip_mesh.ny_per_cell, nz: self.strip_mesh.nz })
    }

    /// Validates the config and returns the checked profile.
    pub fn validate(&self) -> Result<BoundaryProfile, SweepError> {
        let profile = self.profile.validate()?;
        self.forcing.validate()?;
        if self.ladder.len() < 3 {
            return Err(SweepError::Config(format!("ladder needs at least 3 values of eps (got {})", self.ladder.len())));
        }
        for eps in &self.ladder {
            EpsilonValue::new(eps.m())?.check_against(&profile)?;
        }
        if self.ladder.windows(2).any(|w| w[1].m() <= w[0].m()) {
            return Err(SweepError::Config("ladder must be strictly decreasing in eps".into()));
        }
        let s = self.strip_mesh;
        if s.ny_per_cell < 2 || s.nz < 1 {
            return Err(SweepError::Config("strip mesh needs ny_per_cell >= 2 and nz >= 1".into()));
        }
        let c = self.cell_params();
        if c.ny < 2 || c.nz < 1 {
            return Err(SweepError::Config("cell mesh needs ny >= 2 and nz >= 1".into()));
        }
        let sv = self.solver;
        if !(sv.strip_tol > 0.0 && sv.cell_tol > 0.0) {
            return Err(SweepError::Config("solver tolerances must be positive".into()));
        }
        Ok(profile)
    }

    /// Mesh sizes of every solve the sweep would run.
    pub fn plan(&self) -> Result<SweepPlan, SweepError> {
        let profile = self.validate()?;
        let rows_for = |ny: usize, nz: usize| -> Vec<RowPlan> {
            self.ladder
                .iter()
                .map(|eps| {
                    let cells = eps.cells(&profile);
                    let cols = cells * ny;
                    RowPlan { m: eps.m(), eps: eps.value(), cells, dofs: cols * (nz + 1), triangles: 2 * cols * nz }
                })
                .collect()
        };
        let s = self.strip_mesh;
        let c = self.cell_params();
        Ok(SweepPlan {
            cell_mesh: c,
            cell_dofs: c.ny * (c.nz + 1),
            rows: rows_for(s.ny_per_cell, s.nz),
            check_rows: if self.mesh_check { rows_for(2 * s.ny_per_cell, 2 * s.nz) } else { Vec::new() },
        })
    }

    /// SHA-256 of the canonical JSON of everything that affects the numbers
    /// (output paths excluded).
    pub fn hash(&self) -> String {
        let mut numeric = self.clone();
        numeric.output = OutputPaths::default();
        let json = serde_json::to_string(&numeric).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    fn refined(&self) -> SweepConfig {
        let mut fine = self.clone();
        fine.strip_mesh.ny_per_cell *= 2;
        fine.strip_mesh.nz *= 2;
        let c = self.cell_params();
        fine.cell_mesh = Some(CellMeshParams { ny: 2 * c.ny, nz: 2 * c.nz });
        fine
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: u32,
    pub eps: f64,
    pub dofs: usize,
    /// `|||w^ε − w₀|||_{L²}`.
    pub e0: f64,
    /// `|||w^ε − W₁|||_{H¹}`.
    pub e1: f64,
    /// `|||w^ε − W₂|||_{H¹}`.
    pub e2: f64,
    pub residual: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub status: RowStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root of the summed squared log residuals.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    #[serde(flatten)]
    pub fit: RateFit,
    /// False when the curve was flagged mesh-limited.
    pub reliable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub p0: CurveFit,
    pub p1: CurveFit,
    pub p2: CurveFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeshFlags {
    pub e0: bool,
    pub e1: bool,
    pub e2: bool,
}

impl MeshFlags {
    pub fn any(&self) -> bool {
        self.e0 || self.e1 || self.e2
    }
}

/// Errors recomputed with `h` halved in both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshCheck {
    pub rows: Vec<SweepRow>,
    /// Per row, `|e_fine − e| / e` for `[e0, e1, e2]`.
    pub relative_change: Vec<[f64; 3]>,
    pub threshold: f64,
    pub q0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
    pub cell_mesh: CellMeshParams,
    pub strip_mesh: StripMeshParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<SweepRow>,
    /// Present only when every row succeeded.
    pub slopes: Option<Slopes>,
    pub q0: f64,
    pub q0_energy: f64,
    pub mesh_limited: MeshFlags,
    pub mesh_check: Option<MeshCheck>,
    pub provenance: Provenance,
}

impl ConvergenceReport {
    pub fn failed_rows(&self) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.status == RowStatus::Failed).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.failed_rows().is_empty() && self.mesh_check.as_ref().is_none_or(|c| c.rows.iter().all(|r| r.status == RowStatus::Ok))
    }
}

/// Least squares on `(log ε, log e)`: `e ≈ exp(intercept) · ε^slope`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    if points.iter().any(|&(e, err)| !(e > 0.0) || !(err > 0.0) || !err.is_finite()) {
        return Err(FitError::DegenerateFit("every eps and error must be positive and finite"));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-14 * (1.0 + mx * mx) {
        return Err(FitError::DegenerateFit("all eps values are equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>().sqrt();
    Ok(RateFit { slope, intercept, residual })
}

struct CellStage {
    cell: CellSolution,
    w0: TrigPoly,
}

fn cell_stage(profile: &BoundaryProfile, config: &SweepConfig) -> Result<CellStage, SweepError> {
    let cell = CellSolution::solve(profile, config.cell_params(), FluxGeometry::Discrete, &config.solver.cell())?;
    let w0 = solve_homogenized(cell.q0.q0, &config.forcing)?;
    Ok(CellStage { cell, w0 })
}

#[derive(Debug, Error)]
enum RowError {
    #[error(transparent)]
    Strip(#[from] StripError),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Corrector(#[from] CorrectorError),
}

fn run_row(profile: &BoundaryProfile, config: &SweepConfig, stage: &CellStage, eps: EpsilonValue) -> SweepRow {
    let start = Instant::now();
    let mut row = SweepRow {
        m: eps.m(),
        eps: eps.value(),
        dofs: 0,
        e0: f64::NAN,
        e1: f64::NAN,
        e2: f64::NAN,
        residual: f64::NAN,
        iterations: 0,
        seconds: 0.0,
        status: RowStatus::Failed,
        error: None,
    };
    let result = (|| -> Result<(), RowError> {
        let s = config.strip_mesh;
        let mesh = Arc::new(build_strip_mesh(profile, eps, s.ny_per_cell, s.nz, s.max_triangles)?);
        let sol = solve_thin_on(&mesh, eps, &config.forcing, &config.solver.strip())?;
        row.dofs = sol.dofs;
        row.residual = sol.solver_residual;
        row.iterations = sol.iterations;
        row.e0 = homogenized_error_l2(&sol.field, &stage.w0, eps);
        let first = truncation(CorrectorOrder::First, &stage.w0, &stage.cell, &mesh)?;
        row.e1 = difference_norm(&sol.field, &first, NormKind::H1);
        let second = truncation(CorrectorOrder::Second, &stage.w0, &stage.cell, &mesh)?;
        row.e2 = difference_norm(&sol.field, &second, NormKind::H1);
        Ok(())
    })();
    match result {
        Ok(()) => row.status = RowStatus::Ok,
        Err(e) => row.error = Some(e.to_string()),
    }
    row.seconds = start.elapsed().as_secs_f64();
    row
}

fn run_rows(profile: &BoundaryProfile, config: &SweepConfig, stage: &CellStage) -> Vec<SweepRow> {
    // rows are independent and individually deterministic; collect keeps ladder order
    config.ladder.par_iter().map(|&eps| run_row(profile, config, stage, eps)).collect()
}

fn fit_curve(rows: &[SweepRow], pick: impl Fn(&SweepRow) -> f64, mesh_limited: bool) -> Result<CurveFit, FitError> {
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, pick(r))).collect();
    Ok(CurveFit { fit: fit_rate(&points)?, reliable: !mesh_limited })
}

/// Runs the sweep on the current rayon pool. Row failures are recorded in the
/// report; only config and cell-stage failures are returned as errors.
pub fn run_sweep(config: &SweepConfig) -> Result<ConvergenceReport, SweepError> {
    let profile = config.validate()?;
    let stage = cell_stage(&profile, config)?;
    let rows = run_rows(&profile, config, &stage);

    let mut mesh_limited = MeshFlags::default();
    let mesh_check = if config.mesh_check {
        let fine = config.refined();
        let fine_stage = cell_stage(&profile, &fine)?;
        let fine_rows = run_rows(&profile, &fine, &fine_stage);
        let rel = |a: f64, b: f64| if a > 0.0 { (b - a).abs() / a } else { f64::INFINITY };
        let relative_change: Vec<[f64; 3]> = rows
            .iter()
            .zip(&fine_rows)
            .map(|(c, f)| [rel(c.e0, f.e0), rel(c.e1, f.e1), rel(c.e2, f.e2)])
            .collect();
        for (ch, (c, f)) in relative_change.iter().zip(rows.iter().zip(&fine_rows)) {
            if c.status != RowStatus::Ok || f.status != RowStatus::Ok {
                continue;
            }
            mesh_limited.e0 |= ch[0] > MESH_LIMIT_THRESHOLD;
            mesh_limited.e1 |= ch[1] > MESH_LIMIT_THRESHOLD;
            mesh_limited.e2 |= ch[2] > MESH_LIMIT_THRESHOLD;
        }
        Some(MeshCheck { rows: fine_rows, relative_change, threshold: MESH_LIMIT_THRESHOLD, q0: fine_stage.cell.q0.q0 })
    } else {
        None
    };

    let slopes = if rows.iter().all(|r| r.status == RowStatus::Ok) {
        Some(Slopes {
            p0: fit_curve(&rows, |r| r.e0, mesh_limited.e0)?,
            p1: fit_curve(&rows, |r| r.e1, mesh_limited.e1)?,
            p2: fit_curve(&rows, |r| r.e2, mesh_limited.e2)?,
        })
    } else {
        None
    };

    Ok(ConvergenceReport {
        rows,
        slopes,
        q0: stage.cell.q0.q0,
        q0_energy: stage.cell.q0.q0_energy,
        mesh_limited,
        mesh_check,
        provenance: Provenance {
            config_hash: config.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            cell_mesh: config.cell_params(),
            strip_mesh: config.strip_mesh,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakLimitReport {
    pub e0: Vec<f64>,
    pub e1: Vec<f64>,
    /// `e₁(smallest ε) / e₁(largest ε)`.
    pub e1_reduction: f64,
}

/// Checks that `e₀` and `e₁` decrease along the ladder (5% slack per step) and
/// that `e₁` at least halves from the largest to the smallest `ε`.
pub fn weak_limit_check(report: &ConvergenceReport) -> Result<WeakLimitReport, NonDecreasingError> {
    if report.rows.len() < 3 {
        return Err(NonDecreasingError { curve: "ladder", detail: format!("needs at least 3 rows (got {})", report.rows.len()) });
    }
    if let Some(bad) = report.rows.iter().find(|r| r.status != RowStatus::Ok) {
        return Err(NonDecreasingError { curve: "ladder", detail: format!("row m={} failed", bad.m) });
    }
    let e0: Vec<f64> = report.rows.iter().map(|r| r.e0).collect();
    let e1: Vec<f64> = report.rows.iter().map(|r| r.e1).collect();
    for (curve, values) in [("e0", &e0), ("e1", &e1)] {
        for (k, w) in values.windows(2).enumerate() {
            if w[1] > 1.05 * w[0] {
                return Err(NonDecreasingError {
                    curve,
                    detail: format!("step {k}: {:.6e} -> {:.6e}", w[0], w[1]),
                });
            }
        }
    }
    let e1_reduction = e1[e1.len() - 1] / e1[0];
    if e1_reduction > 0.5 {
        return Err(NonDecreasingError { curve: "e1", detail: format!("only reduced by a factor {e1_reduction:.3}") });
    }
    Ok(WeakLimitReport { e0, e1, e1_reduction })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SweepError + '_ {
    move |source| SweepError::Io { path: path.to_path_buf(), source }
}

/// Nine significant digits.
fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Columns `eps,dofs,e0,e1,e2,residual,seconds`.
pub fn csv_string(report: &ConvergenceReport) -> Result<String, SweepError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["eps", "dofs", "e0", "e1", "e2", "residual", "seconds"])?;
    for r in &report.rows {
        w.write_record([
            sig9(r.eps),
            r.dofs.to_string(),
            sig9(r.e0),
            sig9(r.e1),
            sig9(r.e2),
            sig9(r.residual),
            format!("{:.3}", r.seconds),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| SweepError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv(report: &ConvergenceReport, path: &Path) -> Result<(), SweepError> {
    std::fs::write(path, csv_string(report)?).map_err(io_err(path))
}

pub fn write_json(report: &ConvergenceReport, path: &Path) -> Result<(), SweepError> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, json + "\n").map_err(io_err(path))
}

/// Writes `<stem>.dat` and a log-log `<stem>.plt` that plots it.
pub fn write_gnuplot(report: &ConvergenceReport, stem: &Path) -> Result<(PathBuf, PathBuf), SweepError> {
    let dat = stem.with_extension("dat");
    let plt = stem.with_extension("plt");
    let mut data = String::from("# eps e0 e1 e2\n");
    for r in report.rows.iter().filter(|r| r.status == RowStatus::Ok) {
        let _ = writeln!(data, "{:.17e} {:.17e} {:.17e} {:.17e}", r.eps, r.e0, r.e1, r.e2);
    }
    std::fs::write(&dat, data).map_err(io_err(&dat))?;

    let dat_name = dat.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let png_name = stem.with_extension("png").file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let anchor = report.rows.first().map(|r| (r.eps, r.e1)).unwrap_or((1.0, 1.0));
    let mut script = String::new();
    let _ = writeln!(script, "set terminal pngcairo size 900,650");
    let _ = writeln!(script, "set output '{png_name}'");
    let _ = writeln!(script, "set logscale xy");
    let _ = writeln!(script, "set xlabel 'eps'");
    let _ = writeln!(script, "set ylabel 'rescaled error'");
    let _ = writeln!(script, "set key left top");
    let _ = writeln!(script, "set grid");
    let _ = writeln!(script, "ref(x) = {:.17e} * sqrt(x / {:.17e})", anchor.1, anchor.0);
    let _ = writeln!(
        script,
        "plot '{dat_name}' using 1:2 with linespoints title 'e0 (L2)', \\\n     '{dat_name}' using 1:3 with linespoints title 'e1 (H1)', \\\n     '{dat_name}' using 1:4 with linespoints title 'e2 (H1)', \\\n     ref(x) with lines dashtype 2 title 'eps^{{1/2}}'"
    );
    std::fs::write(&plt, script).map_err(io_err(&plt))?;
    Ok((dat, plt))
}

/// Writes every output requested in `config.output`.
pub fn write_outputs(report: &ConvergenceReport, out: &OutputPaths) -> Result<Vec<PathBuf>, SweepError> {
    let mut written = Vec::new();
    if let Some(p) = &out.csv {
        write_csv(report, p)?;
        written.push(p.clone());
    }
    if let Some(p) = &out.json {
        write_json(report, p)?;
        written.push(p.clone());
    }
    if let Some(stem) = &out.plot {
        let (dat, plt) = write_gnuplot(report, stem)?;
        written.extend([dat, plt]);
    }
    Ok(written)
}
