use crate::config::{self, CellConfig, HomogenizeConfig, SolveConfig};
use crate::CliError;
use oscilla::cell::CellError;
use oscilla::convergence::{write_outputs, RowStatus, SweepError};
use oscilla::fem::{assemble, FemError, Gauge};
use oscilla::homogenized::{residual_check, solve_homogenized};
use oscilla::mesh::{build_strip_mesh, MeshError};
use oscilla::strip::{energy_check, solve_thin_on, strip_form, StripError};
use oscilla::verify::{run_checks, VerifyOptions, CHECK_NAMES};
use oscilla::{CellSolution, ConvergenceReport, EpsilonValue, ProfileSpec, SweepConfig};
use serde::Serialize;
use serde_json::json;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

const CACHE_ENV: &str = "OSCILLA_CACHE_DIR";

fn fem_error(e: FemError) -> CliError {
    match e {
        FemError::NoConvergence { .. } | FemError::IncompatibleRhs { .. } => CliError::Solver(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

fn mesh_error(e: MeshError) -> CliError {
    CliError::Config(e.to_string())
}

fn cell_error(e: CellError) -> CliError {
    match e {
        CellError::Fem(f) => fem_error(f),
        CellError::ThetaIncompatible { .. } => CliError::Solver(e.to_string()),
        CellError::Mesh(m) => mesh_error(m),
        CellError::Profile(_) | CellError::EpsilonTooLarge(_) => CliError::Config(e.to_string()),
    }
}

fn strip_error(e: StripError) -> CliError {
    match e {
        StripError::Fem(f) => fem_error(f),
        StripError::Mesh(m) => mesh_error(m),
        StripError::Profile(_) => CliError::Config(e.to_string()),
    }
}

fn sweep_error(e: SweepError) -> CliError {
    match e {
        SweepError::Cell(c) => cell_error(c),
        SweepError::Fit(_) => CliError::Solver(e.to_string()),
        SweepError::Io { path, source } => CliError::Io { path, source },
        SweepError::Csv(_) => CliError::Failed(e.to_string()),
        SweepError::Config(_) | SweepError::Profile(_) | SweepError::Homogenized(_) => CliError::Config(e.to_string()),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, format!("{text}\n")).map_err(|source| CliError::Io { path: path.to_path_buf(), source }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Solution cache under `$OSCILLA_CACHE_DIR`, keyed by config hash.
struct Cache {
    path: Option<PathBuf>,
}

impl Cache {
    fn new(kind: &str, key: &str) -> Self {
        let path = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()).map(|d| PathBuf::from(d).join(format!("{kind}-{key}.json")));
        Self { path }
    }

    fn load<T: serde::de::DeserializeOwned>(&self) -> Option<T> {
        let path = self.path.as_ref()?;
        let text = std::fs::read_to_string(path).ok()?;
        match serde_json::from_str(&text) {
            Ok(v) => {
                eprintln!("cache hit: {}", path.display());
                Some(v)
            }
            Err(e) => {
                eprintln!("warning: ignoring unreadable cache entry {}: {e}", path.display());
                None
            }
        }
    }

    fn store<T: Serialize>(&self, value: &T) {
        let Some(path) = &self.path else { return };
        let result = path.parent().map_or(Ok(()), std::fs::create_dir_all).and_then(|_| {
            let tmp = path.with_extension("json.tmp");
            std::fs::write(&tmp, serde_json::to_string(value).expect("report serializes"))?;
            std::fs::rename(&tmp, path)
        });
        if let Err(e) = result {
            eprintln!("warning: could not write cache entry {}: {e}", path.display());
        }
    }
}

pub fn validate_profile(path: Option<&Path>, dry: bool) -> Result<(), CliError> {
    let spec: ProfileSpec = path.map_or_else(|| Ok(ProfileSpec::reference()), config::load_from)?;
    if dry {
        emit(&to_json(&json!({ "config": spec })), None)?;
        return Ok(());
    }
    let profile = spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    emit(
        &to_json(&json!({
            "valid": true,
            "profile": spec,
            "period": profile.period(),
            "g1": profile.g1(),
            "g_min": profile.g_min(),
            "mean": profile.mean(),
        })),
        None,
    )
}

#[derive(Debug, Serialize, serde::Deserialize)]
struct CellOutput {
    q0: f64,
    q0_energy: f64,
    grad_energy: f64,
    cell_area: f64,
    mesh: CellMeshInfo,
    residuals: oscilla::cell::CellResiduals,
    config_hash: String,
}

#[derive(Debug, Serialize, serde::Deserialize)]
struct CellMeshInfo {
    ny: usize,
    nz: usize,
    h: f64,
}

fn mesh_plan(ny: usize, nz: usize) -> serde_json::Value {
    json!({ "ny": ny, "nz": nz, "vertices": ny * (nz + 1), "triangles": 2 * ny * nz })
}

pub fn cell_solve(path: Option<&Path>, output: Option<&Path>, dry: bool) -> Result<(), CliError> {
    let cfg: CellConfig = config::load(path)?;
    let profile = cfg.profile.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let key = config::hash("cell", &cfg);
    if dry {
        return emit(&to_json(&json!({ "config": cfg, "config_hash": key, "mesh": mesh_plan(cfg.mesh.ny, cfg.mesh.nz) })), None);
    }
    let cache = Cache::new("cell", &key);
    let out = match cache.load::<CellOutput>() {
        Some(out) => out,
        None => {
            let cell = CellSolution::solve(&profile, cfg.mesh, cfg.flux, &config::cell_options(&cfg.solver)).map_err(cell_error)?;
            let out = CellOutput {
                q0: cell.q0.q0,
                q0_energy: cell.q0.q0_energy,
                grad_energy: cell.q0.grad_energy,
                cell_area: cell.q0.cell_area,
                mesh: CellMeshInfo { ny: cfg.mesh.ny, nz: cfg.mesh.nz, h: cell.mesh.h() },
                residuals: cell.residuals,
                config_hash: key,
            };
            cache.store(&out);
            out
        }
    };
    emit(&to_json(&out), output)
}

pub fn homogenize(path: Option<&Path>, output: Option<&Path>, dry: bool) -> Result<(), CliError> {
    let cfg: HomogenizeConfig = config::load(path)?;
    cfg.forcing.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let profile = cfg.profile.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if dry {
        let cell = cfg.q0.is_none().then(|| mesh_plan(cfg.cell_mesh.ny, cfg.cell_mesh.nz));
        return emit(&to_json(&json!({ "config": cfg, "cell_mesh": cell })), None);
    }
    let (q0, q0_energy) = match cfg.q0 {
        Some(q0) => (q0, None),
        None => {
            let cell = CellSolution::solve(&profile, cfg.cell_mesh, Default::default(), &config::cell_options(&cfg.solver)).map_err(cell_error)?;
            (cell.q0.q0, Some(cell.q0.q0_energy))
        }
    };
    let w0 = solve_homogenized(q0, &cfg.forcing).map_err(|e| CliError::Config(e.to_string()))?;
    let residual = residual_check(q0, &cfg.forcing, &w0);
    emit(&to_json(&json!({ "q0": q0, "q0_energy": q0_energy, "w0": w0, "residual": residual })), output)
}

pub fn solve(path: Option<&Path>, field_out: Option<&Path>, dump_matrix: Option<&Path>, dry: bool) -> Result<(), CliError> {
    let cfg: SolveConfig = config::load(path)?;
    cfg.forcing.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let profile = cfg.profile.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let eps = EpsilonValue::new(cfg.m).map_err(|e| CliError::Config(e.to_string()))?;
    eps.check_against(&profile).map_err(|e| CliError::Config(e.to_string()))?;
    let s = cfg.strip_mesh;
    if dry {
        let cols = eps.cells(&profile) * s.ny_per_cell;
        let plan = json!({ "eps": eps.value(), "cells": eps.cells(&profile), "dofs": cols * (s.nz + 1), "triangles": 2 * cols * s.nz });
        return emit(&to_json(&json!({ "config": cfg, "strip_mesh": plan })), None);
    }
    let mesh = Arc::new(build_strip_mesh(&profile, eps, s.ny_per_cell, s.nz, s.max_triangles).map_err(mesh_error)?);
    if let Some(mm) = dump_matrix {
        let system = assemble(&mesh, &strip_form(&cfg.forcing), Gauge::None).map_err(fem_error)?;
        std::fs::write(mm, system.matrix.to_matrix_market()).map_err(|source| CliError::Io { path: mm.to_path_buf(), source })?;
    }
    let sol = solve_thin_on(&mesh, eps, &cfg.forcing, &config::strip_options(&cfg.solver)).map_err(strip_error)?;
    let field = sol.field.to_text();
    match field_out {
        Some(p) => std::fs::write(p, &field).map_err(|source| CliError::Io { path: p.to_path_buf(), source })?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(field.as_bytes()).map_err(|source| CliError::Io { path: "<stdout>".into(), source })?;
        }
    }
    let summary = json!({
        "eps": eps.value(),
        "m": eps.m(),
        "dofs": sol.dofs,
        "residual": sol.solver_residual,
        "iterations": sol.iterations,
        "energy_check": energy_check(&sol),
    });
    // one line, so it can be split off the field text
    emit(&serde_json::to_string(&summary).expect("summary serializes"), None)
}

pub struct OutputOverrides {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

pub fn converge(path: Option<&Path>, overrides: OutputOverrides, dry: bool) -> Result<(), CliError> {
    let mut cfg: SweepConfig = config::load(path)?;
    cfg.output.csv = overrides.csv.or(cfg.output.csv);
    cfg.output.json = overrides.json.or(cfg.output.json);
    cfg.output.plot = overrides.plot.or(cfg.output.plot);
    let plan = cfg.plan().map_err(sweep_error)?;
    let key = cfg.hash();
    if dry {
        return emit(&to_json(&json!({ "config": cfg, "config_hash": key, "plan": plan })), None);
    }
    let cache = Cache::new("converge", &key);
    let report = match cache.load::<ConvergenceReport>() {
        Some(r) => r,
        None => {
            let r = oscilla::run_sweep(&cfg).map_err(sweep_error)?;
            if r.is_complete() {
                cache.store(&r);
            }
            r
        }
    };
    for row in &report.rows {
        let status = match row.status {
            RowStatus::Ok => "ok".to_string(),
            RowStatus::Failed => format!("FAILED: {}", row.error.as_deref().unwrap_or("unknown")),
        };
        eprintln!("eps=1/{:<4} dofs={:<9} e1={:.4e} e2={:.4e} {status}", row.m, row.dofs, row.e1, row.e2);
    }
    write_outputs(&report, &cfg.output).map_err(sweep_error)?;
    emit(&to_json(&report), None)?;
    if !report.is_complete() {
        let failed: Vec<String> = report.failed_rows().iter().map(|r| format!("1/{}", r.m)).collect();
        return Err(CliError::Partial(format!("sweep incomplete; failed rows: {}", failed.join(", "))));
    }
    Ok(())
}

pub fn verify(path: Option<&Path>, only: Vec<u8>, q0_identity_offset: f64, jobs: Option<usize>, dry: bool) -> Result<(), CliError> {
    let sweep: SweepConfig = config::load(path)?;
    sweep.validate().map_err(sweep_error)?;
    if let Some(bad) = only.iter().find(|&&id| !(1..=CHECK_NAMES.len() as u8).contains(&id)) {
        return Err(CliError::Config(format!("--only: no check {bad} (valid ids are 1..={})", CHECK_NAMES.len())));
    }
    if dry {
        let checks: Vec<_> = CHECK_NAMES
            .iter()
            .enumerate()
            .map(|(i, n)| (i as u8 + 1, *n))
            .filter(|(id, _)| only.is_empty() || only.contains(id))
            .map(|(id, name)| json!({ "id": id, "name": name }))
            .collect();
        return emit(&to_json(&json!({ "checks": checks, "sweep": sweep })), None);
    }
    let n = jobs.unwrap_or_else(rayon::current_num_threads);
    let opts = VerifyOptions { only, q0_identity_offset, sweep, jobs: [n, if n == 1 { 2 } else { 1 }], ..VerifyOptions::default() };
    let results = run_checks(&opts);
    for r in &results {
        println!("{} {:>2} {}: {} ({:.1}s)", if r.passed { "PASS" } else { "FAIL" }, r.id, r.name, r.detail, r.seconds);
    }
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| format!("{} ({})", r.id, r.name)).collect();
    println!("{} of {} checks passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("failed checks: {}", failed.join(", "))))
    }
}
