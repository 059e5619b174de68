//! JSON payloads for each subcommand. Every struct rejects unknown keys; every
//! field has a default, so `{}` is a valid config for all of them.

use oscilla::cell::CellMeshParams;
use oscilla::convergence::SolverConfig;
use oscilla::strip::StripMeshParams;
use oscilla::{FluxGeometry, ProfileSpec, SolveOptions, TrigPoly};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Read;
use std::path::Path;

use crate::CliError;

/// `cell-solve`: the cell problems on one mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    /// Defaults to `g = 1 + 0.5 cos y`.
    #[serde(default = "ProfileSpec::reference")]
    pub profile: ProfileSpec,
    /// Defaults to 128×32.
    #[serde(default)]
    pub mesh: CellMeshParams,
    #[serde(default)]
    pub flux: FluxGeometry,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self { profile: ProfileSpec::reference(), mesh: CellMeshParams::default(), flux: FluxGeometry::default(), solver: SolverConfig::default() }
    }
}

/// `homogenize`: `w₀` for a forcing, with `q₀` given or computed on a cell mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogenizeConfig {
    #[serde(default = "ProfileSpec::reference")]
    pub profile: ProfileSpec,
    /// Defaults to `cos φ`.
    #[serde(default = "cos1")]
    pub forcing: TrigPoly,
    /// Skips the cell solve when set.
    #[serde(default)]
    pub q0: Option<f64>,
    #[serde(default)]
    pub cell_mesh: CellMeshParams,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl Default for HomogenizeConfig {
    fn default() -> Self {
        Self { profile: ProfileSpec::reference(), forcing: cos1(), q0: None, cell_mesh: CellMeshParams::default(), solver: SolverConfig::default() }
    }
}

/// `solve`: the thin-strip problem for one `ε = 1/m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "ProfileSpec::reference")]
    pub profile: ProfileSpec,
    #[serde(default = "cos1")]
    pub forcing: TrigPoly,
    /// Denominator of `ε = 1/m`; defaults to 8.
    #[serde(default = "default_m")]
    pub m: u32,
    /// Defaults to 256×8 per cell.
    #[serde(default)]
    pub strip_mesh: StripMeshParams,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { profile: ProfileSpec::reference(), forcing: cos1(), m: default_m(), strip_mesh: StripMeshParams::default(), solver: SolverConfig::default() }
    }
}

fn cos1() -> TrigPoly {
    TrigPoly::cos(1)
}

fn default_m() -> u32 {
    8
}

pub fn strip_options(s: &SolverConfig) -> SolveOptions {
    SolveOptions { max_iter: s.max_iter, ..SolveOptions::with_tol(s.strip_tol) }
}

pub fn cell_options(s: &SolverConfig) -> SolveOptions {
    SolveOptions { max_iter: s.max_iter, ..SolveOptions::with_tol(s.cell_tol) }
}

/// Reads a config from `path` (`-` for stdin); `None` gives the defaults.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    path.map_or_else(|| Ok(T::default()), load_from)
}

pub fn load_from<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Config(format!("reading stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    };
    parse(&text, &path.display().to_string())
}

pub fn parse<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        // serde_json appends its own " at line L column C"; report the position once, up front
        let msg = msg.rsplit_once(" at line ").map_or(msg.as_str(), |(head, _)| head);
        CliError::Config(format!("{origin}:{}:{}: {msg}", e.line(), e.column()))
    })
}

/// SHA-256 of the canonical JSON of a config.
pub fn hash<T: Serialize>(kind: &str, config: &T) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::new().chain_update(kind.as_bytes()).chain_update(b"\0").chain_update(json.as_bytes()).finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use oscilla::SweepConfig;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(parse::<CellConfig>("{}", "x").unwrap(), CellConfig::default());
        assert_eq!(parse::<SolveConfig>("{}", "x").unwrap(), SolveConfig::default());
        assert_eq!(parse::<HomogenizeConfig>("{}", "x").unwrap(), HomogenizeConfig::default());
        assert_eq!(parse::<SweepConfig>("{}", "x").unwrap(), SweepConfig::default());
    }

    #[test]
    fn diagnostics_carry_position() {
        let err = parse::<CellConfig>("{\n  \"mesh\": {\"ny\": 4, \"nz\": 2},\n  \"meshh\": 1\n}", "c.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("c.json:3:"), "{msg}");
        assert!(msg.contains("unknown field `meshh`"), "{msg}");
        assert!(!msg.contains(" at line "), "{msg}");

        let err = parse::<CellConfig>("{\"mesh\": {\"ny\": 4,}", "c.json").unwrap_err();
        assert!(err.to_string().starts_with("c.json:1:"), "{err}");
    }

    #[test]
    fn round_trips() {
        let mut s = SolveConfig::default();
        s.forcing = TrigPoly { c0: 0.1, modes: vec![oscilla::homogenized::TrigMode { k: 3, a: 0.1 + 0.2, b: -1.0 / 3.0 }] };
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(parse::<SolveConfig>(&text, "x").unwrap(), s);

        let h = HomogenizeConfig { q0: Some(0.8370242184227731), ..Default::default() };
        assert_eq!(parse::<HomogenizeConfig>(&serde_json::to_string(&h).unwrap(), "x").unwrap(), h);
    }

    #[test]
    fn hash_depends_on_kind_and_content() {
        let c = CellConfig::default();
        assert_eq!(hash("cell", &c), hash("cell", &c.clone()));
        assert_ne!(hash("cell", &c), hash("other", &c));
        let finer = CellConfig { mesh: CellMeshParams { ny: 256, nz: 64 }, ..c.clone() };
        assert_ne!(hash("cell", &c), hash("cell", &finer));
    }

    proptest::proptest! {
        #[test]
        fn sweep_config_round_trips(
            a0 in 0.2f64..1.0,
            c in -0.1f64..0.1,
            f in proptest::collection::vec((1u32..9, -1e3f64..1e3, -1e-6f64..1e-6), 0..5),
            ladder_start in 1u32..6,
            tol in 1e-14f64..1e-6,
            ny in 2usize..300,
        ) {
            let mut cfg = SweepConfig::default();
            cfg.profile = ProfileSpec { a0, modes: vec![oscilla::profile::ProfileMode { k: 2, c, s: c / 3.0 }], a: 1 };
            cfg.forcing = TrigPoly { c0: a0 / 7.0, modes: f.into_iter().map(|(k, a, b)| oscilla::homogenized::TrigMode { k, a, b }).collect() };
            cfg.ladder = (0..4).map(|i| oscilla::EpsilonValue::new(ladder_start << i).unwrap()).collect();
            cfg.solver.strip_tol = tol;
            cfg.strip_mesh.ny_per_cell = ny;
            let text = serde_json::to_string(&cfg).unwrap();
            let back: SweepConfig = parse(&text, "x").unwrap();
            proptest::prop_assert_eq!(&back, &cfg);
            proptest::prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
        }
    }
}
