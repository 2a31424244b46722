//! The experiment file: one versioned document, TOML or JSON.

use std::path::{Path, PathBuf};

use hjb_core::galerkin::PointRule;
use hjb_core::initial::InitialCondition;
use hjb_core::quadratic::QuadraticData;
use hjb_core::verify::LatticeConfig;
use hjb_core::viscous::GridSpec;
use hjb_core::SpectrumDescriptor;
use hjb_core::deterministic::SolverConfig;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Seed for sample lattices and Monte-Carlo streams.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Worker threads; `HJB_THREADS` takes precedence.
    #[serde(default)]
    pub threads: Option<usize>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    SpectrumCheck(SpectrumCheck),
    Riccati(Riccati),
    LaxOleinik(LaxOleinik),
    SolveFd(SolveFd),
    Verify(Verify),
    Converge(Converge),
    StorageSim(StorageSim),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::SpectrumCheck(_) => "spectrum-check",
            Experiment::Riccati(_) => "riccati",
            Experiment::LaxOleinik(_) => "lax-oleinik",
            Experiment::SolveFd(_) => "solve-fd",
            Experiment::Verify(_) => "verify",
            Experiment::Converge(_) => "converge",
            Experiment::StorageSim(_) => "storage-sim",
        }
    }
}

fn default_n_terms() -> usize {
    100
}

fn default_eigenvalues() -> usize {
    16
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumCheck {
    pub spectrum: SpectrumDescriptor,
    #[serde(default = "default_n_terms")]
    pub n_terms: usize,
    /// How many eigenvalues to list.
    #[serde(default = "default_eigenvalues")]
    pub eigenvalues: usize,
}

fn default_ode_steps() -> usize {
    10_000
}

fn default_riccati_tol() -> f64 {
    1e-9
}

/// Closed form against RK4 over the full product of the three lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Riccati {
    pub lambdas: Vec<f64>,
    pub mu0: Vec<f64>,
    pub times: Vec<f64>,
    #[serde(default = "default_ode_steps")]
    pub ode_steps: usize,
    #[serde(default = "default_riccati_tol")]
    pub tol: f64,
}

/// Evaluation points: an explicit list or a Halton lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSet {
    List { points: Vec<Vec<f64>> },
    Lattice { dim: usize, count: usize, half_width: f64 },
}

fn default_psi_tol() -> f64 {
    1e-6
}

fn default_minimizer_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaxOleinik {
    pub spectrum: SpectrumDescriptor,
    pub initial: InitialCondition,
    pub t: f64,
    pub points: PointSet,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Gap allowed against the closed form for quadratic data.
    #[serde(default = "default_psi_tol")]
    pub psi_tol: f64,
    #[serde(default = "default_minimizer_tol")]
    pub minimizer_tol: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceExport {
    /// Stored slices nearest to these times go to `slices.csv`; the last
    /// slice when empty.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Keep every `stride`-th node along each axis.
    #[serde(default)]
    pub stride: Option<usize>,
}

fn default_check_count() -> usize {
    200
}

fn default_check_half_width() -> f64 {
    2.0
}

fn default_check_t_min() -> f64 {
    0.1
}

/// Sup error of the grid against the exact field on a lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdCheck {
    #[serde(default = "default_check_count")]
    pub count: usize,
    #[serde(default = "default_check_half_width")]
    pub half_width: f64,
    #[serde(default = "default_check_t_min")]
    pub t_min: f64,
    /// Defaults to 5e-3 in one dimension and 1e-2 above.
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveFd {
    pub spectrum: SpectrumDescriptor,
    pub initial: InitialCondition,
    pub dim: usize,
    pub grid: GridSpec,
    #[serde(default)]
    pub export: SliceExport,
    #[serde(default)]
    pub check: Option<FdCheck>,
}

/// Where the field under test comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    ClosedForm {
        #[serde(default)]
        level: Option<usize>,
    },
    Oracle,
    Grid { dim: usize, grid: GridSpec },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualCheck {
    pub active_modes: Vec<usize>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn default_gap_times() -> usize {
    10
}

fn default_shift() -> f64 {
    0.1
}

fn default_shift_tol() -> f64 {
    1e-12
}

/// Grid against oracle over `[gamma, T]`, plus the constant-shift run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonCheck {
    pub gammas: Vec<f64>,
    #[serde(default = "default_gap_times")]
    pub n_times: usize,
    #[serde(default = "default_shift")]
    pub shift: f64,
    #[serde(default = "default_shift_tol")]
    pub shift_tol: f64,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verify {
    pub spectrum: SpectrumDescriptor,
    pub initial: InitialCondition,
    pub field: FieldSource,
    #[serde(default)]
    pub lattice: LatticeConfig,
    /// Scheme-aware default when absent.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Times for the growth check; five points across the lattice window
    /// when empty.
    #[serde(default)]
    pub growth_times: Vec<f64>,
    #[serde(default)]
    pub residual: Option<ResidualCheck>,
    #[serde(default)]
    pub comparison: Option<ComparisonCheck>,
}

fn default_converge_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Converge {
    pub spectrum: SpectrumDescriptor,
    pub initial: InitialCondition,
    pub t: f64,
    pub point: PointRule,
    pub levels: Vec<usize>,
    #[serde(default = "default_converge_tol")]
    pub tol: f64,
}

fn default_sigma() -> f64 {
    1.0
}

fn default_checkpoints() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageSim {
    pub sites: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    pub objective: QuadraticData,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// Initial site levels; zero when absent.
    #[serde(default)]
    pub k0: Option<Vec<f64>>,
    #[serde(default)]
    pub bias_allowance: f64,
    /// Also write every recorded state to `paths.csv`.
    #[serde(default)]
    pub save_paths: bool,
}

/// Reads and validates a config; every failure here maps to exit code 2.
pub fn load(path: &Path) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let parsed: Result<ExperimentConfig, (String, String)> = match ext.as_str() {
        "toml" => {
            let de = toml::Deserializer::parse(&text).map_err(|e| format!("{}: {}", path.display(), last_line(&e)))?;
            serde_path_to_error::deserialize(de).map_err(|e| (e.path().to_string(), last_line(e.inner())))
        }
        "json" => {
            let mut de = serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(&mut de).map_err(|e| (e.path().to_string(), last_line(e.inner())))
        }
        other => return Err(format!("{}: unknown config extension `{other}` (use .toml or .json)", path.display())),
    };
    let cfg = parsed.map_err(|(at, msg)| {
        let (at, msg) = if at == "experiment" { refine(&text, &ext).unwrap_or((at, msg)) } else { (at, msg) };
        if at == "." || at.is_empty() {
            format!("{}: {msg}", path.display())
        } else {
            format!("{}: at `{at}`: {msg}", path.display())
        }
    })?;
    validate(&cfg)?;
    Ok(cfg)
}

fn last_line(err: &impl std::fmt::Display) -> String {
    let msg = err.to_string();
    msg.lines().rev().map(str::trim).find(|l| !l.is_empty()).unwrap_or("").to_string()
}

/// Tagged enums buffer their body, so errors inside `experiment` lose their
/// path. Deserializing the body again as the named variant recovers it.
fn refine(text: &str, ext: &str) -> Option<(String, String)> {
    let doc: serde_json::Value = if ext == "toml" { toml::from_str(text).ok()? } else { serde_json::from_str(text).ok()? };
    let mut body = doc.get("experiment")?.as_object()?.clone();
    let kind = body.remove("kind")?.as_str()?.to_string();
    let body = serde_json::Value::Object(body);
    fn probe<T: serde::de::DeserializeOwned>(body: serde_json::Value) -> Option<(String, String)> {
        serde_path_to_error::deserialize::<_, T>(body)
            .err()
            .map(|e| (format!("experiment.{}", e.path()), last_line(e.inner())))
    }
    match kind.as_str() {
        "spectrum-check" => probe::<SpectrumCheck>(body),
        "riccati" => probe::<Riccati>(body),
        "lax-oleinik" => probe::<LaxOleinik>(body),
        "solve-fd" => probe::<SolveFd>(body),
        "verify" => probe::<Verify>(body),
        "converge" => probe::<Converge>(body),
        "storage-sim" => probe::<StorageSim>(body),
        _ => None,
    }
}

/// Checks that need more than the type system.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), String> {
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(format!(
            "schema_version: expected {SCHEMA_VERSION}, found {}",
            cfg.schema_version
        ));
    }
    if cfg.threads == Some(0) {
        return Err("threads: must be at least 1".into());
    }
    match &cfg.experiment {
        Experiment::StorageSim(_) if cfg.seed.is_none() => {
            Err("seed: a storage-sim run needs a seed (config `seed` or --seed)".into())
        }
        Experiment::Converge(c) if !matches!(c.initial, InitialCondition::DiagonalQuadratic(_)) => {
            Err("experiment.initial: converge needs `diagonal_quadratic` data".into())
        }
        Experiment::Verify(v) => match (&v.field, &v.initial) {
            (FieldSource::ClosedForm { .. }, InitialCondition::DiagonalQuadratic(_)) => Ok(()),
            (FieldSource::ClosedForm { .. }, _) => {
                Err("experiment.field: closed_form needs `diagonal_quadratic` data".into())
            }
            (FieldSource::Oracle, InitialCondition::Separable(_)) => Ok(()),
            (FieldSource::Oracle, _) => Err("experiment.field: oracle needs `separable` data".into()),
            _ if v.comparison.is_some() && !matches!(v.field, FieldSource::Grid { .. }) => {
                Err("experiment.comparison: needs a grid field".into())
            }
            _ => Ok(()),
        },
        _ => Ok(()),
    }
}
