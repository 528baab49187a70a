//! Configuration-driven parameter sweeps and figure-data export.
//!
//! A sweep evaluates the Cartesian product `α × r × σ² × scenario` in the
//! order the lists appear in the config and appends one CSV row per point.
//! A JSON manifest next to the CSV records the config hash so an interrupted
//! run can be resumed.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channels::{prepare_scenario, NodeCount, Ordering, PhaseNoise, ScenarioSpec};
use crate::error::{Error, Result};
use crate::fock::{ProbeParams, TruncationConfig, DEFAULT_TAIL_TOL, DESK_N_MAX, MAX_SQUEEZING};
use crate::homodyne::{fi_homodyne_state, DEFAULT_DERIVATIVE_STEP, PHASE_QUADRATURE};
use crate::metrology::{qfi_of_state, qfi_pure_analytic, Reliability, DEFAULT_DELTA_THETA};
use crate::wigner::{wigner_fock, wigner_gaussian_mixture, PhaseSpaceGrid, WignerField};

pub const LIBRARY_NAME: &str = env!("CARGO_PKG_NAME");
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column order of the results CSV.
pub const RESULT_COLUMNS: [&str; 16] = [
    "index",
    "alpha",
    "r",
    "sigma2",
    "scenario",
    "n_max",
    "qfi",
    "qfi_forward",
    "richardson_check",
    "clipped",
    "fi",
    "fi_normalization_error",
    "optimality_ratio",
    "tail_population",
    "status",
    "message",
];

/// Scientific notation with 17 significant digits (exact f64 round trip).
pub fn format_value(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_value).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Qfi,
    Fi,
    Zeta,
    OptimalityRatio,
    Wigner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WignerMethod {
    #[default]
    Mixture,
    Fock,
}

fn default_scenarios() -> Vec<Ordering> {
    Ordering::BOTH.to_vec()
}
fn default_delta_theta() -> f64 {
    DEFAULT_DELTA_THETA
}
fn default_n_max() -> usize {
    DESK_N_MAX
}
fn default_tail_tol() -> f64 {
    DEFAULT_TAIL_TOL
}
fn default_outputs() -> Vec<Output> {
    vec![Output::Qfi, Output::Fi]
}
fn default_output_path() -> PathBuf {
    PathBuf::from("results.csv")
}
fn default_x_range() -> [f64; 2] {
    [-6.0, 14.0]
}
fn default_p_range() -> [f64; 2] {
    [-6.0, 6.0]
}
fn default_resolution() -> usize {
    101
}

/// Flat key/value sweep description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub alpha_values: Vec<f64>,
    pub r_values: Vec<f64>,
    pub sigma2_values: Vec<f64>,
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<Ordering>,
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "default_delta_theta")]
    pub delta_theta: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    /// Largest truncation tried when `n_max` fails the tail check; the
    /// dimension doubles up to this value. Unset means no escalation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_n_max: Option<usize>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Output>,
    #[serde(default = "default_output_path")]
    pub output_path: PathBuf,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_x_range")]
    pub wigner_x_range: [f64; 2],
    #[serde(default = "default_p_range")]
    pub wigner_p_range: [f64; 2],
    #[serde(default = "default_resolution")]
    pub wigner_resolution: usize,
    /// Mixture components; 0 picks the periodic rule's own node count.
    #[serde(default)]
    pub wigner_components: usize,
    #[serde(default)]
    pub wigner_method: WignerMethod,
}

impl SweepConfig {
    /// Config with defaults for everything but the parameter lists.
    pub fn new(alpha_values: Vec<f64>, r_values: Vec<f64>, sigma2_values: Vec<f64>) -> Self {
        Self {
            alpha_values,
            r_values,
            sigma2_values,
            scenarios: default_scenarios(),
            theta: 0.0,
            delta_theta: default_delta_theta(),
            n_max: default_n_max(),
            tail_tol: default_tail_tol(),
            max_n_max: None,
            outputs: default_outputs(),
            output_path: default_output_path(),
            workers: 0,
            wigner_x_range: default_x_range(),
            wigner_p_range: default_p_range(),
            wigner_resolution: default_resolution(),
            wigner_components: 0,
            wigner_method: WignerMethod::Mixture,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, list) in [
            ("alpha_values", &self.alpha_values),
            ("r_values", &self.r_values),
            ("sigma2_values", &self.sigma2_values),
        ] {
            if list.is_empty() {
                return bad(format!("{name} must not be empty"));
            }
            if list.iter().any(|v| !v.is_finite()) {
                return bad(format!("{name} contains a non-finite value"));
            }
        }
        if self.sigma2_values.iter().any(|&s| s < 0.0) {
            return bad("sigma2_values must be >= 0".into());
        }
        if self.r_values.iter().any(|r| r.abs() > MAX_SQUEEZING) {
            return bad(format!("|r| must not exceed {MAX_SQUEEZING}"));
        }
        if self.scenarios.is_empty() {
            return bad("scenarios must not be empty".into());
        }
        if self.outputs.is_empty() {
            return bad("outputs must not be empty".into());
        }
        if self.outputs.contains(&Output::Zeta) && self.scenarios.len() < 2 {
            return bad("output `zeta` needs both scenarios a and b".into());
        }
        if !(self.delta_theta > 0.0 && self.delta_theta <= 0.1) {
            return bad(format!("delta_theta must lie in (0, 0.1], got {}", self.delta_theta));
        }
        if !self.theta.is_finite() {
            return bad("theta must be finite".into());
        }
        TruncationConfig::new(self.n_max, self.tail_tol).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(limit) = self.max_n_max {
            if limit < self.n_max {
                return bad(format!("max_n_max ({limit}) is below n_max ({})", self.n_max));
            }
        }
        if self.wigner_x_range[1] <= self.wigner_x_range[0] || self.wigner_p_range[1] <= self.wigner_p_range[0] {
            return bad("wigner ranges must be increasing".into());
        }
        if self.wigner_resolution < 2 {
            return bad("wigner_resolution must be >= 2".into());
        }
        Ok(())
    }

    /// SHA-256 over the canonical serialization, excluding keys that do not
    /// affect computed values (`workers`, `output_path`).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = 0;
        canonical.output_path = PathBuf::new();
        let text = canonical.to_toml_string().unwrap_or_default();
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn truncation(&self) -> Result<TruncationConfig> {
        TruncationConfig::new(self.n_max, self.tail_tol)
    }

    fn needs_qfi(&self) -> bool {
        self.outputs
            .iter()
            .any(|o| matches!(o, Output::Qfi | Output::Zeta | Output::OptimalityRatio))
    }

    fn needs_fi(&self) -> bool {
        self.outputs
            .iter()
            .any(|o| matches!(o, Output::Fi | Output::Zeta | Output::OptimalityRatio))
    }

    /// Points in lexicographic list order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &alpha in &self.alpha_values {
            for &r in &self.r_values {
                for &sigma2 in &self.sigma2_values {
                    for &scenario in &self.scenarios {
                        out.push(SweepPoint { index: out.len(), alpha, r, sigma2, scenario });
                    }
                }
            }
        }
        out
    }

    pub fn wigner_grid(&self) -> Result<PhaseSpaceGrid> {
        PhaseSpaceGrid::square(
            (self.wigner_x_range[0], self.wigner_x_range[1]),
            (self.wigner_p_range[0], self.wigner_p_range[1]),
            self.wigner_resolution,
        )
    }

    pub fn manifest_path(&self) -> PathBuf {
        manifest_path_for(&self.output_path)
    }
}

/// `results.csv` → `results.manifest.json`.
pub fn manifest_path_for(results: &Path) -> PathBuf {
    results.with_extension("manifest.json")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub alpha: f64,
    pub r: f64,
    pub sigma2: f64,
    pub scenario: Ordering,
}

impl SweepPoint {
    pub fn spec(&self) -> Result<ScenarioSpec> {
        ScenarioSpec::from_values(self.alpha, self.r, self.sigma2, self.scenario)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Unreliable,
    Failed,
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Unreliable => "unreliable",
            RowStatus::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(RowStatus::Ok),
            "unreliable" => Ok(RowStatus::Unreliable),
            "failed" => Ok(RowStatus::Failed),
            other => Err(Error::MissingData(format!("unknown row status `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Truncation actually used (after any escalation).
    pub n_max: usize,
    pub tail_population: Option<f64>,
    /// Eigenvalue mass discarded by the fidelity clip.
    pub clipped: Option<f64>,
    pub richardson_check: Option<f64>,
    pub fi_normalization_error: Option<f64>,
    pub status: RowStatus,
    pub message: String,
}

/// One evaluated sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub params: SweepPoint,
    pub qfi: Option<f64>,
    pub qfi_forward: Option<f64>,
    pub fi: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl SweepResult {
    pub fn optimality_ratio(&self) -> Option<f64> {
        match (self.fi, self.qfi) {
            (Some(f), Some(h)) if h.abs() > 1e-12 => Some(f / h),
            _ => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.diagnostics.status == RowStatus::Ok
    }

    fn record(&self) -> Vec<String> {
        let p = &self.params;
        let d = &self.diagnostics;
        vec![
            p.index.to_string(),
            format_value(p.alpha),
            format_value(p.r),
            format_value(p.sigma2),
            p.scenario.tag().to_string(),
            d.n_max.to_string(),
            format_opt(self.qfi),
            format_opt(self.qfi_forward),
            format_opt(d.richardson_check),
            format_opt(d.clipped),
            format_opt(self.fi),
            format_opt(d.fi_normalization_error),
            format_opt(self.optimality_ratio()),
            format_opt(d.tail_population),
            d.status.as_str().to_string(),
            d.message.clone(),
        ]
    }

    /// One CSV line including the trailing newline.
    pub fn to_csv_line(&self) -> Result<String> {
        csv_line(&self.record())
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != RESULT_COLUMNS.len() {
            return Err(Error::MissingData(format!(
                "row has {} fields, expected {}",
                rec.len(),
                RESULT_COLUMNS.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| Error::MissingData(format!("column {} is not a number: `{}`", RESULT_COLUMNS[i], &rec[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>> { if rec[i].is_empty() { Ok(None) } else { num(i).map(Some) } };
        let int = |i: usize| -> Result<usize> {
            rec[i]
                .parse::<usize>()
                .map_err(|_| Error::MissingData(format!("column {} is not an integer", RESULT_COLUMNS[i])))
        };
        Ok(SweepResult {
            params: SweepPoint {
                index: int(0)?,
                alpha: num(1)?,
                r: num(2)?,
                sigma2: num(3)?,
                scenario: rec[4].parse()?,
            },
            qfi: opt(6)?,
            qfi_forward: opt(7)?,
            fi: opt(10)?,
            diagnostics: Diagnostics {
                n_max: int(5)?,
                richardson_check: opt(8)?,
                clipped: opt(9)?,
                fi_normalization_error: opt(11)?,
                tail_population: opt(13)?,
                status: RowStatus::parse(&rec[14])?,
                message: rec[15].to_string(),
            },
        })
    }
}

fn csv_line(fields: &[impl AsRef<str>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields.iter().map(|f| f.as_ref()))?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::MissingData(e.to_string()))
}

fn results_header() -> String {
    RESULT_COLUMNS.join(",") + "\n"
}

/// Parse results CSV text. A trailing partial line is ignored.
pub fn parse_results(text: &str) -> Result<Vec<SweepResult>> {
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let mut lines = complete.lines();
    match lines.next() {
        Some(h) if h == RESULT_COLUMNS.join(",") => {}
        Some(_) => return Err(Error::MissingData("results header does not match the expected columns".into())),
        None => return Ok(Vec::new()),
    }
    let body: String = lines.map(|l| format!("{l}\n")).collect();
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(body.as_bytes());
    reader.records().map(|r| SweepResult::from_record(&r?)).collect()
}

pub fn read_results(path: &Path) -> Result<Vec<SweepResult>> {
    parse_results(&fs::read_to_string(path)?)
}

/// Evaluate one point, doubling the truncation on tail failures up to the
/// configured limit. Errors end up in the row, never in the return value.
pub fn evaluate_point(point: &SweepPoint, config: &SweepConfig) -> SweepResult {
    let limit = config.max_n_max.unwrap_or(config.n_max).max(config.n_max);
    let mut n_max = config.n_max;
    loop {
        match evaluate_at(point, config, n_max) {
            Err(Error::TruncationInadequate { .. }) if n_max < limit => {
                n_max = (2 * n_max).min(limit);
            }
            Ok(r) => return r,
            Err(e) => {
                return SweepResult {
                    params: *point,
                    qfi: None,
                    qfi_forward: None,
                    fi: None,
                    diagnostics: Diagnostics {
                        n_max,
                        tail_population: None,
                        clipped: None,
                        richardson_check: None,
                        fi_normalization_error: None,
                        status: RowStatus::Failed,
                        message: e.to_string(),
                    },
                }
            }
        }
    }
}

fn evaluate_at(point: &SweepPoint, config: &SweepConfig, n_max: usize) -> Result<SweepResult> {
    let tc = TruncationConfig::new(n_max, config.tail_tol)?;
    let rho = prepare_scenario(&point.spec()?, &tc)?;
    let mut result = SweepResult {
        params: *point,
        qfi: None,
        qfi_forward: None,
        fi: None,
        diagnostics: Diagnostics {
            n_max,
            tail_population: Some(rho.tail_population()),
            clipped: None,
            richardson_check: None,
            fi_normalization_error: None,
            status: RowStatus::Ok,
            message: String::new(),
        },
    };
    if config.needs_qfi() {
        let h = qfi_of_state(&rho, config.theta, config.delta_theta)?;
        result.qfi = Some(h.value);
        result.qfi_forward = Some(h.forward_value);
        result.diagnostics.clipped = Some(h.clipped);
        result.diagnostics.richardson_check = Some(h.richardson_check);
        if let Reliability::Unreliable(reason) = h.status {
            result.diagnostics.status = RowStatus::Unreliable;
            result.diagnostics.message = reason;
        }
    }
    if config.needs_fi() {
        let f = fi_homodyne_state(&rho, config.theta, PHASE_QUADRATURE, None, DEFAULT_DERIVATIVE_STEP)?;
        result.fi = Some(f.value);
        result.diagnostics.fi_normalization_error = Some(f.normalization_error);
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub library: String,
    pub version: String,
    pub config_hash: String,
    pub config: String,
    pub total_points: usize,
    pub completed_rows: usize,
    pub reliability_failures: usize,
    pub complete: bool,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Recover the config that produced a results file.
    pub fn sweep_config(&self) -> Result<SweepConfig> {
        SweepConfig::from_toml_str(&self.config)
    }
}

/// Completed rows of an earlier run with the same config, or none.
fn resumable_prefix(config: &SweepConfig, points: &[SweepPoint]) -> Result<Vec<SweepResult>> {
    let out = &config.output_path;
    let manifest = config.manifest_path();
    if !out.exists() || !manifest.exists() {
        return Ok(Vec::new());
    }
    let Ok(m) = RunManifest::read(&manifest) else { return Ok(Vec::new()) };
    if m.config_hash != config.hash() {
        return Ok(Vec::new());
    }
    let Ok(rows) = read_results(out) else { return Ok(Vec::new()) };
    let consistent = rows.len() <= points.len()
        && rows.iter().zip(points).all(|(row, p)| row.params.index == p.index && row.params.scenario == p.scenario);
    Ok(if consistent { rows } else { Vec::new() })
}

/// Run (or resume) a sweep. `max_new_rows` stops early after that many newly
/// computed rows, leaving a resumable partial file.
pub fn run_sweep_partial(config: &SweepConfig, max_new_rows: Option<usize>) -> Result<Vec<SweepResult>> {
    config.validate()?;
    let points = config.points();
    let mut results = resumable_prefix(config, &points)?;

    if let Some(parent) = config.output_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    // Rewrite the kept prefix so a torn final line is dropped.
    let mut file = File::create(&config.output_path)?;
    file.write_all(results_header().as_bytes())?;
    for row in &results {
        file.write_all(row.to_csv_line()?.as_bytes())?;
    }
    file.flush()?;
    drop(file);

    let mut manifest = RunManifest {
        library: LIBRARY_NAME.into(),
        version: LIBRARY_VERSION.into(),
        config_hash: config.hash(),
        config: config.to_toml_string()?,
        total_points: points.len(),
        completed_rows: results.len(),
        reliability_failures: results.iter().filter(|r| !r.is_ok()).count(),
        complete: false,
    };
    manifest.write(&config.manifest_path())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let chunk = pool.current_num_threads().max(1);
    let mut remaining: &[SweepPoint] = &points[results.len()..];
    if let Some(limit) = max_new_rows {
        remaining = &remaining[..limit.min(remaining.len())];
    }

    let mut file = OpenOptions::new().append(true).open(&config.output_path)?;
    for batch in remaining.chunks(chunk) {
        let rows: Vec<SweepResult> = pool.install(|| {
            use rayon::prelude::*;
            batch.par_iter().map(|p| evaluate_point(p, config)).collect()
        });
        for row in rows {
            file.write_all(row.to_csv_line()?.as_bytes())?;
            results.push(row);
        }
        file.flush()?;
        manifest.completed_rows = results.len();
        manifest.reliability_failures = results.iter().filter(|r| !r.is_ok()).count();
        manifest.write(&config.manifest_path())?;
    }
    manifest.complete = results.len() == points.len();
    manifest.write(&config.manifest_path())?;
    Ok(results)
}

pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepResult>> {
    run_sweep_partial(config, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureId {
    Fig2,
    Fig3,
    Zeta,
    Optimality,
    Wigner,
}

impl std::str::FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(FigureId::Fig2),
            "fig3" => Ok(FigureId::Fig3),
            "zeta" => Ok(FigureId::Zeta),
            "optimality" => Ok(FigureId::Optimality),
            "wigner" => Ok(FigureId::Wigner),
            other => Err(Error::Config(format!(
                "unknown figure `{other}` (expected fig2, fig3, zeta, optimality or wigner)"
            ))),
        }
    }
}

impl FigureId {
    pub fn name(&self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Zeta => "zeta",
            FigureId::Optimality => "optimality",
            FigureId::Wigner => "wigner",
        }
    }

    fn description(&self) -> &'static str {
        match self {
            FigureId::Fig2 => "QFI versus squeezing r for fixed amplitudes; numerical curves plus the noiseless closed form",
            FigureId::Fig3 => "QFI and homodyne FI versus amplitude alpha, one curve per scenario, r and sigma2",
            FigureId::Zeta => "scenario ratios H_a/H_b and F_a/F_b (and inverses) versus alpha",
            FigureId::Optimality => "optimality ratios F/H versus alpha for each scenario",
            FigureId::Wigner => "Wigner functions of the scenario states as dense grids",
        }
    }
}

/// Provenance stamped into every figure manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub library: String,
    pub version: String,
    pub config_hash: String,
}

impl Provenance {
    pub fn for_config(config: &SweepConfig) -> Self {
        Self { library: LIBRARY_NAME.into(), version: LIBRARY_VERSION.into(), config_hash: config.hash() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEntry {
    pub file: String,
    pub columns: Vec<String>,
    pub slice: BTreeMap<String, String>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureManifest {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub figure: FigureId,
    pub description: String,
    pub x_axis: String,
    pub y_axes: Vec<String>,
    pub curves: Vec<CurveEntry>,
}

struct Curve {
    file: String,
    slice: BTreeMap<String, String>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn key(x: f64) -> String {
    // Plain shortest representation for slice labels and file names.
    format!("{x}")
}

fn status_of(rows: &[&SweepResult]) -> String {
    rows.iter()
        .map(|r| r.diagnostics.status)
        .max_by_key(|s| match s {
            RowStatus::Ok => 0,
            RowStatus::Unreliable => 1,
            RowStatus::Failed => 2,
        })
        .unwrap_or(RowStatus::Ok)
        .as_str()
        .to_string()
}

/// Group rows by a key while keeping first-appearance order.
fn group_by<K: PartialEq + Clone>(
    results: &[SweepResult],
    key: impl Fn(&SweepResult) -> K,
) -> Vec<(K, Vec<&SweepResult>)> {
    let mut groups: Vec<(K, Vec<&SweepResult>)> = Vec::new();
    for r in results {
        let k = key(r);
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(r),
            None => groups.push((k, vec![r])),
        }
    }
    groups
}

fn require(results: &[SweepResult], what: &str, has: impl Fn(&SweepResult) -> bool) -> Result<()> {
    if results.iter().any(has) {
        Ok(())
    } else {
        Err(Error::MissingData(format!("results carry no `{what}` column values")))
    }
}

fn fig2_curves(results: &[SweepResult]) -> Result<Vec<Curve>> {
    require(results, "qfi", |r| r.qfi.is_some())?;
    let mut curves = Vec::new();
    let groups = group_by(results, |r| (r.params.alpha.to_bits(), r.params.sigma2.to_bits(), r.params.scenario));
    for ((_, _, scenario), rows) in &groups {
        let (alpha, sigma2) = (rows[0].params.alpha, rows[0].params.sigma2);
        let mut sorted = rows.clone();
        sorted.sort_by(|a, b| a.params.r.total_cmp(&b.params.r));
        curves.push(Curve {
            file: format!("fig2_alpha_{}_sigma2_{}_{}.csv", key(alpha), key(sigma2), scenario),
            slice: BTreeMap::from([
                ("alpha".into(), key(alpha)),
                ("sigma2".into(), key(sigma2)),
                ("scenario".into(), scenario.to_string()),
                ("source".into(), "numerical".into()),
            ]),
            columns: vec!["r".into(), "qfi".into(), "status".into()],
            rows: sorted
                .iter()
                .map(|r| vec![format_value(r.params.r), format_opt(r.qfi), r.diagnostics.status.as_str().into()])
                .collect(),
        });
    }
    // Noiseless closed form at the same r values, one curve per amplitude.
    for (_, rows) in group_by(results, |r| r.params.alpha.to_bits()) {
        let alpha = rows[0].params.alpha;
        let mut rs: Vec<f64> = rows.iter().map(|r| r.params.r).collect();
        rs.sort_by(f64::total_cmp);
        rs.dedup();
        curves.push(Curve {
            file: format!("fig2_alpha_{}_closed_form.csv", key(alpha)),
            slice: BTreeMap::from([
                ("alpha".into(), key(alpha)),
                ("sigma2".into(), "0".into()),
                ("source".into(), "closed_form".into()),
            ]),
            columns: vec!["r".into(), "qfi".into()],
            rows: rs
                .iter()
                .map(|&r| vec![format_value(r), format_value(qfi_pure_analytic(ProbeParams::new(alpha, r)))])
                .collect(),
        });
    }
    Ok(curves)
}

fn by_alpha(rows: &[&SweepResult]) -> Vec<SweepResult> {
    let mut sorted: Vec<SweepResult> = rows.iter().map(|r| (*r).clone()).collect();
    sorted.sort_by(|a, b| a.params.alpha.total_cmp(&b.params.alpha));
    sorted
}

fn fig3_curves(results: &[SweepResult], optimality: bool) -> Result<Vec<Curve>> {
    require(results, "qfi", |r| r.qfi.is_some())?;
    if optimality {
        require(results, "fi", |r| r.fi.is_some())?;
    }
    let groups = group_by(results, |r| (r.params.scenario, r.params.r.to_bits(), r.params.sigma2.to_bits()));
    Ok(groups
        .into_iter()
        .map(|((scenario, _, _), rows)| {
            let (r, sigma2) = (rows[0].params.r, rows[0].params.sigma2);
            let sorted = by_alpha(&rows);
            let prefix = if optimality { "optimality" } else { "fig3" };
            let (columns, data) = if optimality {
                (
                    vec!["alpha".into(), "optimality_ratio".into(), "status".into()],
                    sorted
                        .iter()
                        .map(|x| {
                            vec![
                                format_value(x.params.alpha),
                                format_opt(x.optimality_ratio()),
                                x.diagnostics.status.as_str().into(),
                            ]
                        })
                        .collect(),
                )
            } else {
                (
                    vec!["alpha".into(), "qfi".into(), "fi".into(), "status".into()],
                    sorted
                        .iter()
                        .map(|x| {
                            vec![
                                format_value(x.params.alpha),
                                format_opt(x.qfi),
                                format_opt(x.fi),
                                x.diagnostics.status.as_str().into(),
                            ]
                        })
                        .collect(),
                )
            };
            Curve {
                file: format!("{prefix}_{scenario}_r_{}_sigma2_{}.csv", key(r), key(sigma2)),
                slice: BTreeMap::from([
                    ("scenario".into(), scenario.to_string()),
                    ("r".into(), key(r)),
                    ("sigma2".into(), key(sigma2)),
                ]),
                columns,
                rows: data,
            }
        })
        .collect())
}

fn ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(n), Some(d)) if d.abs() > 1e-12 => Some(n / d),
        _ => None,
    }
}

fn zeta_curves(results: &[SweepResult]) -> Result<Vec<Curve>> {
    require(results, "qfi", |r| r.qfi.is_some())?;
    let mut curves = Vec::new();
    for (_, rows) in group_by(results, |r| (r.params.r.to_bits(), r.params.sigma2.to_bits())) {
        let (r, sigma2) = (rows[0].params.r, rows[0].params.sigma2);
        let mut alphas: Vec<f64> = rows.iter().map(|x| x.params.alpha).collect();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        let mut data = Vec::new();
        for alpha in alphas {
            let find = |s: Ordering| {
                rows.iter()
                    .copied()
                    .find(|x| x.params.alpha.to_bits() == alpha.to_bits() && x.params.scenario == s)
            };
            let (Some(a), Some(b)) = (find(Ordering::SqueezeThenDephase), find(Ordering::DephaseThenSqueeze)) else {
                continue;
            };
            data.push(vec![
                format_value(alpha),
                format_opt(ratio(a.qfi, b.qfi)),
                format_opt(ratio(a.fi, b.fi)),
                format_opt(ratio(b.qfi, a.qfi)),
                format_opt(ratio(b.fi, a.fi)),
                status_of(&[a, b]),
            ]);
        }
        if data.is_empty() {
            continue;
        }
        curves.push(Curve {
            file: format!("zeta_r_{}_sigma2_{}.csv", key(r), key(sigma2)),
            slice: BTreeMap::from([("r".into(), key(r)), ("sigma2".into(), key(sigma2))]),
            columns: ["alpha", "zeta_h", "zeta_f", "zeta_h_inverse", "zeta_f_inverse", "status"]
                .map(String::from)
                .to_vec(),
            rows: data,
        });
    }
    if curves.is_empty() {
        return Err(Error::MissingData("zeta needs rows for both scenarios at matching parameters".into()));
    }
    Ok(curves)
}

/// Wigner field of one scenario state with the configured method.
pub fn scenario_wigner(point: &SweepPoint, config: &SweepConfig) -> Result<WignerField> {
    let grid = config.wigner_grid()?;
    let spec = point.spec()?;
    match config.wigner_method {
        WignerMethod::Mixture => {
            let n = if config.wigner_components > 0 {
                config.wigner_components
            } else {
                auto_components(&spec, config.n_max)?
            };
            wigner_gaussian_mixture(&spec, &grid, n)
        }
        WignerMethod::Fock => {
            let tc = config.truncation()?;
            wigner_fock(&prepare_scenario(&spec, &tc)?, &grid, &tc)
        }
    }
}

/// Node count of the automatic periodic rule for Fock dimension `n_max + 1`.
pub fn auto_components(spec: &ScenarioSpec, n_max: usize) -> Result<usize> {
    Ok(PhaseNoise::periodic(spec.noise.sigma, NodeCount::Auto)?.rule(n_max + 1)?.len())
}

fn write_curves(
    curves: Vec<Curve>,
    figure: FigureId,
    x_axis: &str,
    y_axes: &[&str],
    out_dir: &Path,
    provenance: &Provenance,
) -> Result<Vec<PathBuf>> {
    if curves.is_empty() {
        return Err(Error::MissingData(format!("no curves for {}", figure.name())));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for c in curves {
        let path = out_dir.join(&c.file);
        let mut text = csv_line(&c.columns)?;
        for row in &c.rows {
            text.push_str(&csv_line(row)?);
        }
        fs::write(&path, text)?;
        entries.push(CurveEntry { file: c.file, columns: c.columns, slice: c.slice, points: c.rows.len() });
        written.push(path);
    }
    let manifest = FigureManifest {
        provenance: provenance.clone(),
        figure,
        description: figure.description().into(),
        x_axis: x_axis.into(),
        y_axes: y_axes.iter().map(|s| s.to_string()).collect(),
        curves: entries,
    };
    let mpath = out_dir.join(format!("{}.manifest.json", figure.name()));
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)? + "\n")?;
    written.push(mpath);
    Ok(written)
}

/// Wigner fields for every distinct point in `results`.
pub fn emit_wigner_fields(
    points: &[SweepPoint],
    config: &SweepConfig,
    out_dir: &Path,
    provenance: &Provenance,
) -> Result<Vec<PathBuf>> {
    if points.is_empty() {
        return Err(Error::MissingData("no parameter points for wigner".into()));
    }
    let fields: Vec<Result<WignerField>> = points.iter().map(|p| scenario_wigner(p, config)).collect();
    let fields: Vec<WignerField> = fields.into_iter().collect::<Result<_>>()?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for (p, field) in points.iter().zip(fields) {
        let file = format!("wigner_alpha_{}_r_{}_sigma2_{}_{}.csv", key(p.alpha), key(p.r), key(p.sigma2), p.scenario);
        let slice = BTreeMap::from([
            ("alpha".to_string(), key(p.alpha)),
            ("r".to_string(), key(p.r)),
            ("sigma2".to_string(), key(p.sigma2)),
            ("scenario".to_string(), p.scenario.to_string()),
        ]);
        let mut meta: Vec<(String, String)> = slice.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        meta.push(("method".into(), format!("{:?}", config.wigner_method).to_lowercase()));
        meta.push(("library".into(), format!("{} {}", provenance.library, provenance.version)));
        meta.push(("config_hash".into(), provenance.config_hash.clone()));
        let path = out_dir.join(&file);
        field.write_csv(File::create(&path)?, &meta)?;
        entries.push(CurveEntry {
            file,
            columns: vec!["p\\x".into(), "W(x,p)".into()],
            slice,
            points: field.grid.nx * field.grid.np,
        });
        written.push(path);
    }
    let manifest = FigureManifest {
        provenance: provenance.clone(),
        figure: FigureId::Wigner,
        description: FigureId::Wigner.description().into(),
        x_axis: "x".into(),
        y_axes: vec!["p".into()],
        curves: entries,
    };
    let mpath = out_dir.join("wigner.manifest.json");
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)? + "\n")?;
    written.push(mpath);
    Ok(written)
}

/// Write the data files of one figure into `out_dir`. Nothing is written
/// when the results lack what the figure needs.
pub fn emit_figure_data(
    results: &[SweepResult],
    figure: FigureId,
    out_dir: &Path,
    config: &SweepConfig,
) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::MissingData("empty results".into()));
    }
    let provenance = Provenance::for_config(config);
    match figure {
        FigureId::Fig2 => write_curves(fig2_curves(results)?, figure, "r", &["qfi"], out_dir, &provenance),
        FigureId::Fig3 => write_curves(fig3_curves(results, false)?, figure, "alpha", &["qfi", "fi"], out_dir, &provenance),
        FigureId::Zeta => write_curves(
            zeta_curves(results)?,
            figure,
            "alpha",
            &["zeta_h", "zeta_f", "zeta_h_inverse", "zeta_f_inverse"],
            out_dir,
            &provenance,
        ),
        FigureId::Optimality => {
            write_curves(fig3_curves(results, true)?, figure, "alpha", &["optimality_ratio"], out_dir, &provenance)
        }
        FigureId::Wigner => {
            let points: Vec<SweepPoint> = results.iter().map(|r| r.params).collect();
            emit_wigner_fields(&points, config, out_dir, &provenance)
        }
    }
}
