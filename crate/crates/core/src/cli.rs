//! JSON-configured experiment runner.
//!
//! A config names one `kind` and carries the matching block. `run` writes
//! `<kind>.csv` and `summary.json` into the output directory. CSV numbers use
//! `{:.16e}` (17 significant digits) so identical inputs give byte-identical
//! files; masked values are left empty.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dressed::{self, InitialConditionBranch, MAX_ADIABATIC_ORDER};
use crate::hydro::{self, GridWavefunction, PotentialSpec};
use crate::interferometry::{self, Engine, PulsePairConfig};
use crate::model::{DrivingField, InitialPhases, ModelError, TwoLevelSystem};
use crate::propagator::{
    self, compare_trajectories, full_field_propagate, rwa_propagate, uniform_grid,
    IntegratorConfig, TwoLevelState, TwoLevelTrajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Dressed,
    Adiabatic,
    Propagate,
    Interfere,
    Hydro,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Dressed => "dressed",
            Kind::Adiabatic => "adiabatic",
            Kind::Propagate => "propagate",
            Kind::Interfere => "interfere",
            Kind::Hydro => "hydro",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t0: f64,
    pub t1: f64,
    pub samples: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        uniform_grid(self.t0, self.t1, self.samples)
    }
}

fn default_order() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DressedBlock {
    #[serde(default)]
    pub branch: InitialConditionBranch,
    #[serde(default)]
    pub phases: InitialPhases,
    /// Also propagate the rotating-wave equations from the assembled initial
    /// state and report the deviation.
    #[serde(default)]
    pub compare: bool,
    /// Highest adiabatic order reported alongside the phases.
    #[serde(default = "default_order")]
    pub n_max: usize,
}

impl Default for DressedBlock {
    fn default() -> Self {
        Self {
            branch: InitialConditionBranch::Ground,
            phases: InitialPhases::default(),
            compare: false,
            n_max: default_order(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdiabaticBlock {
    #[serde(default = "default_order")]
    pub n_max: usize,
}

impl Default for AdiabaticBlock {
    fn default() -> Self {
        Self {
            n_max: default_order(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialLevel {
    #[default]
    Ground,
    Excited,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagateEngine {
    #[default]
    Rwa,
    FullField,
    /// Both engines, with their population deviation as a metric.
    Both,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateBlock {
    #[serde(default)]
    pub initial: InitialLevel,
    #[serde(default)]
    pub engine: PropagateEngine,
}

fn default_phase_points() -> usize {
    64
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfereBlock {
    pub delay: f64,
    #[serde(default = "unit")]
    pub second_amplitude: f64,
    #[serde(default)]
    pub engine: Engine,
    /// Number of equally spaced relative phases in [0, 2π).
    #[serde(default = "default_phase_points")]
    pub phase_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialWave {
    Gaussian {
        sigma: f64,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        k0: f64,
    },
    Harmonic {
        #[serde(default)]
        level: usize,
        omega0: f64,
        #[serde(default)]
        center: f64,
    },
}

fn default_floor() -> f64 {
    hydro::DEFAULT_R_FLOOR
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroBlock {
    pub x_min: f64,
    pub dx: f64,
    pub n_points: usize,
    #[serde(default = "unit")]
    pub mass: f64,
    #[serde(default = "free")]
    pub potential: PotentialSpec,
    pub initial: InitialWave,
    pub t_final: f64,
    pub dt: f64,
    /// Keep every `stride`-th solver step as a frame.
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default = "default_floor")]
    pub r_floor: f64,
}

fn free() -> PotentialSpec {
    PotentialSpec::Free
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<TwoLevelSystem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<DrivingField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dressed: Option<DressedBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adiabatic: Option<AdiabaticBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagate: Option<PropagateBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interfere: Option<InterfereBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hydro: Option<HydroBlock>,
}

/// One violated constraint, attributed to the module that owns it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub module: &'static str,
    pub field: String,
    pub constraint: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: validation: {}: {}",
            self.module, self.field, self.constraint
        )
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cli: cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cli: cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cli: parse error (line {line}, column {column}): {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}", join_issues(.0))]
    Validation(Vec<Issue>),
    #[error("{module}: {message}")]
    Module {
        module: &'static str,
        message: String,
    },
}

fn join_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl CliError {
    /// 1 for input and validation problems, 2 for failures inside a module.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Module { .. } | CliError::Write { .. } => 2,
            _ => 1,
        }
    }

    pub fn issues(&self) -> &[Issue] {
        match self {
            CliError::Validation(v) => v,
            _ => &[],
        }
    }
}

fn module_error(module: &'static str, err: impl fmt::Display) -> CliError {
    CliError::Module {
        module,
        message: err.to_string(),
    }
}

fn issue(module: &'static str, field: impl Into<String>, constraint: impl Into<String>) -> Issue {
    Issue {
        module,
        field: field.into(),
        constraint: constraint.into(),
    }
}

fn model_issue(prefix: &str, err: ModelError) -> Issue {
    match err {
        ModelError::Invalid { field, constraint } => {
            issue("model", format!("{prefix}.{field}"), constraint)
        }
        other => issue("model", prefix, other.to_string()),
    }
}

/// Parses and validates a config from JSON text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut config: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        if let Some(name) = missing_field(&message) {
            return CliError::Validation(vec![issue("cli", name, "required field is missing")]);
        }
        CliError::Parse {
            line: e.line(),
            column: e.column(),
            message,
        }
    })?;
    config.fill_defaults();
    let issues = config.issues();
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(CliError::Validation(issues))
    }
}

fn missing_field(message: &str) -> Option<String> {
    let rest = message.strip_prefix("missing field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

impl ExperimentConfig {
    fn fill_defaults(&mut self) {
        match self.kind {
            Kind::Dressed => {
                self.dressed.get_or_insert_with(DressedBlock::default);
            }
            Kind::Adiabatic => {
                self.adiabatic.get_or_insert_with(AdiabaticBlock::default);
            }
            Kind::Propagate => {
                self.propagate.get_or_insert_with(PropagateBlock::default);
            }
            Kind::Interfere | Kind::Hydro => {}
        }
    }

    /// Every violated constraint; empty when the config is runnable.
    pub fn issues(&self) -> Vec<Issue> {
        let mut out = Vec::new();
        let kind = self.kind.name();
        let blocks = [
            ("dressed", self.dressed.is_some()),
            ("adiabatic", self.adiabatic.is_some()),
            ("propagate", self.propagate.is_some()),
            ("interfere", self.interfere.is_some()),
            ("hydro", self.hydro.is_some()),
        ];
        for (name, present) in blocks {
            if name == kind && !present {
                out.push(issue(
                    "cli",
                    name,
                    format!("block required for kind {kind}"),
                ));
            }
            if name != kind && present {
                out.push(issue(
                    "cli",
                    name,
                    format!("block not allowed for kind {kind}"),
                ));
            }
        }

        let needs_drive = self.kind != Kind::Hydro;
        let needs_grid = matches!(self.kind, Kind::Dressed | Kind::Adiabatic | Kind::Propagate);
        for (name, present, needed) in [
            ("system", self.system.is_some(), needs_drive),
            ("field", self.field.is_some(), needs_drive),
            ("grid", self.grid.is_some(), needs_grid),
        ] {
            if needed && !present {
                out.push(issue("cli", name, format!("required for kind {kind}")));
            }
            if !needed && present {
                out.push(issue("cli", name, format!("not used by kind {kind}")));
            }
        }

        if let Some(system) = &self.system {
            if let Err(e) = system.validate() {
                out.push(model_issue("system", e));
            }
        }
        if let Some(field) = &self.field {
            if let Err(e) = field.validate() {
                out.push(model_issue("field", e));
            }
        }
        if let Some(grid) = &self.grid {
            if !(grid.t0.is_finite() && grid.t1.is_finite() && grid.t1 > grid.t0) {
                out.push(issue(
                    "cli",
                    "grid.t1",
                    "t0 and t1 must be finite with t1 > t0",
                ));
            }
            if grid.samples < 2 {
                out.push(issue("cli", "grid.samples", "must be >= 2"));
            }
        }
        if let Err(e) = self.integrator.validate() {
            out.push(issue("propagator", "integrator", e.to_string()));
        }

        if let Some(b) = &self.dressed {
            if b.n_max > MAX_ADIABATIC_ORDER {
                out.push(issue(
                    "dressed",
                    "dressed.n_max",
                    format!("must be <= {MAX_ADIABATIC_ORDER}"),
                ));
            }
            if !(b.phases.phi_g.is_finite() && b.phases.phi_e.is_finite()) {
                out.push(issue("model", "dressed.phases", "must be finite"));
            }
        }
        if let Some(b) = &self.adiabatic {
            if b.n_max > MAX_ADIABATIC_ORDER {
                out.push(issue(
                    "dressed",
                    "adiabatic.n_max",
                    format!("must be <= {MAX_ADIABATIC_ORDER}"),
                ));
            }
        }
        if let (Some(b), Some(field)) = (&self.interfere, &self.field) {
            if b.phase_points < 3 {
                out.push(issue(
                    "interferometry",
                    "interfere.phase_points",
                    "must be >= 3",
                ));
            }
            if let Err(e) = self.pulse_pair(b, field).validate() {
                out.push(match e {
                    interferometry::InterferometryError::Invalid { field, constraint } => {
                        issue("interferometry", format!("interfere.{field}"), constraint)
                    }
                    other => issue("interferometry", "interfere", other.to_string()),
                });
            }
        }
        if let Some(b) = &self.hydro {
            hydro_issues(b, &mut out);
        }
        out
    }

    fn pulse_pair(&self, block: &InterfereBlock, field: &DrivingField) -> PulsePairConfig {
        PulsePairConfig {
            base: field.clone(),
            delay: block.delay,
            relative_phase: 0.0,
            second_amplitude: block.second_amplitude,
            engine: block.engine,
        }
    }
}

fn hydro_issues(b: &HydroBlock, out: &mut Vec<Issue>) {
    let mut push = |field: &str, constraint: &str| {
        out.push(issue("hydro", format!("hydro.{field}"), constraint));
    };
    if b.n_points < 16 || !b.n_points.is_power_of_two() {
        push("n_points", "must be a power of two >= 16");
    }
    if !(b.dx > 0.0 && b.dx.is_finite()) {
        push("dx", "must be finite and > 0");
    }
    if !b.x_min.is_finite() {
        push("x_min", "must be finite");
    }
    if !(b.mass > 0.0 && b.mass.is_finite()) {
        push("mass", "must be finite and > 0");
    }
    if !(b.t_final > 0.0 && b.t_final.is_finite()) {
        push("t_final", "must be finite and > 0");
    }
    if !(b.dt > 0.0 && b.dt.is_finite()) {
        push("dt", "must be finite and > 0");
    } else if b.t_final.is_finite() && (b.t_final / b.dt).round() < 2.0 * b.stride.max(1) as f64 {
        push("dt", "t_final/dt must give at least three frames");
    }
    if b.stride == 0 {
        push("stride", "must be >= 1");
    }
    if !(b.r_floor > 0.0 && b.r_floor < 1.0) {
        push("r_floor", "must lie in (0, 1)");
    }
    match &b.potential {
        PotentialSpec::Tabulated { values } if values.len() != b.n_points => {
            push("potential.values", "length must equal n_points")
        }
        p => {
            if let Err(hydro::HydroError::Invalid { field, constraint }) = p.validate() {
                out.push(issue("hydro", format!("hydro.{field}"), constraint));
            }
        }
    }
    match b.initial {
        InitialWave::Gaussian { sigma, x0, k0 } => {
            if !(sigma > 0.0 && sigma.is_finite()) {
                out.push(issue(
                    "hydro",
                    "hydro.initial.sigma",
                    "must be finite and > 0",
                ));
            }
            if !(x0.is_finite() && k0.is_finite()) {
                out.push(issue(
                    "hydro",
                    "hydro.initial.x0",
                    "x0 and k0 must be finite",
                ));
            }
        }
        InitialWave::Harmonic {
            level,
            omega0,
            center,
        } => {
            if level > 1 {
                out.push(issue("hydro", "hydro.initial.level", "must be 0 or 1"));
            }
            if !(omega0 > 0.0 && omega0.is_finite() && center.is_finite()) {
                out.push(issue(
                    "hydro",
                    "hydro.initial.omega0",
                    "must be finite and > 0",
                ));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
}

/// Column-oriented CSV builder with a fixed numeric format.
struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &[String]) -> Self {
        Self {
            text: header.join(",") + "\n",
        }
    }

    fn row(&mut self, values: impl IntoIterator<Item = Option<f64>>) {
        let mut first = true;
        for v in values {
            if !first {
                self.text.push(',');
            }
            first = false;
            if let Some(v) = v {
                write!(self.text, "{v:.16e}").unwrap();
            }
        }
        self.text.push('\n');
    }

    fn save(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, &self.text).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn complex_columns(prefix: &str) -> [String; 2] {
    [format!("{prefix}_re"), format!("{prefix}_im")]
}

fn parts(z: Complex64) -> [Option<f64>; 2] {
    [Some(z.re), Some(z.im)]
}

struct Output {
    metrics: BTreeMap<String, f64>,
    warnings: Vec<String>,
    files: Vec<PathBuf>,
}

impl Output {
    fn new() -> Self {
        Self {
            metrics: BTreeMap::new(),
            warnings: Vec::new(),
            files: Vec::new(),
        }
    }

    fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    fn save(&mut self, csv: &Csv, dir: &Path, name: &str) -> Result<(), CliError> {
        let path = dir.join(name);
        csv.save(&path)?;
        self.files.push(path);
        Ok(())
    }
}

/// Runs the experiment and writes `<kind>.csv` and `summary.json` into
/// `out_dir`, which is created if missing.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary, CliError> {
    let issues = config.issues();
    if !issues.is_empty() {
        return Err(CliError::Validation(issues));
    }
    let started = Instant::now();
    fs::create_dir_all(out_dir).map_err(|source| CliError::Write {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut out = Output::new();
    match config.kind {
        Kind::Dressed => run_dressed(config, out_dir, &mut out)?,
        Kind::Adiabatic => run_adiabatic(config, out_dir, &mut out)?,
        Kind::Propagate => run_propagate(config, out_dir, &mut out)?,
        Kind::Interfere => run_interfere(config, out_dir, &mut out)?,
        Kind::Hydro => run_hydro(config, out_dir, &mut out)?,
    }
    let summary_path = out_dir.join("summary.json");
    out.files.push(summary_path.clone());
    let summary = RunSummary {
        config: config.clone(),
        metrics: out.metrics,
        warnings: out.warnings,
        outputs: out.files,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| module_error("cli", e))?;
    fs::write(&summary_path, json + "\n").map_err(|source| CliError::Write {
        path: summary_path,
        source,
    })?;
    Ok(summary)
}

/// Dressed-versus-oracle run: a `dressed` config with `compare` switched on.
pub fn compare(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary, CliError> {
    match &config.dressed {
        Some(block) if config.kind == Kind::Dressed => {
            let mut config = config.clone();
            config.dressed = Some(DressedBlock {
                compare: true,
                ..block.clone()
            });
            run(&config, out_dir)
        }
        _ => Err(CliError::Validation(vec![issue(
            "cli",
            "kind",
            "compare needs kind dressed",
        )])),
    }
}

struct Drive<'a> {
    system: &'a TwoLevelSystem,
    field: &'a DrivingField,
    grid: Vec<f64>,
}

fn drive(config: &ExperimentConfig) -> Drive<'_> {
    Drive {
        system: config.system.as_ref().expect("validated"),
        field: config.field.as_ref().expect("validated"),
        grid: config
            .grid
            .as_ref()
            .map(GridSpec::points)
            .unwrap_or_default(),
    }
}

fn run_dressed(config: &ExperimentConfig, dir: &Path, out: &mut Output) -> Result<(), CliError> {
    let d = drive(config);
    let block = config.dressed.as_ref().expect("filled");
    let err = |e| module_error("dressed", e);
    let sets = dressed::dressed_phases(d.system, d.field, &block.phases, block.branch, &d.grid)
        .map_err(err)?;
    let assembled =
        dressed::assemble_bare_state(d.system, d.field, &block.phases, block.branch, &d.grid)
            .map_err(err)?;
    let report = dressed::adiabatic_report(d.system, d.field, &d.grid, block.n_max).map_err(err)?;

    let mut names = vec!["t".to_string()];
    for p in ["phi_G_r", "phi_G_v", "phi_E_r", "phi_E_v", "c_g", "c_e"] {
        names.extend(complex_columns(p));
    }
    let mut csv = Csv::new(&names);
    for (set, state) in sets.iter().zip(&assembled.states) {
        let mut row = vec![Some(set.t)];
        for z in set.as_array().into_iter().chain([state.c_g, state.c_e]) {
            row.extend(parts(z));
        }
        csv.row(row);
    }
    out.save(&csv, dir, "dressed.csv")?;

    let last = sets.last().expect("grid is non-empty");
    for (name, z) in ["phi_G_r", "phi_G_v", "phi_E_r", "phi_E_v"]
        .iter()
        .zip(last.as_array())
    {
        out.metric(format!("final_{name}_re"), z.re);
        out.metric(format!("final_{name}_im"), z.im);
    }
    out.metric("adiabatic_margin", report.margin);

    if block.compare {
        let start = assembled.states[0];
        let oracle = rwa_propagate(d.system, d.field, start, &d.grid, &config.integrator)
            .map_err(|e| module_error("propagator", e))?;
        let cmp =
            compare_trajectories(&assembled, &oracle).map_err(|e| module_error("propagator", e))?;
        let mut csv = Csv::new(&header(&[
            "t",
            "amplitude_error_g",
            "amplitude_error_e",
            "population_error",
        ]));
        for ((t, a), b) in d.grid.iter().zip(&assembled.states).zip(&oracle.states) {
            csv.row([
                Some(*t),
                Some((a.c_g - b.c_g).norm()),
                Some((a.c_e - b.c_e).norm()),
                Some(
                    (a.ground_population() - b.ground_population())
                        .abs()
                        .max((a.excited_population() - b.excited_population()).abs()),
                ),
            ]);
        }
        out.save(&csv, dir, "dressed_compare.csv")?;
        out.metric("max_amplitude_error", cmp.max_amplitude_error);
        out.metric("max_population_error", cmp.max_population_error);
        out.metric("final_phase_error_g", cmp.final_phase_error[0]);
        out.metric("final_phase_error_e", cmp.final_phase_error[1]);
        if report.margin > 0.0 {
            out.metric("error_over_margin", cmp.max_amplitude_error / report.margin);
        }
    }
    Ok(())
}

fn run_adiabatic(config: &ExperimentConfig, dir: &Path, out: &mut Output) -> Result<(), CliError> {
    let d = drive(config);
    let n_max = config.adiabatic.as_ref().expect("filled").n_max;
    let err = |e| module_error("dressed", e);
    let report = dressed::adiabatic_report(d.system, d.field, &d.grid, n_max).map_err(err)?;

    let mut names = vec!["t".to_string()];
    for n in 0..=n_max {
        for k in 0..=n + 1 {
            names.push(format!("ratio_n{n}_k{k}"));
        }
    }
    names.extend(header(&["usual", "born_fock"]));
    let mut csv = Csv::new(&names);
    for &t in &d.grid {
        let point = dressed::adiabatic_report(d.system, d.field, &[t], n_max).map_err(err)?;
        let mut row = vec![Some(t)];
        for order in &point.orders {
            row.extend(order.per_k.iter().map(|&r| Some(r)));
        }
        row.push(Some(
            dressed::usual_adiabatic_value(d.system, d.field, t).map_err(err)?,
        ));
        row.push(Some(
            dressed::born_fock_value(d.system, d.field, t).map_err(err)?,
        ));
        csv.row(row);
    }
    out.save(&csv, dir, "adiabatic.csv")?;
    out.metric("margin", report.margin);
    for order in &report.orders {
        out.metric(format!("margin_n{}", order.n), order.worst);
    }
    Ok(())
}

fn trajectory_columns(prefix: &str) -> Vec<String> {
    let mut v = Vec::new();
    for p in ["c_g", "c_e"] {
        v.extend(complex_columns(&format!("{prefix}{p}")));
    }
    v.push(format!("{prefix}p_g"));
    v.push(format!("{prefix}p_e"));
    v
}

fn trajectory_row(state: &TwoLevelState) -> Vec<Option<f64>> {
    let mut row = Vec::with_capacity(6);
    row.extend(parts(state.c_g));
    row.extend(parts(state.c_e));
    row.push(Some(state.ground_population()));
    row.push(Some(state.excited_population()));
    row
}

fn run_propagate(config: &ExperimentConfig, dir: &Path, out: &mut Output) -> Result<(), CliError> {
    let d = drive(config);
    let block = config.propagate.as_ref().expect("filled");
    let initial = match block.initial {
        InitialLevel::Ground => TwoLevelState::ground(),
        InitialLevel::Excited => TwoLevelState::excited(),
    };
    let err = |e: propagator::PropagatorError| module_error("propagator", e);
    let cfg = &config.integrator;
    let rwa = || rwa_propagate(d.system, d.field, initial, &d.grid, cfg).map_err(err);
    let full = || full_field_propagate(d.system, d.field, initial, &d.grid, cfg).map_err(err);
    let runs: Vec<(&str, TwoLevelTrajectory)> = match block.engine {
        PropagateEngine::Rwa => vec![("", rwa()?)],
        PropagateEngine::FullField => vec![("", full()?)],
        PropagateEngine::Both => vec![("rwa_", rwa()?), ("full_", full()?)],
    };

    let mut names = vec!["t".to_string()];
    for (prefix, _) in &runs {
        names.extend(trajectory_columns(prefix));
    }
    let mut csv = Csv::new(&names);
    for (k, &t) in d.grid.iter().enumerate() {
        let mut row = vec![Some(t)];
        for (_, traj) in &runs {
            row.extend(trajectory_row(&traj.states[k]));
        }
        csv.row(row);
    }
    out.save(&csv, dir, "propagate.csv")?;
    for (prefix, traj) in &runs {
        out.metric(
            format!("{prefix}final_p_e"),
            traj.last().excited_population(),
        );
        out.metric(format!("{prefix}max_norm_drift"), traj.max_norm_drift());
    }
    if let [(_, a), (_, b)] = runs.as_slice() {
        let cmp = compare_trajectories(a, b).map_err(err)?;
        out.metric("max_population_deviation", cmp.max_population_error);
    }
    Ok(())
}

fn run_interfere(config: &ExperimentConfig, dir: &Path, out: &mut Output) -> Result<(), CliError> {
    let system = config.system.as_ref().expect("validated");
    let field = config.field.as_ref().expect("validated");
    let block = config.interfere.as_ref().expect("validated");
    let pair = config.pulse_pair(block, field);
    let err = |e| module_error("interferometry", e);
    let deltas = interferometry::uniform_phase_grid(block.phase_points);
    let record =
        interferometry::phase_scan(system, &pair, &deltas, &config.integrator).map_err(err)?;
    let single =
        interferometry::single_pulse_population(system, &pair, &config.integrator).map_err(err)?;
    if single > interferometry::WEAK_POPULATION {
        out.warnings.push(format!(
            "interferometry: single-pulse excited population {single:.4} exceeds {}",
            interferometry::WEAK_POPULATION
        ));
    }

    let mut csv = Csv::new(&header(&["delta_rad", "P_e"]));
    for (&d, &p) in record.deltas.iter().zip(&record.populations) {
        csv.row([Some(d), Some(p)]);
    }
    out.save(&csv, dir, "interfere.csv")?;
    out.metric("visibility", record.visibility);
    out.metric("delta_star", record.delta_star);
    out.metric("single_pulse_population", single);
    out.metric("pulse_area", pair.pulse_area(system));
    let max = record
        .populations
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let min = record
        .populations
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    out.metric("max_population", max);
    out.metric("min_population", min);
    if let Some(fit) = record.fit {
        out.metric("fit_amplitude", fit.amplitude);
        out.metric("fit_offset", fit.offset);
        out.metric("fit_max_residual", fit.max_residual);
    }
    Ok(())
}

fn initial_wave(block: &HydroBlock) -> Result<GridWavefunction, CliError> {
    let m = block.mass;
    let f = |x: f64| match block.initial {
        InitialWave::Gaussian { sigma, x0, k0 } => hydro::free_gaussian(x, 0.0, m, sigma, x0, k0),
        InitialWave::Harmonic {
            level,
            omega0,
            center,
        } => hydro::harmonic_state(x, level, m, omega0, center),
    };
    GridWavefunction::from_fn(block.x_min, block.dx, block.n_points, m, 0.0, f)
        .map_err(|e| module_error("hydro", e))
}

fn run_hydro(config: &ExperimentConfig, dir: &Path, out: &mut Output) -> Result<(), CliError> {
    let block = config.hydro.as_ref().expect("validated");
    let err = |e| module_error("hydro", e);
    let psi0 = initial_wave(block)?;
    let frames = hydro::split_step_frames(
        &psi0,
        &block.potential,
        block.t_final,
        block.dt,
        block.stride,
    )
    .map_err(err)?;
    let hj =
        hydro::hj_residual_with_floor(&frames, &block.potential, block.r_floor).map_err(err)?;
    let ct =
        hydro::continuity_residual_with_floor(&frames, block.mass, block.r_floor).map_err(err)?;

    // first, middle and last interior frames
    let interior = frames.len() - 2;
    let mut picks = vec![0, interior / 2, interior - 1];
    picks.dedup();
    let mut csv = Csv::new(&header(&[
        "t",
        "x",
        "R",
        "S",
        "U",
        "p",
        "hj_residual",
        "continuity_residual",
    ]));
    for &j in &picks {
        let frame = &frames[j + 1];
        let polar = hydro::polar_decompose(frame, block.r_floor);
        let u = hydro::quantum_potential(&polar, block.mass);
        let p = hydro::momentum_field(&polar);
        for i in 0..frame.n_points() {
            let valid = polar.valid[i];
            csv.row([
                Some(frame.t),
                Some(frame.x(i)),
                Some(polar.r[i]),
                valid.then_some(polar.s[i]),
                u[i],
                p[i],
                hj.fields[j][i],
                ct.fields[j][i],
            ]);
        }
    }
    out.save(&csv, dir, "hydro.csv")?;

    let norms: Vec<f64> = frames.iter().map(GridWavefunction::norm).collect();
    let drift = norms
        .iter()
        .map(|n| (n - norms[0]).abs())
        .fold(0.0, f64::max);
    out.metric("hj_residual_l2_rms", hj.l2_rms);
    out.metric("hj_residual_l2_max", hj.l2_max);
    out.metric("continuity_residual_l2_rms", ct.l2_rms);
    out.metric("continuity_residual_l2_max", ct.l2_max);
    out.metric("norm_drift", drift);
    out.metric("frames", frames.len() as f64);
    Ok(())
}
