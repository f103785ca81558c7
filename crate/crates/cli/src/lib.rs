//! Command implementations behind the `sidechan` binary.
//!
//! Exit codes: 0 success (or secure key rate), 1 internal error, 2 input
//! validation error, 3 key rate at or below zero.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sidechan_core::ingest::{self, IngestError};
use sidechan_core::leakage::{basis_pair, basis_report, EstimatorOptions, DEFAULT_CELL_BUDGET};
use sidechan_core::report::{analyze, AnalysisOptions, InputFingerprint, ReportDocument};
use sidechan_core::synth::{synth_ensemble, EnsembleConfig, PRESET_NAMES};
use sidechan_core::xcorr::downsample_2d;
use sidechan_core::{Basis, Direction, Method, Observation, Parameter, Polarization, SourceEnsemble};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INSECURE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Core(#[from] sidechan_core::Error),
    #[error("unknown preset '{0}' (known: {known})", known = PRESET_NAMES.join(", "))]
    UnknownPreset(String),
    #[error("bad sweep '{spec}': {reason}")]
    BadSweep { spec: String, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Output { .. } | CliError::Internal(_) => EXIT_INTERNAL,
            _ => EXIT_VALIDATION,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn output_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output { path: path.to_path_buf(), message: e.to_string() }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| output_err(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Renders a preset into an ensemble.
pub fn preset_ensemble(name: &str, seed: u64) -> Result<SourceEnsemble> {
    let config = EnsembleConfig::preset(name, seed).ok_or_else(|| CliError::UnknownPreset(name.to_string()))?;
    Ok(synth_ensemble(&config)?)
}

/// Where the ensemble comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Manifest(PathBuf),
    Preset { name: String, seed: u64 },
}

impl Source {
    pub fn load(&self) -> Result<(SourceEnsemble, InputFingerprint)> {
        match self {
            Source::Manifest(p) => {
                let ens = ingest::load_ensemble(p)?;
                Ok((ens, InputFingerprint::manifest(p.display().to_string())))
            }
            Source::Preset { name, seed } => {
                Ok((preset_ensemble(name, *seed)?, InputFingerprint::preset(name.clone(), *seed)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeArgs {
    pub manifest: PathBuf,
    pub parameters: Vec<Parameter>,
    /// Empty means exact, eq8 and guessing.
    pub methods: Vec<Method>,
    pub out: PathBuf,
    pub joint: bool,
    pub estimator: EstimatorOptions,
    pub cell_budget: u64,
}

impl AnalyzeArgs {
    pub fn new(manifest: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        AnalyzeArgs {
            manifest: manifest.into(),
            parameters: Vec::new(),
            methods: Vec::new(),
            out: out.into(),
            joint: false,
            estimator: EstimatorOptions::default(),
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }
}

fn analysis_options(
    parameters: &[Parameter],
    methods: &[Method],
    joint: bool,
    estimator: EstimatorOptions,
    cell_budget: u64,
) -> AnalysisOptions {
    let mut opts = AnalysisOptions {
        parameters: parameters.to_vec(),
        joint,
        estimator,
        cell_budget,
        ..AnalysisOptions::default()
    };
    if !methods.is_empty() {
        opts.methods = methods.to_vec();
    }
    opts
}

/// Loads a manifest, analyzes it and writes the JSON report to `args.out`.
pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<ReportDocument> {
    let (ensemble, input) = Source::Manifest(args.manifest.clone()).load()?;
    let opts = analysis_options(&args.parameters, &args.methods, args.joint, args.estimator, args.cell_budget);
    let report = analyze(&ensemble, &opts, input)?;
    write_file(&args.out, &to_json(&report)?)?;
    Ok(report)
}

/// What a `simulate` run varies.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Offset of V from H and of A from D, in the parameter's axis unit.
    Offset { parameter: Parameter, values: Vec<f64> },
    /// Spatial-mode block-downsample factors.
    Pixel { factors: Vec<usize> },
}

impl Sweep {
    /// Parses `param:lo:hi:steps` or `pixel:f1,f2,...`.
    pub fn parse(spec: &str) -> Result<Sweep> {
        let bad = |reason: &str| CliError::BadSweep { spec: spec.to_string(), reason: reason.to_string() };
        let (head, rest) = spec.split_once(':').ok_or_else(|| bad("expected 'param:lo:hi:steps' or 'pixel:f1,...'"))?;
        if head == "pixel" {
            let factors = rest
                .split(',')
                .map(|f| f.trim().parse::<usize>().ok().filter(|&f| f > 0))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad("factors must be positive integers"))?;
            return Ok(Sweep::Pixel { factors });
        }
        let parameter = Parameter::parse(head).ok_or_else(|| bad("unknown parameter"))?;
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, steps] = parts[..] else {
            return Err(bad("expected 'param:lo:hi:steps'"));
        };
        let lo: f64 = lo.parse().map_err(|_| bad("lo is not a number"))?;
        let hi: f64 = hi.parse().map_err(|_| bad("hi is not a number"))?;
        let steps: usize = steps.parse().map_err(|_| bad("steps is not a positive integer"))?;
        if !lo.is_finite() || !hi.is_finite() || steps == 0 {
            return Err(bad("lo and hi must be finite and steps positive"));
        }
        let values = if steps == 1 {
            vec![lo]
        } else {
            (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
        };
        Ok(Sweep::Offset { parameter, values })
    }

    fn label(&self) -> String {
        match self {
            Sweep::Offset { parameter, .. } => format!("{parameter}_offset"),
            Sweep::Pixel { .. } => "pixel_factor".to_string(),
        }
    }

    fn parameter(&self) -> Parameter {
        match self {
            Sweep::Offset { parameter, .. } => *parameter,
            Sweep::Pixel { .. } => Parameter::Spatial,
        }
    }

    fn xs(&self) -> Vec<f64> {
        match self {
            Sweep::Offset { values, .. } => values.clone(),
            Sweep::Pixel { factors } => factors.iter().map(|&f| f as f64).collect(),
        }
    }
}

/// Leakage curves from one sweep. Every series is max-over-basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub parameter: Parameter,
    pub variable: String,
    pub values: Vec<f64>,
    pub leakage: BTreeMap<Method, Vec<f64>>,
    /// Smaller zero-lag overlap of the two bases.
    pub r0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub report: ReportDocument,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub preset: String,
    pub seed: u64,
    pub sweep: Option<Sweep>,
    pub methods: Vec<Method>,
    pub out_dir: PathBuf,
    /// Also write the rendered ensemble (CSV files and manifest) under `out_dir/ensemble`.
    pub export: bool,
    pub joint: bool,
    pub estimator: EstimatorOptions,
    pub cell_budget: u64,
}

impl SimulateArgs {
    pub fn new(preset: impl Into<String>, seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        SimulateArgs {
            preset: preset.into(),
            seed,
            sweep: None,
            methods: Vec::new(),
            out_dir: out_dir.into(),
            export: false,
            joint: false,
            estimator: EstimatorOptions::default(),
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }
}

fn offset_ensemble(config: &EnsembleConfig, parameter: Parameter, delta: f64) -> Result<SourceEnsemble> {
    let mut specs = config.realized_specs()?;
    let find = |specs: &[sidechan_core::synth::DiodeSpec], p| {
        *specs.iter().find(|s| s.polarization == p).expect("realized specs hold all four diodes")
    };
    for basis in Basis::ALL {
        let (l0, l1) = basis.labels();
        let mut moved = find(&specs, l0);
        moved.polarization = l1;
        moved.shift(parameter, delta);
        *specs.iter_mut().find(|s| s.polarization == l1).expect("diode present") = moved;
    }
    let fixed = EnsembleConfig { diodes: specs, between_diode_jitter: 0.0, ..config.clone() };
    Ok(synth_ensemble(&fixed)?)
}

fn downsampled_ensemble(base: &SourceEnsemble, factor: usize) -> Result<SourceEnsemble> {
    let mut ens = base.clone();
    for p in Polarization::ALL {
        let mode = match base.observation(p, Parameter::Spatial)? {
            Observation::Mode(m) => downsample_2d(m, factor)?,
            Observation::Profile(_) => return Err(sidechan_core::Error::KindMismatch.into()),
        };
        ens.diode_mut(p).parameters.insert(Parameter::Spatial, Observation::Mode(mode));
    }
    Ok(ens)
}

fn sweep_point(
    ens: &SourceEnsemble,
    parameter: Parameter,
    methods: &[Method],
    estimator: &EstimatorOptions,
) -> Result<(Vec<f64>, f64)> {
    let leak =
        methods.iter().map(|&m| Ok(basis_report(ens, parameter, m, estimator)?.max)).collect::<Result<Vec<_>>>()?;
    let mut r0 = f64::INFINITY;
    for b in Basis::ALL {
        r0 = r0.min(basis_pair(ens, parameter, b, estimator.prior0)?.overlap()?);
    }
    Ok((leak, r0))
}

fn run_sweep(
    config: &EnsembleConfig,
    base: &SourceEnsemble,
    sweep: &Sweep,
    methods: &[Method],
    estimator: &EstimatorOptions,
) -> Result<SweepResult> {
    let parameter = sweep.parameter();
    let points: Vec<Result<(Vec<f64>, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sweep
            .xs()
            .into_iter()
            .map(|x| {
                scope.spawn(move || {
                    let ens = match sweep {
                        Sweep::Offset { parameter, .. } => offset_ensemble(config, *parameter, x)?,
                        Sweep::Pixel { .. } => downsampled_ensemble(base, x as usize)?,
                    };
                    sweep_point(&ens, parameter, methods, estimator)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep thread panicked")).collect()
    });
    let mut leakage: BTreeMap<Method, Vec<f64>> = methods.iter().map(|&m| (m, Vec::new())).collect();
    let mut r0 = Vec::new();
    for point in points {
        let (leak, r) = point?;
        for (m, v) in methods.iter().zip(leak) {
            leakage.get_mut(m).expect("method registered").push(v);
        }
        r0.push(r);
    }
    Ok(SweepResult { parameter, variable: sweep.label(), values: sweep.xs(), leakage, r0 })
}

/// Two-column whitespace-separated text with a `#` header line.
pub fn format_curve(x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    let mut s = format!("# {x_label} {y_label}\n");
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(s, "{x} {y:e}");
    }
    s
}

/// Renders a preset, analyzes it, runs the optional sweep and writes
/// `summary.json` plus one `sweep_<method>.dat` per method and `sweep_r0.dat`.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<SimulationSummary> {
    let config =
        EnsembleConfig::preset(&args.preset, args.seed).ok_or_else(|| CliError::UnknownPreset(args.preset.clone()))?;
    let ensemble = synth_ensemble(&config)?;
    let opts = analysis_options(&[], &args.methods, args.joint, args.estimator, args.cell_budget);
    let report = analyze(&ensemble, &opts, InputFingerprint::preset(args.preset.clone(), args.seed))?;

    let sweep = match &args.sweep {
        Some(s) => Some(run_sweep(&config, &ensemble, s, &opts.methods, &args.estimator)?),
        None => None,
    };

    fs::create_dir_all(&args.out_dir).map_err(|e| output_err(&args.out_dir, e))?;
    if let Some(s) = &sweep {
        for (m, ys) in &s.leakage {
            let path = args.out_dir.join(format!("sweep_{}.dat", m.as_str()));
            write_file(&path, &format_curve(&s.variable, &format!("{}_bits_per_pulse", m.as_str()), &s.values, ys))?;
        }
        write_file(&args.out_dir.join("sweep_r0.dat"), &format_curve(&s.variable, "r0", &s.values, &s.r0))?;
    }
    if args.export {
        ingest::write_ensemble(&ensemble, args.out_dir.join("ensemble"))?;
    }
    let summary = SimulationSummary { report, sweep };
    write_file(&args.out_dir.join("summary.json"), &to_json(&summary)?)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateArgs {
    pub qber: f64,
    pub source: Source,
    pub direction: Direction,
    pub i_be: Option<f64>,
    pub cell_budget: u64,
}

impl KeyRateArgs {
    pub fn new(qber: f64, source: Source) -> Self {
        KeyRateArgs { qber, source, direction: Direction::DR, i_be: None, cell_budget: DEFAULT_CELL_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateOutcome {
    pub i_ab: f64,
    pub i_ae: f64,
    pub rate: f64,
}

impl KeyRateOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.rate > 0.0 {
            EXIT_OK
        } else {
            EXIT_INSECURE
        }
    }
}

/// `I(A:B)` at the given QBER minus the exact leakage budget of the source.
pub fn cmd_keyrate(args: &KeyRateArgs) -> Result<KeyRateOutcome> {
    sidechan_core::leakage::qber_to_iab(args.qber)?;
    let (ensemble, input) = args.source.load()?;
    let opts = analysis_options(&[], &[Method::Exact], false, EstimatorOptions::default(), args.cell_budget);
    let report = analyze(&ensemble, &opts, input)?.with_key_rate(args.qber, args.direction, args.i_be)?;
    let k = report.key_rate.ok_or_else(|| CliError::Internal("key-rate section missing".into()))?;
    Ok(KeyRateOutcome { i_ab: k.i_ab, i_ae: k.i_ae, rate: k.rate })
}

/// Parses a method name as accepted on the command line.
pub fn parse_method(s: &str) -> Result<Method> {
    Method::parse(s)
        .ok_or_else(|| CliError::Usage(format!("unknown method '{s}' (expected exact, eq8, guessing or mc)")))
}

pub fn parse_parameter(s: &str) -> Result<Parameter> {
    Parameter::parse(s).ok_or_else(|| {
        CliError::Usage(format!("unknown parameter '{s}' (expected wavelength, pulse, arrival or spatial)"))
    })
}

pub fn parse_direction(s: &str) -> Result<Direction> {
    match s {
        "dr" => Ok(Direction::DR),
        "rr" => Ok(Direction::RR),
        _ => Err(CliError::Usage(format!("unknown direction '{s}' (expected dr or rr)"))),
    }
}
