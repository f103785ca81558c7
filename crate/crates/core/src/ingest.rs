//! Text formats for measured data and the ensemble manifest.
//!
//! Profile CSV (`read_dist_csv`):
//!
//! ```text
//! # unit: nm
//! 795.0,0.0012
//! 795.5,0.0031
//! ```
//!
//! The `# unit:` header (one of `nm`, `ps`, `ns`, `mm`, `dimensionless`)
//! must precede the first data row. Other `#` lines and blank lines are
//! ignored. Rows are `axis,value`; the axis must be increasing and uniform
//! to within a relative step tolerance of 1e-6.
//!
//! Mode CSV (`read_matrix_csv`): headers `# x: start,step` and
//! `# y: start,step` (optional `# unit: mm`), then one comma-separated row
//! of intensities per `y` pixel.
//!
//! Time tags (`read_timetags`): one time in ns per line.
//!
//! Negative samples are clamped to zero; the count and clamped mass are
//! returned in a [`ClampReport`].
//!
//! The manifest is TOML; see [`load_ensemble`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::ensemble::{DiodeRecord, Observation, Parameter, Polarization, SourceEnsemble};
use crate::error::Error;
use crate::leakage::PolarizationErrors;
use crate::signal::{histogram_from_timetags, Axis, SampledDistribution1D, SpatialMode2D, Unit};

pub const MANIFEST_VERSION: i64 = 1;
pub const DEFAULT_TIMETAG_BINS: usize = 65_536;
/// Clamped mass fraction above which a file is flagged.
pub const DEFAULT_MAX_CLAMP_FRACTION: f64 = 0.01;
const UNIFORM_STEP_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read: {0}")]
    Io(String),
    #[error("line {line}: bad header: {message}")]
    BadHeader { line: usize, message: String },
    #[error("line {line}: axis is not uniform")]
    NonUniformAxis { line: usize },
    #[error("need at least 2 data rows, found {rows}")]
    TooFewRows { rows: usize },
    #[error("line {line}: cannot parse row '{content}'")]
    UnparseableRow { line: usize, content: String },
    #[error("line {line}: row has {got} values, expected {expected}")]
    RaggedRows { line: usize, expected: usize, got: usize },
    #[error("no time tags found")]
    EmptyInput,
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("manifest version {0} is not supported (expected {MANIFEST_VERSION})")]
    UnsupportedVersion(i64),
    #[error("manifest has no diode labeled {0}")]
    MissingDiode(Polarization),
    #[error("manifest lists diode {0} more than once")]
    DuplicateLabel(String),
    #[error("unknown diode label '{0}'")]
    UnknownLabel(String),
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<IngestError>,
    },
    #[error(transparent)]
    Invalid(#[from] Error),
}

impl IngestError {
    /// The innermost error, past any file-path wrappers.
    pub fn root(&self) -> &IngestError {
        match self {
            IngestError::InFile { source, .. } => source.root(),
            e => e,
        }
    }

    fn in_file(self, path: &Path) -> IngestError {
        match self {
            e @ IngestError::InFile { .. } => e,
            e => IngestError::InFile { path: path.to_path_buf(), source: Box::new(e) },
        }
    }
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// Negative samples replaced by zero while loading one file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClampReport {
    pub count: usize,
    /// Sum of the absolute values that were clamped.
    pub clamped_mass: f64,
    /// Sum of the values kept (after clamping).
    pub kept_mass: f64,
}

impl ClampReport {
    fn absorb(&mut self, v: f64) -> f64 {
        if v < 0.0 {
            self.count += 1;
            self.clamped_mass += -v;
            0.0
        } else {
            self.kept_mass += v;
            v
        }
    }

    pub fn fraction(&self) -> f64 {
        let total = self.clamped_mass + self.kept_mass;
        if total > 0.0 {
            self.clamped_mass / total
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub value: T,
    pub clamps: ClampReport,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| IngestError::Io(e.to_string()).in_file(path))
}

fn parse_float(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn header_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let body = line.trim_start_matches('#').trim();
    let (k, v) = body.split_once(':')?;
    (k.trim() == key).then(|| v.trim())
}

fn parse_unit(line_no: usize, value: &str) -> Result<Unit> {
    Unit::parse(value)
        .ok_or_else(|| IngestError::BadHeader { line: line_no, message: format!("unknown unit '{value}'") })
}

/// Parses profile CSV text; see the module docs for the grammar.
pub fn parse_dist_csv(text: &str) -> Result<Loaded<SampledDistribution1D>> {
    let mut unit = None;
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(v) = header_value(line, "unit") {
                unit = Some(parse_unit(line_no, v)?);
            }
            continue;
        }
        if unit.is_none() {
            return Err(IngestError::BadHeader { line: line_no, message: "data before '# unit:' header".into() });
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed = match fields[..] {
            [x, y] => parse_float(x).zip(parse_float(y)),
            _ => None,
        };
        let (x, y) = parsed.ok_or_else(|| IngestError::UnparseableRow { line: line_no, content: line.to_string() })?;
        rows.push((line_no, x, y));
    }
    let unit = unit.ok_or(IngestError::BadHeader { line: 0, message: "missing '# unit:' header".into() })?;
    if rows.len() < 2 {
        return Err(IngestError::TooFewRows { rows: rows.len() });
    }
    let n = rows.len();
    let first = rows[1].1 - rows[0].1;
    if !(first > 0.0) {
        return Err(IngestError::NonUniformAxis { line: rows[1].0 });
    }
    for w in rows.windows(2) {
        if ((w[1].1 - w[0].1) - first).abs() > UNIFORM_STEP_TOL * first {
            return Err(IngestError::NonUniformAxis { line: w[1].0 });
        }
    }
    let step = (rows[n - 1].1 - rows[0].1) / (n - 1) as f64;
    let mut clamps = ClampReport::default();
    let values: Vec<f64> = rows.iter().map(|r| clamps.absorb(r.2)).collect();
    let axis = Axis::new(rows[0].1, step, n, unit)?;
    let value = SampledDistribution1D::normalized_from(axis, values)?;
    Ok(Loaded { value, clamps })
}

/// Reads a profile CSV file.
pub fn read_dist_csv(path: impl AsRef<Path>) -> Result<Loaded<SampledDistribution1D>> {
    let path = path.as_ref();
    let loaded = parse_dist_csv(&read_text(path)?).map_err(|e| e.in_file(path))?;
    if loaded.clamps.count > 0 {
        log::warn!("{}: clamped {} negative values", path.display(), loaded.clamps.count);
    }
    Ok(loaded)
}

fn parse_start_step(line_no: usize, key: &str, value: &str) -> Result<(f64, f64)> {
    let bad = || IngestError::BadHeader { line: line_no, message: format!("'{key}' must be 'start,step'") };
    let (a, b) = value.split_once(',').ok_or_else(bad)?;
    let (start, step) = parse_float(a).zip(parse_float(b)).ok_or_else(bad)?;
    if !(step > 0.0) {
        return Err(IngestError::BadHeader { line: line_no, message: format!("'{key}' step must be positive") });
    }
    Ok((start, step))
}

/// Parses mode CSV text; see the module docs for the grammar.
pub fn parse_matrix_csv(text: &str) -> Result<Loaded<SpatialMode2D>> {
    let (mut x, mut y, mut unit) = (None, None, Unit::Mm);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(v) = header_value(line, "x") {
                x = Some(parse_start_step(line_no, "x", v)?);
            } else if let Some(v) = header_value(line, "y") {
                y = Some(parse_start_step(line_no, "y", v)?);
            } else if let Some(v) = header_value(line, "unit") {
                unit = parse_unit(line_no, v)?;
            }
            continue;
        }
        if x.is_none() || y.is_none() {
            return Err(IngestError::BadHeader {
                line: line_no,
                message: "data before '# x:' and '# y:' headers".into(),
            });
        }
        let row = line
            .split(',')
            .map(parse_float)
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| IngestError::UnparseableRow { line: line_no, content: line.to_string() })?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(IngestError::RaggedRows { line: line_no, expected: w, got: row.len() })
            }
            _ => {}
        }
        rows.push(row);
    }
    let (x, y) = match (x, y) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(IngestError::BadHeader { line: 0, message: "missing '# x:' or '# y:' header".into() }),
    };
    let cols = width.unwrap_or(0);
    if rows.len() < 2 || cols < 2 {
        return Err(IngestError::TooFewRows { rows: rows.len().min(cols) });
    }
    let mut clamps = ClampReport::default();
    let values: Vec<f64> = rows.iter().flatten().map(|&v| clamps.absorb(v)).collect();
    let x_axis = Axis::new(x.0, x.1, cols, unit)?;
    let y_axis = Axis::new(y.0, y.1, rows.len(), unit)?;
    let value = SpatialMode2D::normalized_from(x_axis, y_axis, values)?;
    Ok(Loaded { value, clamps })
}

/// Reads a spatial-mode CSV file.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Loaded<SpatialMode2D>> {
    let path = path.as_ref();
    let loaded = parse_matrix_csv(&read_text(path)?).map_err(|e| e.in_file(path))?;
    if loaded.clamps.count > 0 {
        log::warn!("{}: clamped {} negative values", path.display(), loaded.clamps.count);
    }
    Ok(loaded)
}

/// Parses one time tag (ns) per line.
pub fn parse_timetags(text: &str) -> Result<Vec<f64>> {
    let mut tags = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let t =
            parse_float(line).ok_or_else(|| IngestError::UnparseableRow { line: i + 1, content: line.to_string() })?;
        tags.push(t);
    }
    if tags.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    Ok(tags)
}

/// Reads raw time tags and histograms them against the clock.
pub fn read_timetags(path: impl AsRef<Path>, clock_period_ns: f64, bins: usize) -> Result<SampledDistribution1D> {
    let path = path.as_ref();
    let run = || -> Result<SampledDistribution1D> {
        let tags = parse_timetags(&read_text(path)?)?;
        histogram_from_timetags(&tags, clock_period_ns, bins).map_err(|e| match e {
            Error::EmptyInput => IngestError::EmptyInput,
            e => IngestError::Invalid(e),
        })
    };
    run().map_err(|e| e.in_file(path))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| IngestError::Io(e.to_string()).in_file(path))
}

pub fn format_dist_csv(d: &SampledDistribution1D) -> String {
    let mut out = format!("# unit: {}\n", d.unit());
    for (x, v) in d.axis().points().zip(d.density()) {
        let _ = writeln!(out, "{x},{v:e}");
    }
    out
}

pub fn write_dist_csv(path: impl AsRef<Path>, d: &SampledDistribution1D) -> Result<()> {
    write_file(path.as_ref(), &format_dist_csv(d))
}

pub fn format_matrix_csv(m: &SpatialMode2D) -> String {
    let mut out = format!(
        "# unit: {}\n# x: {},{}\n# y: {},{}\n",
        m.x_axis().unit(),
        m.x_axis().start(),
        m.x_axis().step(),
        m.y_axis().start(),
        m.y_axis().step()
    );
    for row in m.intensity().chunks(m.cols()) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &SpatialMode2D) -> Result<()> {
    write_file(path.as_ref(), &format_matrix_csv(m))
}

pub fn write_timetags(path: impl AsRef<Path>, tags: &[f64]) -> Result<()> {
    let mut out = String::from("# time tags (ns)\n");
    for t in tags {
        let _ = writeln!(out, "{t}");
    }
    write_file(path.as_ref(), &out)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    version: i64,
    clock_period_ns: f64,
    timetag_bins: Option<usize>,
    polarization_errors: ErrorsEntry,
    #[serde(default)]
    diode: Vec<DiodeEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ErrorsEntry {
    e_hv: f64,
    e_da: f64,
}

#[derive(Debug, Deserialize)]
struct DiodeEntry {
    label: String,
    mean_photon_number: Option<f64>,
    #[serde(flatten)]
    files: BTreeMap<String, toml::Value>,
}

/// Where a parameter's data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Profile(PathBuf),
    Mode(PathBuf),
    TimeTags(PathBuf),
}

/// A validated manifest with file paths resolved against its directory.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleManifest {
    pub version: i64,
    pub clock_period_ns: f64,
    pub timetag_bins: usize,
    pub polarization_errors: PolarizationErrors,
    pub diodes: BTreeMap<Polarization, (f64, BTreeMap<Parameter, DataSource>)>,
}

/// Parses manifest text; relative paths resolve against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<EnsembleManifest> {
    let file: ManifestFile = toml::from_str(text).map_err(|e| IngestError::Manifest(e.message().to_string()))?;
    if file.version != MANIFEST_VERSION {
        return Err(IngestError::UnsupportedVersion(file.version));
    }
    if !(file.clock_period_ns > 0.0) {
        return Err(Error::NonPositivePeriod(file.clock_period_ns).into());
    }
    let errors = PolarizationErrors::new(file.polarization_errors.e_hv, file.polarization_errors.e_da)?;
    let mut seen = BTreeSet::new();
    let mut diodes = BTreeMap::new();
    for entry in file.diode {
        let label = Polarization::parse(&entry.label).ok_or_else(|| IngestError::UnknownLabel(entry.label.clone()))?;
        if !seen.insert(label) {
            return Err(IngestError::DuplicateLabel(label.to_string()));
        }
        let mut sources = BTreeMap::new();
        for (key, value) in entry.files {
            let rel = value
                .as_str()
                .ok_or_else(|| IngestError::Manifest(format!("diode {label}: '{key}' must be a file path")))?;
            let path = base.join(rel);
            let (parameter, source) = match key.as_str() {
                "arrival_tags" => (Parameter::Arrival, DataSource::TimeTags(path)),
                k => {
                    let p = Parameter::parse(k).ok_or_else(|| IngestError::UnknownParameter(k.to_string()))?;
                    let s = if p.is_spatial() { DataSource::Mode(path) } else { DataSource::Profile(path) };
                    (p, s)
                }
            };
            if sources.insert(parameter, source).is_some() {
                return Err(IngestError::Manifest(format!("diode {label}: '{parameter}' given twice")));
            }
        }
        diodes.insert(label, (entry.mean_photon_number.unwrap_or(1.0), sources));
    }
    if let Some(missing) = Polarization::ALL.into_iter().find(|p| !diodes.contains_key(p)) {
        return Err(IngestError::MissingDiode(missing));
    }
    Ok(EnsembleManifest {
        version: file.version,
        clock_period_ns: file.clock_period_ns,
        timetag_bins: file.timetag_bins.unwrap_or(DEFAULT_TIMETAG_BINS),
        polarization_errors: errors,
        diodes,
    })
}

/// Loads every file a manifest references into a [`SourceEnsemble`].
///
/// ```toml
/// version = 1
/// clock_period_ns = 200.0
/// timetag_bins = 65536           # optional, for arrival_tags files
///
/// [polarization_errors]
/// e_hv = 0.0341
/// e_da = 0.0094
///
/// [[diode]]
/// label = "H"
/// mean_photon_number = 0.5       # optional
/// wavelength = "H_wavelength.csv"
/// pulse = "H_pulse.csv"
/// arrival = "H_arrival.csv"      # or arrival_tags = "H.tags"
/// spatial = "H_spatial.csv"
/// ```
pub fn load_ensemble(manifest_path: impl AsRef<Path>) -> Result<SourceEnsemble> {
    load_ensemble_with(manifest_path, DEFAULT_MAX_CLAMP_FRACTION)
}

pub fn load_ensemble_with(manifest_path: impl AsRef<Path>, max_clamp_fraction: f64) -> Result<SourceEnsemble> {
    let path = manifest_path.as_ref();
    let text = read_text(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let manifest = parse_manifest(&text, base).map_err(|e| e.in_file(path))?;

    let mut warnings = Vec::new();
    let mut note = |file: &Path, clamps: ClampReport| {
        if clamps.count > 0 {
            warnings.push(format!("{}: clamped {} negative values", file.display(), clamps.count));
        }
        if clamps.fraction() > max_clamp_fraction {
            warnings.push(format!(
                "{}: clamped mass fraction {:.4} exceeds {max_clamp_fraction}",
                file.display(),
                clamps.fraction()
            ));
        }
    };
    let mut records = Vec::with_capacity(4);
    for (label, (mu, sources)) in &manifest.diodes {
        let mut record = DiodeRecord::new(*label, *mu);
        for (parameter, source) in sources {
            let observation = match source {
                DataSource::Profile(p) => {
                    let l = read_dist_csv(p)?;
                    note(p, l.clamps);
                    Observation::Profile(l.value)
                }
                DataSource::Mode(p) => {
                    let l = read_matrix_csv(p)?;
                    note(p, l.clamps);
                    Observation::Mode(l.value)
                }
                DataSource::TimeTags(p) => {
                    Observation::Profile(read_timetags(p, manifest.clock_period_ns, manifest.timetag_bins)?)
                }
            };
            record.parameters.insert(*parameter, observation);
        }
        records.push(record);
    }
    let mut ensemble = SourceEnsemble::new(records, manifest.polarization_errors, manifest.clock_period_ns)
        .map_err(|e| IngestError::from(e).in_file(path))?;
    ensemble.warnings = warnings;
    Ok(ensemble)
}

/// Writes an ensemble as one file per diode and parameter plus `manifest.toml`.
///
/// Returns the manifest path.
pub fn write_ensemble(ensemble: &SourceEnsemble, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| IngestError::Io(e.to_string()).in_file(dir))?;
    let mut manifest = format!(
        "version = {MANIFEST_VERSION}\nclock_period_ns = {}\n\n[polarization_errors]\ne_hv = {}\ne_da = {}\n",
        ensemble.clock_period_ns, ensemble.polarization_errors.e_hv, ensemble.polarization_errors.e_da
    );
    for diode in ensemble.diodes() {
        let _ = write!(
            manifest,
            "\n[[diode]]\nlabel = \"{}\"\nmean_photon_number = {}\n",
            diode.polarization, diode.mean_photon_number
        );
        for (parameter, observation) in &diode.parameters {
            let name = format!("{}_{}.csv", diode.polarization, parameter);
            match observation {
                Observation::Profile(d) => write_dist_csv(dir.join(&name), d)?,
                Observation::Mode(m) => write_matrix_csv(dir.join(&name), m)?,
            }
            let _ = writeln!(manifest, "{parameter} = \"{name}\"");
        }
    }
    let path = dir.join("manifest.toml");
    write_file(&path, &manifest)?;
    Ok(path)
}
