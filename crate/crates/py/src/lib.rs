//! Python bindings: `import sidechan`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use sidechan_core::ingest::{self, IngestError};
use sidechan_core::leakage::{self as lk, EstimatorOptions};
use sidechan_core::report::{self, AnalysisOptions, InputFingerprint};
use sidechan_core::signal;
use sidechan_core::synth::{self, EnsembleConfig};
use sidechan_core::xcorr;
use sidechan_core::{
    Axis, Basis, BasisPair, Direction, Method, Observation, Parameter, SampledDistribution1D, SourceEnsemble, Unit,
};

create_exception!(sidechan, SidechanError, PyValueError);

fn core_err(e: sidechan_core::Error) -> PyErr {
    SidechanError::new_err(e.to_string())
}

fn ingest_err(e: IngestError) -> PyErr {
    SidechanError::new_err(e.to_string())
}

fn bad(msg: String) -> PyErr {
    SidechanError::new_err(msg)
}

fn parse_unit(s: &str) -> PyResult<Unit> {
    Unit::parse(s).ok_or_else(|| bad(format!("unknown unit '{s}'")))
}

fn parse_method(s: &str) -> PyResult<Method> {
    Method::parse(s).ok_or_else(|| bad(format!("unknown method '{s}'")))
}

fn parse_parameter(s: &str) -> PyResult<Parameter> {
    Parameter::parse(s).ok_or_else(|| bad(format!("unknown parameter '{s}'")))
}

/// Density on a uniform grid, normalized on construction.
#[pyclass(name = "Distribution", module = "sidechan", frozen)]
pub struct PyDistribution {
    inner: SampledDistribution1D,
}

#[pymethods]
impl PyDistribution {
    #[new]
    #[pyo3(signature = (start, step, values, unit = "nm"))]
    fn new(start: f64, step: f64, values: Vec<f64>, unit: &str) -> PyResult<Self> {
        let axis = Axis::new(start, step, values.len(), parse_unit(unit)?).map_err(core_err)?;
        let inner = SampledDistribution1D::normalized_from(axis, values).map_err(core_err)?;
        Ok(PyDistribution { inner })
    }

    #[getter]
    fn axis(&self) -> Vec<f64> {
        self.inner.axis().points().collect()
    }

    #[getter]
    fn density(&self) -> Vec<f64> {
        self.inner.density().to_vec()
    }

    #[getter]
    fn unit(&self) -> &'static str {
        self.inner.unit().as_str()
    }

    fn integral(&self) -> f64 {
        self.inner.integral()
    }

    fn fwhm(&self) -> PyResult<f64> {
        signal::fwhm(&self.inner).map_err(core_err)
    }

    fn peak(&self) -> f64 {
        signal::peak_location(&self.inner)
    }

    fn mean_std(&self) -> PyResult<(f64, f64)> {
        signal::mean_std(&self.inner).map_err(core_err)
    }

    fn __len__(&self) -> usize {
        self.inner.axis().count()
    }

    fn __repr__(&self) -> String {
        let a = self.inner.axis();
        format!("Distribution(start={}, step={}, count={}, unit='{}')", a.start(), a.step(), a.count(), a.unit())
    }
}

/// Normalized Gaussian sampled at `bins` points on `[lo, hi]`.
#[pyfunction]
#[pyo3(signature = (mean, sigma, lo, hi, bins = 4096, unit = "nm"))]
fn gaussian(mean: f64, sigma: f64, lo: f64, hi: f64, bins: usize, unit: &str) -> PyResult<PyDistribution> {
    let axis = Axis::spanning(lo, hi, bins, parse_unit(unit)?).map_err(core_err)?;
    let inner = synth::synth_distribution(mean, sigma, axis).map_err(core_err)?;
    Ok(PyDistribution { inner })
}

fn pair(f: &PyDistribution, g: &PyDistribution, prior0: f64) -> PyResult<BasisPair> {
    BasisPair::resampled(
        Basis::HV,
        &Observation::Profile(f.inner.clone()),
        &Observation::Profile(g.inner.clone()),
        prior0,
    )
    .map_err(core_err)
}

/// Zero-lag normalized overlap R(0) after resampling to a common grid.
#[pyfunction]
fn overlap(f: &PyDistribution, g: &PyDistribution) -> PyResult<f64> {
    pair(f, g, 0.5)?.overlap().map_err(core_err)
}

/// `(shifts, values)` of the normalized cross-correlation on a shared grid.
#[pyfunction]
fn cross_correlation(f: &PyDistribution, g: &PyDistribution, max_shift: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let c = xcorr::cross_correlation(&f.inner, &g.inner, max_shift).map_err(core_err)?;
    Ok((c.shifts, c.values))
}

/// Leakage in bits per pulse between two sources by the named method.
///
/// Returns `(bits, raw, stderr)`; `stderr` is `None` except for `"mc"`.
#[pyfunction]
#[pyo3(signature = (f, g, method = "exact", prior0 = 0.5, mc_samples = 1_000_000, seed = 0))]
fn leakage(
    f: &PyDistribution,
    g: &PyDistribution,
    method: &str,
    prior0: f64,
    mc_samples: usize,
    seed: u64,
) -> PyResult<(f64, f64, Option<f64>)> {
    let opts = EstimatorOptions { prior0, mc_samples, seed, ..EstimatorOptions::default() };
    let r = lk::pair_leakage(&pair(f, g, prior0)?, parse_method(method)?, &opts).map_err(core_err)?;
    Ok((r.bits_per_pulse, r.raw(), r.stderr()))
}

#[pyfunction]
fn binary_entropy(p: f64) -> PyResult<f64> {
    lk::binary_entropy(p).map_err(core_err)
}

/// `(clamped, raw)` literal overlap formula.
#[pyfunction]
#[pyo3(signature = (r0, prior = 0.5))]
fn leakage_eq8(r0: f64, prior: f64) -> PyResult<(f64, f64)> {
    let r = lk::leakage_eq8_literal(r0, prior).map_err(core_err)?;
    Ok((r.bits_per_pulse, r.raw()))
}

#[pyfunction]
fn leakage_guessing(r0: f64) -> PyResult<f64> {
    Ok(lk::leakage_guessing(r0).map_err(core_err)?.bits_per_pulse)
}

#[pyfunction]
fn qber_to_iab(qber: f64) -> PyResult<f64> {
    lk::qber_to_iab(qber).map_err(core_err)
}

#[pyfunction]
#[pyo3(signature = (i_ab, i_ae, direction = "dr", i_be = None))]
fn key_rate(i_ab: f64, i_ae: f64, direction: &str, i_be: Option<f64>) -> PyResult<f64> {
    let dir = match direction {
        "dr" => Direction::DR,
        "rr" => Direction::RR,
        d => return Err(bad(format!("unknown direction '{d}'"))),
    };
    lk::key_rate_bound(i_ab, i_ae, dir, i_be).map_err(core_err)
}

#[pyfunction]
fn read_dist_csv(path: PathBuf) -> PyResult<PyDistribution> {
    Ok(PyDistribution { inner: ingest::read_dist_csv(path).map_err(ingest_err)?.value })
}

#[pyfunction]
fn read_timetags(path: PathBuf, clock_period_ns: f64, bins: usize) -> PyResult<PyDistribution> {
    Ok(PyDistribution { inner: ingest::read_timetags(path, clock_period_ns, bins).map_err(ingest_err)? })
}

/// Four diodes (H, V, D, A) with their measured or synthetic observations.
#[pyclass(name = "Ensemble", module = "sidechan", frozen)]
pub struct PyEnsemble {
    inner: SourceEnsemble,
    input: InputFingerprint,
}

#[pymethods]
impl PyEnsemble {
    #[staticmethod]
    #[pyo3(signature = (name, seed = 0))]
    fn preset(name: &str, seed: u64) -> PyResult<Self> {
        let config = EnsembleConfig::preset(name, seed)
            .ok_or_else(|| bad(format!("unknown preset '{name}' (known: {})", synth::PRESET_NAMES.join(", "))))?;
        let inner = synth::synth_ensemble(&config).map_err(core_err)?;
        Ok(PyEnsemble { inner, input: InputFingerprint::preset(name, seed) })
    }

    #[staticmethod]
    fn load(manifest: PathBuf) -> PyResult<Self> {
        let inner = ingest::load_ensemble(&manifest).map_err(ingest_err)?;
        Ok(PyEnsemble { inner, input: InputFingerprint::manifest(manifest.display().to_string()) })
    }

    fn parameters(&self) -> Vec<&'static str> {
        self.inner.parameters().into_iter().map(Parameter::as_str).collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// `(hv, da)` leakage of one parameter.
    #[pyo3(signature = (parameter, method = "exact", mc_samples = 1_000_000, seed = 0))]
    fn basis_report(&self, parameter: &str, method: &str, mc_samples: usize, seed: u64) -> PyResult<(f64, f64)> {
        let opts = EstimatorOptions { mc_samples, seed, ..EstimatorOptions::default() };
        let r = lk::basis_report(&self.inner, parse_parameter(parameter)?, parse_method(method)?, &opts)
            .map_err(core_err)?;
        Ok((r.hv.bits_per_pulse, r.da.bits_per_pulse))
    }

    /// Full analysis as the JSON report document.
    #[pyo3(signature = (methods = None, parameters = None, joint = false, qber = None))]
    fn analyze(
        &self,
        py: Python<'_>,
        methods: Option<Vec<String>>,
        parameters: Option<Vec<String>>,
        joint: bool,
        qber: Option<f64>,
    ) -> PyResult<String> {
        let mut opts = AnalysisOptions { joint, ..AnalysisOptions::default() };
        if let Some(ms) = methods {
            opts.methods = ms.iter().map(|m| parse_method(m)).collect::<PyResult<_>>()?;
        }
        if let Some(ps) = parameters {
            opts.parameters = ps.iter().map(|p| parse_parameter(p)).collect::<PyResult<_>>()?;
        }
        let doc = py
            .detach(|| {
                let doc = report::analyze(&self.inner, &opts, self.input.clone())?;
                match qber {
                    Some(q) => doc.with_key_rate(q, Direction::DR, None),
                    None => Ok(doc),
                }
            })
            .map_err(core_err)?;
        serde_json::to_string_pretty(&doc).map_err(|e| bad(e.to_string()))
    }

    /// Writes CSV files plus `manifest.toml` into `dir`; returns the manifest path.
    fn write(&self, dir: PathBuf) -> PyResult<PathBuf> {
        ingest::write_ensemble(&self.inner, dir).map_err(ingest_err)
    }
}

#[pymodule]
pub fn sidechan(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SidechanError", m.py().get_type::<SidechanError>())?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(overlap, m)?)?;
    m.add_function(wrap_pyfunction!(cross_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(leakage, m)?)?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(leakage_eq8, m)?)?;
    m.add_function(wrap_pyfunction!(leakage_guessing, m)?)?;
    m.add_function(wrap_pyfunction!(qber_to_iab, m)?)?;
    m.add_function(wrap_pyfunction!(key_rate, m)?)?;
    m.add_function(wrap_pyfunction!(read_dist_csv, m)?)?;
    m.add_function(wrap_pyfunction!(read_timetags, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
