//! Seeded synthetic transmitters and the Monte-Carlo information estimator.
//!
//! All 1D profiles are Gaussians and all spatial modes separable 2D
//! Gaussians. Four diodes of a preset share one grid per parameter, so
//! analysis never has to resample synthetic data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ensemble::{DiodeRecord, Observation, Parameter, Polarization, SourceEnsemble};
use crate::error::{Error, Result};
use crate::leakage::{BasisPair, LeakageResult, Method, PolarizationErrors};
use crate::signal::{Axis, SampledDistribution1D, SpatialMode2D, Unit};

/// Clock period of a 5 MHz pulse train.
pub const DEFAULT_CLOCK_PERIOD_NS: f64 = 200.0;
/// Total histogram cells used by the Monte-Carlo plug-in estimator.
pub const DEFAULT_MC_BINS: usize = 64;
/// Minimum sample count accepted by the Monte-Carlo estimator.
pub const MIN_MC_SAMPLES: usize = 10_000;
const MC_BATCHES: usize = 10;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub sigma: f64,
}

impl Gaussian {
    pub fn new(mean: f64, sigma: f64) -> Self {
        Gaussian { mean, sigma }
    }

    fn shifted(self, delta: f64) -> Self {
        Gaussian { mean: self.mean + delta, sigma: self.sigma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialSpec {
    pub center_x: f64,
    pub center_y: f64,
    pub width_x: f64,
    pub width_y: f64,
}

/// Parameters of one synthetic diode. Units: nm, ps, ns, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeSpec {
    pub polarization: Polarization,
    pub wavelength_nm: Gaussian,
    /// Temporal pulse profile: center time and shape width.
    pub pulse_ps: Gaussian,
    /// Arrival time relative to the clock, with driver jitter as the width.
    pub arrival_ns: Gaussian,
    pub spatial: SpatialSpec,
    pub mean_photon_number: f64,
}

impl DiodeSpec {
    fn validate(&self) -> Result<()> {
        let sigmas = [
            self.wavelength_nm.sigma,
            self.pulse_ps.sigma,
            self.arrival_ns.sigma,
            self.spatial.width_x,
            self.spatial.width_y,
        ];
        let means = [
            self.wavelength_nm.mean,
            self.pulse_ps.mean,
            self.arrival_ns.mean,
            self.spatial.center_x,
            self.spatial.center_y,
        ];
        if sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidEnsemble(format!("diode {}: widths must be positive", self.polarization)));
        }
        if !(self.mean_photon_number > 0.0) {
            return Err(Error::InvalidEnsemble(format!(
                "diode {}: mean photon number must be positive",
                self.polarization
            )));
        }
        Ok(())
    }

    fn gaussian(&self, parameter: Parameter) -> Gaussian {
        match parameter {
            Parameter::Wavelength => self.wavelength_nm,
            Parameter::Pulse => self.pulse_ps,
            Parameter::Arrival => self.arrival_ns,
            Parameter::Spatial => Gaussian::new(self.spatial.center_x, self.spatial.width_x),
        }
    }

    fn gaussian_mut(&mut self, parameter: Parameter) -> &mut Gaussian {
        match parameter {
            Parameter::Wavelength => &mut self.wavelength_nm,
            Parameter::Pulse => &mut self.pulse_ps,
            Parameter::Arrival => &mut self.arrival_ns,
            Parameter::Spatial => panic!("spatial modes are not a 1D Gaussian"),
        }
    }

    /// Moves the center of `parameter` by `delta` (x direction for spatial modes).
    pub fn shift(&mut self, parameter: Parameter, delta: f64) {
        match parameter {
            Parameter::Spatial => self.spatial.center_x += delta,
            p => *self.gaussian_mut(p) = self.gaussian(p).shifted(delta),
        }
    }
}

/// Grid sizes used when rendering an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub wavelength_bins: usize,
    pub pulse_bins: usize,
    pub arrival_bins: usize,
    pub spatial_pixels: usize,
    /// Half-width of every grid beyond the outermost diode, in that diode's sigmas.
    pub span_sigmas: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            wavelength_bins: 4096,
            pulse_bins: 4096,
            arrival_bins: 4096,
            spatial_pixels: 128,
            span_sigmas: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub diodes: Vec<DiodeSpec>,
    pub polarization_errors: PolarizationErrors,
    pub grids: GridConfig,
    pub clock_period_ns: f64,
    pub seed: u64,
    /// Standard deviation of seeded per-diode center perturbations, as a
    /// fraction of each parameter's width. Zero disables perturbation.
    pub between_diode_jitter: f64,
}

/// Named presets addressable from the command line.
pub const PRESET_NAMES: [&str; 3] = ["identical", "paper", "worst-case"];

fn base_spec(polarization: Polarization) -> DiodeSpec {
    DiodeSpec {
        polarization,
        wavelength_nm: Gaussian::new(795.6, 0.2),
        pulse_ps: Gaussian::new(2000.0, 627.0 / FWHM_PER_SIGMA),
        arrival_ns: Gaussian::new(41.34, 0.075),
        spatial: SpatialSpec { center_x: 0.0, center_y: 0.0, width_x: 0.5, width_y: 0.5 },
        mean_photon_number: 0.5,
    }
}

/// Within-basis offsets, in units of the parameter width, for the "paper"
/// preset. Equal-width Gaussians offset by u sigma give exact leakage of
/// about u^2 / (8 ln 2) bits and overlap-guessing leakage of about
/// u^4 / (32 ln 2) bits; both stay inside [1e-4, 1e-2] for u in about
/// [0.219, 0.236].
pub const PAPER_OFFSET_HV: f64 = 0.225;
pub const PAPER_OFFSET_DA: f64 = 0.23;

impl EnsembleConfig {
    pub fn preset(name: &str, seed: u64) -> Option<EnsembleConfig> {
        let mut diodes: Vec<DiodeSpec> = Polarization::ALL.iter().map(|&p| base_spec(p)).collect();
        let mut errors = PolarizationErrors { e_hv: 0.0341, e_da: 0.0341 };
        let mut jitter = 0.0;
        match name {
            "identical" => {}
            "paper" => {
                errors = PolarizationErrors { e_hv: 0.0341, e_da: 0.0094 };
                let [h, v, d, a] = &mut diodes[..] else { unreachable!() };
                // Wavelength centers straddle 795.6 nm.
                h.wavelength_nm.mean = 795.55;
                d.wavelength_nm.mean = 795.62;
                // Pulse FWHM 600 ps in H/V and 660 ps in D/A (627 +/- 75 band).
                for s in [&mut *h, &mut *v] {
                    s.pulse_ps.sigma = 600.0 / FWHM_PER_SIGMA;
                }
                for s in [&mut *d, &mut *a] {
                    s.pulse_ps.sigma = 660.0 / FWHM_PER_SIGMA;
                }
                h.arrival_ns.mean = 41.33;
                d.arrival_ns.mean = 41.34;
                d.spatial.center_x = 0.02;
                d.spatial.center_y = 0.03;
                let (h, d) = (*h, *d);
                *v = DiodeSpec { polarization: Polarization::V, ..h };
                *a = DiodeSpec { polarization: Polarization::A, ..d };
                for p in Parameter::ALL {
                    v.shift(p, PAPER_OFFSET_HV * h.gaussian(p).sigma);
                    a.shift(p, PAPER_OFFSET_DA * d.gaussian(p).sigma);
                }
            }
            "worst-case" => {
                errors = PolarizationErrors { e_hv: 0.05, e_da: 0.005 };
                jitter = 0.25;
                for (i, s) in diodes.iter_mut().enumerate() {
                    let u = i as f64;
                    for p in Parameter::ALL {
                        let sigma = s.gaussian(p).sigma;
                        s.shift(p, u * sigma);
                    }
                }
            }
            _ => return None,
        }
        Some(EnsembleConfig {
            diodes,
            polarization_errors: errors,
            grids: GridConfig::default(),
            clock_period_ns: DEFAULT_CLOCK_PERIOD_NS,
            seed,
            between_diode_jitter: jitter,
        })
    }

    pub fn spec(&self, p: Polarization) -> Option<&DiodeSpec> {
        self.diodes.iter().find(|d| d.polarization == p)
    }

    pub fn spec_mut(&mut self, p: Polarization) -> Option<&mut DiodeSpec> {
        self.diodes.iter_mut().find(|d| d.polarization == p)
    }

    fn validate(&self) -> Result<()> {
        if self.diodes.len() != 4 {
            return Err(Error::InvalidEnsemble(format!("expected 4 diodes, got {}", self.diodes.len())));
        }
        for p in Polarization::ALL {
            match self.diodes.iter().filter(|d| d.polarization == p).count() {
                1 => {}
                0 => return Err(Error::InvalidEnsemble(format!("missing diode {p}"))),
                _ => return Err(Error::InvalidEnsemble(format!("duplicate diode {p}"))),
            }
        }
        self.diodes.iter().try_for_each(DiodeSpec::validate)?;
        if !(self.between_diode_jitter >= 0.0) {
            return Err(Error::OutOfRange { name: "between_diode_jitter", value: self.between_diode_jitter });
        }
        Ok(())
    }

    /// Diode specs after the seeded between-diode perturbation.
    pub fn realized_specs(&self) -> Result<Vec<DiodeSpec>> {
        self.validate()?;
        let mut specs = self.diodes.clone();
        specs.sort_by_key(|d| d.polarization);
        if self.between_diode_jitter > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let unit = Normal::new(0.0, 1.0).expect("unit normal");
            for s in &mut specs {
                for p in [Parameter::Wavelength, Parameter::Pulse, Parameter::Arrival] {
                    let sigma = s.gaussian(p).sigma;
                    s.shift(p, self.between_diode_jitter * sigma * unit.sample(&mut rng));
                }
                s.spatial.center_x += self.between_diode_jitter * s.spatial.width_x * unit.sample(&mut rng);
                s.spatial.center_y += self.between_diode_jitter * s.spatial.width_y * unit.sample(&mut rng);
            }
        }
        Ok(specs)
    }
}

/// Discretized, normalized Gaussian on `grid`. The grid must cover `mean +/- 4 sigma`.
pub fn synth_distribution(mean: f64, sigma: f64, grid: Axis) -> Result<SampledDistribution1D> {
    if !(sigma > 0.0) || !sigma.is_finite() || !mean.is_finite() {
        return Err(Error::OutOfRange { name: "sigma", value: sigma });
    }
    let slack = 1e-9 * grid.step();
    if grid.start() > mean - 4.0 * sigma + slack || grid.end() < mean + 4.0 * sigma - slack {
        return Err(Error::GridTooNarrow { mean, sigma });
    }
    let values = grid.points().map(|x| (-0.5 * ((x - mean) / sigma).powi(2)).exp()).collect();
    SampledDistribution1D::normalized_from(grid, values)
}

/// Separable 2D Gaussian mode on the given pixel grid.
pub fn synth_mode(spec: &SpatialSpec, x_axis: Axis, y_axis: Axis) -> Result<SpatialMode2D> {
    let gx = synth_distribution(spec.center_x, spec.width_x, x_axis)?;
    let gy = synth_distribution(spec.center_y, spec.width_y, y_axis)?;
    let mut values = Vec::with_capacity(x_axis.count() * y_axis.count());
    for wy in gy.density() {
        for wx in gx.density() {
            values.push(wy * wx);
        }
    }
    SpatialMode2D::normalized_from(x_axis, y_axis, values)
}

fn covering_axis(gs: impl Iterator<Item = Gaussian>, span: f64, bins: usize, unit: Unit) -> Result<Axis> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for g in gs {
        lo = lo.min(g.mean - span * g.sigma);
        hi = hi.max(g.mean + span * g.sigma);
    }
    Axis::spanning(lo, hi, bins, unit)
}

/// Renders a configuration into four diode records with profiles and modes.
pub fn synth_ensemble(config: &EnsembleConfig) -> Result<SourceEnsemble> {
    let specs = config.realized_specs()?;
    let g = &config.grids;
    let span = g.span_sigmas.max(4.0);
    let axis_for =
        |p: Parameter, bins: usize, unit: Unit| covering_axis(specs.iter().map(|s| s.gaussian(p)), span, bins, unit);
    let wl_axis = axis_for(Parameter::Wavelength, g.wavelength_bins, Unit::Nm)?;
    let pulse_axis = axis_for(Parameter::Pulse, g.pulse_bins, Unit::Ps)?;
    let arrival_axis = axis_for(Parameter::Arrival, g.arrival_bins, Unit::Ns)?;
    let x_axis = covering_axis(
        specs.iter().map(|s| Gaussian::new(s.spatial.center_x, s.spatial.width_x)),
        span,
        g.spatial_pixels,
        Unit::Mm,
    )?;
    let y_axis = covering_axis(
        specs.iter().map(|s| Gaussian::new(s.spatial.center_y, s.spatial.width_y)),
        span,
        g.spatial_pixels,
        Unit::Mm,
    )?;

    let mut records = Vec::with_capacity(4);
    for s in &specs {
        let profile = |gs: Gaussian, axis: Axis| -> Result<Observation> {
            Ok(Observation::Profile(synth_distribution(gs.mean, gs.sigma, axis)?))
        };
        records.push(
            DiodeRecord::new(s.polarization, s.mean_photon_number)
                .with(Parameter::Wavelength, profile(s.wavelength_nm, wl_axis)?)
                .with(Parameter::Pulse, profile(s.pulse_ps, pulse_axis)?)
                .with(Parameter::Arrival, profile(s.arrival_ns, arrival_axis)?)
                .with(Parameter::Spatial, Observation::Mode(synth_mode(&s.spatial, x_axis, y_axis)?)),
        );
    }
    SourceEnsemble::new(records, config.polarization_errors, config.clock_period_ns)
}

/// Raw photon time tags: Gaussian arrivals on random pulses of a clocked train.
pub fn sample_timetags(arrival: Gaussian, n: usize, clock_period_ns: f64, seed: u64) -> Result<Vec<f64>> {
    if !(clock_period_ns > 0.0) {
        return Err(Error::NonPositivePeriod(clock_period_ns));
    }
    let normal = Normal::new(arrival.mean, arrival.sigma)
        .map_err(|_| Error::OutOfRange { name: "sigma", value: arrival.sigma })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let pulse = rng.random_range(0..1000u32) as f64;
            pulse * clock_period_ns + normal.sample(&mut rng)
        })
        .collect())
}

/// Cell-to-histogram-bin map: equal-mixture-mass quantiles of the posterior
/// `P(label 0 | cell)`.
///
/// The posterior is a sufficient statistic for the label, so grouping by it
/// keeps almost all of the information while holding the bin count (and the
/// plug-in bias) small. Cells with equal posteriors always share a bin.
fn posterior_bins(prior0: f64, m0: &[f64], m1: &[f64], bins: usize) -> (Vec<usize>, usize) {
    let bins = bins.max(1);
    let prior1 = 1.0 - prior0;
    let mix: Vec<f64> = m0.iter().zip(m1).map(|(a, b)| prior0 * a + prior1 * b).collect();
    // Quantized so that rounding noise from file round trips cannot split ties.
    let post: Vec<u64> =
        m0.iter().zip(&mix).map(|(a, p)| if *p > 0.0 { (prior0 * a / p * 1e12).round() as u64 } else { 0 }).collect();
    let mut order: Vec<usize> = (0..mix.len()).filter(|&i| mix[i] > 0.0).collect();
    order.sort_by_key(|&i| post[i]);
    let total: f64 = order.iter().map(|&i| mix[i]).sum();

    let mut thresholds = Vec::with_capacity(bins);
    let mut acc = 0.0;
    let mut next = 1;
    for &i in &order {
        acc += mix[i];
        while next < bins && acc >= total * next as f64 / bins as f64 {
            thresholds.push(post[i]);
            next += 1;
        }
    }
    thresholds.dedup();
    let map = post.iter().map(|q| thresholds.partition_point(|t| t < q)).collect();
    (map, thresholds.len() + 1)
}

fn cumulative(m: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    m.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

fn plugin_information(counts: &[[u64; 2]]) -> f64 {
    let n: u64 = counts.iter().map(|c| c[0] + c[1]).sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let label = [counts.iter().map(|c| c[0]).sum::<u64>() as f64, counts.iter().map(|c| c[1]).sum::<u64>() as f64];
    let mut info = 0.0;
    for c in counts {
        let obs = (c[0] + c[1]) as f64;
        for a in 0..2 {
            if c[a] > 0 {
                let joint = c[a] as f64;
                info += joint / n * (joint * n / (label[a] * obs)).log2();
            }
        }
    }
    info
}

/// Monte-Carlo estimate of the label/observation mutual information with the default binning.
pub fn mc_mutual_information(pair: &BasisPair, n_samples: usize, seed: u64) -> Result<LeakageResult> {
    mc_mutual_information_binned(pair, n_samples, DEFAULT_MC_BINS, seed)
}

/// Samples `(label, cell)` pairs, histograms the cells into at most `bins`
/// posterior-quantile groups and returns the plug-in mutual information.
///
/// The standard error comes from splitting the run into ten batches, each
/// drawn from its own ChaCha stream of `seed`.
pub fn mc_mutual_information_binned(
    pair: &BasisPair,
    n_samples: usize,
    bins: usize,
    seed: u64,
) -> Result<LeakageResult> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::TooFewSamples { min: MIN_MC_SAMPLES, got: n_samples });
    }
    let (m0, m1) = pair.masses()?;
    let (bin_of, n_bins) = posterior_bins(pair.prior0(), &m0, &m1, bins);
    let cdf = [cumulative(&m0), cumulative(&m1)];
    let prior0 = pair.prior0();

    let mut total = vec![[0u64; 2]; n_bins];
    let mut batch_estimates = Vec::with_capacity(MC_BATCHES);
    for batch in 0..MC_BATCHES {
        let size = n_samples / MC_BATCHES + usize::from(batch < n_samples % MC_BATCHES);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(batch as u64);
        let mut counts = vec![[0u64; 2]; n_bins];
        for _ in 0..size {
            let label = usize::from(rng.random::<f64>() >= prior0);
            let c = &cdf[label];
            let u = rng.random::<f64>() * c[c.len() - 1];
            let cell = c.partition_point(|&v| v <= u).min(c.len() - 1);
            counts[bin_of[cell]][label] += 1;
        }
        for (t, c) in total.iter_mut().zip(&counts) {
            t[0] += c[0];
            t[1] += c[1];
        }
        batch_estimates.push(plugin_information(&counts));
    }
    let mean = batch_estimates.iter().sum::<f64>() / MC_BATCHES as f64;
    let var = batch_estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (MC_BATCHES - 1) as f64;
    let stderr = (var / MC_BATCHES as f64).sqrt();

    let raw = plugin_information(&total);
    let mut result =
        LeakageResult { method: Method::MonteCarlo, bits_per_pulse: raw.max(0.0), diagnostics: Default::default() };
    for (k, v) in
        [("raw", raw), ("stderr", stderr), ("samples", n_samples as f64), ("bins", n_bins as f64), ("prior0", prior0)]
    {
        result.diagnostics.insert(k.to_string(), v);
    }
    Ok(result)
}
