//! Eve's information about the source label, in bits per pulse.
//!
//! Three routes are provided:
//!
//! * [`exact_mutual_information`]: mutual information between the binary
//!   source label of one basis and Eve's full observation, summed over the
//!   observation grid. This is the reference value.
//! * [`leakage_guessing`]: `1 - h(R0 / 2)`, treating half the zero-lag
//!   overlap as Eve's probability of attributing a pulse to the wrong source.
//! * [`leakage_eq8_literal`]: `1 + R0 * log2(R0 / (4 * prior))`, the
//!   closed-form overlap estimator taken literally. It goes negative for
//!   `R0` in `(0.5, 1)`; the raw value is kept in the diagnostics.
//!
//! A Monte-Carlo cross-check lives in [`crate::synth::mc_mutual_information`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ensemble::{Basis, Observation, Parameter, SourceEnsemble};
use crate::error::{Error, Result};
use crate::signal::resample_common;
use crate::xcorr::{cross_correlation_2d, overlap_at_zero};

/// Default cap on the number of cells in a joint observation grid (128^3).
pub const DEFAULT_CELL_BUDGET: u64 = 128 * 128 * 128;

/// Multiplier applied to `|e_hv - e_da|` to form the polarization leakage proxy.
pub const POLARIZATION_PROXY_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "eq8")]
    Eq8Literal,
    #[serde(rename = "guessing")]
    Guessing,
    #[serde(rename = "mc")]
    MonteCarlo,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Exact, Method::Eq8Literal, Method::Guessing, Method::MonteCarlo];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Eq8Literal => "eq8",
            Method::Guessing => "guessing",
            Method::MonteCarlo => "mc",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.trim() {
            "exact" => Some(Method::Exact),
            "eq8" | "eq8_literal" => Some(Method::Eq8Literal),
            "guessing" => Some(Method::Guessing),
            "mc" | "montecarlo" | "monte_carlo" => Some(Method::MonteCarlo),
            _ => None,
        }
    }
}

/// A leakage estimate with method-specific diagnostics.
///
/// Diagnostic keys in use: `raw` (value before clamping at zero), `r0`,
/// `stderr` (Monte-Carlo only), `eq8_negative` (1 when the literal
/// estimator came out negative), `prior0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageResult {
    pub method: Method,
    pub bits_per_pulse: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

impl LeakageResult {
    fn new(method: Method, raw: f64) -> Self {
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("raw".to_string(), raw);
        LeakageResult { method, bits_per_pulse: raw.max(0.0), diagnostics }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    pub fn raw(&self) -> f64 {
        self.diagnostic("raw").unwrap_or(self.bits_per_pulse)
    }

    pub fn stderr(&self) -> Option<f64> {
        self.diagnostic("stderr")
    }

    pub fn eq8_negative(&self) -> bool {
        self.diagnostic("eq8_negative") == Some(1.0)
    }
}

/// Per-basis polarization preparation errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationErrors {
    pub e_hv: f64,
    pub e_da: f64,
}

impl PolarizationErrors {
    pub fn new(e_hv: f64, e_da: f64) -> Result<Self> {
        for (name, v) in [("e_hv", e_hv), ("e_da", e_da)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange { name, value: v });
            }
        }
        Ok(PolarizationErrors { e_hv, e_da })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationLeakage {
    pub delta_e: f64,
    pub leakage_proxy: f64,
    pub proxy_constant: f64,
}

/// Two sources of one basis and the prior on the first.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisPair {
    pub basis: Basis,
    dist0: Observation,
    dist1: Observation,
    prior0: f64,
}

impl BasisPair {
    /// Both observations must be the same kind on the same grid.
    pub fn new(basis: Basis, dist0: Observation, dist1: Observation, prior0: f64) -> Result<Self> {
        if !(prior0 > 0.0 && prior0 < 1.0) {
            return Err(Error::OutOfRange { name: "prior0", value: prior0 });
        }
        let same_grid = match (&dist0, &dist1) {
            (Observation::Profile(a), Observation::Profile(b)) => a.axis().matches(b.axis()),
            (Observation::Mode(a), Observation::Mode(b)) => a.same_grid(b),
            _ => return Err(Error::KindMismatch),
        };
        if !same_grid {
            return Err(Error::GridMismatch);
        }
        Ok(BasisPair { basis, dist0, dist1, prior0 })
    }

    /// Pairs two 1D observations, resampling them to a common grid first.
    pub fn resampled(basis: Basis, dist0: &Observation, dist1: &Observation, prior0: f64) -> Result<Self> {
        match (dist0, dist1) {
            (Observation::Profile(a), Observation::Profile(b)) => {
                let (a, b) = resample_common(a, b)?;
                BasisPair::new(basis, Observation::Profile(a), Observation::Profile(b), prior0)
            }
            _ => BasisPair::new(basis, dist0.clone(), dist1.clone(), prior0),
        }
    }

    pub fn dist0(&self) -> &Observation {
        &self.dist0
    }

    pub fn dist1(&self) -> &Observation {
        &self.dist1
    }

    pub fn prior0(&self) -> f64 {
        self.prior0
    }

    pub fn prior1(&self) -> f64 {
        1.0 - self.prior0
    }

    /// Grid shape of the observation space (`[n]` or `[rows, cols]`).
    pub fn shape(&self) -> Vec<usize> {
        match &self.dist0 {
            Observation::Profile(d) => vec![d.axis().count()],
            Observation::Mode(m) => vec![m.rows(), m.cols()],
        }
    }

    /// Per-cell probability masses of both sources, each rescaled to sum to one.
    pub fn masses(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if !self.dist0.is_normalized() || !self.dist1.is_normalized() {
            return Err(Error::NotNormalized);
        }
        let raw = |o: &Observation| match o {
            Observation::Profile(d) => d.masses(),
            Observation::Mode(m) => m.masses(),
        };
        Ok((unit_sum(raw(&self.dist0))?, unit_sum(raw(&self.dist1))?))
    }

    /// Zero-lag normalized overlap of the two sources.
    pub fn overlap(&self) -> Result<f64> {
        match (&self.dist0, &self.dist1) {
            (Observation::Profile(a), Observation::Profile(b)) => overlap_at_zero(a, b),
            (Observation::Mode(a), Observation::Mode(b)) => cross_correlation_2d(a, b),
            _ => Err(Error::KindMismatch),
        }
    }
}

fn unit_sum(mut m: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = m.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroSignal);
    }
    m.iter_mut().for_each(|v| *v /= total);
    Ok(m)
}

fn xlog2(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Binary Shannon entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange { name: "p", value: p });
    }
    Ok(-xlog2(p) - xlog2(1.0 - p))
}

/// Contribution of one observation cell to `I(label; obs)` given the
/// label-conditional masses `m0`, `m1`.
#[inline]
fn cell_information(prior0: f64, prior1: f64, m0: f64, m1: f64) -> f64 {
    let p = prior0 * m0 + prior1 * m1;
    if !(p > 0.0) {
        return 0.0;
    }
    let mut acc = 0.0;
    if m0 > 0.0 {
        acc += prior0 * m0 * (m0 / p).log2();
    }
    if m1 > 0.0 {
        acc += prior1 * m1 * (m1 / p).log2();
    }
    acc
}

/// Mutual information between a binary label and an observation with
/// label-conditional cell masses `m0`, `m1` (each summing to one).
pub fn information_from_masses(prior0: f64, m0: &[f64], m1: &[f64]) -> f64 {
    let prior1 = 1.0 - prior0;
    m0.iter().zip(m1).map(|(&a, &b)| cell_information(prior0, prior1, a, b)).sum()
}

/// Mutual information between the source label and Eve's full observation.
pub fn exact_mutual_information(pair: &BasisPair) -> Result<LeakageResult> {
    let (m0, m1) = pair.masses()?;
    let raw = information_from_masses(pair.prior0, &m0, &m1);
    let h = binary_entropy(pair.prior0)?;
    Ok(LeakageResult::new(Method::Exact, raw.min(h)).with("prior0", pair.prior0))
}

fn check_r0(r0: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r0) {
        Ok(())
    } else {
        Err(Error::OutOfRange { name: "R0", value: r0 })
    }
}

/// Clamps overlaps that exceed one by rounding only.
pub fn clamp_overlap(r0: f64) -> f64 {
    if r0 > 1.0 && r0 < 1.0 + 1e-9 {
        1.0
    } else {
        r0
    }
}

/// The overlap estimator evaluated literally: two sources times two bit
/// values, each term `(R0/4) log2(R0 / (4 prior))`.
pub fn leakage_eq8_literal(r0: f64, prior: f64) -> Result<LeakageResult> {
    check_r0(r0)?;
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::OutOfRange { name: "prior", value: prior });
    }
    let term = if r0 > 0.0 { r0 / 4.0 * (r0 / (4.0 * prior)).log2() } else { 0.0 };
    let raw = 1.0 + 4.0 * term;
    Ok(LeakageResult::new(Method::Eq8Literal, raw)
        .with("r0", r0)
        .with("prior0", prior)
        .with("eq8_negative", if raw < 0.0 { 1.0 } else { 0.0 }))
}

/// `1 - h(R0 / 2)`: Eve misattributes a pulse with probability `R0 / 2`.
pub fn leakage_guessing(r0: f64) -> Result<LeakageResult> {
    check_r0(r0)?;
    let raw = 1.0 - binary_entropy(0.5 * r0)?;
    Ok(LeakageResult::new(Method::Guessing, raw).with("r0", r0))
}

/// Basis-dependent polarization error mismatch and its leakage proxy.
pub fn polarization_leakage(err: &PolarizationErrors) -> PolarizationLeakage {
    let delta_e = (err.e_hv - err.e_da).abs();
    PolarizationLeakage {
        delta_e,
        leakage_proxy: POLARIZATION_PROXY_CONSTANT * delta_e,
        proxy_constant: POLARIZATION_PROXY_CONSTANT,
    }
}

/// Exact mutual information when Eve observes every parameter of `pairs`
/// at once, with parameters independent given the source label.
///
/// The product grid is enumerated cell by cell, so callers must coarsen
/// grids to keep `prod(len)` within `cell_budget`.
pub fn joint_leakage(pairs: &[BasisPair], cell_budget: u64) -> Result<LeakageResult> {
    let first = pairs.first().ok_or(Error::EmptyInput)?;
    let prior0 = first.prior0;
    if pairs.iter().any(|p| (p.prior0 - prior0).abs() > 1e-12) {
        return Err(Error::PriorMismatch);
    }
    let cells = pairs.iter().map(|p| p.shape().iter().product::<usize>() as u128).product::<u128>();
    if cells > cell_budget as u128 {
        return Err(Error::TooManyParameters { cells, budget: cell_budget });
    }
    let masses: Vec<(Vec<f64>, Vec<f64>)> = pairs.iter().map(|p| p.masses()).collect::<Result<_>>()?;

    fn walk(masses: &[(Vec<f64>, Vec<f64>)], prior0: f64, a: f64, b: f64) -> f64 {
        match masses.split_first() {
            None => cell_information(prior0, 1.0 - prior0, a, b),
            Some(((m0, m1), rest)) => {
                let mut acc = 0.0;
                for (x, y) in m0.iter().zip(m1) {
                    let (na, nb) = (a * x, b * y);
                    if na > 0.0 || nb > 0.0 {
                        acc += walk(rest, prior0, na, nb);
                    }
                }
                acc
            }
        }
    }

    let raw = walk(&masses, prior0, 1.0, 1.0);
    let h = binary_entropy(prior0)?;
    Ok(LeakageResult::new(Method::Exact, raw.min(h))
        .with("prior0", prior0)
        .with("parameters", pairs.len() as f64)
        .with("cells", cells as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "dr")]
    DR,
    #[serde(rename = "rr")]
    RR,
}

/// Secret key rate lower bound `I(A:B) - I(A:E)` (direct) or `I(A:B) - I(B:E)` (reverse).
///
/// Negative values are returned as-is; they mean no key can be distilled.
pub fn key_rate_bound(i_ab: f64, i_ae: f64, direction: Direction, i_be: Option<f64>) -> Result<f64> {
    for (name, v) in [("i_ab", i_ab), ("i_ae", i_ae)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange { name, value: v });
        }
    }
    match direction {
        Direction::DR => Ok(i_ab - i_ae),
        Direction::RR => {
            let i_be = i_be.ok_or(Error::MissingInput("i_be is required for reverse reconciliation"))?;
            if !(0.0..=1.0).contains(&i_be) {
                return Err(Error::OutOfRange { name: "i_be", value: i_be });
            }
            Ok(i_ab - i_be)
        }
    }
}

/// BB84 Alice-Bob information at a given QBER: `1 - h(qber)`.
pub fn qber_to_iab(qber: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&qber) {
        return Err(Error::OutOfRange { name: "qber", value: qber });
    }
    Ok(1.0 - binary_entropy(qber)?)
}

/// Knobs for [`basis_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    pub prior0: f64,
    pub mc_samples: usize,
    pub mc_bins: usize,
    pub seed: u64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions { prior0: 0.5, mc_samples: 1_000_000, mc_bins: crate::synth::DEFAULT_MC_BINS, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisReport {
    pub parameter: Parameter,
    pub method: Method,
    pub hv: LeakageResult,
    pub da: LeakageResult,
    /// Larger of the two bases.
    pub max: f64,
}

impl BasisReport {
    pub fn get(&self, basis: Basis) -> &LeakageResult {
        match basis {
            Basis::HV => &self.hv,
            Basis::DA => &self.da,
        }
    }
}

/// Forms the pair for one basis from the ensemble.
pub fn basis_pair(ensemble: &SourceEnsemble, parameter: Parameter, basis: Basis, prior0: f64) -> Result<BasisPair> {
    let (l0, l1) = basis.labels();
    let o0 = ensemble.observation(l0, parameter)?;
    let o1 = ensemble.observation(l1, parameter)?;
    BasisPair::resampled(basis, o0, o1, prior0)
}

/// Leakage of one method on one already-formed pair.
pub fn pair_leakage(pair: &BasisPair, method: Method, opts: &EstimatorOptions) -> Result<LeakageResult> {
    match method {
        Method::Exact => exact_mutual_information(pair),
        Method::Eq8Literal => leakage_eq8_literal(clamp_overlap(pair.overlap()?), pair.prior0()),
        Method::Guessing => leakage_guessing(clamp_overlap(pair.overlap()?)),
        Method::MonteCarlo => {
            let seed = opts.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(pair.basis as u64 + 1);
            crate::synth::mc_mutual_information_binned(pair, opts.mc_samples, opts.mc_bins, seed)
        }
    }
}

/// Per-basis leakage of `parameter` by `method`, plus the larger of the two.
pub fn basis_report(
    ensemble: &SourceEnsemble,
    parameter: Parameter,
    method: Method,
    opts: &EstimatorOptions,
) -> Result<BasisReport> {
    let hv = pair_leakage(&basis_pair(ensemble, parameter, Basis::HV, opts.prior0)?, method, opts)?;
    let da = pair_leakage(&basis_pair(ensemble, parameter, Basis::DA, opts.prior0)?, method, opts)?;
    let max = hv.bits_per_pulse.max(da.bits_per_pulse);
    Ok(BasisReport { parameter, method, hv, da, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{Axis, SampledDistribution1D, Unit};
    use approx::assert_abs_diff_eq;

    fn profile(axis: Axis, f: impl Fn(f64) -> f64) -> Observation {
        let v = axis.points().map(f).collect();
        Observation::Profile(SampledDistribution1D::normalized_from(axis, v).unwrap())
    }

    fn gauss(mu: f64, sigma: f64) -> impl Fn(f64) -> f64 {
        move |x| (-0.5 * ((x - mu) / sigma).powi(2)).exp()
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        // -0.11 log2 0.11 - 0.89 log2 0.89 = 0.499915...
        assert_abs_diff_eq!(binary_entropy(0.11).unwrap(), 0.49993, epsilon = 1e-4);
        assert!(binary_entropy(1.2).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn exact_identical_and_disjoint() {
        let axis = Axis::spanning(-6.0, 6.0, 1201, Unit::Nm).unwrap();
        let a = profile(axis, gauss(0.0, 1.0));
        let pair = BasisPair::new(Basis::HV, a.clone(), a.clone(), 0.5).unwrap();
        assert_abs_diff_eq!(exact_mutual_information(&pair).unwrap().bits_per_pulse, 0.0, epsilon = 1e-12);

        let l = profile(axis, |x| if x < -1.0 { 1.0 } else { 0.0 });
        let r = profile(axis, |x| if x > 1.0 { 1.0 } else { 0.0 });
        let pair = BasisPair::new(Basis::HV, l, r, 0.5).unwrap();
        assert_abs_diff_eq!(exact_mutual_information(&pair).unwrap().bits_per_pulse, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn exact_requires_normalized_and_common_grid() {
        let axis = Axis::new(0.0, 1.0, 4, Unit::Nm).unwrap();
        let raw = Observation::Profile(SampledDistribution1D::new(axis, vec![1.0; 4]).unwrap());
        let pair = BasisPair::new(Basis::HV, raw.clone(), raw, 0.5).unwrap();
        assert_eq!(exact_mutual_information(&pair), Err(Error::NotNormalized));

        let other = Axis::new(0.5, 1.0, 4, Unit::Nm).unwrap();
        let a = profile(axis, |_| 1.0);
        let b = profile(other, |_| 1.0);
        assert_eq!(BasisPair::new(Basis::HV, a, b, 0.5), Err(Error::GridMismatch));
    }

    #[test]
    fn eq8_literal_values() {
        let r = leakage_eq8_literal(1.0, 0.5).unwrap();
        assert_eq!(r.raw(), 0.0);
        assert_eq!(r.bits_per_pulse, 0.0);
        assert_eq!(leakage_eq8_literal(0.0, 0.5).unwrap().bits_per_pulse, 1.0);
        assert_eq!(leakage_eq8_literal(0.5, 0.5).unwrap().raw(), 0.0);
        let r = leakage_eq8_literal(0.9, 0.5).unwrap();
        // 1 - 0.9 + 0.9 log2 0.9
        let expected = 1.0 - 0.9 + 0.9 * 0.9f64.log2();
        assert_abs_diff_eq!(r.raw(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(r.raw(), -0.0368, epsilon = 1e-4);
        assert_eq!(r.bits_per_pulse, 0.0);
        assert!(r.eq8_negative());
        assert!(leakage_eq8_literal(1.5, 0.5).is_err());
    }

    #[test]
    fn guessing_values() {
        assert_eq!(leakage_guessing(1.0).unwrap().bits_per_pulse, 0.0);
        assert_eq!(leakage_guessing(0.0).unwrap().bits_per_pulse, 1.0);
        let r = leakage_guessing(0.9272).unwrap();
        assert_abs_diff_eq!(r.bits_per_pulse, 4.3e-3, epsilon = 5e-4);
        assert!(leakage_guessing(-0.1).is_err());
    }

    #[test]
    fn polarization_proxy() {
        let p = polarization_leakage(&PolarizationErrors::new(0.0341, 0.0094).unwrap());
        assert_abs_diff_eq!(p.delta_e, 0.0247, epsilon = 1e-15);
        assert_eq!(p.leakage_proxy, p.delta_e);
        assert_eq!(p.proxy_constant, 1.0);
        assert_eq!(polarization_leakage(&PolarizationErrors::new(0.02, 0.02).unwrap()).delta_e, 0.0);
        let p = polarization_leakage(&PolarizationErrors::new(0.05, 0.01).unwrap());
        assert_abs_diff_eq!(p.delta_e, 0.04, epsilon = 1e-15);
        assert!(PolarizationErrors::new(1.5, 0.0).is_err());
    }

    #[test]
    fn key_rate_values() {
        assert_eq!(key_rate_bound(1.0, 0.0, Direction::DR, None).unwrap(), 1.0);
        let iab = qber_to_iab(0.11).unwrap();
        assert_abs_diff_eq!(iab, 0.50007, epsilon = 1e-4);
        assert_abs_diff_eq!(key_rate_bound(iab, 0.5, Direction::DR, None).unwrap(), 0.0, epsilon = 1e-3);
        assert_abs_diff_eq!(key_rate_bound(0.9, 0.95, Direction::DR, None).unwrap(), -0.05, epsilon = 1e-12);
        assert!(matches!(key_rate_bound(0.9, 0.1, Direction::RR, None), Err(Error::MissingInput(_))));
        assert_abs_diff_eq!(key_rate_bound(0.9, 0.1, Direction::RR, Some(0.3)).unwrap(), 0.6, epsilon = 1e-12);
        assert_eq!(qber_to_iab(0.0).unwrap(), 1.0);
        assert_eq!(qber_to_iab(0.5).unwrap(), 0.0);
        assert!(qber_to_iab(0.6).is_err());
    }

    #[test]
    fn joint_single_pair_matches_exact() {
        let axis = Axis::spanning(-6.0, 7.0, 300, Unit::Nm).unwrap();
        let pair =
            BasisPair::new(Basis::HV, profile(axis, gauss(0.0, 1.0)), profile(axis, gauss(1.0, 1.0)), 0.5).unwrap();
        let single = exact_mutual_information(&pair).unwrap().bits_per_pulse;
        let joint = joint_leakage(std::slice::from_ref(&pair), DEFAULT_CELL_BUDGET).unwrap().bits_per_pulse;
        assert_abs_diff_eq!(single, joint, epsilon = 1e-12);
    }

    #[test]
    fn joint_budget_enforced() {
        let axis = Axis::spanning(-6.0, 6.0, 100, Unit::Nm).unwrap();
        let a = profile(axis, gauss(0.0, 1.0));
        let pair = BasisPair::new(Basis::HV, a.clone(), a, 0.5).unwrap();
        let pairs = vec![pair.clone(), pair.clone(), pair];
        assert!(matches!(joint_leakage(&pairs, 1000), Err(Error::TooManyParameters { .. })));
        assert_abs_diff_eq!(joint_leakage(&pairs, 1_000_000).unwrap().bits_per_pulse, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn joint_prior_mismatch() {
        let axis = Axis::spanning(-6.0, 6.0, 50, Unit::Nm).unwrap();
        let a = profile(axis, gauss(0.0, 1.0));
        let p1 = BasisPair::new(Basis::HV, a.clone(), a.clone(), 0.5).unwrap();
        let p2 = BasisPair::new(Basis::HV, a.clone(), a, 0.4).unwrap();
        assert_eq!(joint_leakage(&[p1, p2], DEFAULT_CELL_BUDGET), Err(Error::PriorMismatch));
    }
}
