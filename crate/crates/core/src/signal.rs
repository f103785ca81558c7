//! Uniform-grid sampled distributions and their summary statistics.
//!
//! Every measured or synthetic profile (spectrum, pulse shape, arrival
//! histogram, spatial mode) lives on a uniform grid. Values are plain
//! nonnegative densities; `normalized` records whether the density
//! integrates to one under the rectangle rule `sum(density) * step`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for the `normalized` flag.
pub const NORM_TOL: f64 = 1e-9;

/// Physical unit of an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Nm,
    Ps,
    Ns,
    Mm,
    Dimensionless,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Nm => "nm",
            Unit::Ps => "ps",
            Unit::Ns => "ns",
            Unit::Mm => "mm",
            Unit::Dimensionless => "dimensionless",
        }
    }

    pub fn parse(s: &str) -> Option<Unit> {
        match s.trim() {
            "nm" => Some(Unit::Nm),
            "ps" => Some(Unit::Ps),
            "ns" => Some(Unit::Ns),
            "mm" => Some(Unit::Mm),
            "dimensionless" | "1" => Some(Unit::Dimensionless),
            _ => None,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A uniform grid `start + i * step`, `i in 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    start: f64,
    step: f64,
    count: usize,
    unit: Unit,
}

impl Axis {
    pub fn new(start: f64, step: f64, count: usize, unit: Unit) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidAxis(format!("step must be positive, got {step}")));
        }
        if count < 2 {
            return Err(Error::InvalidAxis(format!("need at least 2 points, got {count}")));
        }
        let end = start + (count - 1) as f64 * step;
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidAxis("grid points must be finite".into()));
        }
        Ok(Axis { start, step, count, unit })
    }

    /// Axis with `count` points spanning `[lo, hi]` inclusive.
    pub fn spanning(lo: f64, hi: f64, count: usize, unit: Unit) -> Result<Self> {
        if count < 2 || !(hi > lo) {
            return Err(Error::InvalidAxis(format!("bad span [{lo}, {hi}] with {count} points")));
        }
        Axis::new(lo, (hi - lo) / (count - 1) as f64, count, unit)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.point(self.count - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.point(i))
    }

    /// Same grid up to floating-point noise from a text round trip.
    pub fn matches(&self, other: &Axis) -> bool {
        self.unit == other.unit
            && self.count == other.count
            && (self.step - other.step).abs() <= 1e-9 * self.step.max(other.step)
            && (self.start - other.start).abs() <= 1e-6 * self.step.max(other.step)
            && (self.end() - other.end()).abs() <= 1e-6 * self.step.max(other.step)
    }
}

fn validate_values(values: &[f64]) -> Result<()> {
    for (index, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if v < 0.0 {
            return Err(Error::NegativeValue { index, value: v });
        }
    }
    Ok(())
}

/// A nonnegative density sampled on a uniform [`Axis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledDistribution1D {
    axis: Axis,
    density: Vec<f64>,
    normalized: bool,
}

impl SampledDistribution1D {
    /// Builds an unnormalized distribution. Values must be finite and nonnegative.
    pub fn new(axis: Axis, density: Vec<f64>) -> Result<Self> {
        if density.len() != axis.count() {
            return Err(Error::LengthMismatch { expected: axis.count(), got: density.len() });
        }
        validate_values(&density)?;
        Ok(SampledDistribution1D { axis, density, normalized: false })
    }

    /// Builds a distribution and normalizes it.
    pub fn normalized_from(axis: Axis, density: Vec<f64>) -> Result<Self> {
        SampledDistribution1D::new(axis, density)?.normalize()
    }

    pub fn axis(&self) -> &Axis {
        &self.axis
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn unit(&self) -> Unit {
        self.axis.unit()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.axis.step()
    }

    /// Probability mass per grid cell (`density * step`).
    pub fn masses(&self) -> Vec<f64> {
        self.density.iter().map(|d| d * self.axis.step()).collect()
    }

    /// Scales the density to unit integral.
    pub fn normalize(&self) -> Result<Self> {
        validate_values(&self.density)?;
        let total = self.integral();
        if !(total > 0.0) {
            return Err(Error::AllZeroSignal);
        }
        let density = self.density.iter().map(|d| d / total).collect();
        Ok(SampledDistribution1D { axis: self.axis, density, normalized: true })
    }

    /// Multiplies the density by `factor > 0`; the result is unnormalized.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::OutOfRange { name: "scale factor", value: factor });
        }
        SampledDistribution1D::new(self.axis, self.density.iter().map(|d| d * factor).collect())
    }

    /// Linear interpolation of the density at `x`; zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let pos = (x - self.axis.start()) / self.axis.step();
        let last = (self.axis.count() - 1) as f64;
        if pos < -1e-9 || pos > last + 1e-9 {
            return 0.0;
        }
        let pos = pos.clamp(0.0, last);
        let i = pos.floor() as usize;
        if i + 1 >= self.axis.count() {
            return self.density[self.axis.count() - 1];
        }
        let frac = pos - i as f64;
        self.density[i] * (1.0 - frac) + self.density[i + 1] * frac
    }

    /// Merges `factor` adjacent bins into one (masses are summed).
    ///
    /// A trailing partial block is summed as a smaller block. The result is
    /// normalized and its axis points sit at the first block's center.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::OutOfRange { name: "coarsen factor", value: 0.0 });
        }
        if factor == 1 {
            return self.normalize();
        }
        let masses = self.masses();
        let merged: Vec<f64> = masses.chunks(factor).map(|c| c.iter().sum()).collect();
        let step = self.axis.step() * factor as f64;
        let start = self.axis.start() + 0.5 * (factor - 1) as f64 * self.axis.step();
        let axis = Axis::new(start, step, merged.len(), self.axis.unit())?;
        SampledDistribution1D::normalized_from(axis, merged.into_iter().map(|m| m / step).collect())
    }
}

/// Nonnegative intensity on a uniform 2D pixel grid; rows follow `y`, columns follow `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialMode2D {
    x_axis: Axis,
    y_axis: Axis,
    intensity: Vec<f64>,
    normalized: bool,
}

impl SpatialMode2D {
    /// `intensity` is row-major with `y_axis.count()` rows of `x_axis.count()` values.
    pub fn new(x_axis: Axis, y_axis: Axis, intensity: Vec<f64>) -> Result<Self> {
        let expected = x_axis.count() * y_axis.count();
        if intensity.len() != expected {
            return Err(Error::LengthMismatch { expected, got: intensity.len() });
        }
        validate_values(&intensity)?;
        Ok(SpatialMode2D { x_axis, y_axis, intensity, normalized: false })
    }

    pub fn normalized_from(x_axis: Axis, y_axis: Axis, intensity: Vec<f64>) -> Result<Self> {
        SpatialMode2D::new(x_axis, y_axis, intensity)?.normalize()
    }

    pub fn x_axis(&self) -> &Axis {
        &self.x_axis
    }

    pub fn y_axis(&self) -> &Axis {
        &self.y_axis
    }

    pub fn rows(&self) -> usize {
        self.y_axis.count()
    }

    pub fn cols(&self) -> usize {
        self.x_axis.count()
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.intensity[row * self.cols() + col]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn cell_area(&self) -> f64 {
        self.x_axis.step() * self.y_axis.step()
    }

    pub fn integral(&self) -> f64 {
        self.intensity.iter().sum::<f64>() * self.cell_area()
    }

    pub fn masses(&self) -> Vec<f64> {
        let area = self.cell_area();
        self.intensity.iter().map(|v| v * area).collect()
    }

    pub fn normalize(&self) -> Result<Self> {
        let total = self.integral();
        if !(total > 0.0) {
            return Err(Error::AllZeroSignal);
        }
        Ok(SpatialMode2D {
            x_axis: self.x_axis,
            y_axis: self.y_axis,
            intensity: self.intensity.iter().map(|v| v / total).collect(),
            normalized: true,
        })
    }

    pub fn same_grid(&self, other: &SpatialMode2D) -> bool {
        self.x_axis.matches(&other.x_axis) && self.y_axis.matches(&other.y_axis)
    }
}

/// Returns `d` scaled to unit integral.
pub fn normalize(d: &SampledDistribution1D) -> Result<SampledDistribution1D> {
    d.normalize()
}

/// Puts `a` and `b` on one grid: the intersection of their ranges at the finer step.
///
/// Values are linearly interpolated and both outputs are renormalized.
pub fn resample_common(
    a: &SampledDistribution1D,
    b: &SampledDistribution1D,
) -> Result<(SampledDistribution1D, SampledDistribution1D)> {
    if a.unit() != b.unit() {
        return Err(Error::UnitMismatch(a.unit().to_string(), b.unit().to_string()));
    }
    if a.axis().matches(b.axis()) {
        let b_on_a = SampledDistribution1D::new(*a.axis(), b.density().to_vec())?;
        return Ok((a.normalize()?, b_on_a.normalize()?));
    }
    let step = a.axis().step().min(b.axis().step());
    let lo = a.axis().start().max(b.axis().start());
    let hi = a.axis().end().min(b.axis().end());
    if hi < lo {
        return Err(Error::NoOverlap);
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count < 2 {
        return Err(Error::NoOverlap);
    }
    let axis = Axis::new(lo, step, count, a.unit())?;
    let resample = |d: &SampledDistribution1D| -> Result<SampledDistribution1D> {
        let values = axis.points().map(|x| d.value_at(x)).collect();
        SampledDistribution1D::new(axis, values)?.normalize()
    };
    Ok((resample(a)?, resample(b)?))
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Full width at half maximum, with linearly interpolated crossings.
pub fn fwhm(d: &SampledDistribution1D) -> Result<f64> {
    let y = d.density();
    let peak = argmax_first(y);
    let half = 0.5 * y[peak];
    if !(half > 0.0) {
        return Err(Error::AllZeroSignal);
    }
    let step = d.axis().step();

    let mut left = None;
    for i in (1..=peak).rev() {
        if y[i - 1] < half {
            let frac = (half - y[i - 1]) / (y[i] - y[i - 1]);
            left = Some(d.axis().point(i - 1) + frac * step);
            break;
        }
    }
    let left = left.ok_or(Error::NoCrossing { side: "left" })?;

    let mut right = None;
    for i in peak..y.len() - 1 {
        if y[i + 1] < half {
            let frac = (y[i] - half) / (y[i] - y[i + 1]);
            right = Some(d.axis().point(i) + frac * step);
            break;
        }
    }
    let right = right.ok_or(Error::NoCrossing { side: "right" })?;
    Ok(right - left)
}

/// Location of the maximum, refined by a 3-point parabola. Ties go to the smaller axis value.
pub fn peak_location(d: &SampledDistribution1D) -> f64 {
    let y = d.density();
    let k = argmax_first(y);
    let mut offset = 0.0;
    if k > 0 && k + 1 < y.len() {
        let denom = y[k - 1] - 2.0 * y[k] + y[k + 1];
        if denom < 0.0 {
            offset = (0.5 * (y[k - 1] - y[k + 1]) / denom).clamp(-0.5, 0.5);
        }
    }
    d.axis().point(k) + offset * d.axis().step()
}

/// Mean and standard deviation of a normalized density.
pub fn mean_std(d: &SampledDistribution1D) -> Result<(f64, f64)> {
    if !d.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let step = d.axis().step();
    let mean: f64 = d.axis().points().zip(d.density()).map(|(x, p)| x * p * step).sum();
    let var: f64 = d.axis().points().zip(d.density()).map(|(x, p)| (x - mean).powi(2) * p * step).sum();
    Ok((mean, var.max(0.0).sqrt()))
}

/// Folds time tags modulo the clock period and counts them into `bins` uniform bins.
///
/// Returns the axis (bin centers over `[0, clock_period)`) and raw counts.
pub fn fold_timetags(tags: &[f64], clock_period: f64, bins: usize) -> Result<(Axis, Vec<u64>)> {
    if tags.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(clock_period > 0.0) || !clock_period.is_finite() {
        return Err(Error::NonPositivePeriod(clock_period));
    }
    if bins < 2 {
        return Err(Error::InvalidAxis(format!("need at least 2 bins, got {bins}")));
    }
    let width = clock_period / bins as f64;
    let mut counts = vec![0u64; bins];
    for (index, &t) in tags.iter().enumerate() {
        if !t.is_finite() {
            return Err(Error::NonFinite { index });
        }
        let folded = t.rem_euclid(clock_period);
        let bin = ((folded / width) as usize).min(bins - 1);
        counts[bin] += 1;
    }
    let axis = Axis::new(0.5 * width, width, bins, Unit::Ns)?;
    Ok((axis, counts))
}

/// Arrival-time histogram relative to the clock, normalized.
pub fn histogram_from_timetags(tags: &[f64], clock_period: f64, bins: usize) -> Result<SampledDistribution1D> {
    let (axis, counts) = fold_timetags(tags, clock_period, bins)?;
    SampledDistribution1D::normalized_from(axis, counts.into_iter().map(|c| c as f64).collect())
}
