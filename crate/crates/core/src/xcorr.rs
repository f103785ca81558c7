//! Energy-normalized cross-correlation between two sampled signals.
//!
//! `R(ds) = sum f(s) g(s + ds) / sqrt(sum f^2 * sum g^2)`, evaluated at
//! integer lags with zero padding outside the recorded window. For
//! nonnegative inputs the value lies in `[0, 1]` and equals 1 at zero lag
//! exactly when the two signals are proportional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Axis, SampledDistribution1D, SpatialMode2D};

/// Correlation values against lag, in axis units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub shifts: Vec<f64>,
    pub values: Vec<f64>,
    pub zero_lag_index: usize,
}

impl CorrelationCurve {
    pub fn at_zero(&self) -> f64 {
        self.values[self.zero_lag_index]
    }
}

fn energy(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn check_common(f: &Axis, g: &Axis) -> Result<()> {
    if f.matches(g) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

fn lagged_dot(f: &[f64], g: &[f64], lag: isize) -> f64 {
    let n = f.len() as isize;
    let lo = 0.max(-lag);
    let hi = n.min(n - lag);
    (lo..hi).map(|i| f[i as usize] * g[(i + lag) as usize]).sum()
}

/// Normalized cross-correlation for every integer lag in `[-max_shift, max_shift]`.
pub fn cross_correlation(
    f: &SampledDistribution1D,
    g: &SampledDistribution1D,
    max_shift: f64,
) -> Result<CorrelationCurve> {
    check_common(f.axis(), g.axis())?;
    let (ef, eg) = (energy(f.density()), energy(g.density()));
    if !(ef > 0.0) || !(eg > 0.0) {
        return Err(Error::AllZeroSignal);
    }
    if !(max_shift >= 0.0) {
        return Err(Error::OutOfRange { name: "max_shift", value: max_shift });
    }
    let step = f.axis().step();
    let max_lag = ((max_shift / step + 1e-9).floor() as usize).min(f.axis().count() - 1) as isize;
    let norm = (ef * eg).sqrt();
    let mut shifts = Vec::with_capacity(2 * max_lag as usize + 1);
    let mut values = Vec::with_capacity(shifts.capacity());
    for lag in -max_lag..=max_lag {
        shifts.push(lag as f64 * step);
        values.push(lagged_dot(f.density(), g.density(), lag) / norm);
    }
    Ok(CorrelationCurve { shifts, values, zero_lag_index: max_lag as usize })
}

/// Zero-lag normalized overlap `R(0)`.
pub fn overlap_at_zero(f: &SampledDistribution1D, g: &SampledDistribution1D) -> Result<f64> {
    check_common(f.axis(), g.axis())?;
    zero_lag(f.density(), g.density())
}

fn zero_lag(f: &[f64], g: &[f64]) -> Result<f64> {
    let (ef, eg) = (energy(f), energy(g));
    if !(ef > 0.0) || !(eg > 0.0) {
        return Err(Error::AllZeroSignal);
    }
    let dot: f64 = f.iter().zip(g).map(|(a, b)| a * b).sum();
    Ok(dot / (ef * eg).sqrt())
}

/// `(shift, value)` of the curve maximum; ties prefer smaller `|shift|`, then the smaller shift.
pub fn best_shift(curve: &CorrelationCurve) -> (f64, f64) {
    const TIE: f64 = 1e-12;
    let mut best = (curve.shifts[0], curve.values[0]);
    for (&s, &v) in curve.shifts.iter().zip(&curve.values).skip(1) {
        let better = if v > best.1 + TIE {
            true
        } else if (v - best.1).abs() <= TIE {
            s.abs() < best.0.abs() || (s.abs() == best.0.abs() && s < best.0)
        } else {
            false
        };
        if better {
            best = (s, v);
        }
    }
    best
}

/// Zero-lag normalized overlap of two spatial modes on the same pixel grid.
pub fn cross_correlation_2d(f: &SpatialMode2D, g: &SpatialMode2D) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    zero_lag(f.intensity(), g.intensity())
}

/// Block-sums each `factor x factor` tile (partial edge tiles included) without normalizing.
pub fn block_sum_2d(mode: &SpatialMode2D, factor: usize) -> Result<(usize, usize, Vec<f64>)> {
    let (rows, cols) = (mode.rows(), mode.cols());
    if factor == 0 {
        return Err(Error::BadDownsample { factor, rows, cols });
    }
    let out_rows = rows.div_ceil(factor);
    let out_cols = cols.div_ceil(factor);
    let mut out = vec![0.0; out_rows * out_cols];
    for r in 0..rows {
        for c in 0..cols {
            out[(r / factor) * out_cols + c / factor] += mode.at(r, c);
        }
    }
    Ok((out_rows, out_cols, out))
}

/// Coarsens a mode by summing `factor x factor` pixel blocks and renormalizing.
///
/// Trailing rows/columns that do not fill a whole block are summed as smaller
/// blocks. The coarse grid must keep at least two pixels per axis.
pub fn downsample_2d(mode: &SpatialMode2D, factor: usize) -> Result<SpatialMode2D> {
    let (rows, cols) = (mode.rows(), mode.cols());
    if factor == 1 {
        return mode.normalize();
    }
    let (out_rows, out_cols, sums) = block_sum_2d(mode, factor)?;
    if out_rows < 2 || out_cols < 2 {
        return Err(Error::BadDownsample { factor, rows, cols });
    }
    let coarse = |a: &Axis, n: usize| {
        Axis::new(a.start() + 0.5 * (factor - 1) as f64 * a.step(), a.step() * factor as f64, n, a.unit())
    };
    let x_axis = coarse(mode.x_axis(), out_cols)?;
    let y_axis = coarse(mode.y_axis(), out_rows)?;
    SpatialMode2D::normalized_from(x_axis, y_axis, sums)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Unit;
    use approx::assert_abs_diff_eq;

    fn on_grid(axis: Axis, f: impl Fn(f64) -> f64) -> SampledDistribution1D {
        let v = axis.points().map(f).collect();
        SampledDistribution1D::normalized_from(axis, v).unwrap()
    }

    fn rect(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
        move |x| if x >= lo - 1e-9 && x <= hi + 1e-9 { 1.0 } else { 0.0 }
    }

    #[test]
    fn self_correlation_is_one() {
        let axis = Axis::spanning(-5.0, 5.0, 501, Unit::Nm).unwrap();
        let f = on_grid(axis, |x| (x * 1.3).sin().abs() + 0.1 * x * x);
        let c = cross_correlation(&f, &f, 1.0).unwrap();
        assert_abs_diff_eq!(c.at_zero(), 1.0, epsilon = 1e-12);
        let (s, v) = best_shift(&c);
        assert_eq!(s, 0.0);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_rects_peak_at_their_separation() {
        let axis = Axis::new(-1.0, 0.05, 101, Unit::Ns).unwrap();
        let f = on_grid(axis, rect(0.0, 1.0));
        let g = on_grid(axis, rect(2.0, 3.0));
        let c = cross_correlation(&f, &g, 3.0).unwrap();
        assert_eq!(c.at_zero(), 0.0);
        let (s, v) = best_shift(&c);
        assert_abs_diff_eq!(s, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        assert_eq!(overlap_at_zero(&f, &g).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_overlap_closed_form() {
        // R(0) for equal-width Gaussians is exp(-delta^2 / (4 sigma^2)).
        let (sigma, delta) = (0.2, 0.11);
        let axis = Axis::spanning(795.6 - 2.0, 795.6 + 2.0, 8001, Unit::Nm).unwrap();
        let f = on_grid(axis, |x| (-0.5 * ((x - 795.6) / sigma).powi(2)).exp());
        let g = on_grid(axis, |x| (-0.5 * ((x - 795.6 - delta) / sigma).powi(2)).exp());
        let r0 = overlap_at_zero(&f, &g).unwrap();
        let expected = (-delta * delta / (4.0 * sigma * sigma)).exp();
        assert_abs_diff_eq!(r0, expected, epsilon = 1e-6);
        assert_abs_diff_eq!(r0, 0.9272, epsilon = 1e-4);
    }

    #[test]
    fn pure_translation() {
        let axis = Axis::new(-10.0, 0.5, 61, Unit::Ps).unwrap();
        let f = on_grid(axis, |x| (-0.5 * (x / 1.5f64).powi(2)).exp());
        let g = on_grid(axis, |x| (-0.5 * ((x - 2.0) / 1.5f64).powi(2)).exp());
        let (s, v) = best_shift(&cross_correlation(&f, &g, 5.0).unwrap());
        assert_eq!(s, 2.0);
        assert!(v > 0.999);
    }

    #[test]
    fn best_shift_tie_prefers_negative() {
        let curve = CorrelationCurve {
            shifts: vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0],
            values: vec![0.8, 0.2, 0.1, 0.05, 0.1, 0.2, 0.8],
            zero_lag_index: 3,
        };
        assert_eq!(best_shift(&curve), (-3.0, 0.8));
    }

    #[test]
    fn grid_mismatch_and_zero_signal() {
        let a = on_grid(Axis::new(0.0, 1.0, 5, Unit::Nm).unwrap(), |_| 1.0);
        let b = on_grid(Axis::new(0.0, 1.0, 6, Unit::Nm).unwrap(), |_| 1.0);
        assert_eq!(overlap_at_zero(&a, &b), Err(Error::GridMismatch));
        let z = SampledDistribution1D::new(*a.axis(), vec![0.0; 5]).unwrap();
        assert_eq!(overlap_at_zero(&a, &z), Err(Error::AllZeroSignal));
    }

    fn gauss2d(cx: f64, cy: f64, sx: f64, sy: f64, n: usize, half: f64) -> SpatialMode2D {
        let x = Axis::spanning(-half, half, n, Unit::Mm).unwrap();
        let y = Axis::spanning(-half, half, n, Unit::Mm).unwrap();
        let mut v = Vec::with_capacity(n * n);
        for yy in y.points() {
            for xx in x.points() {
                v.push((-0.5 * ((xx - cx) / sx).powi(2) - 0.5 * ((yy - cy) / sy).powi(2)).exp());
            }
        }
        SpatialMode2D::normalized_from(x, y, v).unwrap()
    }

    #[test]
    fn spatial_overlap_cases() {
        let f = gauss2d(0.0, 0.0, 0.3, 0.5, 201, 3.0);
        assert_abs_diff_eq!(cross_correlation_2d(&f, &f).unwrap(), 1.0, epsilon = 1e-12);

        let g = gauss2d(0.1, -0.2, 0.3, 0.5, 201, 3.0);
        let expected = (-0.01 / (4.0 * 0.09) - 0.04 / (4.0 * 0.25f64)).exp();
        assert_abs_diff_eq!(cross_correlation_2d(&f, &g).unwrap(), expected, epsilon = 1e-5);

        let x = Axis::new(0.0, 1.0, 4, Unit::Mm).unwrap();
        let mut a = vec![0.0; 16];
        let mut b = vec![0.0; 16];
        a[0] = 1.0;
        b[15] = 1.0;
        let a = SpatialMode2D::new(x, x, a).unwrap();
        let b = SpatialMode2D::new(x, x, b).unwrap();
        assert_eq!(cross_correlation_2d(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn downsample_cases() {
        let x = Axis::new(0.0, 1.0, 4, Unit::Mm).unwrap();
        let u = SpatialMode2D::normalized_from(x, x, vec![1.0; 16]).unwrap();
        assert_eq!(downsample_2d(&u, 1).unwrap(), u);
        let d = downsample_2d(&u, 2).unwrap();
        assert_eq!((d.rows(), d.cols()), (2, 2));
        assert_eq!(d.x_axis().step(), 2.0);
        assert_eq!(d.x_axis().start(), 0.5);
        for v in d.masses() {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        }
        assert!(downsample_2d(&u, 4).is_err());
        assert!(downsample_2d(&u, 0).is_err());
    }

    #[test]
    fn downsample_partial_blocks() {
        let x = Axis::new(0.0, 1.0, 5, Unit::Mm).unwrap();
        let m = SpatialMode2D::new(x, x, (0..25).map(|i| i as f64).collect()).unwrap();
        let (r, c, sums) = block_sum_2d(&m, 2).unwrap();
        assert_eq!((r, c), (3, 3));
        assert_eq!(sums[0], 0.0 + 1.0 + 5.0 + 6.0);
        assert_eq!(sums[8], 24.0);
        assert_eq!(sums.iter().sum::<f64>(), 300.0);
    }
}
