use proptest::prelude::*;
use sidechan_core::leakage::{
    binary_entropy, exact_mutual_information, information_from_masses, joint_leakage, key_rate_bound, leakage_guessing,
    qber_to_iab, DEFAULT_CELL_BUDGET,
};
use sidechan_core::signal::{fold_timetags, resample_common};
use sidechan_core::xcorr::{cross_correlation, downsample_2d, overlap_at_zero};
use sidechan_core::{Axis, Basis, BasisPair, Direction, Observation, SampledDistribution1D, SpatialMode2D, Unit};

fn gaussian(axis: Axis, mean: f64, sigma: f64) -> SampledDistribution1D {
    let v = axis.points().map(|x| (-0.5 * ((x - mean) / sigma).powi(2)).exp()).collect();
    SampledDistribution1D::normalized_from(axis, v).unwrap()
}

fn profile_pair(a: Vec<f64>, b: Vec<f64>, prior0: f64) -> BasisPair {
    let axis = Axis::new(0.0, 1.0, a.len(), Unit::Nm).unwrap();
    BasisPair::new(
        Basis::HV,
        Observation::Profile(SampledDistribution1D::normalized_from(axis, a).unwrap()),
        Observation::Profile(SampledDistribution1D::normalized_from(axis, b).unwrap()),
        prior0,
    )
    .unwrap()
}

fn exact(pair: &BasisPair) -> f64 {
    exact_mutual_information(pair).unwrap().bits_per_pulse
}

/// Nonnegative vector with at least one clearly positive entry.
fn density(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_map(|mut v| {
        v[0] += 0.1;
        v
    })
}

fn density_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..48).prop_flat_map(|n| (density(n..n + 1), density(n..n + 1)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalize_is_idempotent_and_scale_free(v in density(2..64), scale in 1e-3f64..1e3) {
        let axis = Axis::new(-1.0, 0.25, v.len(), Unit::Ps).unwrap();
        let d = SampledDistribution1D::new(axis, v.clone()).unwrap();
        let n1 = d.normalize().unwrap();
        let n2 = n1.normalize().unwrap();
        let scaled = SampledDistribution1D::new(axis, v.iter().map(|x| x * scale).collect()).unwrap();
        let n3 = scaled.normalize().unwrap();
        prop_assert!((n1.integral() - 1.0).abs() < 1e-12);
        for ((a, b), c) in n1.density().iter().zip(n2.density()).zip(n3.density()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            prop_assert!((a - c).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn resample_common_yields_unit_mass_on_one_grid(
        m1 in -1.0f64..1.0, m2 in -1.0f64..1.0,
        s1 in 0.5f64..2.0, s2 in 0.5f64..2.0,
        n1 in 64usize..400, n2 in 64usize..400,
    ) {
        let a = gaussian(Axis::spanning(-10.0, 10.0, n1, Unit::Nm).unwrap(), m1, s1);
        let b = gaussian(Axis::spanning(-8.0, 12.0, n2, Unit::Nm).unwrap(), m2, s2);
        let (ra, rb) = resample_common(&a, &b).unwrap();
        prop_assert!(ra.axis().matches(rb.axis()));
        prop_assert!((ra.integral() - 1.0).abs() < 1e-9);
        prop_assert!((rb.integral() - 1.0).abs() < 1e-9);
        prop_assert!(ra.axis().step() <= a.axis().step().min(b.axis().step()) * (1.0 + 1e-9));
    }

    #[test]
    fn folding_conserves_counts(
        tags in prop::collection::vec(-1e4f64..1e4, 1..500),
        period in 1.0f64..300.0,
        bins in 1usize..512,
    ) {
        let bins = bins.max(2);
        let (_, counts) = fold_timetags(&tags, period, bins).unwrap();
        prop_assert_eq!(counts.iter().sum::<u64>(), tags.len() as u64);
    }

    #[test]
    fn correlation_is_symmetric_bounded_and_scale_free((a, b) in density_pair(), scale in 1e-2f64..1e2) {
        let axis = Axis::new(0.0, 1.0, a.len(), Unit::Ns).unwrap();
        let f = SampledDistribution1D::new(axis, a.clone()).unwrap();
        let g = SampledDistribution1D::new(axis, b).unwrap();
        let fs = SampledDistribution1D::new(axis, a.iter().map(|x| x * scale).collect()).unwrap();
        let r = overlap_at_zero(&f, &g).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
        prop_assert!((r - overlap_at_zero(&g, &f).unwrap()).abs() < 1e-12);
        prop_assert!((r - overlap_at_zero(&fs, &g).unwrap()).abs() < 1e-12);
        let fg = cross_correlation(&f, &g, 5.0).unwrap();
        let gf = cross_correlation(&g, &f, 5.0).unwrap();
        let n = fg.values.len();
        for i in 0..n {
            prop_assert!((fg.shifts[i] + gf.shifts[n - 1 - i]).abs() < 1e-12);
            prop_assert!((fg.values[i] - gf.values[n - 1 - i]).abs() < 1e-12);
            prop_assert!(fg.values[i] <= 1.0 + 1e-12 && fg.values[i] >= 0.0);
        }
    }

    #[test]
    fn gaussian_overlap_falls_with_offset(d1 in 0.0f64..3.0, extra in 0.01f64..2.0) {
        let axis = Axis::spanning(-12.0, 12.0, 2048, Unit::Nm).unwrap();
        let f = gaussian(axis, 0.0, 1.0);
        let r1 = overlap_at_zero(&f, &gaussian(axis, d1, 1.0)).unwrap();
        let r2 = overlap_at_zero(&f, &gaussian(axis, d1 + extra, 1.0)).unwrap();
        prop_assert!(r2 < r1);
    }

    #[test]
    fn exact_information_is_bounded_by_label_entropy((a, b) in density_pair(), prior0 in 0.05f64..0.95) {
        let i = exact(&profile_pair(a, b, prior0));
        prop_assert!(i >= 0.0);
        prop_assert!(i <= binary_entropy(prior0).unwrap() + 1e-12);
    }

    #[test]
    fn relabeling_with_swapped_prior_keeps_information((a, b) in density_pair(), prior0 in 0.05f64..0.95) {
        let i1 = exact(&profile_pair(a.clone(), b.clone(), prior0));
        let i2 = exact(&profile_pair(b, a, 1.0 - prior0));
        prop_assert!((i1 - i2).abs() < 1e-12);
    }

    #[test]
    fn translating_both_sources_keeps_information((a, b) in density_pair(), pad in 1usize..20) {
        let shift = |v: &Vec<f64>, front: usize| {
            let mut out = vec![0.0; front];
            out.extend_from_slice(v);
            out.extend(std::iter::repeat_n(0.0, 25 - front));
            out
        };
        let i0 = exact(&profile_pair(shift(&a, 0), shift(&b, 0), 0.5));
        let i1 = exact(&profile_pair(shift(&a, pad), shift(&b, pad), 0.5));
        prop_assert!((i0 - i1).abs() < 1e-12);
    }

    #[test]
    fn merging_bins_never_adds_information((a, b) in density_pair(), k in prop::sample::select(vec![2usize, 4, 8])) {
        let pair = profile_pair(a, b, 0.5);
        let (Observation::Profile(f), Observation::Profile(g)) = (pair.dist0(), pair.dist1()) else { unreachable!() };
        prop_assume!(f.axis().count() >= 2 * k);
        let coarse = BasisPair::new(
            Basis::HV,
            Observation::Profile(f.coarsen(k).unwrap()),
            Observation::Profile(g.coarsen(k).unwrap()),
            0.5,
        )
        .unwrap();
        prop_assert!(exact(&coarse) <= exact(&pair) + 1e-9);
    }

    #[test]
    fn downsampling_modes_never_adds_information(
        a in prop::collection::vec(0.0f64..1.0, 64),
        b in prop::collection::vec(0.0f64..1.0, 64),
        k in prop::sample::select(vec![2usize, 4]),
    ) {
        let x = Axis::new(0.0, 0.1, 8, Unit::Mm).unwrap();
        let mk = |mut v: Vec<f64>| {
            v[0] += 0.1;
            SpatialMode2D::normalized_from(x, x, v).unwrap()
        };
        let (f, g) = (mk(a), mk(b));
        let fine = BasisPair::new(Basis::DA, Observation::Mode(f.clone()), Observation::Mode(g.clone()), 0.5).unwrap();
        let coarse = BasisPair::new(
            Basis::DA,
            Observation::Mode(downsample_2d(&f, k).unwrap()),
            Observation::Mode(downsample_2d(&g, k).unwrap()),
            0.5,
        )
        .unwrap();
        prop_assert!(exact(&coarse) <= exact(&fine) + 1e-9);
    }

    #[test]
    fn guessing_leakage_falls_as_overlap_rises(r1 in 0.0f64..1.0, r2 in 0.0f64..1.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let g_lo = leakage_guessing(lo).unwrap().bits_per_pulse;
        let g_hi = leakage_guessing(hi).unwrap().bits_per_pulse;
        prop_assert!(g_hi <= g_lo + 1e-15);
        prop_assert!((0.0..=1.0).contains(&g_lo));
    }

    #[test]
    fn key_rate_never_rises_with_qber(q1 in 0.0f64..0.5, q2 in 0.0f64..0.5, i_ae in 0.0f64..0.2) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let r_lo = key_rate_bound(qber_to_iab(lo).unwrap(), i_ae, Direction::DR, None).unwrap();
        let r_hi = key_rate_bound(qber_to_iab(hi).unwrap(), i_ae, Direction::DR, None).unwrap();
        prop_assert!(r_hi <= r_lo + 1e-15);
    }

    #[test]
    fn joint_lies_between_max_and_sum_and_matches_enumeration(
        (a1, b1) in density_pair(),
        (a2, b2) in density_pair(),
    ) {
        let p1 = profile_pair(a1, b1, 0.5);
        let p2 = profile_pair(a2, b2, 0.5);
        let (i1, i2) = (exact(&p1), exact(&p2));
        let joint = joint_leakage(&[p1.clone(), p2.clone()], DEFAULT_CELL_BUDGET).unwrap().bits_per_pulse;
        prop_assert!(joint >= i1.max(i2) - 1e-12);
        prop_assert!(joint <= i1 + i2 + 1e-12);

        // Outer-product masses fed to the plain two-source formula.
        let (m1a, m1b) = p1.masses().unwrap();
        let (m2a, m2b) = p2.masses().unwrap();
        let outer = |x: &[f64], y: &[f64]| x.iter().flat_map(|u| y.iter().map(move |v| u * v)).collect::<Vec<_>>();
        let oracle = information_from_masses(0.5, &outer(&m1a, &m2a), &outer(&m1b, &m2b)).max(0.0);
        prop_assert!((joint - oracle).abs() < 1e-12);
    }
}
