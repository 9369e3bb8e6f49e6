use std::f64::consts::E;

use dyuch::bellman::*;
use dyuch::carleson::uchiyama_weighted_check;
use dyuch::ddouble::DoubleDouble;
use dyuch::sampling;
use dyuch::DyadicInterval;
use proptest::prelude::*;

fn point() -> impl Strategy<Value = BellmanPoint> {
    (-3.0..3.0f64, -3.0..3.0f64, 0.0..=1.0f64, 0.0..5.0f64)
        .prop_map(|(r, i, m, extra)| BellmanPoint { f: r * r + i * i + extra, r, i, m })
}

/// Admissible mass-free step: F parts chosen as child `|f|²` plus a
/// nonnegative surplus whose average matches the parent's.
fn step() -> impl Strategy<Value = (BellmanPoint, SplitSpec)> {
    (
        -2.0..2.0f64,
        -2.0..2.0f64,
        0.0..=1.0f64,
        -1.0..=1.0f64,
        -1.0..=1.0f64,
        -2.0..2.0f64,
        -2.0..2.0f64,
        prop::array::uniform4(0.0..1.0f64),
    )
        .prop_map(|(r, i, m, t1, t2, dxr, dyr, w)| {
            let delta = m.min(1.0 - m);
            let kids = [
                (r - dyr, i - dxr),
                (r + dyr, i + dxr),
                (r - dxr, i + dyr),
                (r + dxr, i - dyr),
            ];
            let surplus = 1.0;
            let wsum: f64 = w.iter().sum::<f64>().max(1e-9);
            let mut parts = [0.0; 4];
            for k in 0..4 {
                parts[k] = kids[k].0 * kids[k].0 + kids[k].1 * kids[k].1 + 4.0 * surplus * w[k] / wsum;
            }
            let f = parts.iter().sum::<f64>() / 4.0;
            let p = BellmanPoint { f, r, i, m };
            let s = SplitSpec { dxr, dyr, d1: t1 * delta, d2: t2 * delta, mu: 0.0, f_parts: parts };
            (p, s)
        })
}

proptest! {
    #[test]
    fn range_holds(p in point()) {
        let (lo, hi) = range_gap(&p).unwrap();
        prop_assert!(lo >= -1e-12 * p.f.max(1.0));
        prop_assert!(hi >= 0.0);
    }

    #[test]
    fn derivative_gap_matches_expm1_oracle(p in point(), t in 0.0..=1.0f64) {
        let mu = t * p.m;
        let g = derivative_gap(&p, mu).unwrap();
        let q = p.modulus2();
        let oracle = q * ((1.0 - p.m).exp() * mu.exp_m1() - mu);
        prop_assert!(g >= -1e-12 * q.max(1.0));
        prop_assert!((g - oracle).abs() <= 1e-11 * (E * q).max(1.0));
    }

    #[test]
    fn sliced_concavity_holds((p, s) in step()) {
        let g = concavity_gap(&p, &s).unwrap();
        let scale = E * p.f.max(1.0);
        prop_assert!(g >= -1e-12 * scale, "gap {g}");
        let q = concavity_quadratic_form(&p, &s).unwrap();
        prop_assert!((g - q).abs() <= 1e-11 * scale, "{g} vs {q}");
    }

    #[test]
    fn sliced_matrix_is_psd(m in 0.0..=1.0f64, t1 in -1.0..=1.0f64, t2 in -1.0..=1.0f64) {
        let delta = m.min(1.0 - m);
        let hp = HessianParams::sliced(m, t1 * delta, t2 * delta).unwrap();
        let c = check_minors(&hp).unwrap();
        prop_assert!(c.minors.iter().all(|&x| x >= MINOR_TOL), "{c:?}");
        prop_assert!(c.det_rel_err <= DET_REL_TOL, "{c:?}");
        let bottom = principal_minors(&sliced_matrix::<DoubleDouble>(&hp).unwrap(), MinorOrder::BottomRight);
        prop_assert!(bottom.iter().all(|x| x.hi >= MINOR_TOL));
    }

    #[test]
    fn g_is_even_in_d1(d in 0.0..0.25f64, d1 in 0.0..0.25f64, d2 in -0.25..0.25f64) {
        let a = unsliced_third_minor(d, d1, d2).unwrap();
        let b = unsliced_third_minor(d, -d1, d2).unwrap();
        prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
    }

    #[test]
    fn telescoping_recovers_uchiyama_slack(seed in any::<u64>(), depth in prop::sample::select(vec![0u32, 2, 4]), cap in 0.0..3.0f64) {
        let mut rng = sampling::rng(seed);
        let root = DyadicInterval::unit_root();
        let mu = sampling::random_balanced_measure(&mut rng, root, depth, cap);
        let f = sampling::random_analytic(&mut rng, root, depth, 1.0);
        let t = telescoped_uchiyama(&mu, &f).unwrap();
        let u = uchiyama_weighted_check(&mu, &f).unwrap();
        let scale = u.norm2.max(1.0);
        prop_assert!(t.min_gap >= -1e-12 * scale, "{t:?}");
        prop_assert!((t.slack() - u.slack).abs() <= 1e-10 * scale, "{} vs {}", t.slack(), u.slack);
    }
}

#[test]
fn slice_scan_matches_reference_count() {
    let spec = ScanSpec { region: ScanRegion::Slice { d_max: 0.1 }, step: 1e-3, threshold: 1e-8 };
    let w = scan_unsliced(&spec).unwrap();
    assert_eq!(w.len(), 89);
    assert!((w[0].d - 0.042).abs() < 1e-12, "{:?}", w[0]);
    assert!((w[0].g + 0.005088).abs() < 5e-7, "{:?}", w[0]);
    // the last witnesses are near the crossing at d ≈ 0.0893
    assert!(w.iter().all(|x| x.d <= 0.09));
}

#[test]
fn sliced_plane_has_no_witness() {
    let spec = ScanSpec { region: ScanRegion::Sliced, step: 1e-3, threshold: 1e-8 };
    assert!(scan_unsliced(&spec).unwrap().is_empty());
}

#[test]
fn sweep_witnesses_are_admissible_and_sorted() {
    let spec = ScanSpec { region: ScanRegion::Sweep, step: 0.02, threshold: 1e-8 };
    let w = scan_unsliced(&spec).unwrap();
    assert!(!w.is_empty());
    for x in &w {
        assert!(admissible_m_range(x.d, x.d1, x.d2).is_some());
        assert!(x.d > 0.0);
    }
    assert!(w.windows(2).all(|p| p[0].g <= p[1].g));
}

#[test]
fn certification_run_is_clean() {
    let s = certify_sliced(&CertifySpec { grid_n: 50, ..CertifySpec::new(20_000, 1) });
    assert!(s.pass(), "{:?}", &s.violations[..s.violations.len().min(3)]);
    assert_eq!(s.grid_points, 2 * 51 * 51);
    assert!(s.max_third_rel_err < 1e-6, "{} {}", s.max_third_rel_err, s.max_det_rel_err);
    let b = certify_sliced(&CertifySpec { grid_n: 50, order: MinorOrder::BottomRight, ..CertifySpec::new(2_000, 1) });
    assert!(b.pass());
    // the full determinant does not depend on the order
    assert!(b.max_det_rel_err < DET_REL_TOL);
}
