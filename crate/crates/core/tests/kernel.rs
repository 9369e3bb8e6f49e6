use std::f64::consts::E;

use dyuch::carleson::check_embedding_e;
use dyuch::kernel::*;
use dyuch::martingale::analytic_projection;
use dyuch::sampling;
use dyuch::{DyadicInterval, PiecewiseConstant};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn line(level: i32, index: i64) -> DyadicInterval {
    DyadicInterval::real(level, index).unwrap()
}

#[test]
fn norm_identity_for_all_heights() {
    let i = line(0, 0);
    let mut last = 0.0;
    for t in 1..=30 {
        let n = kernel_norm2(i, t).unwrap();
        let closed = (1.0 - 4f64.powi(-(t as i32))) / 3.0;
        assert!((n.partial - closed).abs() < 1e-14, "T = {t}");
        // past T ≈ 26 the increments fall below one ulp of 1/3
        assert!(n.partial >= last);
        assert_eq!(n.limit, 1.0 / 3.0);
        last = n.partial;
    }
    assert!((last - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn kernels_are_analytic() {
    for (i, t) in [(line(0, 0), 2u32), (line(2, 5), 2), (line(4, 13), 3)] {
        let k = kernel(i, t).unwrap();
        let w = k.window();
        let f = k.to_analytic(w, (i.level - w.level) as u32 + 2).unwrap();
        assert!(f.cr_residual() < 1e-12);
        // mean zero on the window, norm from the leaves matches the coefficients
        assert!(f.value(&w).unwrap().norm() < 1e-15);
        assert!((f.h2_norm2() - k.norm2().partial).abs() < 1e-12 * k.norm2().partial);
    }
    let u = DyadicInterval::unit(4, 6).unwrap();
    let f = unit_kernel(u).unwrap().to_analytic(DyadicInterval::unit_root(), 6).unwrap();
    assert!(f.cr_residual() < 1e-12);
}

#[test]
fn evaluation_is_constant_below_i() {
    let i = line(2, 3);
    let k = kernel(i, 4).unwrap();
    let want = norm2_closed_form(&i, 4);
    for kk in [i, line(4, 12), line(4, 15), line(6, 50)] {
        let v = k.evaluate(&kk).unwrap();
        assert!((v.partial.re - want).abs() < 1e-14 && v.partial.im == 0.0);
        assert!((v.limit.re - 1.0 / (3.0 * i.length())).abs() < 1e-14);
    }
    // far from every ancestor inside the window: only the tail
    let w = k.window();
    let far = line(2, w.index * 256 + 255);
    assert!(w.contains(&far));
    assert!(k.evaluate(&far).unwrap().partial.norm() > 0.0);
}

#[test]
fn unit_reproduction_is_exact() {
    let mut rng = sampling::rng(3);
    let root = DyadicInterval::unit_root();
    for _ in 0..20 {
        let f = sampling::random_analytic(&mut rng, root, 4, 1.0);
        for i in [root, DyadicInterval::unit(2, 1).unwrap(), DyadicInterval::unit(4, 11).unwrap()] {
            let r = reproducing_residual(&f, i).unwrap();
            assert!(r.residual <= 1e-10, "{r:?}");
        }
    }
}

#[test]
fn real_line_reproduction_misses_only_the_root_average() {
    let mut rng = sampling::rng(4);
    let root = line(-4, -1);
    for _ in 0..20 {
        let f = sampling::random_analytic(&mut rng, root, 4, 1.0);
        let i = line(0, -7);
        let r = reproducing_residual(&f, i).unwrap();
        assert!((r.residual - r.tail_bound).abs() <= 1e-10, "{r:?}");
        let c = f.value(&root).unwrap();
        let centered = dyuch::DyadicAnalytic::from_trees(
            f.u().tree().map(|x| x - c.re),
            f.v().tree().map(|x| x - c.im),
            Default::default(),
        )
        .unwrap();
        assert!(reproducing_residual(&centered, i).unwrap().residual <= 1e-10);
    }
}

#[test]
fn normalized_kernel_reproduces_itself() {
    let i = line(2, 1);
    let k = kernel(i, 2).unwrap().normalized();
    let w = k.window();
    let f = k.to_analytic(w, 6).unwrap();
    let r = reproducing_residual(&f, i).unwrap();
    assert!(r.residual < 1e-12, "{r:?}");
    let n = k.norm2();
    assert!((n.limit - 1.0).abs() < 1e-14);
    assert!((n.partial - (1.0 - 1.0 / 16.0)).abs() < 1e-14);
}

fn complex_leaves<R: Rng>(rng: &mut R, depth: u32) -> (PiecewiseConstant, PiecewiseConstant) {
    let n = 1usize << depth;
    let mut g = || (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let (a, b) = (g(), g());
    (PiecewiseConstant::unit(depth, a).unwrap(), PiecewiseConstant::unit(depth, b).unwrap())
}

fn leaf_inner(a: (&PiecewiseConstant, &PiecewiseConstant), b: (&PiecewiseConstant, &PiecewiseConstant)) -> Complex64 {
    let len = a.0.leaf_length();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..a.0.leaves().len() {
        let x = Complex64::new(a.0.leaves()[j], a.1.leaves()[j]);
        let y = Complex64::new(b.0.leaves()[j], b.1.leaves()[j]);
        acc += x * y.conj() * len;
    }
    acc
}

proptest! {
    #[test]
    fn projection_is_self_adjoint(seed in any::<u64>(), depth in prop::sample::select(vec![2u32, 4, 6])) {
        let mut rng = sampling::rng(seed);
        let g = complex_leaves(&mut rng, depth);
        let h = complex_leaves(&mut rng, depth);
        let pg = analytic_projection(&g.0, &g.1).unwrap();
        let ph = analytic_projection(&h.0, &h.1).unwrap();
        let lhs = leaf_inner((pg.u().tree(), pg.v().tree()), (&h.0, &h.1));
        let rhs = leaf_inner((&g.0, &g.1), (ph.u().tree(), ph.v().tree()));
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn partial_norm_is_monotone(level in -10i32..10, index in -50i64..50, t in 0u32..20) {
        let i = line(2 * level, index);
        let a = kernel_norm2(i, t).unwrap();
        let b = kernel_norm2(i, t + 1).unwrap();
        prop_assert!(b.partial > a.partial);
        prop_assert!(b.partial <= a.limit * (1.0 + 1e-15));
        prop_assert!((a.partial - norm2_closed_form(&i, t)).abs() <= 1e-14 * a.limit);
    }

    #[test]
    fn testing_dominates_packing(seed in any::<u64>(), depth in prop::sample::select(vec![0u32, 2, 4])) {
        let mut rng = sampling::rng(seed);
        let mu = sampling::random_measure(&mut rng, DyadicInterval::unit_root(), depth, 2.0);
        let nodes = [DyadicInterval::unit_root()];
        for i in nodes {
            let tp = testing_to_packing(&mu, &i).unwrap();
            prop_assert!(tp.slack >= -1e-12 * tp.testing.max(1.0));
            prop_assert!((tp.subtree_testing * 3.0 - tp.packing).abs() <= 1e-12 * tp.packing.max(1.0));
            prop_assert!(tp.testing >= tp.subtree_testing);
        }
    }

    #[test]
    fn pipeline_holds_at_unit_testing(seed in any::<u64>(), depth in prop::sample::select(vec![0u32, 2, 4])) {
        let mut rng = sampling::rng(seed);
        let root = DyadicInterval::unit_root();
        let mu = sampling::random_balanced_measure(&mut rng, root, depth, 1.0);
        let t = testing_constant(&mu).unwrap().value;
        prop_assume!(t > 0.0);
        let mu = mu.scaled(1.0 / t).unwrap();
        let f = sampling::random_analytic(&mut rng, root, depth, 1.0);
        let c = check_3e(&mu, &f).unwrap();
        prop_assert!((c.testing - 1.0).abs() < 1e-12);
        prop_assert!(c.packing <= 3.0 + 1e-12);
        prop_assert!(c.slack >= -1e-12 * c.norm2.max(1.0));
        prop_assert!(c.embedding_slack >= -1e-12 * (E * c.packing * c.norm2).max(1.0));
        let direct = check_embedding_e(&mu, &f).unwrap();
        prop_assert_eq!(direct.embedding, c.embedding);
    }
}

#[test]
fn off_subtree_mass_adds_to_testing() {
    let root = DyadicInterval::unit_root();
    let i = DyadicInterval::unit(2, 0).unwrap();
    let other = DyadicInterval::unit(2, 3).unwrap();
    let mu = dyuch::DiscreteMeasure::new(root, 2, [(i, 0.1), (other, 0.2), (root, 0.3)]).unwrap();
    let tp = testing_to_packing(&mu, &i).unwrap();
    assert!(tp.testing > tp.subtree_testing);
    assert!((tp.packing - 0.4).abs() < 1e-15);
}
