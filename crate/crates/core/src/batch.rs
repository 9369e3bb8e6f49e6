//! Seeded batches of random configurations, checked in parallel. Sample `k`
//! is drawn from its own stream, so results do not depend on the thread
//! count and a prefix of a batch is a smaller batch.

use rayon::prelude::*;
use serde::Serialize;

use crate::bellman::telescoped_uchiyama;
use crate::carleson::{check_embedding_e, uchiyama_weighted_check, DiscreteMeasure};
use crate::error::{Error, Result};
use crate::interval::DyadicInterval;
use crate::kernel::{check_3e, testing_constant};
use crate::martingale::{analytic_projection, cr_residual_exact, DyadicAnalytic, SlicedMartingale};
use crate::sampling;

/// Packing intensity cap for drawn measures.
const CAP: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BatchSpec {
    pub samples: usize,
    pub seed: u64,
    /// Sample `k` lives at depth `2 (k mod (max_depth/2 + 1))`.
    pub max_depth: u32,
}

impl BatchSpec {
    pub fn new(samples: usize, seed: u64, max_depth: u32) -> Result<Self> {
        if max_depth % 2 == 1 {
            return Err(Error::OddDepth(max_depth));
        }
        Ok(BatchSpec { samples, seed, max_depth })
    }

    pub fn depth_of(&self, k: usize) -> u32 {
        2 * (k as u32 % (self.max_depth / 2 + 1))
    }

    fn run<T: Send>(&self, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        (0..self.samples).into_par_iter().map(f).collect()
    }
}

/// Balanced `μ` with packing at most 1 and an analytic `f` on `[0, 1)`.
pub fn configuration(spec: &BatchSpec, k: usize) -> (DiscreteMeasure, DyadicAnalytic) {
    let mut rng = sampling::stream(spec.seed, k as u64);
    let depth = spec.depth_of(k);
    let root = DyadicInterval::unit_root();
    let mu = sampling::random_balanced_measure(&mut rng, root, depth, CAP);
    let f = sampling::random_analytic(&mut rng, root, depth, 1.0);
    (mu, f)
}

/// One failed check: which sample, and the offending quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchViolation {
    pub sample: usize,
    pub depth: u32,
    pub quantity: &'static str,
    pub value: f64,
}

fn violation(spec: &BatchSpec, k: usize, quantity: &'static str, value: f64) -> BatchViolation {
    BatchViolation { sample: k, depth: spec.depth_of(k), quantity, value }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmbeddingBatch {
    pub checked: usize,
    pub max_ratio: f64,
    pub max_packing: f64,
    /// Smallest `slack / (e C(μ) ‖f‖²)`.
    pub min_rel_slack: f64,
    pub violations: Vec<BatchViolation>,
}

/// `Σ μ_I |f_I|² ≤ e ‖f‖² (1 + tol)` on every sample.
pub fn embedding_batch(spec: &BatchSpec, tol: f64) -> Result<EmbeddingBatch> {
    let rows = spec.run(|k| {
        let (mu, f) = configuration(spec, k);
        check_embedding_e(&mu, &f)
    })?;
    let mut out = EmbeddingBatch {
        checked: rows.len(),
        max_ratio: 0.0,
        max_packing: 0.0,
        min_rel_slack: f64::INFINITY,
        violations: Vec::new(),
    };
    for (k, c) in rows.iter().enumerate() {
        let bound = std::f64::consts::E * c.norm2;
        if c.norm2 > 0.0 {
            out.max_ratio = out.max_ratio.max(c.embedding / c.norm2);
        }
        out.max_packing = out.max_packing.max(c.packing);
        let scale = (std::f64::consts::E * c.packing * c.norm2).max(f64::MIN_POSITIVE);
        out.min_rel_slack = out.min_rel_slack.min(c.slack / scale);
        if c.embedding > bound * (1.0 + tol) {
            out.violations.push(violation(spec, k, "embedding - e |f|^2", c.embedding - bound));
        }
        if !c.holds(tol) {
            out.violations.push(violation(spec, k, "packing slack", c.slack));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UchiyamaBatch {
    pub checked: usize,
    pub min_slack: f64,
    pub min_step_gap: f64,
    /// Largest `|telescoped - direct|` slack difference.
    pub max_telescoping_err: f64,
    pub violations: Vec<BatchViolation>,
}

/// Weighted embedding `Σ μ_J e^{M_J} |f_J|² ≤ ‖f‖² + tol` and the per-node
/// telescoping of its slack, to `telescoping_tol`.
pub fn uchiyama_batch(spec: &BatchSpec, tol: f64, telescoping_tol: f64) -> Result<UchiyamaBatch> {
    let rows = spec.run(|k| {
        let (mu, f) = configuration(spec, k);
        Ok((uchiyama_weighted_check(&mu, &f)?, telescoped_uchiyama(&mu, &f)?))
    })?;
    let mut out = UchiyamaBatch {
        checked: rows.len(),
        min_slack: f64::INFINITY,
        min_step_gap: f64::INFINITY,
        max_telescoping_err: 0.0,
        violations: Vec::new(),
    };
    for (k, (u, t)) in rows.iter().enumerate() {
        let scale = u.norm2.max(1.0);
        let err = (t.slack() - u.slack).abs();
        out.min_slack = out.min_slack.min(u.slack);
        out.min_step_gap = out.min_step_gap.min(t.min_gap);
        out.max_telescoping_err = out.max_telescoping_err.max(err);
        if u.slack < -tol * scale {
            out.violations.push(violation(spec, k, "weighted slack", u.slack));
        }
        if t.min_gap < -tol * scale {
            out.violations.push(violation(spec, k, "step gap", t.min_gap));
        }
        if err > telescoping_tol * scale {
            out.violations.push(violation(spec, k, "telescoping error", err));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugationBatch {
    pub checked: usize,
    /// Samples whose exact CR residual is nonzero.
    pub inexact: usize,
    pub max_isometry_err: f64,
    pub max_square_err: f64,
    pub max_projection_err: f64,
    pub violations: Vec<BatchViolation>,
}

fn max_diff(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f(x, y).abs()).fold(0.0, f64::max)
}

/// Rational sliced `u` with steps `2^-4 · j`: exact CR for `(u, S₀u)`,
/// `‖S₀u‖² = ‖u - u₀‖²`, `-S₀S₀u = u - u₀`, and `P⁺` fixes `u + iS₀u`.
pub fn conjugation_batch(spec: &BatchSpec, tol: f64) -> Result<ConjugationBatch> {
    let rows = spec.run(|k| {
        let mut rng = sampling::stream(spec.seed, k as u64);
        let u: SlicedMartingale =
            sampling::random_sliced_rational(&mut rng, DyadicInterval::unit_root(), spec.depth_of(k), 4);
        let f = DyadicAnalytic::conjugate(&u);
        let exact = cr_residual_exact(f.u(), f.v())?.is_zero();
        let c = u.centered();
        let iso = (f.v().l2_norm2() - c.l2_norm2()).abs() / c.l2_norm2().max(1.0);
        let square = max_diff(f.v().s0().leaves(), c.leaves(), |a, b| a + b);
        let p = analytic_projection(f.u().tree(), f.v().tree())?;
        let proj = max_diff(p.u().leaves(), f.u().leaves(), |a, b| a - b)
            .max(max_diff(p.v().leaves(), f.v().leaves(), |a, b| a - b));
        Ok((exact, iso, square, proj))
    })?;
    let mut out = ConjugationBatch {
        checked: rows.len(),
        inexact: 0,
        max_isometry_err: 0.0,
        max_square_err: 0.0,
        max_projection_err: 0.0,
        violations: Vec::new(),
    };
    for (k, &(exact, iso, square, proj)) in rows.iter().enumerate() {
        if !exact {
            out.inexact += 1;
            out.violations.push(violation(spec, k, "exact CR residual", 1.0));
        }
        out.max_isometry_err = out.max_isometry_err.max(iso);
        out.max_square_err = out.max_square_err.max(square);
        out.max_projection_err = out.max_projection_err.max(proj);
        for (q, v) in [("isometry", iso), ("S0 squared", square), ("projection", proj)] {
            if v > tol {
                out.violations.push(violation(spec, k, q, v));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestingBatch {
    pub checked: usize,
    /// Samples with zero testing constant (the zero measure); not rescaled.
    pub skipped: usize,
    pub max_packing: f64,
    pub min_slack: f64,
    pub violations: Vec<BatchViolation>,
}

/// Rescales each balanced `μ` to testing constant 1, then checks that the
/// implied packing is at most 3 and that the `3e` embedding holds.
pub fn testing_batch(spec: &BatchSpec, tol: f64) -> Result<TestingBatch> {
    let rows = spec.run(|k| {
        let (mu, f) = configuration(spec, k);
        let t = testing_constant(&mu)?.value;
        if t <= 0.0 {
            return Ok(None);
        }
        Ok(Some(check_3e(&mu.scaled(1.0 / t)?, &f)?))
    })?;
    let mut out = TestingBatch {
        checked: rows.len(),
        skipped: 0,
        max_packing: 0.0,
        min_slack: f64::INFINITY,
        violations: Vec::new(),
    };
    for (k, c) in rows.iter().enumerate() {
        let Some(c) = c else {
            out.skipped += 1;
            continue;
        };
        out.max_packing = out.max_packing.max(c.packing);
        out.min_slack = out.min_slack.min(c.slack);
        if c.packing > 3.0 + tol {
            out.violations.push(violation(spec, k, "packing", c.packing));
        }
        if c.slack < -tol * c.norm2.max(1.0) {
            out.violations.push(violation(spec, k, "3e slack", c.slack));
        }
    }
    Ok(out)
}
