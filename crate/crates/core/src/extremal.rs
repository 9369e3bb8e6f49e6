//! Lower-bound side: the two-level competitor, a randomized local search for
//! configurations with a large embedding ratio, the constraint system for
//! `Φ(M) = b(1, 0, M)`, and the mollified sharpness certificate.
//!
//! The search gives empirical lower bounds only. The optimality of `e` rests
//! on the certificate: every admissible constant is at least
//! `e·exp(2ε(log(ε/2) - 1))` for all `ε`, and these values increase to `e`.

use std::f64::consts::E;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::carleson::{check_embedding_e, MeasureFile, DiscreteMeasure};
use crate::error::{Error, Result};
use crate::interval::DyadicInterval;
use crate::martingale::{AnalyticFile, DyadicAnalytic, SlicedMartingale};
use crate::sampling::{self, AnalyticShape, BalancedShape};
use crate::tree::PiecewiseConstant;

pub const DEFAULT_MAX_DEPTH: u32 = 8;
const TOL: f64 = 1e-12;

/// A balanced measure with packing at most 1 and an analytic `f`, with the
/// ratio `Σ μ_I |f_I|² / ‖f‖²`.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub f: DyadicAnalytic,
    pub mu: DiscreteMeasure,
    pub embedding: f64,
    pub norm2: f64,
    pub ratio: f64,
}

impl Configuration {
    /// Validates feasibility and the upper bound `ratio ≤ e`.
    pub fn new(f: DyadicAnalytic, mu: DiscreteMeasure) -> Result<Self> {
        if f.cr_residual() > TOL {
            return Err(Error::CauchyRiemann {
                residual: f.cr_residual(),
            });
        }
        let packing = mu.packing_intensity();
        if packing > 1.0 + TOL {
            return Err(Error::Inadmissible(format!("packing intensity {packing} exceeds 1")));
        }
        let check = check_embedding_e(&mu, &f)?;
        let ratio = if check.norm2 > 0.0 {
            check.embedding / check.norm2
        } else {
            0.0
        };
        if ratio > E * (1.0 + TOL) {
            return Err(Error::TheoremViolation(format!(
                "embedding ratio {ratio} exceeds e with packing {packing}"
            )));
        }
        Ok(Configuration {
            f,
            mu,
            embedding: check.embedding,
            norm2: check.norm2,
            ratio,
        })
    }

    /// Rotates every value pair of `f`; the measure is unchanged.
    pub fn rotate(&self, theta: f64) -> Result<Self> {
        Configuration::new(self.f.rotate(theta), self.mu.clone())
    }

    pub fn to_file(&self) -> ConfigurationFile {
        ConfigurationFile {
            f: self.f.to_file(),
            mu: self.mu.to_file(),
            embedding: self.embedding,
            norm2: self.norm2,
            ratio: self.ratio,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigurationFile {
    pub f: AnalyticFile,
    pub mu: MeasureFile,
    pub embedding: f64,
    pub norm2: f64,
    pub ratio: f64,
}

/// Depth-2 configuration on `[0, 1)` with averages `r`, `i`, `⟨|f|²⟩ = F`:
/// `u = r + c h_{I^x} + c h_{I^y}`, `v = i - c h_{I^x} + c h_{I^y}` with
/// `L^∞`-normalized Haar functions, `c = √((F - r² - i²)/2)` and `μ = {I₀: M}`.
/// The sign of the `v` bumps is the one that satisfies Cauchy–Riemann.
pub fn competitor(f: f64, r: f64, i: f64, m: f64) -> Result<Configuration> {
    let q = r * r + i * i;
    if !(f >= q) {
        return Err(Error::Domain(format!("F = {f} < r² + i² = {q}")));
    }
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::Domain(format!("M = {m} outside [0, 1]")));
    }
    let c = ((f - q) / 2.0).sqrt();
    let root = DyadicInterval::unit_root();
    // leaves y-, y+, x-, x+
    let u = vec![r - c, r + c, r - c, r + c];
    let v = vec![i - c, i + c, i + c, i - c];
    let f = DyadicAnalytic::new(
        SlicedMartingale::from_tree(PiecewiseConstant::new(root, 2, u)?, Default::default())?,
        SlicedMartingale::from_tree(PiecewiseConstant::new(root, 2, v)?, Default::default())?,
        Default::default(),
    )?;
    let mu = DiscreteMeasure::new(root, 2, [(root, m * root.length())])?;
    Configuration::new(f, mu)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SearchSpec {
    pub depth: u32,
    /// Local moves per restart and depth stage.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_depth: u32,
}

impl SearchSpec {
    pub fn new(depth: u32, budget: usize, seed: u64) -> Self {
        SearchSpec {
            depth,
            budget,
            restarts: 8,
            seed,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StageResult {
    pub depth: u32,
    pub ratio: f64,
    pub accepted: usize,
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub best: Configuration,
    /// Best ratio after each depth stage `0, 2, …, depth`.
    pub stages: Vec<StageResult>,
}

#[derive(Clone)]
struct State {
    f: AnalyticShape,
    mu: BalancedShape,
    ratio: f64,
}

fn ratio_of(f: &AnalyticShape, mu: &BalancedShape) -> f64 {
    let (f, mu) = (f.build(), mu.build());
    let norm2 = f.h2_norm2();
    if norm2 == 0.0 {
        return 0.0;
    }
    crate::carleson::embedding_sum(&mu, &f).expect("same tree") / norm2
}

fn state(f: AnalyticShape, mu: BalancedShape) -> State {
    let ratio = ratio_of(&f, &mu);
    State { f, mu, ratio }
}

/// One coordinate move, kept when the ratio strictly improves.
fn local_step<R: Rng>(rng: &mut R, s: &mut State) -> bool {
    let n = s.f.increments.len();
    let step = 0.5f64.powi(rng.gen_range(0..6));
    let mut f = s.f.clone();
    let mut mu = s.mu.clone();
    let jitter = |rng: &mut R| step * rng.gen_range(-1.0..=1.0);
    match rng.gen_range(0..6) {
        0 => {
            f.r += jitter(rng);
            f.i += jitter(rng);
        }
        1 | 2 if n > 0 => {
            let k = rng.gen_range(0..n);
            f.increments[k].0 += jitter(rng);
            f.increments[k].1 += jitter(rng);
        }
        3 => mu.root_share = (mu.root_share + jitter(rng)).clamp(0.0, 1.0),
        4 if n > 0 => {
            let k = rng.gen_range(0..n);
            mu.keep[k] = (mu.keep[k] + jitter(rng)).clamp(0.0, 1.0);
        }
        _ if n > 0 => {
            let k = rng.gen_range(0..n);
            let p = rng.gen_range(0..2);
            mu.spread[k][p] = (mu.spread[k][p] + jitter(rng)).clamp(-1.0, 1.0);
        }
        _ => mu.root_share = (mu.root_share + jitter(rng)).clamp(0.0, 1.0),
    }
    let ratio = ratio_of(&f, &mu);
    if ratio > s.ratio {
        *s = State { f, mu, ratio };
        true
    } else {
        false
    }
}

/// Depth-staged random-restart local search. Stage `d` starts restart 0 from
/// the lifted best of stage `d - 2`, so the best ratio never decreases with
/// depth; other restarts draw fresh shapes from per-restart streams.
pub fn search(spec: &SearchSpec) -> Result<SearchResult> {
    if !spec.depth.is_multiple_of(2) {
        return Err(Error::OddDepth(spec.depth));
    }
    if spec.depth > spec.max_depth {
        return Err(Error::DepthCap {
            depth: spec.depth,
            cap: spec.max_depth,
        });
    }
    let root = DyadicInterval::unit_root();
    let restarts = spec.restarts.max(1);
    // depth 0: constant f with the full root mass
    let mut best = state(
        AnalyticShape { root, depth: 0, r: 1.0, i: 0.0, increments: vec![] },
        BalancedShape { root, depth: 0, cap: 1.0, root_share: 1.0, keep: vec![], spread: vec![] },
    );
    let mut stages = vec![StageResult { depth: 0, ratio: best.ratio, accepted: 0 }];
    for depth in (2..=spec.depth).step_by(2) {
        let carried = State {
            f: best.f.lifted(),
            mu: best.mu.lifted(),
            ratio: best.ratio,
        };
        let runs: Vec<(State, usize)> = (0..restarts)
            .into_par_iter()
            .map(|k| {
                let mut rng = sampling::stream(spec.seed, (u64::from(depth) << 32) | k as u64);
                let mut s = if k == 0 {
                    carried.clone()
                } else {
                    state(
                        AnalyticShape::random(&mut rng, root, depth, 1.0),
                        BalancedShape::random(&mut rng, root, depth, 1.0),
                    )
                };
                let mut accepted = 0;
                for _ in 0..spec.budget {
                    accepted += usize::from(local_step(&mut rng, &mut s));
                }
                (s, accepted)
            })
            .collect();
        let mut accepted = 0;
        best = carried;
        // first strict maximum in restart order
        for (s, a) in runs {
            accepted += a;
            if s.ratio > best.ratio {
                best = s;
            }
        }
        stages.push(StageResult { depth, ratio: best.ratio, accepted });
    }
    let config = Configuration::new(best.f.build(), best.mu.build())?;
    Ok(SearchResult { best: config, stages })
}

/// `Φ` sampled on an increasing grid in `[0, 1]`, with a candidate constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiSample {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub c: f64,
}

impl PhiSample {
    /// `phi` on `n + 1` equally spaced points of `[lo, hi]`.
    pub fn from_fn(phi: impl Fn(f64) -> f64, c: f64, lo: f64, hi: f64, n: usize) -> Self {
        let grid: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        let values = grid.iter().map(|&m| phi(m)).collect();
        PhiSample { grid, values, c }
    }
}

/// Largest violation of each constraint family; `0` means satisfied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhiResiduals {
    /// `0 ≤ Φ ≤ C`.
    pub size: f64,
    /// `Φ(M) ≤ Φ(M - μ) - μ` over all grid pairs.
    pub derivative: f64,
    /// Convexity of `log Φ`: slopes of consecutive chords nondecreasing.
    pub log_convexity: f64,
    /// The consequence `Φ(M_0) ≥ Φ_N (1 + h/Φ_N)^{(M_N - M_0)/h}` against `C`,
    /// `h` the last grid step; this is the discrete form of the chain that
    /// forces `C ≥ e`.
    pub chain: f64,
}

impl PhiResiduals {
    pub fn max(&self) -> f64 {
        self.size.max(self.derivative).max(self.log_convexity).max(self.chain)
    }

    pub fn admissible(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

pub fn phi_admissible(s: &PhiSample) -> Result<PhiResiduals> {
    let n = s.grid.len();
    if n < 2 || n != s.values.len() {
        return Err(Error::InvalidProfile(format!(
            "need at least two samples with matching grid, got {} and {}",
            n,
            s.values.len()
        )));
    }
    if s.grid.windows(2).any(|w| !(w[0] < w[1])) || s.grid[0] < 0.0 || s.grid[n - 1] > 1.0 {
        return Err(Error::InvalidProfile("grid must increase inside [0, 1]".into()));
    }
    if let Some(v) = s.values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidProfile(format!("value {v} is not positive")));
    }
    let (g, phi) = (&s.grid, &s.values);
    let size = phi.iter().map(|&p| (p - s.c).max(0.0)).fold(0.0, f64::max);
    let derivative = (1..n)
        .into_par_iter()
        .map(|j| {
            (0..j)
                .map(|k| (phi[j] - phi[k] + (g[j] - g[k])).max(0.0))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let ups: Vec<f64> = phi.iter().map(|p| p.ln()).collect();
    let slopes: Vec<f64> = (1..n).map(|j| (ups[j] - ups[j - 1]) / (g[j] - g[j - 1])).collect();
    let log_convexity = slopes.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max);
    let h = g[n - 1] - g[n - 2];
    let last = phi[n - 1];
    let reach = last * ((g[n - 1] - g[0]) / h * (h / last).ln_1p()).exp();
    let chain = (reach - s.c).max(0.0);
    Ok(PhiResiduals {
        size,
        derivative,
        log_convexity,
        chain,
    })
}

/// `e · exp(2ε(log(ε/2) - 1))` for `0 < ε < ¼`.
pub fn lower_bound_certificate(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.25) {
        return Err(Error::EpsOutOfRange(eps));
    }
    Ok(E * (2.0 * eps * ((eps / 2.0).ln() - 1.0)).exp())
}
