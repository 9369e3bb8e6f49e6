//! Seeded generators for sliced martingales, analytic pairs, balanced
//! measures and Bellman parameters.
//!
//! Integer-grid variants keep every intermediate value exactly representable,
//! so exact-arithmetic identities can be asserted with `==`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::carleson::DiscreteMeasure;
use crate::interval::DyadicInterval;
use crate::martingale::{DyadicAnalytic, SlicedMartingale};
use crate::tree::PiecewiseConstant;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-item stream so parallel batches reproduce the sequential draw.
pub fn stream(seed: u64, item: u64) -> SampleRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(item);
    r
}

/// Grid used by the exact generators.
pub const GRID_BITS: i32 = 20;

fn snap(x: f64) -> f64 {
    let s = 2f64.powi(GRID_BITS);
    (x * s).round() / s
}

fn grow(root_value: f64, depth: u32, mut incr: impl FnMut() -> (f64, f64)) -> Vec<f64> {
    let mut values = vec![root_value];
    for _ in (0..depth).step_by(2) {
        values = values
            .iter()
            .flat_map(|&a| {
                let (dx, dy) = incr();
                [a - dy, a + dy, a - dx, a + dx]
            })
            .collect();
    }
    values
}

/// Sliced martingale with increments uniform in `[-scale, scale]`.
pub fn random_sliced<R: Rng>(rng: &mut R, root: DyadicInterval, depth: u32, scale: f64) -> SlicedMartingale {
    let r = rng.gen_range(-scale..=scale);
    let leaves = grow(r, depth, || (rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale)));
    let t = PiecewiseConstant::new(root, depth, leaves).expect("grown to full size");
    SlicedMartingale::from_tree_unchecked(t)
}

/// Sliced martingale with values in `(1/4) Z`, increments bounded by `max_step`.
pub fn random_sliced_rational<R: Rng>(rng: &mut R, root: DyadicInterval, depth: u32, max_step: i32) -> SlicedMartingale {
    let q = |rng: &mut R| rng.gen_range(-4 * max_step..=4 * max_step) as f64 / 4.0;
    let r = q(rng);
    let leaves = grow(r, depth, || (q(rng), q(rng)));
    let t = PiecewiseConstant::new(root, depth, leaves).expect("grown to full size");
    SlicedMartingale::from_tree_unchecked(t)
}

/// `u + i(S₀u + c)` for random `u` and constant `c`.
pub fn random_analytic<R: Rng>(rng: &mut R, root: DyadicInterval, depth: u32, scale: f64) -> DyadicAnalytic {
    let u = random_sliced(rng, root, depth, scale);
    let c = rng.gen_range(-scale..=scale);
    let v = SlicedMartingale::from_tree_unchecked(u.s0().tree().map(|x| x + c));
    DyadicAnalytic::new_unchecked(u, v)
}

/// Analytic pair on the quarter-integer grid: `u` rational, `v = S₀u + c`.
pub fn random_analytic_rational<R: Rng>(rng: &mut R, root: DyadicInterval, depth: u32, max_step: i32) -> DyadicAnalytic {
    let u = random_sliced_rational(rng, root, depth, max_step);
    let c = rng.gen_range(-4 * max_step..=4 * max_step) as f64 / 4.0;
    let v = SlicedMartingale::from_tree_unchecked(u.s0().tree().map(|x| x + c));
    DyadicAnalytic::new_unchecked(u, v)
}

/// Mixes interior draws with the endpoints of `[lo, hi]`.
fn draw<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    match rng.gen_range(0..8) {
        0 => lo,
        1 => hi,
        _ => rng.gen_range(lo..=hi),
    }
}

/// Top-down description of a balanced measure with packing at most `cap`.
/// Along the tree the normalized subtree sums `M_I` are fixed first: `M_R`
/// is `root_share · cap`, each internal node (breadth-first) passes the share
/// `keep` of `M_I` to both halves and leaves the rest as its own mass, and
/// within each half the grandchildren get `keep ± s`, `|s| ≤ min(keep, cap -
/// keep)`, with `s` given as a fraction in `[-1, 1]`. All values are snapped
/// to a `2^-20` grid, so the balance identities hold exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct BalancedShape {
    pub root: DyadicInterval,
    pub depth: u32,
    pub cap: f64,
    pub root_share: f64,
    pub keep: Vec<f64>,
    pub spread: Vec<[f64; 2]>,
}

/// `(4^{depth/2} - 1)/3`.
pub fn internal_nodes(depth: u32) -> usize {
    ((1usize << depth) - 1) / 3
}

impl BalancedShape {
    pub fn random<R: Rng>(rng: &mut R, root: DyadicInterval, depth: u32, cap: f64) -> Self {
        let n = internal_nodes(depth);
        let root_share = draw(rng, 0.0, 1.0);
        let keep = (0..n).map(|_| draw(rng, 0.0, 1.0)).collect();
        let spread = (0..n).map(|_| [draw(rng, -1.0, 1.0), draw(rng, -1.0, 1.0)]).collect();
        BalancedShape { root, depth, cap, root_share, keep, spread }
    }

    /// Same measure on a tree two levels deeper.
    pub fn lifted(&self) -> Self {
        let extra = internal_nodes(self.depth + 2) - internal_nodes(self.depth);
        let mut out = self.clone();
        out.depth += 2;
        out.keep.extend(std::iter::repeat_n(0.0, extra));
        out.spread.extend(std::iter::repeat_n([0.0; 2], extra));
        out
    }

    pub fn build(&self) -> DiscreteMeasure {
        let cap = (self.cap * 2f64.powi(GRID_BITS)).floor() / 2f64.powi(GRID_BITS);
        let mut masses = Vec::new();
        let mut level = vec![(self.root, snap(cap * self.root_share.clamp(0.0, 1.0)).min(cap))];
        let mut q = 0;
        for rel in (0..=self.depth).step_by(2) {
            let mut next = Vec::new();
            for (i, m_i) in level {
                if rel == self.depth {
                    masses.push((i, m_i * i.length()));
                    continue;
                }
                let keep = snap(m_i * self.keep[q].clamp(0.0, 1.0)).clamp(0.0, m_i);
                masses.push((i, (m_i - keep) * i.length()));
                let spread = keep.min(cap - keep);
                let g = i.grandchildren().expect("4-adic node");
                for (p, pair) in [[g[0], g[1]], [g[2], g[3]]].into_iter().enumerate() {
                    let s = snap(spread * self.spread[q][p]).clamp(-spread, spread);
                    next.push((pair[0], keep - s));
                    next.push((pair[1], keep + s));
                }
                q += 1;
            }
            level = next;
        }
        DiscreteMeasure::new(self.root, self.depth, masses.into_iter().filter(|(_, m)| *m > 0.0))
            .expect("shape respects the tree and signs")
    }
}

/// Balanced measure with packing intensity at most `cap`.
pub fn random_balanced_measure<R: Rng>(rng: &mut R, root: DyadicInterval, depth: u32, cap: f64) -> DiscreteMeasure {
    BalancedShape::random(rng, root, depth, cap).build()
}

/// Root value `r + i·i`, a real increment pair `(Δ^x u, Δ^y u)` per internal
/// node (breadth-first); `v = S₀u + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticShape {
    pub root: DyadicInterval,
    pub depth: u32,
    pub r: f64,
    pub i: f64,
    pub increments: Vec<(f64, f64)>,
}

impl AnalyticShape {
    pub fn random<R: Rng>(rng: &mut R, root: DyadicInterval, depth: u32, scale: f64) -> Self {
        let r = rng.gen_range(-scale..=scale);
        let i = rng.gen_range(-scale..=scale);
        let increments = (0..internal_nodes(depth))
            .map(|_| (rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale)))
            .collect();
        AnalyticShape { root, depth, r, i, increments }
    }

    pub fn lifted(&self) -> Self {
        let extra = internal_nodes(self.depth + 2) - internal_nodes(self.depth);
        let mut out = self.clone();
        out.depth += 2;
        out.increments.extend(std::iter::repeat_n((0.0, 0.0), extra));
        out
    }

    pub fn build(&self) -> DyadicAnalytic {
        let mut it = self.increments.iter();
        let leaves = grow(self.r, self.depth, || *it.next().expect("one pair per node"));
        let u = SlicedMartingale::from_tree_unchecked(
            PiecewiseConstant::new(self.root, self.depth, leaves).expect("grown to full size"),
        );
        let i = self.i;
        let v = SlicedMartingale::from_tree_unchecked(u.s0().tree().map(|x| x + i));
        DyadicAnalytic::new_unchecked(u, v)
    }
}

/// Measure with independent nonnegative masses; generally unbalanced.
pub fn random_measure<R: Rng>(rng: &mut R, root: DyadicInterval, depth: u32, scale: f64) -> DiscreteMeasure {
    let mut masses = Vec::new();
    let mut level = vec![root];
    for rel in (0..=depth).step_by(2) {
        for i in &level {
            if rng.gen_bool(0.6) {
                masses.push((*i, rng.gen_range(0.0..=scale) * i.length()));
            }
        }
        if rel < depth {
            level = level.iter().flat_map(|i| i.grandchildren().unwrap()).collect();
        }
    }
    DiscreteMeasure::new(root, depth, masses).expect("nonnegative masses")
}
