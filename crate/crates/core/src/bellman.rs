//! The Bellman function `B̃(F, r, i, M) = eF - e^{1-M}(r² + i²)`, its range,
//! derivative and restricted-concavity properties, the 4×4 matrix of the
//! concavity form with its minors, the unsliced counterexample scan, and the
//! full dyadic Laplacian step.

use std::f64::consts::E;

use rayon::prelude::*;
use serde::Serialize;

use crate::carleson::{pair_submartingale, DiscreteMeasure};
use crate::ddouble::{DoubleDouble, Real};
use crate::error::{Error, Result};
use crate::martingale::DyadicAnalytic;
use crate::sampling;

/// Slack allowed on the domain constraints of child points built in floating
/// point (`M ± d` may land a rounding error outside `[0, 1]`).
pub const DOMAIN_SLACK: f64 = 1e-12;

pub type Mat4<T> = [[T; 4]; 4];

/// `(F, r, i, M)` in `Ω = {F ≥ r² + i², 0 ≤ M ≤ 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BellmanPoint {
    pub f: f64,
    pub r: f64,
    pub i: f64,
    pub m: f64,
}

impl BellmanPoint {
    pub fn new(f: f64, r: f64, i: f64, m: f64) -> Result<Self> {
        let p = BellmanPoint { f, r, i, m };
        p.check()?;
        Ok(p)
    }

    pub fn modulus2(&self) -> f64 {
        self.r * self.r + self.i * self.i
    }

    pub fn check(&self) -> Result<()> {
        let q = self.modulus2();
        if ![self.f, self.r, self.i, self.m].iter().all(|x| x.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate in {self:?}")));
        }
        if self.f < q - DOMAIN_SLACK * q.max(1.0) {
            return Err(Error::Domain(format!("F = {} < r² + i² = {q}", self.f)));
        }
        if self.m < -DOMAIN_SLACK || self.m > 1.0 + DOMAIN_SLACK {
            return Err(Error::Domain(format!("M = {} outside [0, 1]", self.m)));
        }
        Ok(())
    }
}

pub fn btilde(p: &BellmanPoint) -> Result<f64> {
    p.check()?;
    Ok(btilde_unchecked(p))
}

fn btilde_unchecked(p: &BellmanPoint) -> f64 {
    E * p.f - (1.0 - p.m).exp() * p.modulus2()
}

/// `(B̃, eF - B̃)`; both are nonnegative on `Ω`.
pub fn range_gap(p: &BellmanPoint) -> Result<(f64, f64)> {
    let b = btilde(p)?;
    Ok((b, E * p.f - b))
}

/// `B̃(F,r,i,M) - B̃(F,r,i,M-μ) - μ(r² + i²)`.
pub fn derivative_gap(p: &BellmanPoint, mu: f64) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(Error::Domain(format!("mass {mu} must be nonnegative")));
    }
    let lower = BellmanPoint { m: p.m - mu, ..*p };
    Ok(btilde(p)? - btilde(&lower)? - mu * p.modulus2())
}

/// Increments and children of one 4-adic step. `f_parts` are ordered
/// `F^y_-, F^y_+, F^x_-, F^x_+` and must average to `F`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplitSpec {
    pub dxr: f64,
    pub dyr: f64,
    pub d1: f64,
    pub d2: f64,
    pub mu: f64,
    pub f_parts: [f64; 4],
}

impl SplitSpec {
    /// Children `y-, y+, x-, x+` of `p` with Cauchy–Riemann coupled `i` and
    /// `M^x_± = M - μ ± d1`, `M^y_± = M - μ ± d2`.
    pub fn children(&self, p: &BellmanPoint) -> Result<[BellmanPoint; 4]> {
        let mean = self.f_parts.iter().sum::<f64>() / 4.0;
        if (mean - p.f).abs() > DOMAIN_SLACK * p.f.abs().max(1.0) {
            return Err(Error::InconsistentChildren(format!(
                "F parts average to {mean}, parent F = {}",
                p.f
            )));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::Domain(format!("mass {} must be nonnegative", self.mu)));
        }
        let m = p.m - self.mu;
        let [fym, fyp, fxm, fxp] = self.f_parts;
        let kids = [
            BellmanPoint { f: fym, r: p.r - self.dyr, i: p.i - self.dxr, m: m - self.d2 },
            BellmanPoint { f: fyp, r: p.r + self.dyr, i: p.i + self.dxr, m: m + self.d2 },
            BellmanPoint { f: fxm, r: p.r - self.dxr, i: p.i + self.dyr, m: m - self.d1 },
            BellmanPoint { f: fxp, r: p.r + self.dxr, i: p.i - self.dyr, m: m + self.d1 },
        ];
        for k in &kids {
            k.check()?;
        }
        Ok(kids)
    }
}

/// `B̃(p) - ¼ Σ B̃(children)` for a mass-free sliced step.
pub fn concavity_gap(p: &BellmanPoint, s: &SplitSpec) -> Result<f64> {
    p.check()?;
    if s.mu != 0.0 {
        return Err(Error::Inadmissible(format!(
            "concavity is stated for μ = 0, got {}",
            s.mu
        )));
    }
    let kids = s.children(p)?;
    let mean = kids.iter().map(btilde_unchecked).sum::<f64>() / 4.0;
    Ok(btilde_unchecked(p) - mean)
}

/// `e · wᵀ Q w` with `w = (r, i, Δ^x r, Δ^y r)` and `Q` the sliced matrix,
/// the same gap computed through the quadratic form.
pub fn concavity_quadratic_form(p: &BellmanPoint, s: &SplitSpec) -> Result<f64> {
    let hp = HessianParams::sliced(p.m, s.d1, s.d2)?;
    let q: Mat4<f64> = sliced_matrix(&hp)?;
    let w = [p.r, p.i, s.dxr, s.dyr];
    let mut acc = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            acc += w[a] * q[a][b] * w[b];
        }
    }
    Ok(E * acc)
}

/// Matrix parameters: children `M + d ± d1` (x) and `M - d ± d2` (y).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HessianParams {
    pub m: f64,
    pub d: f64,
    pub d1: f64,
    pub d2: f64,
}

impl HessianParams {
    pub fn new(m: f64, d: f64, d1: f64, d2: f64) -> Result<Self> {
        let hp = HessianParams { m, d, d1, d2 };
        hp.check()?;
        Ok(hp)
    }

    pub fn sliced(m: f64, d1: f64, d2: f64) -> Result<Self> {
        Self::new(m, 0.0, d1, d2)
    }

    pub fn child_values(&self) -> [f64; 5] {
        let (m, d) = (self.m, self.d);
        [m, m + d - self.d1, m + d + self.d1, m - d - self.d2, m - d + self.d2]
    }

    pub fn check(&self) -> Result<()> {
        for v in self.child_values() {
            if !v.is_finite() || !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&v) {
                return Err(Error::Inadmissible(format!(
                    "{self:?} puts a child value {v} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// The bracket `Q / (e^{-M}/4)`: with `x_j = e^{-d_j} + e^{d_j}`,
/// `a_j = e^{-d_j} - e^{d_j}`, `Σ = e^{-d} x1 + e^{d} x2`,
/// `[[Σ-4, 0, e^{-d} a1, e^{d} a2], [0, Σ-4, e^{d} a2, -e^{-d} a1], [.., Σ, 0], [.., 0, Σ]]`.
pub fn bracket<T: Real>(d: f64, d1: f64, d2: f64) -> Mat4<T> {
    let one = T::one();
    let (t, t1, t2) = (T::from_f64(d), T::from_f64(d1), T::from_f64(d2));
    let (e1m, e1p) = ((-t1).exp(), t1.exp());
    let (e2m, e2p) = ((-t2).exp(), t2.exp());
    let (edm, edp) = if d == 0.0 { (one, one) } else { ((-t).exp(), t.exp()) };
    let x1 = e1m + e1p;
    let x2 = e2m + e2p;
    let a1 = edm * (e1m - e1p);
    let a2 = edp * (e2m - e2p);
    let sigma = edm * x1 + edp * x2;
    let p = sigma - T::from_f64(4.0);
    let z = T::zero();
    [
        [p, z, a1, a2],
        [z, p, a2, -a1],
        [a1, a2, sigma, z],
        [a2, -a1, z, sigma],
    ]
}

fn scaled<T: Real>(m: f64, b: Mat4<T>) -> Mat4<T> {
    let c = (-T::from_f64(m)).exp() / T::from_f64(4.0);
    b.map(|row| row.map(|x| c * x))
}

/// `(e^{-M}/4) · bracket` for `d = 0`; the Hessian-type form of the
/// restricted concavity on `(r, i, Δ^x r, Δ^y r)`.
pub fn sliced_matrix<T: Real>(hp: &HessianParams) -> Result<Mat4<T>> {
    hp.check()?;
    if hp.d != 0.0 {
        return Err(Error::Inadmissible(format!("sliced matrix needs d = 0, got {}", hp.d)));
    }
    Ok(scaled(hp.m, bracket(0.0, hp.d1, hp.d2)))
}

/// The same form when the two pair means of `M` differ by `2d`.
pub fn unsliced_matrix<T: Real>(hp: &HessianParams) -> Result<Mat4<T>> {
    hp.check()?;
    Ok(scaled(hp.m, bracket(hp.d, hp.d1, hp.d2)))
}

/// Determinant of the leading `n × n` block by LU with partial pivoting.
pub fn det_leading<T: Real>(a: &Mat4<T>, n: usize) -> T {
    let mut m = *a;
    let mut det = T::one();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if m[row][col].abs() > m[piv][col].abs() {
                piv = row;
            }
        }
        if m[piv][col] == T::zero() {
            return T::zero();
        }
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        det = det * m[col][col];
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] = m[row][k] - f * m[col][k];
            }
        }
    }
    det
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinorOrder {
    /// Leading minors from the upper-left corner (upper-bound matrix).
    TopLeft,
    /// Trailing minors from the lower-right corner (lower-bound matrix).
    BottomRight,
}

pub fn principal_minors<T: Real>(a: &Mat4<T>, order: MinorOrder) -> [T; 4] {
    let m = match order {
        MinorOrder::TopLeft => *a,
        MinorOrder::BottomRight => {
            let mut r = *a;
            for (i, row) in r.iter_mut().enumerate() {
                for (j, x) in row.iter_mut().enumerate() {
                    *x = a[3 - i][3 - j];
                }
            }
            r
        }
    };
    [1, 2, 3, 4].map(|n| det_leading(&m, n))
}

/// `4 (e^{-M}/4)⁴ (2 sinh(d1/2))⁴ (2 sinh(d2/2))⁴`.
pub fn det_closed_form(hp: &HessianParams) -> Result<f64> {
    hp.check()?;
    let c = (-hp.m).exp() / 4.0;
    let s1 = 2.0 * (hp.d1 / 2.0).sinh();
    let s2 = 2.0 * (hp.d2 / 2.0).sinh();
    Ok(4.0 * c.powi(4) * s1.powi(4) * s2.powi(4))
}

/// Third minor of the sliced matrix through the factorization
/// `(e^{-M}/4)³ (Σ - 4) · 2 (x1 - 2)(x2 - 2)`.
pub fn sliced_third_minor_factored(hp: &HessianParams) -> f64 {
    let c = (-hp.m).exp() / 4.0;
    // x - 2 = (2 sinh(d/2))², free of cancellation
    let f1 = (2.0 * (hp.d1 / 2.0).sinh()).powi(2);
    let f2 = (2.0 * (hp.d2 / 2.0).sinh()).powi(2);
    c.powi(3) * (f1 + f2) * 2.0 * f1 * f2
}

/// `[m_lo, m_hi]`, the values of `M` for which `M`, `M + d ± d1`, `M - d ± d2`
/// all lie in `[0, 1]`.
pub fn admissible_m_range(d: f64, d1: f64, d2: f64) -> Option<(f64, f64)> {
    let lo = 0f64.max(d1.abs() - d).max(d2.abs() + d);
    let hi = 1f64.min(1.0 - d - d1.abs()).min(1.0 + d - d2.abs());
    (lo <= hi + DOMAIN_SLACK).then_some((lo, hi))
}

/// `G(d, d1, d2) = (-4 + e^{-d} x1 + e^{d} x2) · F(d, d1, d2)` with
/// `F = -4e^{-d} x1 - 4e^{d} x2 + 4e^{-2d} + 4e^{2d} + 2 x1 x2`, the third
/// leading minor of the unsliced bracket.
pub fn unsliced_third_minor(d: f64, d1: f64, d2: f64) -> Result<f64> {
    if admissible_m_range(d, d1, d2).is_none() {
        return Err(Error::Inadmissible(format!(
            "no M in [0, 1] keeps M + d ± d1 and M - d ± d2 in [0, 1] for (d, d1, d2) = ({d}, {d1}, {d2})"
        )));
    }
    Ok(unsliced_g(d, d1, d2))
}

fn unsliced_g(d: f64, d1: f64, d2: f64) -> f64 {
    let x1 = 2.0 * d1.cosh();
    let x2 = 2.0 * d2.cosh();
    let (em, ep) = ((-d).exp(), d.exp());
    let sigma = em * x1 + ep * x2;
    let f = -4.0 * em * x1 - 4.0 * ep * x2 + 4.0 * em * em + 4.0 * ep * ep + 2.0 * x1 * x2;
    (sigma - 4.0) * f
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub d: f64,
    pub d1: f64,
    pub d2: f64,
    #[serde(rename = "G")]
    pub g: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanRegion {
    /// `d ∈ (0, d_max]`, `d1 = 0`, `d2 = ½ - d`.
    Slice { d_max: f64 },
    /// `d = 0`, `(d1, d2) ∈ [0, ½]²` (G is even in `d1`, `d2`).
    Sliced,
    /// All admissible grid points with `d ∈ [0, ½]`, `d1, d2 ∈ [-½, ½]`.
    Sweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanSpec {
    pub region: ScanRegion,
    pub step: f64,
    pub threshold: f64,
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as i64;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

/// All grid points of the region with `G < -threshold`, sorted by `G`.
pub fn scan_unsliced(spec: &ScanSpec) -> Result<Vec<Witness>> {
    if !(spec.step > 0.0) || !(spec.threshold >= 0.0) {
        return Err(Error::Inadmissible(format!(
            "step {} must be positive and threshold {} nonnegative",
            spec.step, spec.threshold
        )));
    }
    let points: Vec<(f64, f64, f64)> = match spec.region {
        ScanRegion::Slice { d_max } => grid(0.0, d_max, spec.step)
            .into_iter()
            .skip(1)
            .map(|d| (d, 0.0, 0.5 - d))
            .collect(),
        ScanRegion::Sliced => {
            let g = grid(0.0, 0.5, spec.step);
            let mut pts = Vec::with_capacity(g.len() * g.len());
            for &a in &g {
                for &b in &g {
                    pts.push((0.0, a, b));
                }
            }
            pts
        }
        ScanRegion::Sweep => {
            let gd = grid(0.0, 0.5, spec.step);
            let gs = grid(-0.5, 0.5, spec.step);
            let mut pts = Vec::new();
            for &d in &gd {
                for &a in &gs {
                    for &b in &gs {
                        pts.push((d, a, b));
                    }
                }
            }
            pts
        }
    };
    let mut out: Vec<Witness> = points
        .par_iter()
        .filter(|(d, d1, d2)| admissible_m_range(*d, *d1, *d2).is_some())
        .map(|&(d, d1, d2)| Witness { d, d1, d2, g: unsliced_g(d, d1, d2) })
        .filter(|w| w.g < -spec.threshold)
        .collect();
    out.sort_by(|a, b| {
        a.g.total_cmp(&b.g)
            .then(a.d.total_cmp(&b.d))
            .then(a.d1.total_cmp(&b.d1))
            .then(a.d2.total_cmp(&b.d2))
    });
    Ok(out)
}

/// One sampled check of the sliced matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinorCheck {
    pub params: HessianParams,
    pub minors: [f64; 4],
    pub det_closed: f64,
    pub det_rel_err: f64,
    pub third_rel_err: f64,
}

/// Minors and determinant of the sliced matrix evaluated in double-double,
/// compared with the closed forms.
pub fn check_minors(hp: &HessianParams) -> Result<MinorCheck> {
    check_minors_in(hp, MinorOrder::TopLeft)
}

/// The factored third-minor reference only exists for the top-left order;
/// under `BottomRight` its error is reported as zero.
pub fn check_minors_in(hp: &HessianParams, order: MinorOrder) -> Result<MinorCheck> {
    let a: Mat4<DoubleDouble> = sliced_matrix(hp)?;
    let minors = principal_minors(&a, order).map(|x| x.to_f64());
    let closed = det_closed_form(hp)?;
    let rel = |num: f64, reference: f64, floor: f64| (num - reference).abs() / reference.abs().max(floor);
    Ok(MinorCheck {
        params: *hp,
        minors,
        det_closed: closed,
        det_rel_err: rel(minors[3], closed, DET_FLOOR),
        // the third minor carries double-double roundoff of order 1e-33 where
        // the reference vanishes
        third_rel_err: match order {
            MinorOrder::TopLeft => rel(minors[2], sliced_third_minor_factored(hp), 1e-24),
            MinorOrder::BottomRight => 0.0,
        },
    })
}

/// Relative comparisons of determinants use `max(|reference|, DET_FLOOR)`.
pub const DET_FLOOR: f64 = 1e-30;
pub const MINOR_TOL: f64 = -1e-9;
pub const DET_REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsdSummary {
    pub samples: usize,
    pub grid_points: usize,
    pub min_minors: [f64; 4],
    pub max_det_rel_err: f64,
    pub max_third_rel_err: f64,
    pub violations: Vec<MinorCheck>,
}

impl PsdSummary {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Uniform `M ∈ [0, 1]`, `d1, d2 ∈ [-δ_M, δ_M]`, `δ_M = min(M, 1 - M)`.
pub fn random_sliced_params<R: rand::Rng>(rng: &mut R) -> HessianParams {
    let m: f64 = rng.gen_range(0.0..=1.0);
    let delta = m.min(1.0 - m);
    let d1 = rng.gen_range(-1.0..=1.0) * delta;
    let d2 = rng.gen_range(-1.0..=1.0) * delta;
    HessianParams { m, d: 0.0, d1, d2 }
}

/// `{d1 = 0} ∪ {d2 = 0}` on a grid of `M` and the free parameter.
pub fn boundary_grid(n: usize) -> Vec<HessianParams> {
    let mut out = Vec::new();
    for a in 0..=n {
        let m = a as f64 / n as f64;
        let delta = m.min(1.0 - m);
        for b in 0..=n {
            let t = delta * (2.0 * b as f64 / n as f64 - 1.0);
            out.push(HessianParams { m, d: 0.0, d1: 0.0, d2: t });
            out.push(HessianParams { m, d: 0.0, d1: t, d2: 0.0 });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertifySpec {
    pub samples: usize,
    pub seed: u64,
    /// The boundary grid has `2 (n + 1)²` points.
    pub grid_n: usize,
    pub order: MinorOrder,
    /// Minors must be `≥ -minor_tol`.
    pub minor_tol: f64,
}

impl CertifySpec {
    pub fn new(samples: usize, seed: u64) -> Self {
        CertifySpec {
            samples,
            seed,
            grid_n: 200,
            order: MinorOrder::TopLeft,
            minor_tol: -MINOR_TOL,
        }
    }
}

/// Samples seeded admissible parameter sets plus the boundary grid and
/// checks the minors and the determinant identity.
pub fn certify_sliced(spec: &CertifySpec) -> PsdSummary {
    let CertifySpec { samples, seed, grid_n, order, minor_tol } = *spec;
    let mut params: Vec<HessianParams> = (0..samples as u64)
        .into_par_iter()
        .map(|k| random_sliced_params(&mut sampling::stream(seed, k)))
        .collect();
    let grid = boundary_grid(grid_n);
    let grid_points = grid.len();
    params.extend(grid);
    let checks: Vec<MinorCheck> = params
        .par_iter()
        .map(|hp| check_minors_in(hp, order).expect("generated parameters are admissible"))
        .collect();
    let mut min_minors = [f64::INFINITY; 4];
    let mut max_det: f64 = 0.0;
    let mut max_third: f64 = 0.0;
    let mut violations = Vec::new();
    for c in &checks {
        for (lo, m) in min_minors.iter_mut().zip(c.minors) {
            *lo = lo.min(m);
        }
        max_det = max_det.max(c.det_rel_err);
        max_third = max_third.max(c.third_rel_err);
        if c.minors.iter().any(|&m| m < -minor_tol) || c.det_rel_err > DET_REL_TOL {
            violations.push(*c);
        }
    }
    PsdSummary {
        samples,
        grid_points,
        min_minors,
        max_det_rel_err: max_det,
        max_third_rel_err: max_third,
        violations,
    }
}

fn child_values(u: f64, v: f64, dxu: f64, dyu: f64) -> [(f64, f64); 4] {
    [
        (u - dyu, v - dxu),
        (u + dyu, v + dxu),
        (u - dxu, v + dyu),
        (u + dxu, v - dyu),
    ]
}

/// `¼ Σ e^{M_c}|f_c|² - e^{M}|f|² - (μ/|I|) e^{M}|f|²` for one step of a
/// nonpositive sliced submartingale: both child pair means of `M` must equal
/// `M + μ/|I|`, children of `f` follow the Cauchy–Riemann rules.
pub fn laplacian_step_gap(
    m: f64,
    mu_over_len: f64,
    child_ms: [f64; 4],
    u: f64,
    v: f64,
    dxu: f64,
    dyu: f64,
) -> Result<f64> {
    let target = m + mu_over_len;
    let scale = m.abs().max(mu_over_len).max(1.0);
    let ym = (child_ms[0] + child_ms[1]) / 2.0;
    let xm = (child_ms[2] + child_ms[3]) / 2.0;
    if (ym - target).abs() > 1e-12 * scale || (xm - target).abs() > 1e-12 * scale {
        return Err(Error::InconsistentChildren(format!(
            "pair means ({ym}, {xm}) differ from M + μ/|I| = {target}"
        )));
    }
    if !(mu_over_len >= 0.0) || m > DOMAIN_SLACK || child_ms.iter().any(|&c| c > DOMAIN_SLACK) {
        return Err(Error::InconsistentChildren(format!(
            "need μ ≥ 0 and M ≤ 0, got μ/|I| = {mu_over_len}, M = {m}, children {child_ms:?}"
        )));
    }
    let kids = child_values(u, v, dxu, dyu);
    let mean = kids
        .iter()
        .zip(child_ms)
        .map(|(&(a, b), c)| c.exp() * (a * a + b * b))
        .sum::<f64>()
        / 4.0;
    let here = m.exp() * (u * u + v * v);
    Ok(mean - here - mu_over_len * here)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Telescoped {
    /// `Σ_I |I| · gap_I` over every 4-adic node, leaves included.
    pub gap_sum: f64,
    /// `|R| e^{M_R} |f_R|²`.
    pub boundary: f64,
    pub min_gap: f64,
}

impl Telescoped {
    /// Equals `‖f‖² - Σ μ_J e^{M_J} |f_J|²`.
    pub fn slack(&self) -> f64 {
        self.gap_sum + self.boundary
    }
}

/// Runs `laplacian_step_gap` over the whole tree with `M_I = -S(I)/|I|`.
/// Leaves step to children with `M = 0` and no increments.
pub fn telescoped_uchiyama(mu: &DiscreteMeasure, f: &DyadicAnalytic) -> Result<Telescoped> {
    if mu.root() != f.root() || mu.depth() != f.depth() {
        return Err(Error::Mismatch(format!(
            "measure on {} depth {} vs function on {} depth {}",
            mu.root(),
            mu.depth(),
            f.root(),
            f.depth()
        )));
    }
    let m = pair_submartingale(mu)?;
    let vals = m.values();
    let dense = mu.dense();
    let (un, vn) = (f.u().nodes(), f.v().nodes());
    let leaf_h = vals.len() - 1;
    let mut gap_sum = 0.0;
    let mut min_gap = f64::INFINITY;
    for (h, lvl) in vals.iter().enumerate() {
        let k = 2 * h;
        let len = mu.root().length() / 4f64.powi(h as i32);
        for (j, &mi) in lvl.iter().enumerate() {
            let muj = dense[h][j] / len;
            let (u, v) = (un[k][j], vn[k][j]);
            let (kids, dxu, dyu) = if h == leaf_h {
                ([0.0; 4], 0.0, 0.0)
            } else {
                let g = &vals[h + 1];
                let (dx, dy) = f.u().increments_at(k, j);
                ([g[4 * j], g[4 * j + 1], g[4 * j + 2], g[4 * j + 3]], dx, dy)
            };
            let gap = laplacian_step_gap(mi, muj, kids, u, v, dxu, dyu)?;
            min_gap = min_gap.min(gap);
            gap_sum += len * gap;
        }
    }
    let (r, i) = (un[0][0], vn[0][0]);
    Ok(Telescoped {
        gap_sum,
        boundary: mu.root().length() * vals[0][0].exp() * (r * r + i * i),
        min_gap,
    })
}
