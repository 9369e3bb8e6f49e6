//! Sliced dyadic martingales, the conjugation operator `S₀`, dyadic
//! Cauchy–Riemann pairs and the analytic projection.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Dyadic;
use crate::interval::DyadicInterval;
use crate::tree::{HaarCoefficients, PiecewiseConstant, TreeFile};

/// How structural residuals (slicing, Cauchy–Riemann) are judged. Residuals
/// themselves are always computed exactly from the `f64` leaf data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tolerance {
    Exact,
    Absolute(f64),
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::Absolute(1e-12)
    }
}

impl Tolerance {
    pub fn accepts(&self, residual: &Dyadic) -> bool {
        match self {
            Tolerance::Exact => residual.is_zero(),
            Tolerance::Absolute(t) => residual.to_f64() <= *t,
        }
    }
}

/// Largest slicing defect `|<u>_{I^y} - <u>_{I^x}|` over the 4-adic nodes
/// above the leaves, with the first node attaining a nonzero maximum.
pub fn slicing_residual(tree: &PiecewiseConstant) -> (Dyadic, Option<DyadicInterval>) {
    let nodes = tree.node_values_exact();
    let mut worst = Dyadic::zero();
    let mut at = None;
    for k in (0..tree.depth() as usize).step_by(2) {
        for j in 0..1usize << k {
            let r = (&nodes[k + 1][2 * j] - &nodes[k + 1][2 * j + 1]).abs();
            if r > worst {
                worst = r;
                at = Some(tree.node(k as u32, j));
            }
        }
    }
    (worst, at)
}

/// A martingale on the 4-adic tree whose increments vanish on even steps.
#[derive(Clone, Debug, PartialEq)]
pub struct SlicedMartingale {
    tree: PiecewiseConstant,
    nodes: Vec<Vec<f64>>,
}

fn check_shape(tree: &PiecewiseConstant) -> Result<()> {
    if !tree.depth().is_multiple_of(2) {
        return Err(Error::OddDepth(tree.depth()));
    }
    if !tree.root().is_four_adic() {
        return Err(Error::OddParity {
            interval: tree.root(),
        });
    }
    Ok(())
}

impl SlicedMartingale {
    /// Validates leaves on the unit base with the default tolerance.
    pub fn from_leaves(leaves: Vec<f64>, depth: u32) -> Result<Self> {
        Self::from_tree(PiecewiseConstant::unit(depth, leaves)?, Tolerance::default())
    }

    pub fn from_tree(tree: PiecewiseConstant, tol: Tolerance) -> Result<Self> {
        check_shape(&tree)?;
        let nodes = tree.node_values_exact();
        for k in (0..tree.depth() as usize).step_by(2) {
            for j in 0..1usize << k {
                let r = (&nodes[k + 1][2 * j] - &nodes[k + 1][2 * j + 1]).abs();
                if !tol.accepts(&r) {
                    return Err(Error::SlicingViolation {
                        interval: tree.node(k as u32, j),
                        residual: r.to_f64(),
                    });
                }
            }
        }
        let nodes = nodes
            .iter()
            .map(|l| l.iter().map(Dyadic::to_f64).collect())
            .collect();
        Ok(SlicedMartingale { tree, nodes })
    }

    /// Skips the slicing check; used for outputs of exact constructions.
    pub(crate) fn from_tree_unchecked(tree: PiecewiseConstant) -> Self {
        let nodes = tree.node_values();
        SlicedMartingale { tree, nodes }
    }

    pub fn constant(root: DyadicInterval, depth: u32, value: f64) -> Result<Self> {
        let tree = PiecewiseConstant::constant(root, depth, value);
        check_shape(&tree)?;
        Ok(Self::from_tree_unchecked(tree))
    }

    pub fn tree(&self) -> &PiecewiseConstant {
        &self.tree
    }

    pub fn root(&self) -> DyadicInterval {
        self.tree.root()
    }

    pub fn depth(&self) -> u32 {
        self.tree.depth()
    }

    pub fn leaves(&self) -> &[f64] {
        self.tree.leaves()
    }

    /// Node averages, `nodes()[k][j]` at relative level `k`.
    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn root_value(&self) -> f64 {
        self.nodes[0][0]
    }

    pub fn value(&self, i: &DyadicInterval) -> Result<f64> {
        let (k, j) = self.tree.locate(i)?;
        Ok(self.nodes[k as usize][j])
    }

    /// `(Δ^x u, Δ^y u)` at the node with relative level `k` (even, `< depth`).
    pub fn increments_at(&self, k: usize, j: usize) -> (f64, f64) {
        let g = &self.nodes[k + 2];
        let dx = (g[4 * j + 3] - g[4 * j + 2]) / 2.0;
        let dy = (g[4 * j + 1] - g[4 * j]) / 2.0;
        (dx, dy)
    }

    pub fn increments(&self, i: &DyadicInterval) -> Result<(f64, f64)> {
        if !i.is_four_adic() {
            return Err(Error::OddParity { interval: *i });
        }
        let (k, j) = self.tree.locate(i)?;
        if k + 2 > self.depth() {
            return Err(Error::LevelTooDeep {
                interval: *i,
                max_level: self.tree.leaf_level() - 2,
            });
        }
        Ok(self.increments_at(k as usize, j))
    }

    /// `S₀`: the conjugate with vanishing root value, built from
    /// `Δ^x v = -Δ^y u`, `Δ^y v = Δ^x u` top-down in exact arithmetic.
    pub fn s0(&self) -> SlicedMartingale {
        let exact = self.tree.node_values_exact();
        let mut v = vec![Dyadic::zero()];
        for k in (0..self.depth() as usize).step_by(2) {
            let g = &exact[k + 2];
            let mut next = Vec::with_capacity(v.len() * 4);
            for (j, vi) in v.iter().enumerate() {
                let dxu = (&g[4 * j + 3] - &g[4 * j + 2]).half();
                let dyu = (&g[4 * j + 1] - &g[4 * j]).half();
                next.push(vi - &dxu);
                next.push(vi + &dxu);
                next.push(vi + &dyu);
                next.push(vi - &dyu);
            }
            v = next;
        }
        let leaves = v.iter().map(Dyadic::to_f64).collect();
        let tree = PiecewiseConstant::new(self.root(), self.depth(), leaves)
            .expect("same shape as the input");
        Self::from_tree_unchecked(tree)
    }

    /// `u - <u>_R`.
    pub fn centered(&self) -> SlicedMartingale {
        let m = self.root_value();
        Self::from_tree_unchecked(self.tree.map(|x| x - m))
    }

    /// `∫_R u²`.
    pub fn l2_norm2(&self) -> f64 {
        self.tree.l2_norm2()
    }

    pub fn scaled(&self, t: f64) -> SlicedMartingale {
        Self::from_tree_unchecked(self.tree.map(|x| t * x))
    }
}

/// Largest Cauchy–Riemann defect `max(|Δ^x u - Δ^y v|, |Δ^y u + Δ^x v|)`,
/// computed exactly.
pub fn cr_residual_exact(u: &SlicedMartingale, v: &SlicedMartingale) -> Result<Dyadic> {
    u.tree.check_same_shape(&v.tree)?;
    let eu = u.tree.node_values_exact();
    let ev = v.tree.node_values_exact();
    let mut worst = Dyadic::zero();
    for k in (0..u.depth() as usize).step_by(2) {
        let (gu, gv) = (&eu[k + 2], &ev[k + 2]);
        for j in 0..1usize << k {
            let dxu = (&gu[4 * j + 3] - &gu[4 * j + 2]).half();
            let dyu = (&gu[4 * j + 1] - &gu[4 * j]).half();
            let dxv = (&gv[4 * j + 3] - &gv[4 * j + 2]).half();
            let dyv = (&gv[4 * j + 1] - &gv[4 * j]).half();
            let a = (&dxu - &dyv).abs();
            let b = (&dyu + &dxv).abs();
            worst = worst.max(a).max(b);
        }
    }
    Ok(worst)
}

pub fn cr_residual(u: &SlicedMartingale, v: &SlicedMartingale) -> Result<f64> {
    Ok(cr_residual_exact(u, v)?.to_f64())
}

/// `f = u + iv` with `u, v` sliced and Cauchy–Riemann coupled.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicAnalytic {
    u: SlicedMartingale,
    v: SlicedMartingale,
}

impl DyadicAnalytic {
    pub fn new(u: SlicedMartingale, v: SlicedMartingale, tol: Tolerance) -> Result<Self> {
        let r = cr_residual_exact(&u, &v)?;
        if !tol.accepts(&r) {
            return Err(Error::CauchyRiemann {
                residual: r.to_f64(),
            });
        }
        Ok(DyadicAnalytic { u, v })
    }

    pub(crate) fn new_unchecked(u: SlicedMartingale, v: SlicedMartingale) -> Self {
        debug_assert_eq!(u.root(), v.root());
        DyadicAnalytic { u, v }
    }

    pub fn from_trees(u: PiecewiseConstant, v: PiecewiseConstant, tol: Tolerance) -> Result<Self> {
        Self::new(
            SlicedMartingale::from_tree(u, tol)?,
            SlicedMartingale::from_tree(v, tol)?,
            tol,
        )
    }

    /// `(u, S₀u)`, normalized so that `v_R = 0`.
    pub fn conjugate(u: &SlicedMartingale) -> Self {
        DyadicAnalytic {
            v: u.s0(),
            u: u.clone(),
        }
    }

    pub fn zero(root: DyadicInterval, depth: u32) -> Result<Self> {
        let z = SlicedMartingale::constant(root, depth, 0.0)?;
        Ok(DyadicAnalytic { u: z.clone(), v: z })
    }

    pub fn constant(root: DyadicInterval, depth: u32, r: f64, i: f64) -> Result<Self> {
        Ok(DyadicAnalytic {
            u: SlicedMartingale::constant(root, depth, r)?,
            v: SlicedMartingale::constant(root, depth, i)?,
        })
    }

    pub fn u(&self) -> &SlicedMartingale {
        &self.u
    }

    pub fn v(&self) -> &SlicedMartingale {
        &self.v
    }

    pub fn root(&self) -> DyadicInterval {
        self.u.root()
    }

    pub fn depth(&self) -> u32 {
        self.u.depth()
    }

    pub fn cr_residual(&self) -> f64 {
        cr_residual(&self.u, &self.v).expect("validated shapes")
    }

    pub fn is_normalized(&self) -> bool {
        self.v.root_value() == 0.0
    }

    /// `(u_I, v_I)`.
    pub fn value(&self, i: &DyadicInterval) -> Result<Complex64> {
        Ok(Complex64::new(self.u.value(i)?, self.v.value(i)?))
    }

    /// `‖f‖² = ∫_R (u² + v²)`.
    pub fn h2_norm2(&self) -> f64 {
        self.u.l2_norm2() + self.v.l2_norm2()
    }

    /// `∫_R f conj(g)`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        let (a, b) = (self.u.tree(), self.v.tree());
        let (c, d) = (other.u.tree(), other.v.tree());
        let re = a.inner(c)? + b.inner(d)?;
        let im = b.inner(c)? - a.inner(d)?;
        Ok(Complex64::new(re, im))
    }

    /// Applies the rotation `O_θ` to every value pair `(u, v)`.
    pub fn rotate(&self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let u = self
            .u
            .tree
            .zip_with(&self.v.tree, |a, b| c * a - s * b)
            .expect("same shape");
        let v = self
            .u
            .tree
            .zip_with(&self.v.tree, |a, b| s * a + c * b)
            .expect("same shape");
        DyadicAnalytic {
            u: SlicedMartingale::from_tree_unchecked(u),
            v: SlicedMartingale::from_tree_unchecked(v),
        }
    }

    pub fn scaled(&self, t: f64) -> Self {
        DyadicAnalytic {
            u: self.u.scaled(t),
            v: self.v.scaled(t),
        }
    }

    pub fn to_file(&self) -> AnalyticFile {
        AnalyticFile {
            u: TreeFile::from_tree(self.u.tree()),
            v: TreeFile::from_tree(self.v.tree()),
        }
    }
}

/// `{"u": tree, "v": tree}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalyticFile {
    pub u: TreeFile,
    pub v: TreeFile,
}

impl AnalyticFile {
    pub fn into_analytic(self, tol: Tolerance) -> Result<DyadicAnalytic> {
        DyadicAnalytic::from_trees(self.u.into_tree()?, self.v.into_tree()?, tol)
    }
}

/// `P⁺_dy g` for `g = g_re + i g_im`: drops the even-interval Haar terms, then
/// maps `c_K ↦ ½ c_K + (i/2) σ(K') c_{K'}` on odd `K`; the root average passes
/// through.
pub fn analytic_projection(g_re: &PiecewiseConstant, g_im: &PiecewiseConstant) -> Result<DyadicAnalytic> {
    g_re.check_same_shape(g_im)?;
    check_shape(g_re)?;
    let a = g_re.haar();
    let b = g_im.haar();
    let mut re = a.clone();
    let mut im = b.clone();
    for k in 0..a.coeffs.len() {
        for j in 0..a.coeffs[k].len() {
            if k % 2 == 0 {
                re.coeffs[k][j] = 0.0;
                im.coeffs[k][j] = 0.0;
                continue;
            }
            let c = Complex64::new(a.coeffs[k][j], b.coeffs[k][j]);
            let sib = j ^ 1;
            let c_sib = Complex64::new(a.coeffs[k][sib], b.coeffs[k][sib]);
            // sigma of the sibling: +1 when the sibling is a right half
            let sigma_sib = if sib % 2 == 1 { 1.0 } else { -1.0 };
            let out = 0.5 * c + Complex64::i() * (0.5 * sigma_sib) * c_sib;
            re.coeffs[k][j] = out.re;
            im.coeffs[k][j] = out.im;
        }
    }
    Ok(DyadicAnalytic::new_unchecked(
        SlicedMartingale::from_tree_unchecked(re.reconstruct()),
        SlicedMartingale::from_tree_unchecked(im.reconstruct()),
    ))
}

/// Haar-side version of `S₀`, kept for cross-checking the increment route.
pub fn s0_via_haar(u: &PiecewiseConstant) -> PiecewiseConstant {
    let h = u.haar();
    let mut out = HaarCoefficients {
        root: h.root,
        root_average: 0.0,
        coeffs: h.coeffs.iter().map(|l| vec![0.0; l.len()]).collect(),
    };
    for k in (1..h.coeffs.len()).step_by(2) {
        for j in (0..h.coeffs[k].len()).step_by(2) {
            // h_{I+} -> h_{I-}, h_{I-} -> -h_{I+}
            let (cm, cp) = (h.coeffs[k][j], h.coeffs[k][j + 1]);
            out.coeffs[k][j] = cp;
            out.coeffs[k][j + 1] = -cm;
        }
    }
    out.reconstruct()
}
