//! Nonnegative measures on the 4-adic tree, their paired sliced
//! super/submartingales, packing intensity and the embedding checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Dyadic;
use crate::interval::{Base, DyadicInterval};
use crate::martingale::DyadicAnalytic;

/// Relative scale used when judging balance and slicing of float data.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Masses `μ_I ≥ 0` on the 4-adic intervals of the tree below `root`, down to
/// relative level `depth`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    root: DyadicInterval,
    depth: u32,
    masses: BTreeMap<DyadicInterval, f64>,
    /// Dense masses and subtree sums, indexed `[k / 2][offset]`.
    dense: Vec<Vec<f64>>,
    sums: Vec<Vec<f64>>,
    balance: f64,
}

fn offset(root: &DyadicInterval, i: &DyadicInterval) -> (u32, usize) {
    let rel = (i.level - root.level) as u32;
    (rel, (i.index - (root.index << rel)) as usize)
}

impl DiscreteMeasure {
    pub fn new(
        root: DyadicInterval,
        depth: u32,
        masses: impl IntoIterator<Item = (DyadicInterval, f64)>,
    ) -> Result<Self> {
        if !depth.is_multiple_of(2) {
            return Err(Error::OddDepth(depth));
        }
        if !root.is_four_adic() {
            return Err(Error::OddParity { interval: root });
        }
        if depth > 24 {
            return Err(Error::DepthCap { depth, cap: 24 });
        }
        let mut map = BTreeMap::new();
        for (i, m) in masses {
            if !i.is_four_adic() {
                return Err(Error::OddParity { interval: i });
            }
            if !root.contains(&i) {
                return Err(Error::OutOfTree { interval: i, root });
            }
            if i.level - root.level > depth as i32 {
                return Err(Error::LevelTooDeep {
                    interval: i,
                    max_level: root.level + depth as i32,
                });
            }
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::NegativeMass { interval: i, mass: m });
            }
            if m > 0.0 {
                *map.entry(i).or_insert(0.0) += m;
            }
        }
        let mut dense: Vec<Vec<f64>> = (0..=depth).step_by(2).map(|k| vec![0.0; 1 << k]).collect();
        for (i, &m) in &map {
            let (k, j) = offset(&root, i);
            dense[k as usize / 2][j] = m;
        }
        let (sums, balance) = subtree_sums(root, &dense);
        Ok(DiscreteMeasure {
            root,
            depth,
            masses: map,
            dense,
            sums,
            balance,
        })
    }

    pub fn zero(root: DyadicInterval, depth: u32) -> Result<Self> {
        Self::new(root, depth, [])
    }

    pub fn root(&self) -> DyadicInterval {
        self.root
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Nonzero masses in interval order.
    pub fn masses(&self) -> &BTreeMap<DyadicInterval, f64> {
        &self.masses
    }

    pub fn mass(&self, i: &DyadicInterval) -> f64 {
        self.masses.get(i).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.sums[0][0]
    }

    /// `Σ_{J ∈ D⁴(I)} μ_J` for a 4-adic `I` in the tree.
    pub fn subtree_sum(&self, i: &DyadicInterval) -> Result<f64> {
        self.check_node(i)?;
        let (k, j) = offset(&self.root, i);
        Ok(self.sums[k as usize / 2][j])
    }

    fn check_node(&self, i: &DyadicInterval) -> Result<()> {
        if !i.is_four_adic() {
            return Err(Error::OddParity { interval: *i });
        }
        if !self.root.contains(i) {
            return Err(Error::OutOfTree {
                interval: *i,
                root: self.root,
            });
        }
        if i.level - self.root.level > self.depth as i32 {
            return Err(Error::LevelTooDeep {
                interval: *i,
                max_level: self.root.level + self.depth as i32,
            });
        }
        Ok(())
    }

    /// Dense masses `[k / 2][offset]`.
    pub fn dense(&self) -> &[Vec<f64>] {
        &self.dense
    }

    /// Dense subtree sums `[k / 2][offset]`.
    pub fn dense_sums(&self) -> &[Vec<f64>] {
        &self.sums
    }

    /// Largest defect in the balance identity
    /// `S(I^x)/|I^x| = S(I^y)/|I^y| = (S(I) - μ_I)/|I|`, i.e. `|a - b| / 2`
    /// for the two normalized half sums `a, b`.
    pub fn balance_residual(&self) -> f64 {
        self.balance
    }

    pub fn is_balanced(&self, tol: f64) -> bool {
        self.balance <= tol * self.packing_intensity().max(1.0)
    }

    /// `sup_I (1/|I|) Σ_{J ∈ D⁴(I)} μ_J` over the 4-adic nodes of the tree.
    pub fn packing_intensity(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (h, lvl) in self.sums.iter().enumerate() {
            let len = self.root.length() / 4f64.powi(h as i32);
            for s in lvl {
                best = best.max(s / len);
            }
        }
        best
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.root, self.depth, self.masses.iter().map(|(i, m)| (*i, m * t)))
    }

    pub fn to_file(&self) -> MeasureFile {
        MeasureFile {
            masses: self
                .masses
                .iter()
                .map(|(i, m)| MassEntry {
                    interval: i.id(),
                    mass: *m,
                })
                .collect(),
            balanced: self.is_balanced(DEFAULT_TOL),
            base: Some(self.root.base),
            depth: Some(self.depth),
            root: Some(self.root.id()),
            height: None,
        }
    }
}

fn subtree_sums(root: DyadicInterval, dense: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let h = dense.len();
    let mut exact: Vec<Vec<Dyadic>> = vec![Vec::new(); h];
    exact[h - 1] = dense[h - 1].iter().map(|&m| Dyadic::from_f64(m)).collect();
    let mut worst = Dyadic::zero();
    for lvl in (0..h - 1).rev() {
        let below = &exact[lvl + 1];
        let mut cur = Vec::with_capacity(dense[lvl].len());
        // 1/|I| = 2^{level}; 1/|I^x| = 2^{level+1}
        let half_scale = root.level + 2 * lvl as i32 + 1;
        for (j, &m) in dense[lvl].iter().enumerate() {
            let y = &below[4 * j] + &below[4 * j + 1];
            let x = &below[4 * j + 2] + &below[4 * j + 3];
            let r = (&x - &y).abs().mul_pow2(half_scale as i64 - 1);
            worst = worst.max(r);
            cur.push(&(&x + &y) + &Dyadic::from_f64(m));
        }
        exact[lvl] = cur;
    }
    let sums = exact.iter().map(|l| l.iter().map(Dyadic::to_f64).collect()).collect();
    (sums, worst.to_f64())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MartingaleSign {
    /// `M_I ≥ pair means`, `M ≥ 0`.
    SupermartingaleNonneg,
    /// `M_I ≤ pair means`, `M ≤ 0`.
    SubmartingaleNonpos,
}

/// Values `M_I` on every 4-adic node, `values[k / 2][offset]`, with equal
/// x- and y-pair means at every node.
#[derive(Clone, Debug, PartialEq)]
pub struct SlicedSuperMartingale {
    root: DyadicInterval,
    depth: u32,
    sign: MartingaleSign,
    values: Vec<Vec<f64>>,
}

impl SlicedSuperMartingale {
    pub fn new(root: DyadicInterval, depth: u32, sign: MartingaleSign, values: Vec<Vec<f64>>) -> Result<Self> {
        if !depth.is_multiple_of(2) {
            return Err(Error::OddDepth(depth));
        }
        let levels = depth as usize / 2 + 1;
        if values.len() != levels || values.iter().enumerate().any(|(h, l)| l.len() != 1 << (2 * h)) {
            return Err(Error::Mismatch(format!(
                "expected {levels} levels of 4^h values for depth {depth}"
            )));
        }
        let m = SlicedSuperMartingale {
            root,
            depth,
            sign,
            values,
        };
        m.validate(DEFAULT_TOL)?;
        Ok(m)
    }

    fn node(&self, h: usize, j: usize) -> DyadicInterval {
        DyadicInterval {
            base: self.root.base,
            level: self.root.level + 2 * h as i32,
            index: (self.root.index << (2 * h)) + j as i64,
        }
    }

    fn validate(&self, tol: f64) -> Result<()> {
        let scale = self.sup_norm().max(1.0);
        let bad = |h, j, reason: String| Error::InvalidSupermartingale {
            interval: self.node(h, j),
            reason,
        };
        for (h, lvl) in self.values.iter().enumerate() {
            for (j, &m) in lvl.iter().enumerate() {
                if !m.is_finite() {
                    return Err(bad(h, j, format!("non-finite value {m}")));
                }
                let sign_ok = match self.sign {
                    MartingaleSign::SupermartingaleNonneg => m >= -tol * scale,
                    MartingaleSign::SubmartingaleNonpos => m <= tol * scale,
                };
                if !sign_ok {
                    return Err(bad(h, j, format!("value {m} has the wrong sign")));
                }
                let (y, x) = self.pair_means(h, j).unwrap_or((0.0, 0.0));
                if (y - x).abs() > tol * scale {
                    return Err(bad(h, j, format!("pair means differ: y {y} vs x {x}")));
                }
                let defect = match self.sign {
                    MartingaleSign::SupermartingaleNonneg => m - y,
                    MartingaleSign::SubmartingaleNonpos => y - m,
                };
                if defect < -tol * scale {
                    return Err(bad(h, j, format!("value {m} on the wrong side of pair mean {y}")));
                }
            }
        }
        Ok(())
    }

    /// `(y-pair mean, x-pair mean)`, or `None` at the leaves.
    fn pair_means(&self, h: usize, j: usize) -> Option<(f64, f64)> {
        let g = self.values.get(h + 1)?;
        Some((
            (g[4 * j] + g[4 * j + 1]) / 2.0,
            (g[4 * j + 2] + g[4 * j + 3]) / 2.0,
        ))
    }

    pub fn root(&self) -> DyadicInterval {
        self.root
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn sign(&self) -> MartingaleSign {
        self.sign
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn get(&self, i: &DyadicInterval) -> Result<f64> {
        if !i.is_four_adic() {
            return Err(Error::OddParity { interval: *i });
        }
        if !self.root.contains(i) || i.level - self.root.level > self.depth as i32 {
            return Err(Error::OutOfTree {
                interval: *i,
                root: self.root,
            });
        }
        let (k, j) = offset(&self.root, i);
        Ok(self.values[k as usize / 2][j])
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().fold(0.0_f64, |a, &m| a.max(m.abs()))
    }
}

/// Nonnegative supermartingale `M_I = S(I)/|I|`.
pub fn pair_supermartingale(mu: &DiscreteMeasure) -> Result<SlicedSuperMartingale> {
    pair(mu, MartingaleSign::SupermartingaleNonneg)
}

/// Nonpositive submartingale `M_I = -S(I)/|I|`.
pub fn pair_submartingale(mu: &DiscreteMeasure) -> Result<SlicedSuperMartingale> {
    pair(mu, MartingaleSign::SubmartingaleNonpos)
}

fn pair(mu: &DiscreteMeasure, sign: MartingaleSign) -> Result<SlicedSuperMartingale> {
    if !mu.is_balanced(DEFAULT_TOL) {
        return Err(Error::Unbalanced {
            residual: mu.balance_residual(),
        });
    }
    let s = match sign {
        MartingaleSign::SupermartingaleNonneg => 1.0,
        MartingaleSign::SubmartingaleNonpos => -1.0,
    };
    let values = mu
        .sums
        .iter()
        .enumerate()
        .map(|(h, lvl)| {
            let inv_len = 4f64.powi(h as i32) / mu.root.length();
            lvl.iter().map(|x| s * x * inv_len).collect()
        })
        .collect();
    Ok(SlicedSuperMartingale {
        root: mu.root,
        depth: mu.depth,
        sign,
        values,
    })
}

/// `μ_I = |I| (M_I - pair mean)` (or the submartingale analog); at the
/// leaves the children are taken as 0.
pub fn measure_from_supermartingale(m: &SlicedSuperMartingale) -> Result<DiscreteMeasure> {
    m.validate(DEFAULT_TOL)?;
    let mut masses = Vec::new();
    for (h, lvl) in m.values.iter().enumerate() {
        for (j, &v) in lvl.iter().enumerate() {
            let i = m.node(h, j);
            let mean = m.pair_means(h, j).map_or(0.0, |p| p.0);
            let d = Dyadic::from_f64(v) - Dyadic::from_f64(mean);
            let d = match m.sign {
                MartingaleSign::SupermartingaleNonneg => d,
                MartingaleSign::SubmartingaleNonpos => -d,
            };
            let mass = d.to_f64().max(0.0) * i.length();
            masses.push((i, mass));
        }
    }
    DiscreteMeasure::new(m.root, m.depth, masses)
}

fn check_compatible(mu: &DiscreteMeasure, f: &DyadicAnalytic) -> Result<()> {
    if mu.root != f.root() || mu.depth > f.depth() {
        return Err(Error::Mismatch(format!(
            "measure on {} depth {} vs function on {} depth {}",
            mu.root,
            mu.depth,
            f.root(),
            f.depth()
        )));
    }
    Ok(())
}

fn weighted_sum(mu: &DiscreteMeasure, f: &DyadicAnalytic, weight: impl Fn(usize, usize) -> f64) -> f64 {
    let (u, v) = (f.u().nodes(), f.v().nodes());
    let mut total = 0.0;
    for (h, lvl) in mu.dense.iter().enumerate() {
        for (j, &m) in lvl.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let (a, b) = (u[2 * h][j], v[2 * h][j]);
            total += m * weight(h, j) * (a * a + b * b);
        }
    }
    total
}

/// `Σ_I μ_I (u_I² + v_I²)`.
pub fn embedding_sum(mu: &DiscreteMeasure, f: &DyadicAnalytic) -> Result<f64> {
    check_compatible(mu, f)?;
    Ok(weighted_sum(mu, f, |_, _| 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EmbeddingCheck {
    pub embedding: f64,
    pub packing: f64,
    pub norm2: f64,
    /// `e C(μ) ‖f‖² - Σ μ_I |f_I|²`
    pub slack: f64,
}

impl EmbeddingCheck {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.slack >= -rel_tol * (std::f64::consts::E * self.packing * self.norm2).max(f64::MIN_POSITIVE)
    }
}

/// Embedding inequality with constant `e`.
pub fn check_embedding_e(mu: &DiscreteMeasure, f: &DyadicAnalytic) -> Result<EmbeddingCheck> {
    check_compatible(mu, f)?;
    if !mu.is_balanced(DEFAULT_TOL) {
        return Err(Error::Unbalanced {
            residual: mu.balance_residual(),
        });
    }
    let embedding = embedding_sum(mu, f)?;
    let packing = mu.packing_intensity();
    let norm2 = f.h2_norm2();
    Ok(EmbeddingCheck {
        embedding,
        packing,
        norm2,
        slack: std::f64::consts::E * packing * norm2 - embedding,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UchiyamaCheck {
    /// `Σ_J μ_J e^{M_J} (u_J² + v_J²)` with `M_J = -S(J)/|J|`.
    pub weighted: f64,
    pub norm2: f64,
    pub slack: f64,
}

/// Weighted embedding `‖f‖² ≥ Σ μ_J e^{M_J} |f_J|²`; no bound on `μ` needed.
pub fn uchiyama_weighted_check(mu: &DiscreteMeasure, f: &DyadicAnalytic) -> Result<UchiyamaCheck> {
    check_compatible(mu, f)?;
    let m = pair_submartingale(mu)?;
    let weighted = weighted_sum(mu, f, |h, j| m.values[h][j].exp());
    let norm2 = f.h2_norm2();
    Ok(UchiyamaCheck {
        weighted,
        norm2,
        slack: norm2 - weighted,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MassEntry {
    pub interval: String,
    pub mass: f64,
}

/// `{"masses": [{"interval", "mass"}], "balanced"}`; the tree defaults to the
/// unit interval with depth equal to the deepest listed mass.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureFile {
    pub masses: Vec<MassEntry>,
    #[serde(default)]
    pub balanced: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Base>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
}

impl MeasureFile {
    /// Parses and, when `balanced` is set, verifies the balance identity.
    pub fn into_measure(self) -> Result<DiscreteMeasure> {
        let base = self.base.unwrap_or(Base::Unit);
        let root = match (&self.root, base, self.height) {
            (Some(id), _, _) => DyadicInterval::parse_id(id, base)?,
            (None, Base::RealLine, Some(t)) => DyadicInterval::real(-2 * t as i32, 0)?,
            (None, Base::RealLine, None) => DyadicInterval::real(0, 0)?,
            (None, Base::Unit, _) => DyadicInterval::unit_root(),
        };
        let masses = self
            .masses
            .iter()
            .map(|e| Ok((DyadicInterval::parse_id(&e.interval, base)?, e.mass)))
            .collect::<Result<Vec<_>>>()?;
        let depth = match self.depth {
            Some(d) => d,
            None => masses
                .iter()
                .map(|(i, _)| (i.level - root.level).max(0) as u32)
                .max()
                .unwrap_or(0),
        };
        let depth = depth + depth % 2;
        let mu = DiscreteMeasure::new(root, depth, masses)?;
        if self.balanced && !mu.is_balanced(DEFAULT_TOL) {
            return Err(Error::Unbalanced {
                residual: mu.balance_residual(),
            });
        }
        Ok(mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingale::SlicedMartingale;
    use std::f64::consts::E;

    fn unit(l: i32, n: i64) -> DyadicInterval {
        DyadicInterval::unit(l, n).unwrap()
    }

    fn root() -> DyadicInterval {
        DyadicInterval::unit_root()
    }

    fn example_f() -> DyadicAnalytic {
        DyadicAnalytic::conjugate(&SlicedMartingale::from_leaves(vec![0.0, 2.0, 1.0, 1.0], 2).unwrap())
    }

    #[test]
    fn balance_examples() {
        let single = DiscreteMeasure::new(root(), 2, [(root(), 0.7)]).unwrap();
        assert_eq!(single.balance_residual(), 0.0);
        let uniform = DiscreteMeasure::new(root(), 2, (0..4).map(|n| (unit(2, n), 0.25))).unwrap();
        assert_eq!(uniform.balance_residual(), 0.0);
        // all mass in the x half: normalized half sums 2 and 0, identity value 1
        let lopsided = DiscreteMeasure::new(root(), 2, [(unit(2, 2), 0.5), (unit(2, 3), 0.5)]).unwrap();
        assert_eq!(lopsided.balance_residual(), 1.0);
    }

    #[test]
    fn rejects_bad_masses() {
        assert!(matches!(
            DiscreteMeasure::new(root(), 2, [(unit(1, 0), 1.0)]),
            Err(Error::OddParity { .. })
        ));
        assert!(matches!(
            DiscreteMeasure::new(root(), 2, [(unit(2, 0), -1.0)]),
            Err(Error::NegativeMass { .. })
        ));
        assert!(matches!(
            DiscreteMeasure::new(root(), 2, [(unit(4, 0), 1.0)]),
            Err(Error::LevelTooDeep { .. })
        ));
    }

    #[test]
    fn pairing_examples() {
        let mu = DiscreteMeasure::new(root(), 2, [(root(), 1.0)]).unwrap();
        let m = pair_supermartingale(&mu).unwrap();
        assert_eq!(m.values(), &[vec![1.0], vec![0.0; 4]]);
        assert_eq!(measure_from_supermartingale(&m).unwrap(), mu);
        let zero = DiscreteMeasure::zero(root(), 2).unwrap();
        assert!(pair_supermartingale(&zero).unwrap().values().iter().flatten().all(|&x| x == 0.0));
        let lopsided = DiscreteMeasure::new(root(), 2, [(unit(2, 2), 0.5), (unit(2, 3), 0.5)]).unwrap();
        assert!(matches!(pair_supermartingale(&lopsided), Err(Error::Unbalanced { .. })));
    }

    #[test]
    fn measure_from_supermartingale_examples() {
        let c = SlicedSuperMartingale::new(
            root(),
            2,
            MartingaleSign::SupermartingaleNonneg,
            vec![vec![0.5], vec![0.5; 4]],
        )
        .unwrap();
        // constant on the tree: only the leaf closure carries mass
        let mu = measure_from_supermartingale(&c).unwrap();
        assert_eq!(mu.mass(&root()), 0.0);
        let not_sliced = SlicedSuperMartingale::new(
            root(),
            2,
            MartingaleSign::SupermartingaleNonneg,
            vec![vec![2.0], vec![0.0, 2.0, 1.0, 3.0]],
        );
        assert!(matches!(not_sliced, Err(Error::InvalidSupermartingale { .. })));
        let sub = SlicedSuperMartingale::new(
            root(),
            2,
            MartingaleSign::SubmartingaleNonpos,
            vec![vec![-1.0], vec![0.0; 4]],
        )
        .unwrap();
        assert_eq!(measure_from_supermartingale(&sub).unwrap().mass(&root()), 1.0);
    }

    #[test]
    fn packing_examples() {
        let mu = DiscreteMeasure::new(root(), 2, [(root(), 1.0)]).unwrap();
        assert_eq!(mu.packing_intensity(), 1.0);
        let deep = DiscreteMeasure::new(root(), 2, [(unit(2, 0), 1.0)]).unwrap();
        assert_eq!(deep.packing_intensity(), 4.0);
        assert_eq!(DiscreteMeasure::zero(root(), 2).unwrap().packing_intensity(), 0.0);
    }

    #[test]
    fn embedding_examples() {
        let c = DyadicAnalytic::constant(root(), 2, 1.0, 0.0).unwrap();
        let mu = DiscreteMeasure::new(root(), 2, [(root(), 1.0)]).unwrap();
        assert_eq!(embedding_sum(&mu, &c).unwrap(), 1.0);
        assert_eq!(embedding_sum(&DiscreteMeasure::zero(root(), 2).unwrap(), &c).unwrap(), 0.0);
        let mu2 = DiscreteMeasure::new(
            root(),
            2,
            [(root(), 1.0), (unit(2, 0), 0.25), (unit(2, 1), 0.25), (unit(2, 2), 0.25), (unit(2, 3), 0.25)],
        )
        .unwrap();
        assert_eq!(embedding_sum(&mu2, &example_f()).unwrap(), 3.0);
    }

    #[test]
    fn check_e_examples() {
        let c = DyadicAnalytic::constant(root(), 2, 1.0, 0.0).unwrap();
        let mu = DiscreteMeasure::new(root(), 2, [(root(), 1.0)]).unwrap();
        let r = check_embedding_e(&mu, &c).unwrap();
        assert!((r.slack - (E - 1.0)).abs() < 1e-15);
        let z = DyadicAnalytic::zero(root(), 2).unwrap();
        assert_eq!(check_embedding_e(&mu, &z).unwrap().slack, 0.0);
        // root subtree sum 2 dominates the grandchild intensities of 1
        let mu2 = DiscreteMeasure::new(
            root(),
            2,
            [(root(), 1.0), (unit(2, 0), 0.25), (unit(2, 1), 0.25), (unit(2, 2), 0.25), (unit(2, 3), 0.25)],
        )
        .unwrap();
        let r2 = check_embedding_e(&mu2, &example_f()).unwrap();
        assert_eq!(r2.packing, 2.0);
        assert!((r2.slack - (E * 2.0 * 2.0 - 3.0)).abs() < 1e-14);
    }

    #[test]
    fn uchiyama_examples() {
        for m in [0.0, 0.5, 1.0, 2.0, 7.0] {
            let c = DyadicAnalytic::constant(root(), 2, 1.0, 0.0).unwrap();
            let mu = DiscreteMeasure::new(root(), 2, [(root(), m)]).unwrap();
            let r = uchiyama_weighted_check(&mu, &c).unwrap();
            assert!((r.slack - (1.0 - m * (-m).exp())).abs() < 1e-15);
            assert!(r.slack >= 1.0 - 1.0 / E - 1e-15);
        }
        let z = DyadicAnalytic::zero(root(), 2).unwrap();
        let mu = DiscreteMeasure::new(root(), 2, [(root(), 3.0)]).unwrap();
        assert_eq!(uchiyama_weighted_check(&mu, &z).unwrap().slack, 0.0);
    }

    #[test]
    fn measure_json_round_trip() {
        let mu = DiscreteMeasure::new(root(), 2, [(root(), 1.0), (unit(2, 3), 0.125)]).unwrap();
        let s = serde_json::to_string(&mu.to_file()).unwrap();
        let back: MeasureFile = serde_json::from_str(&s).unwrap();
        assert_eq!(back.into_measure().unwrap(), mu);
        let minimal: MeasureFile =
            serde_json::from_str(r#"{"masses":[{"interval":"L2N1","mass":0.5}],"balanced":false}"#).unwrap();
        let m = minimal.into_measure().unwrap();
        assert_eq!(m.depth(), 2);
        let claims: MeasureFile =
            serde_json::from_str(r#"{"masses":[{"interval":"L2N1","mass":0.5}],"balanced":true}"#).unwrap();
        assert!(matches!(claims.into_measure(), Err(Error::Unbalanced { .. })));
    }
}
