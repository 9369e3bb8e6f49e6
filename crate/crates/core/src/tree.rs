//! Piecewise-constant functions on a finite dyadic tree and their Haar
//! expansion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Dyadic;
use crate::interval::{sqrt_pow2, Base, DyadicInterval};

/// A function constant on the `2^depth` leaves below `root`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseConstant {
    root: DyadicInterval,
    depth: u32,
    leaves: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(root: DyadicInterval, depth: u32, leaves: Vec<f64>) -> Result<Self> {
        if depth > 30 {
            return Err(Error::DepthCap { depth, cap: 30 });
        }
        let expected = 1usize << depth;
        if leaves.len() != expected {
            return Err(Error::LeafCount {
                expected,
                got: leaves.len(),
            });
        }
        if let Some(bad) = leaves.iter().find(|x| !x.is_finite()) {
            return Err(Error::Parse(format!("non-finite leaf value {bad}")));
        }
        Ok(PiecewiseConstant {
            root,
            depth,
            leaves,
        })
    }

    /// Tree on `[0, 1)`.
    pub fn unit(depth: u32, leaves: Vec<f64>) -> Result<Self> {
        Self::new(DyadicInterval::unit_root(), depth, leaves)
    }

    pub fn constant(root: DyadicInterval, depth: u32, value: f64) -> Self {
        PiecewiseConstant {
            root,
            depth,
            leaves: vec![value; 1 << depth],
        }
    }

    pub fn root(&self) -> DyadicInterval {
        self.root
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn leaves(&self) -> &[f64] {
        &self.leaves
    }

    pub fn leaf_level(&self) -> i32 {
        self.root.level + self.depth as i32
    }

    pub fn leaf_length(&self) -> f64 {
        self.root.length() / (1u64 << self.depth) as f64
    }

    /// Position of `i` among the nodes at its level (relative level, offset).
    pub fn locate(&self, i: &DyadicInterval) -> Result<(u32, usize)> {
        if !self.root.contains(i) {
            return Err(Error::OutOfTree {
                interval: *i,
                root: self.root,
            });
        }
        let rel = (i.level - self.root.level) as u32;
        if rel > self.depth {
            return Err(Error::LevelTooDeep {
                interval: *i,
                max_level: self.leaf_level(),
            });
        }
        let offset = i.index - (self.root.index << rel);
        Ok((rel, offset as usize))
    }

    pub fn node(&self, rel: u32, offset: usize) -> DyadicInterval {
        DyadicInterval {
            base: self.root.base,
            level: self.root.level + rel as i32,
            index: (self.root.index << rel) + offset as i64,
        }
    }

    fn leaf_range(&self, rel: u32, offset: usize) -> std::ops::Range<usize> {
        let width = 1usize << (self.depth - rel);
        offset * width..(offset + 1) * width
    }

    pub fn average_exact(&self, i: &DyadicInterval) -> Result<Dyadic> {
        let (rel, offset) = self.locate(i)?;
        let range = self.leaf_range(rel, offset);
        let width = range.len();
        let total = self.leaves[range]
            .iter()
            .fold(Dyadic::zero(), |acc, &x| &acc + &Dyadic::from_f64(x));
        Ok(total.mul_pow2(-(width.trailing_zeros() as i64)))
    }

    /// Mean of the leaf values over `i`, rounded once from the exact value.
    pub fn average(&self, i: &DyadicInterval) -> Result<f64> {
        Ok(self.average_exact(i)?.to_f64())
    }

    /// Exact node averages for every relative level `0..=depth`.
    pub fn node_values_exact(&self) -> Vec<Vec<Dyadic>> {
        let mut levels = vec![self.leaves.iter().map(|&x| Dyadic::from_f64(x)).collect::<Vec<_>>()];
        for _ in 0..self.depth {
            let below = levels.last().unwrap();
            let above = below
                .chunks(2)
                .map(|p| (&p[0] + &p[1]).half())
                .collect();
            levels.push(above);
        }
        levels.reverse();
        levels
    }

    pub fn node_values(&self) -> Vec<Vec<f64>> {
        self.node_values_exact()
            .iter()
            .map(|lvl| lvl.iter().map(Dyadic::to_f64).collect())
            .collect()
    }

    /// `∫_root f²`.
    pub fn l2_norm2(&self) -> f64 {
        let sq = self.leaves.iter().fold(Dyadic::zero(), |acc, &x| {
            let d = Dyadic::from_f64(x);
            &acc + &(&d * &d)
        });
        sq.to_f64() * self.leaf_length()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        PiecewiseConstant {
            root: self.root,
            depth: self.depth,
            leaves: self.leaves.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(PiecewiseConstant {
            root: self.root,
            depth: self.depth,
            leaves: self
                .leaves
                .iter()
                .zip(&other.leaves)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.root != other.root || self.depth != other.depth {
            return Err(Error::Mismatch(format!(
                "tree {} depth {} vs tree {} depth {}",
                self.root, self.depth, other.root, other.depth
            )));
        }
        Ok(())
    }

    /// `∫_root f g`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        let s: f64 = self.leaves.iter().zip(&other.leaves).map(|(a, b)| a * b).sum();
        Ok(s * self.leaf_length())
    }

    pub fn haar(&self) -> HaarCoefficients {
        HaarCoefficients::from_tree(self)
    }
}

/// Haar expansion `f = <f>_R χ_R + Σ_J <f, h_J> h_J` with
/// `h_J = |J|^{-1/2}(χ_{J+} - χ_{J-})`.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarCoefficients {
    pub root: DyadicInterval,
    pub root_average: f64,
    /// `coeffs[k][j]` is the coefficient of the `j`-th interval at relative level `k`.
    pub coeffs: Vec<Vec<f64>>,
}

impl HaarCoefficients {
    pub fn from_tree(f: &PiecewiseConstant) -> Self {
        let nodes = f.node_values_exact();
        let depth = f.depth as usize;
        let mut coeffs = Vec::with_capacity(depth);
        for k in 0..depth {
            // sqrt|J| / 2
            let scale = sqrt_pow2(-(f.root.level + k as i32)) / 2.0;
            let level: Vec<f64> = (0..1usize << k)
                .map(|j| {
                    let diff = &nodes[k + 1][2 * j + 1] - &nodes[k + 1][2 * j];
                    diff.to_f64() * scale
                })
                .collect();
            coeffs.push(level);
        }
        HaarCoefficients {
            root: f.root,
            root_average: nodes[0][0].to_f64(),
            coeffs,
        }
    }

    pub fn depth(&self) -> u32 {
        self.coeffs.len() as u32
    }

    pub fn get(&self, j: &DyadicInterval) -> Option<f64> {
        if !self.root.contains(j) {
            return None;
        }
        let rel = (j.level - self.root.level) as usize;
        let offset = (j.index - (self.root.index << rel)) as usize;
        self.coeffs.get(rel).map(|lvl| lvl[offset])
    }

    /// Iterates `(J, <f, h_J>)` for every interval strictly above the leaves.
    pub fn iter(&self) -> impl Iterator<Item = (DyadicInterval, f64)> + '_ {
        self.coeffs.iter().enumerate().flat_map(move |(k, lvl)| {
            lvl.iter().enumerate().map(move |(j, &c)| {
                (
                    DyadicInterval {
                        base: self.root.base,
                        level: self.root.level + k as i32,
                        index: (self.root.index << k) + j as i64,
                    },
                    c,
                )
            })
        })
    }

    pub fn reconstruct(&self) -> PiecewiseConstant {
        let mut values = vec![self.root_average];
        for (k, lvl) in self.coeffs.iter().enumerate() {
            let height = sqrt_pow2(self.root.level + k as i32);
            values = values
                .iter()
                .zip(lvl)
                .flat_map(|(&m, &c)| [m - c * height, m + c * height])
                .collect();
        }
        PiecewiseConstant {
            root: self.root,
            depth: self.depth(),
            leaves: values,
        }
    }

    /// `|R| <f>_R² + Σ c_J²`, equal to `∫ f²` by Plancherel.
    pub fn norm2(&self) -> f64 {
        self.root.length() * self.root_average * self.root_average
            + self.coeffs.iter().flatten().map(|c| c * c).sum::<f64>()
    }
}

/// On-disk tree: `{"base","depth","leaves"}` with optional `"height"` (real-line
/// window of `4^height` unit cells) or explicit `"root"` id.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeFile {
    pub base: Base,
    pub depth: u32,
    pub leaves: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<String>,
}

impl TreeFile {
    pub fn into_tree(self) -> Result<PiecewiseConstant> {
        let root = match (&self.root, self.base, self.height) {
            (Some(id), base, _) => DyadicInterval::parse_id(id, base)?,
            (None, Base::RealLine, Some(t)) => DyadicInterval::real(-2 * t as i32, 0)?,
            (None, Base::RealLine, None) => DyadicInterval::real(0, 0)?,
            (None, Base::Unit, _) => DyadicInterval::unit_root(),
        };
        PiecewiseConstant::new(root, self.depth, self.leaves)
    }

    pub fn from_tree(t: &PiecewiseConstant) -> Self {
        let default_root = match t.root.base {
            Base::Unit => t.root == DyadicInterval::unit_root(),
            Base::RealLine => t.root.level == 0 && t.root.index == 0,
        };
        TreeFile {
            base: t.root.base,
            depth: t.depth,
            leaves: t.leaves.clone(),
            height: None,
            root: (!default_root).then(|| t.root.id()),
        }
    }
}
