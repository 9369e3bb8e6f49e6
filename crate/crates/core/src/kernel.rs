//! Reproducing kernels of the dyadic Hardy space.
//!
//! On the real line `k_I = ½ Σ ⟨χ_I/|I|, h_J⟩ h_J + (i/2) Σ σ(J) ⟨χ_I/|I|, h_J⟩ h_{J'}`
//! over odd `J ⊋ I`; the sum is truncated to the `T` nearest odd ancestors,
//! all inside the window `A_T`, the 4-adic ancestor of `I` `2T` levels up.
//! Everything above the window adds the real constant `1/(3|A_T|)` on `A_T`,
//! so partial values come with their exact `T → ∞` limit.

use std::f64::consts::E;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carleson::{check_embedding_e, embedding_sum, DiscreteMeasure, EmbeddingCheck};
use crate::error::{Error, Result};
use crate::interval::{haar_inner_indicator, pow2, Base, DyadicInterval, MAX_LEVEL};
use crate::martingale::{DyadicAnalytic, Tolerance};
use crate::tree::PiecewiseConstant;

#[derive(Clone, Debug, PartialEq)]
pub struct KernelRep {
    pub interval: DyadicInterval,
    pub height: u32,
    /// `(J, ½⟨χ_I/|I|, h_J⟩)`, nearest ancestor first.
    pub real_coeffs: Vec<(DyadicInterval, f64)>,
    /// `(J', ½σ(J)⟨χ_I/|I|, h_J⟩)`, aligned with `real_coeffs`.
    pub imag_coeffs: Vec<(DyadicInterval, f64)>,
    /// `1/|I₀|`, unit base only.
    pub constant: Option<f64>,
    /// Multiplier of the above-window tail; 1 for `k_I`.
    pub tail_weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelNorm {
    pub partial: f64,
    pub limit: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelValue {
    pub partial: Complex64,
    pub limit: Complex64,
}

fn available_height(i: &DyadicInterval) -> u32 {
    match i.base {
        Base::Unit => (i.level / 2) as u32,
        Base::RealLine => ((i.level + MAX_LEVEL) / 2) as u32,
    }
}

/// Kernel of the 4-adic `I` over its `T` nearest odd ancestors.
pub fn kernel(i: DyadicInterval, height: u32) -> Result<KernelRep> {
    if !i.is_four_adic() {
        return Err(Error::OddParity { interval: i });
    }
    let available = available_height(&i);
    if height > available {
        return Err(Error::WindowHeight { height, available });
    }
    let mut real_coeffs = Vec::with_capacity(height as usize);
    let mut imag_coeffs = Vec::with_capacity(height as usize);
    for t in 0..height as i32 {
        let j = i.ancestor_at(i.level - 1 - 2 * t)?;
        let c = 0.5 * haar_inner_indicator(&i, &j);
        real_coeffs.push((j, c));
        imag_coeffs.push((j.sibling()?, f64::from(j.sigma()?) * c));
    }
    Ok(KernelRep {
        interval: i,
        height,
        real_coeffs,
        imag_coeffs,
        constant: (i.base == Base::Unit).then_some(1.0),
        tail_weight: 1.0,
    })
}

/// Full kernel on the unit interval, including the constant term.
pub fn unit_kernel(i: DyadicInterval) -> Result<KernelRep> {
    if i.base != Base::Unit {
        return Err(Error::InvalidInterval(format!("{i} is not on the unit base")));
    }
    kernel(i, available_height(&i))
}

pub fn kernel_norm2(i: DyadicInterval, height: u32) -> Result<KernelNorm> {
    Ok(kernel(i, height)?.norm2())
}

impl KernelRep {
    /// `A_T`; `[0, 1)` on the unit base.
    pub fn window(&self) -> DyadicInterval {
        self.interval
            .ancestor_at(self.interval.level - 2 * self.height as i32)
            .expect("height checked on construction")
    }

    /// Value on `A_T` of the terms above the window: `1/(3|A_T|)` on the
    /// real line, 0 on the unit base.
    pub fn tail(&self) -> f64 {
        match self.interval.base {
            Base::Unit => 0.0,
            Base::RealLine => self.tail_weight / (3.0 * self.window().length()),
        }
    }

    pub fn norm2(&self) -> KernelNorm {
        // smallest terms first
        let mut partial = 0.0;
        for ((_, a), (_, b)) in self.real_coeffs.iter().zip(&self.imag_coeffs).rev() {
            partial += a * a + b * b;
        }
        if let Some(c) = self.constant {
            partial += self.window().length() * c * c;
        }
        KernelNorm {
            partial,
            limit: match self.interval.base {
                Base::Unit => partial,
                Base::RealLine => self.tail_weight * self.tail_weight / (3.0 * self.interval.length()),
            },
        }
    }

    /// Average of the kernel over the 4-adic `K` inside the window.
    pub fn evaluate(&self, k: &DyadicInterval) -> Result<KernelValue> {
        let w = self.window();
        if !k.is_four_adic() {
            return Err(Error::OddParity { interval: *k });
        }
        if !w.contains(k) {
            return Err(Error::WindowViolation { interval: *k });
        }
        let mut re = self.constant.unwrap_or(0.0);
        let mut im = 0.0;
        for ((j, a), (jp, b)) in self.real_coeffs.iter().zip(&self.imag_coeffs) {
            re += a * haar_inner_indicator(k, j);
            im += b * haar_inner_indicator(k, jp);
        }
        let partial = Complex64::new(re, im);
        Ok(KernelValue {
            partial,
            limit: partial + self.tail(),
        })
    }

    pub fn scaled(&self, t: f64) -> Self {
        KernelRep {
            real_coeffs: self.real_coeffs.iter().map(|&(j, c)| (j, t * c)).collect(),
            imag_coeffs: self.imag_coeffs.iter().map(|&(j, c)| (j, t * c)).collect(),
            constant: self.constant.map(|c| t * c),
            tail_weight: t * self.tail_weight,
            ..self.clone()
        }
    }

    /// `k / ‖k‖` with the limit norm, so `‖k̃‖² = 1 - 4^{-T}` at finite `T`
    /// on the real line.
    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.norm2().limit.sqrt())
    }

    /// The truncated kernel as an analytic pair on the tree `(root, depth)`.
    /// The root must contain the window, and the leaves must be no coarser
    /// than `I`.
    pub fn to_analytic(&self, root: DyadicInterval, depth: u32) -> Result<DyadicAnalytic> {
        if !root.contains(&self.window()) {
            return Err(Error::WindowViolation { interval: root });
        }
        let leaf_level = root.level + depth as i32;
        if leaf_level < self.interval.level {
            return Err(Error::LevelTooDeep {
                interval: self.interval,
                max_level: leaf_level,
            });
        }
        let n = 1usize << depth;
        let (mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for j in 0..n {
            let leaf = DyadicInterval {
                base: root.base,
                level: leaf_level,
                index: (root.index << depth) + j as i64,
            };
            let val = if self.window().contains(&leaf) {
                let mut re = self.constant.unwrap_or(0.0);
                let mut im = 0.0;
                for ((jj, a), (jp, b)) in self.real_coeffs.iter().zip(&self.imag_coeffs) {
                    re += a * haar_inner_indicator(&leaf, jj);
                    im += b * haar_inner_indicator(&leaf, jp);
                }
                Complex64::new(re, im)
            } else {
                Complex64::new(0.0, 0.0)
            };
            u.push(val.re);
            v.push(val.im);
        }
        DyadicAnalytic::from_trees(
            PiecewiseConstant::new(root, depth, u)?,
            PiecewiseConstant::new(root, depth, v)?,
            Tolerance::Absolute(1e-12 * (1.0 / self.interval.length()).max(1.0)),
        )
    }

    pub fn to_file(&self) -> KernelFile {
        let entries = |v: &[(DyadicInterval, f64)]| {
            v.iter()
                .map(|(j, c)| CoeffEntry {
                    interval: j.id(),
                    coeff: *c,
                })
                .collect()
        };
        let norm = self.norm2();
        KernelFile {
            interval: self.interval.id(),
            base: self.interval.base,
            height: self.height,
            real: entries(&self.real_coeffs),
            imag: entries(&self.imag_coeffs),
            constant: self.constant,
            norm2_partial: norm.partial,
            norm2_limit: norm.limit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub interval: String,
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelFile {
    pub interval: String,
    pub base: Base,
    pub height: u32,
    pub real: Vec<CoeffEntry>,
    pub imag: Vec<CoeffEntry>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub constant: Option<f64>,
    pub norm2_partial: f64,
    pub norm2_limit: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reproduction {
    pub inner: Complex64,
    pub value: Complex64,
    pub residual: f64,
    /// `|f_R|`: what the missing constant term can contribute on the real line.
    pub tail_bound: f64,
}

/// `|⟨f, k_I⟩ - f_I|` with `k_I` reaching up to the root of `f`'s tree,
/// computed as a leaf sum `Σ |L| f_L conj(k_L)`.
pub fn reproducing_residual(f: &DyadicAnalytic, i: DyadicInterval) -> Result<Reproduction> {
    let root = f.root();
    if !root.is_four_adic() || !root.contains(&i) {
        return Err(Error::OutOfTree { interval: i, root });
    }
    let k = kernel(i, ((i.level - root.level) / 2) as u32)?;
    let ka = k.to_analytic(root, f.depth())?;
    let inner = f.inner(&ka)?;
    let value = f.value(&i)?;
    let tail_bound = match root.base {
        Base::Unit => 0.0,
        Base::RealLine => f.value(&root)?.norm(),
    };
    Ok(Reproduction {
        inner,
        value,
        residual: (inner - value).norm(),
        tail_bound,
    })
}

fn on_real_line(i: &DyadicInterval) -> DyadicInterval {
    DyadicInterval {
        base: Base::RealLine,
        ..*i
    }
}

/// Real-line kernel of `I` reaching up to `root`.
fn window_kernel(root: &DyadicInterval, i: &DyadicInterval) -> Result<KernelRep> {
    if !root.contains(i) || (i.level - root.level) % 2 != 0 {
        return Err(Error::OutOfTree {
            interval: *i,
            root: *root,
        });
    }
    kernel(on_real_line(i), ((i.level - root.level) / 2) as u32)
}

/// `Σ_K |k̃_I(K)|² μ_K` with the exact (`T → ∞`) real-line kernel; unit-base
/// measures are placed on the line at the same position.
pub fn testing_sum(mu: &DiscreteMeasure, i: &DyadicInterval) -> Result<f64> {
    let root = mu.root();
    let k = window_kernel(&root, i)?;
    let scale = 3.0 * i.length();
    let mut total = 0.0;
    for (kk, &m) in mu.masses() {
        let v = k.evaluate(&on_real_line(kk))?.limit;
        total += scale * v.norm_sqr() * m;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestingConstant {
    pub value: f64,
    pub argmax: DyadicInterval,
}

/// `I(μ) = max_I Σ_K |k̃_I(K)|² μ_K` over the 4-adic nodes of the tree.
pub fn testing_constant(mu: &DiscreteMeasure) -> Result<TestingConstant> {
    let root = mu.root();
    let mut nodes = vec![root];
    let mut level = vec![root];
    for _ in (0..mu.depth()).step_by(2) {
        level = level.iter().flat_map(|i| i.grandchildren().expect("4-adic")).collect();
        nodes.extend_from_slice(&level);
    }
    let sums: Vec<f64> = nodes
        .par_iter()
        .map(|i| testing_sum(mu, i))
        .collect::<Result<_>>()?;
    let (mut best, mut arg) = (sums[0], nodes[0]);
    for (s, i) in sums.iter().zip(&nodes).skip(1) {
        if *s > best {
            best = *s;
            arg = *i;
        }
    }
    Ok(TestingConstant {
        value: best,
        argmax: arg,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestingPacking {
    pub testing: f64,
    /// Part of the testing sum from `K ⊆ I`, equal to `packing / 3`.
    pub subtree_testing: f64,
    /// `Σ_{K ⊆ I} μ_K / |I|`.
    pub packing: f64,
    /// `3 · testing - packing`.
    pub slack: f64,
}

pub fn testing_to_packing(mu: &DiscreteMeasure, i: &DyadicInterval) -> Result<TestingPacking> {
    let root = mu.root();
    let k = window_kernel(&root, i)?;
    let scale = 3.0 * i.length();
    let (mut testing, mut sub, mut mass) = (0.0, 0.0, 0.0);
    for (kk, &m) in mu.masses() {
        let t = scale * k.evaluate(&on_real_line(kk))?.limit.norm_sqr() * m;
        testing += t;
        if i.contains(kk) {
            sub += t;
            mass += m;
        }
    }
    let packing = mass / i.length();
    Ok(TestingPacking {
        testing,
        subtree_testing: sub,
        packing,
        slack: 3.0 * testing - packing,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Check3e {
    pub testing: f64,
    pub packing: f64,
    pub norm2: f64,
    pub embedding: f64,
    /// `3 I(μ) - C(μ)`.
    pub packing_slack: f64,
    /// `e C(μ) ‖f‖² - Σ μ |f|²`.
    pub embedding_slack: f64,
    /// `3e I(μ) ‖f‖² - Σ μ |f|²`.
    pub slack: f64,
}

/// Testing constant, then packing, then the embedding with constant `e`.
pub fn check_3e(mu: &DiscreteMeasure, f: &DyadicAnalytic) -> Result<Check3e> {
    let testing = testing_constant(mu)?.value;
    let EmbeddingCheck {
        embedding,
        packing,
        norm2,
        slack: embedding_slack,
    } = check_embedding_e(mu, f)?;
    debug_assert_eq!(embedding, embedding_sum(mu, f)?);
    Ok(Check3e {
        testing,
        packing,
        norm2,
        embedding,
        packing_slack: 3.0 * testing - packing,
        embedding_slack,
        slack: 3.0 * E * testing * norm2 - embedding,
    })
}

/// `(1/(3|I|))(1 - 4^{-T})`.
pub fn norm2_closed_form(i: &DyadicInterval, height: u32) -> f64 {
    (1.0 - pow2(-2 * height as i32)) / (3.0 * i.length())
}
