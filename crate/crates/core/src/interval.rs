//! Dyadic intervals `[n 2^-k, (n+1) 2^-k)` stored as integer `(level, index)`.
//!
//! On the unit base `0 <= index < 2^level`. On the real line the level may be
//! negative (intervals longer than 1) and the index is any integer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deepest level for which `2^level` still fits an `i64` index.
pub const MAX_LEVEL: i32 = 62;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    Unit,
    RealLine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicInterval {
    pub base: Base,
    pub level: i32,
    pub index: i64,
}

/// `2^k` as a float, exact for every representable `k`.
pub fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

/// `2^(k/2)`, exact for even `k`.
pub fn sqrt_pow2(k: i32) -> f64 {
    if k % 2 == 0 {
        pow2(k / 2)
    } else {
        pow2(k.div_euclid(2)) * std::f64::consts::SQRT_2
    }
}

impl DyadicInterval {
    pub fn unit(level: i32, index: i64) -> Result<Self> {
        if !(0..=MAX_LEVEL).contains(&level) {
            return Err(Error::InvalidInterval(format!(
                "unit-base level {level} outside 0..={MAX_LEVEL}"
            )));
        }
        if index < 0 || index >= 1i64 << level {
            return Err(Error::InvalidInterval(format!(
                "unit-base index {index} outside 0..2^{level}"
            )));
        }
        Ok(DyadicInterval {
            base: Base::Unit,
            level,
            index,
        })
    }

    pub fn real(level: i32, index: i64) -> Result<Self> {
        if level.abs() > MAX_LEVEL {
            return Err(Error::InvalidInterval(format!(
                "real-line level {level} outside ±{MAX_LEVEL}"
            )));
        }
        Ok(DyadicInterval {
            base: Base::RealLine,
            level,
            index,
        })
    }

    pub fn new(base: Base, level: i32, index: i64) -> Result<Self> {
        match base {
            Base::Unit => Self::unit(level, index),
            Base::RealLine => Self::real(level, index),
        }
    }

    /// `[0, 1)` on the unit base.
    pub fn unit_root() -> Self {
        DyadicInterval {
            base: Base::Unit,
            level: 0,
            index: 0,
        }
    }

    pub fn length(&self) -> f64 {
        pow2(-self.level)
    }

    /// `|I|^{-1/2}`, the height of the L²-normalized Haar function on `I`.
    pub fn inv_sqrt_length(&self) -> f64 {
        sqrt_pow2(self.level)
    }

    pub fn left(&self) -> f64 {
        self.index as f64 * self.length()
    }

    pub fn right(&self) -> f64 {
        (self.index + 1) as f64 * self.length()
    }

    pub fn parity(&self) -> u8 {
        self.level.rem_euclid(2) as u8
    }

    pub fn is_four_adic(&self) -> bool {
        self.parity() == 0
    }

    /// Left and right halves. For a 4-adic interval these are `I^y` and `I^x`.
    pub fn split(&self) -> (Self, Self) {
        let child = |index| DyadicInterval {
            base: self.base,
            level: self.level + 1,
            index,
        };
        (child(2 * self.index), child(2 * self.index + 1))
    }

    /// The four 4-adic children, ordered `I^y_-, I^y_+, I^x_-, I^x_+`.
    pub fn grandchildren(&self) -> Result<[Self; 4]> {
        if !self.is_four_adic() {
            return Err(Error::OddParity { interval: *self });
        }
        let (y, x) = self.split();
        let (ym, yp) = y.split();
        let (xm, xp) = x.split();
        Ok([ym, yp, xm, xp])
    }

    pub fn parent(&self) -> Result<Self> {
        if self.base == Base::Unit && self.level == 0 {
            return Err(Error::NoParent { interval: *self });
        }
        Ok(DyadicInterval {
            base: self.base,
            level: self.level - 1,
            index: self.index.div_euclid(2),
        })
    }

    /// `+1` for a right half, `-1` for a left half.
    pub fn sigma(&self) -> Result<i8> {
        self.parent()?;
        Ok(if self.index.rem_euclid(2) == 1 { 1 } else { -1 })
    }

    pub fn sibling(&self) -> Result<Self> {
        self.parent()?;
        Ok(DyadicInterval {
            index: self.index ^ 1,
            ..*self
        })
    }

    /// Whether `other ⊆ self`.
    pub fn contains(&self, other: &Self) -> bool {
        if self.base != other.base || other.level < self.level {
            return false;
        }
        let shift = (other.level - self.level) as u32;
        if shift >= 63 {
            return false;
        }
        other.index >> shift == self.index
    }

    /// The ancestor (or self) at a coarser `level`.
    pub fn ancestor_at(&self, level: i32) -> Result<Self> {
        if level > self.level {
            return Err(Error::InvalidInterval(format!(
                "level {level} is finer than {self}"
            )));
        }
        let out = DyadicInterval {
            base: self.base,
            level,
            index: self.index >> ((self.level - level) as u32).min(63),
        };
        if self.base == Base::Unit && level < 0 {
            return Err(Error::NoParent {
                interval: Self::unit_root(),
            });
        }
        Ok(out)
    }

    pub fn id(&self) -> String {
        format!("L{}N{}", self.level, self.index)
    }

    /// Parses an `L{level}N{index}` id.
    pub fn parse_id(s: &str, base: Base) -> Result<Self> {
        let bad = || Error::Parse(format!("malformed interval id {s:?}; expected L<level>N<index>"));
        let rest = s.trim().strip_prefix('L').ok_or_else(bad)?;
        let (level, index) = rest.split_once('N').ok_or_else(bad)?;
        let level = i32::from_str(level).map_err(|_| bad())?;
        let index = i64::from_str(index).map_err(|_| bad())?;
        Self::new(base, level, index)
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}N{}", self.level, self.index)
    }
}

/// Serialized as its id; reports carry the base separately.
impl Serialize for DyadicInterval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Sign of the Haar function `h_J` on `I` when `I` lies inside a half of `J`.
fn haar_sign(i: &DyadicInterval, j: &DyadicInterval) -> Option<f64> {
    if j.level >= i.level || !j.contains(i) {
        return None;
    }
    let (_, right) = j.split();
    Some(if right.contains(i) { 1.0 } else { -1.0 })
}

/// `<χ_I / |I|, h_J>` for the L²-normalized Haar function
/// `h_J = |J|^{-1/2} (χ_{J+} - χ_{J-})`.
pub fn haar_inner_indicator(i: &DyadicInterval, j: &DyadicInterval) -> f64 {
    match haar_sign(i, j) {
        Some(s) => s * j.inv_sqrt_length(),
        None => 0.0,
    }
}
