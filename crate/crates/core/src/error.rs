use thiserror::Error;

use crate::interval::DyadicInterval;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("interval {interval} has odd parity; a 4-adic interval is required")]
    OddParity { interval: DyadicInterval },

    #[error("interval {interval} is the root and has no parent")]
    NoParent { interval: DyadicInterval },

    #[error("interval {interval} lies outside the tree rooted at {root}")]
    OutOfTree {
        interval: DyadicInterval,
        root: DyadicInterval,
    },

    #[error("interval {interval} is deeper than the tree allows (max level {max_level})")]
    LevelTooDeep {
        interval: DyadicInterval,
        max_level: i32,
    },

    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    #[error("expected {expected} leaves, got {got}")]
    LeafCount { expected: usize, got: usize },

    #[error("depth {0} is odd; sliced trees need an even depth")]
    OddDepth(u32),

    #[error("depth {depth} exceeds the configured cap {cap}")]
    DepthCap { depth: u32, cap: u32 },

    #[error("slicing violated at {interval}: pair means differ by {residual:e}")]
    SlicingViolation {
        interval: DyadicInterval,
        residual: f64,
    },

    #[error("Cauchy-Riemann equations violated: residual {residual:e}")]
    CauchyRiemann { residual: f64 },

    #[error("trees are incompatible: {0}")]
    Mismatch(String),

    #[error("negative mass {mass} at {interval}")]
    NegativeMass { interval: DyadicInterval, mass: f64 },

    #[error("measure is not balanced: residual {residual:e}")]
    Unbalanced { residual: f64 },

    #[error("invalid sliced super/submartingale at {interval}: {reason}")]
    InvalidSupermartingale {
        interval: DyadicInterval,
        reason: String,
    },

    #[error("point outside the domain: {0}")]
    Domain(String),

    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    #[error("children are inconsistent with the parent: {0}")]
    InconsistentChildren(String),

    #[error("kernel height {height} exceeds the {available} ancestor levels of the window")]
    WindowHeight { height: u32, available: u32 },

    #[error("interval {interval} lies outside the kernel window")]
    WindowViolation { interval: DyadicInterval },

    #[error("epsilon {0} outside (0, 1/4)")]
    EpsOutOfRange(f64),

    #[error("invalid profile sample: {0}")]
    InvalidProfile(String),

    #[error("theorem violation: {0}")]
    TheoremViolation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
