//! Numerical toolkit for the dyadic model of Uchiyama's lemma: sliced dyadic
//! martingales, dyadic-analytic conjugation, balanced Carleson measures, the
//! Bellman certificate for the embedding constant `e`, the lower-bound
//! certificate, reproducing kernels of the dyadic Hardy space, and the scan
//! showing that concavity fails without slicing.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod bellman;
pub mod carleson;
pub mod ddouble;
pub mod error;
pub mod exact;
pub mod extremal;
pub mod interval;
pub mod kernel;
pub mod martingale;
pub mod sampling;
pub mod tree;

pub use error::{Error, Result};
pub use interval::{haar_inner_indicator, Base, DyadicInterval};
pub use tree::{HaarCoefficients, PiecewiseConstant, TreeFile};
pub use carleson::{DiscreteMeasure, MartingaleSign, SlicedSuperMartingale};
pub use martingale::{DyadicAnalytic, SlicedMartingale, Tolerance};
