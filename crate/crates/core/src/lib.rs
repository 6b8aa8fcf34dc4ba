//! Power analysis for two-group bioequivalence designs with unequal variances.
//!
//! The Welch-based TOST procedure only needs three summary statistics per
//! simulated sample: the mean difference and the two sample variances. Each
//! statistic is obtained by CDF inversion from one coordinate of a point in the
//! unit cube, so power at fixed sample sizes is the fraction of randomized
//! Sobol' points that land in the rejection region ([`tost::empirical_power`]).
//!
//! Holding a point fixed and letting the sample size vary turns the rejection
//! condition into a one-dimensional root-finding problem. [`curve::power_curve`]
//! solves it for every point and reads the whole power curve off the empirical
//! CDF of the crossing sample sizes, with a repair pass that keeps the
//! recommendation unbiased when a point enters the rejection region more than
//! once.
//!
//! Supporting modules: [`special`] (normal, chi-square and Student-t quantiles
//! for real degrees of freedom), [`qrng`] (Sobol' points with digital shifts),
//! [`diagnostics`] (multiple-intersection scans), [`crossover`] (2x2 crossover
//! adapter and the Chow comparator), [`oracle`] (naive data-level simulation)
//! and [`plot`] (SVG rendering).

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crossover;
pub mod curve;
pub mod diagnostics;
pub mod error;
pub mod oracle;
pub mod plot;
pub mod qrng;
pub mod special;
pub mod tost;

mod parallel;
mod roots;

pub use error::{Error, Result};
