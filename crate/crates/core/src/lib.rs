// SPDX-License-Identifier: MIT OR Apache-2.0

//! Online change-in-mean detection by functional pruning of CUSUM statistics.
//!
//! The [`curve`] module holds the engine: a piecewise-quadratic function of the
//! post-change mean stored as ordered `(tau, s, l)` triples and updated in
//! amortized constant time. [`detectors`] wraps two half-curves into thresholded
//! detectors for the known and unknown pre-change mean settings, [`robust`]
//! implements the capped-square-loss recursion, and [`baselines`] carries the
//! comparator statistics together with brute-force oracles.
//!
//! [`multistream`], [`harness`] and [`cli`] build on those for multi-stream
//! monitoring, simulation studies and the `focus` command-line tool.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod curve;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod multistream;
pub mod robust;

pub use curve::{convex_minorant_vertices, HalfCurve, MaxResult, Orientation, QuadraticRecord};
pub use detectors::{build_geometric_grid, DetectorConfig, FocusDetector, Grid, OnlineDetector, StepOutcome, Variant};
pub use error::FocusError;
pub use robust::{PiecewisePolyFunction, RobustConfig, RobustFocus};
