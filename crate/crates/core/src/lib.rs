//! Extreme value laws, hitting-time statistics and escape rates for
//! piecewise-expanding full-branch interval maps.
//!
//! The crate is organised bottom-up:
//!
//! * [`interval`]: exact and floating set algebra on finite interval unions.
//! * [`dynamics`]: full-branch maps, preimages, periodic points, pressure,
//!   symbolic orbit sampling and Ulam matrices.
//! * [`extremes`]: exceedance sets, annuli, survivor sets, extremal indices,
//!   return times and exact small-horizon probabilities.
//! * [`bounds`]: closed-form error brackets and blocking-parameter optimizers.
//! * [`experiments`]: Monte-Carlo estimators, escape-rate fits and sweeps.

pub mod bounds;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod extremes;
pub mod interval;
pub mod scalar;

pub use error::{Error, Result};
pub use interval::{Interval, IntervalUnion, Topology};
pub use scalar::{Rational, Scalar};
