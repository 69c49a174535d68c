//! Monte-Carlo estimators, the Ulam escape-rate oracle and sweeps.

pub mod ecdf;
pub mod estimate;
pub mod spectral;
pub mod sweep;

pub use ecdf::{wilson, wilson_half, Ecdf, Z95};
pub use estimate::{
    estimate_escape_rate, estimate_escape_rate_hole, estimate_evl, estimate_hts, trial_rng,
    EscapeFit,
};
pub use spectral::{aligned_bins, markov_survival, ulam_escape_oracle, EscapeOracle};
pub use sweep::{evl_sweep, hts_sweep, ratio_spread, SweepRow, SweepSpec};
