//! The fractional binomial distribution.
//!
//! `B_N(p, H, c)` counts successes among the first `N` trials of a stationary
//! binary sequence whose joint success probabilities factor over the gaps
//! between successes, `P(xi_{i_0} = ... = xi_{i_n} = 1) = p prod (p + c gap^(2H-2))`.
//! At `c = 0` it is the ordinary binomial; for `H > 1/2` the covariance decays
//! slowly enough to produce heavy zero inflation and overdispersion.

mod ddouble;
mod moments;
mod params;
mod pmf;
mod process;

pub use moments::{mean, sample, sample_table, variance_asymptotic, variance_exact};
pub(crate) use moments::draw;
pub use params::{c_max, FbParams, FbParamsNatural};
pub use pmf::{
    pmf, pmf_bruteforce, pmf_inclusion_exclusion, NegativeMass, PmfTable,
    BRUTEFORCE_MAX_TRIALS, NEGATIVE_MASS_TOLERANCE,
};
pub use process::{config_prob, joint_ones_prob, OnesSet, CONFIG_NEGATIVE_TOLERANCE};
