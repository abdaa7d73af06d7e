//! Fractional binomial regression for count data with excess zeros.
//!
//! The crate provides
//!
//! * [`frbinom`]: exact pmf, moments and sampling for the fractional binomial
//!   distribution `B_N(p, H, c)`;
//! * [`regdata`]: CSV ingestion and design matrices with dummy-coded factors;
//! * [`likelihoods`]: per-observation log-probabilities for the fractional
//!   binomial regression model and the ZIP, ZINB and ZINB-2 baselines;
//! * [`estimator`]: maximum-likelihood fitting with Wald inference;
//! * [`inference`]: AIC, Vuong's closeness test and fitted profile
//!   distributions;
//! * [`simharness`]: Monte-Carlo bias and standard-error studies.
//!
//! The guide under `book/` walks through each piece; its code listings are
//! compiled as doctests of this crate.

pub mod error;
pub mod estimator;
pub mod frbinom;
pub mod inference;
pub mod likelihoods;
pub mod regdata;
pub mod simharness;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/distribution.md")]
    mod distribution {}
    #[doc = include_str!("../../../book/src/computing-the-pmf.md")]
    mod computing_the_pmf {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/comparison.md")]
    mod comparison {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
}
