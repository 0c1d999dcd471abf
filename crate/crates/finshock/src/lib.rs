//! Batch toolkit for studying how financial shocks move the income
//! distribution in a panel of countries.
//!
//! The pipeline has four stages, each usable on its own:
//!
//! 1. [`inequality`] turns survey microdata into weighted inequality measures
//!    (Gini coefficients, percentiles, quintile Ginis, skill premia).
//! 2. [`panel`] aligns mixed-frequency macro and inequality series into a
//!    balanced quarterly country panel.
//! 3. [`bvar`] estimates a pooled Bayesian VAR with country intercepts and a
//!    Normal-Wishart prior; [`identification`] turns its posterior draws into
//!    structural shocks via sign restrictions or a recursive ordering.
//! 4. [`lp`] regresses outcomes on the extracted shocks with panel local
//!    projections under Driscoll-Kraay standard errors, including a
//!    sign-split variant for asymmetric responses.
//!
//! [`dgp`] simulates ground-truth data for every stage, and [`pipeline`]
//! wires the stages into the batch commands exposed by the `finshock`
//! binary. The `examples/` directory walks through each capability on
//! synthetic data.

pub mod bvar;
pub mod dates;
pub mod dgp;
pub mod identification;
pub mod inequality;
pub mod lp;
pub mod panel;
pub mod pipeline;
pub mod stats;
