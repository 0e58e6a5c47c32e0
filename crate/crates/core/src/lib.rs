//! Benchmarking and explanation toolkit for count-valued travel-survey
//! regression.
//!
//! The crate covers the full pipeline from raw survey tables to comparable,
//! explainable models:
//!
//! - [`dataset`] — survey ingestion, feature encoding, stratified
//!   cross-validation folds, subgroup filters, and a synthetic
//!   zero-inflated count generator.
//! - [`access`] — gravity-based transit accessibility from travel-time
//!   matrices and job counts.
//! - [`models`] — seven regressor families (linear, zero-inflated and
//!   hurdle count models, CART, random forest, gradient boosting, and a
//!   small neural network) behind one fit/predict contract.
//! - [`metrics`] — R², RMSE, MedAE, and RRSE fold scoring with optional
//!   observation weights.
//! - [`mcomp`] — Friedman Aligned Ranks omnibus test with Bergmann-Hommel
//!   and Holm post hoc adjustments.
//! - [`interpret`] — permutation importance, PDP/ICE curves, exact and
//!   sampled Shapley values, and LIME local surrogates for any fitted
//!   model or prediction callable.
//! - [`spatial`] — hexagonal aggregation of predicted trip changes,
//!   accessibility sensitivity curves, and the SPAEF map-similarity
//!   score.
//!
//! Everything is deterministic given explicit seeds; no global state, no
//! threads, no network.

pub mod access;
pub mod dataset;
pub mod interpret;
mod linalg;
pub mod mcomp;
pub mod metrics;
pub mod models;
pub mod spatial;
pub mod special;
