//! Counterfactual bias auditing for binary classifiers trained without
//! sensitive features.
//!
//! The pipeline, end to end:
//!
//! 1. [`data`] loads a CSV under a declared [`FeatureSchema`], one-hot encodes
//!    it and produces a stratified train/test split.
//! 2. [`model`] fits the decision maker `f` and the sensitive-feature
//!    classifier `f_s` on the non-sensitive features only.
//! 3. [`cfgen`] generates counterfactuals for every test sample that `f`
//!    rejects, either by nearest-neighbour search over the training pool or
//!    by a genetic search.
//! 4. [`fairmetrics`] counts how often those counterfactuals land in the other
//!    sensitive group according to `f_s` (CFlips), per group and as the gap
//!    between groups (ΔCFlips).
//! 5. [`proxy`] correlates the perturbations with the shift in `f_s`'s
//!    probability to rank proxy features.
//!
//! [`audit`] wires these stages together and hosts the synthetic
//! planted-proxy generator.

pub mod audit;
pub mod cfgen;
pub mod data;
pub mod error;
pub mod fairmetrics;
pub mod model;
pub mod proxy;
pub mod rng;
pub mod stats;

pub use data::{Dataset, EncodedMatrix, Encoder, FeatureSchema, GroupSpec};
pub use error::{Error, Result};
pub use model::ClassifierHandle;
