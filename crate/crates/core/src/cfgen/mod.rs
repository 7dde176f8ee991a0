//! Counterfactual generation for negatively predicted samples.
//!
//! Two strategies produce a set `C_x` of rows that the decision maker
//! classifies with the desired outcome:
//!
//! * [`kdtree`] returns the nearest training rows that already carry the
//!   desired prediction, so every member is a real observation;
//! * [`genetic`] evolves synthetic rows under validity, proximity, sparsity
//!   and diversity pressure, respecting immutable features and ranges.
//!
//! Both work in schema space (level indices for ordinal and categorical
//! features) and use the mixed-type [`Metric`].

mod batch;
mod distance;
mod dump;
pub mod genetic;
pub mod kdtree;

use serde::{Deserialize, Serialize};

pub use batch::{batch_generate, BatchConfig, BatchOutput, ShortfallStats};
pub use distance::{changed_features, FeatureProfile, Metric};
pub use dump::{read_dump, write_dump, DumpMember, DumpRecord};
pub use genetic::{generate_genetic, GeneticConfig};
pub use kdtree::{generate_kdtree, KdIndex};

use crate::data::{Encoder, FeatureSchema, Row};
use crate::error::{Error, Result};
use crate::model::ClassifierHandle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Kdtree,
    Genetic,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Kdtree => "kdtree",
            Strategy::Genetic => "genetic",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kdtree" => Ok(Strategy::Kdtree),
            "genetic" => Ok(Strategy::Genetic),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub row: Row,
    /// Distance to the origin under the search metric.
    pub distance: f64,
    /// The decision maker gives this row the desired outcome.
    pub valid: bool,
}

/// The counterfactuals found for one origin sample, in generation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSet {
    pub origin: Row,
    pub desired: u8,
    pub strategy: Strategy,
    pub seed: u64,
    pub requested: usize,
    pub members: Vec<Member>,
}

impl CounterfactualSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Fewer members than requested.
    pub fn shortfall(&self) -> bool {
        self.members.len() < self.requested
    }

    pub fn rows(&self) -> Vec<&Row> {
        self.members.iter().map(|m| &m.row).collect()
    }
}

/// Everything a strategy needs to score candidate rows.
#[derive(Clone, Copy)]
pub struct CfContext<'a> {
    pub schema: &'a FeatureSchema,
    pub encoder: &'a Encoder,
    pub model: &'a ClassifierHandle,
    pub metric: &'a Metric,
}

impl<'a> CfContext<'a> {
    pub fn new(
        schema: &'a FeatureSchema,
        encoder: &'a Encoder,
        model: &'a ClassifierHandle,
        metric: &'a Metric,
    ) -> Self {
        CfContext { schema, encoder, model, metric }
    }

    /// Decision-maker labels and probabilities for schema-space rows.
    pub fn predict_rows<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<(Vec<u8>, Vec<f64>)> {
        if rows.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        self.model.predict_with_proba(&self.encoder.encode_rows(rows))
    }

    pub(crate) fn check_origin(&self, x: &[f64], desired: u8) -> Result<()> {
        if x.len() != self.schema.n_features() {
            return Err(Error::InvalidInput(format!(
                "sample has {} values, schema {}",
                x.len(),
                self.schema.n_features()
            )));
        }
        let (labels, _) = self.predict_rows(&[x])?;
        if labels[0] == desired {
            return Err(Error::Precondition(format!("sample is already predicted {desired}")));
        }
        Ok(())
    }

    /// Re-predict members, flag validity and keep only the valid ones.
    pub(crate) fn finalize(&self, mut set: CounterfactualSet) -> Result<CounterfactualSet> {
        let rows: Vec<&[f64]> = set.members.iter().map(|m| m.row.as_slice()).collect();
        let (labels, _) = self.predict_rows(&rows)?;
        for (m, &l) in set.members.iter_mut().zip(&labels) {
            m.valid = l == set.desired;
        }
        let before = set.members.len();
        set.members.retain(|m| m.valid);
        if set.members.len() < before {
            log::warn!("dropped {} counterfactuals that failed re-validation", before - set.members.len());
        }
        Ok(set)
    }
}

/// Perturbation `ε = c − x` in encoded space: numeric and ordinal entries
/// are plain differences, and each categorical feature yields `−1` on the
/// vacated level and `+1` on the entered one.
pub fn perturbation(encoder: &Encoder, x: &[f64], c: &[f64]) -> Vec<f64> {
    let ex = encoder.encode_row(x);
    let ec = encoder.encode_row(c);
    ec.iter().zip(&ex).map(|(a, b)| a - b).collect()
}
