use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, FeatureSchema, Row};
use crate::error::{Error, Result};
use crate::stats::{median_abs_deviation, std_dev};

/// Per-feature description used by the search strategies, fitted on the
/// training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProfile {
    pub categorical: bool,
    /// Number of levels for ordinal and categorical features.
    pub levels: Option<usize>,
    /// Divisor for `|Δ|` in the distance; 0 means the feature contributes
    /// nothing. Unused for categorical features.
    pub scale: f64,
    /// Feasible `[lo, hi]` for search.
    pub range: (f64, f64),
    pub std: f64,
    /// Every training value is a whole number.
    pub integral: bool,
}

/// Mixed-type distance between schema-space rows: numeric and ordinal
/// features contribute `|a − b| / MAD` (falling back to the range when the
/// MAD is 0, and to nothing when the range is 0 as well), categorical
/// features contribute a 0/1 mismatch, and the total is the mean over
/// features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub features: Vec<FeatureProfile>,
}

impl Metric {
    pub fn fit(schema: &FeatureSchema, rows: &[Row]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("cannot fit a distance on zero rows".into()));
        }
        let features = schema
            .features
            .iter()
            .enumerate()
            .map(|(j, spec)| {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (categorical, levels) = match &spec.kind {
                    FeatureKind::Numeric => (false, None),
                    FeatureKind::Ordinal { levels } => (false, Some(levels.len())),
                    FeatureKind::Categorical { levels } => (true, Some(levels.len())),
                };
                let mad = median_abs_deviation(&col);
                let scale = if mad > 0.0 { mad } else { hi - lo };
                let range = match (spec.range, levels) {
                    (Some([a, b]), _) => (a, b),
                    (None, Some(n)) if categorical => (0.0, (n - 1) as f64),
                    _ => (lo, hi),
                };
                FeatureProfile {
                    categorical,
                    levels,
                    scale,
                    range,
                    std: std_dev(&col),
                    integral: col.iter().all(|v| v.fract() == 0.0),
                }
            })
            .collect();
        Ok(Metric { features })
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn term(&self, j: usize, a: f64, b: f64) -> f64 {
        let f = &self.features[j];
        if f.categorical {
            f64::from(u8::from(a != b))
        } else if f.scale > 0.0 {
            (a - b).abs() / f.scale
        } else {
            0.0
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let total: f64 = (0..self.features.len()).map(|j| self.term(j, a[j], b[j])).sum();
        total / self.features.len() as f64
    }
}

/// Number of features that differ between two rows.
pub fn changed_features(a: &[f64], b: &[f64]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}
