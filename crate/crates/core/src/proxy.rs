//! Proxy-feature ranking.
//!
//! For every (origin, counterfactual) pair the perturbation `ε = c − x` is
//! taken in encoded space and paired with the shift in the sensitive
//! classifier's probability of the privileged group,
//! `δ = P(f_s(c)=1) − P(f_s(x)=1)`. Each encoded column of `ε` is then
//! correlated with `δ`; columns whose changes move `f_s` the most are the
//! likeliest proxies for the sensitive attribute.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cfgen::{perturbation, CounterfactualSet};
use crate::data::{ColumnMap, Encoder};
use crate::error::{Error, Result};
use crate::fairmetrics::FlipRecord;
use crate::model::ClassifierHandle;
use crate::stats::pearson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyEntry {
    pub feature: String,
    /// Categorical level, or `None` for numeric and ordinal columns.
    pub level: Option<String>,
    /// Pearson correlation with `δ`; `None` when either side is constant.
    pub rho: Option<f64>,
    pub n_pairs: usize,
}

impl ProxyEntry {
    pub fn label(&self) -> String {
        match &self.level {
            Some(l) => format!("{}={}", self.feature, l),
            None => self.feature.clone(),
        }
    }
}

/// Strongest level of one schema feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAggregate {
    pub feature: String,
    /// Signed `ρ` of the column with the largest `|ρ|`.
    pub rho: Option<f64>,
    pub max_abs_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyReport {
    pub n_pairs: usize,
    /// One entry per encoded column, in column order.
    pub entries: Vec<ProxyEntry>,
    pub features: Vec<FeatureAggregate>,
}

/// `δ` between two probabilities of the privileged group.
pub fn delta_shift(p_origin: f64, p_counterfactual: f64) -> f64 {
    p_counterfactual - p_origin
}

/// Correlate precomputed perturbations (one row per pair, encoded layout)
/// with the matching shifts.
pub fn correlations_from_parts(column_map: &ColumnMap, eps: &[Vec<f64>], delta: &[f64]) -> Result<ProxyReport> {
    if eps.len() != delta.len() {
        return Err(Error::InvalidInput(format!("{} perturbations for {} shifts", eps.len(), delta.len())));
    }
    if eps.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "insufficient data: {} pairs, at least 3 needed",
            eps.len()
        )));
    }
    let n = eps.len();
    let entries: Vec<ProxyEntry> = column_map
        .columns()
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let column: Vec<f64> = eps.iter().map(|e| e[j]).collect();
            ProxyEntry { feature: col.feature.clone(), level: col.level.clone(), rho: pearson(&column, delta), n_pairs: n }
        })
        .collect();
    let mut features: Vec<FeatureAggregate> = Vec::new();
    for e in &entries {
        if features.last().is_none_or(|f| f.feature != e.feature) {
            features.push(FeatureAggregate { feature: e.feature.clone(), rho: None, max_abs_rho: None });
        }
        let agg = features.last_mut().expect("just pushed");
        if let Some(r) = e.rho {
            if agg.max_abs_rho.is_none_or(|m| r.abs() > m) {
                agg.rho = Some(r);
                agg.max_abs_rho = Some(r.abs());
            }
        }
    }
    Ok(ProxyReport { n_pairs: n, entries, features })
}

/// `ρ(ε, δ)` per encoded column over the given `(x, c)` pairs.
pub fn proxy_correlations(fs: &ClassifierHandle, encoder: &Encoder, pairs: &[(&[f64], &[f64])]) -> Result<ProxyReport> {
    if pairs.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "insufficient data: {} pairs, at least 3 needed",
            pairs.len()
        )));
    }
    let mut rows: Vec<&[f64]> = Vec::with_capacity(2 * pairs.len());
    for (x, c) in pairs {
        rows.push(x);
        rows.push(c);
    }
    let probas = fs.predict_proba(&encoder.encode_rows(&rows))?;
    let delta: Vec<f64> = probas.chunks(2).map(|p| delta_shift(p[0], p[1])).collect();
    let eps: Vec<Vec<f64>> = pairs.iter().map(|(x, c)| perturbation(encoder, x, c)).collect();
    correlations_from_parts(encoder.column_map(), &eps, &delta)
}

/// Pairs from every included record, optionally only those whose
/// counterfactual flips `f_s`.
pub fn pairs_from_records<'a>(
    sets: &'a [CounterfactualSet],
    records: &[FlipRecord],
    flipped_only: bool,
) -> Vec<(&'a [f64], &'a [f64])> {
    let mut out = Vec::new();
    for (set, rec) in sets.iter().zip(records) {
        if !rec.included {
            continue;
        }
        for (m, &fs_c) in set.members.iter().zip(&rec.fs_members) {
            if !flipped_only || fs_c != rec.fs_origin {
                out.push((set.origin.as_slice(), m.row.as_slice()));
            }
        }
    }
    out
}

impl ProxyReport {
    /// The `k` defined entries with the largest `|ρ|`; ties keep column
    /// order.
    pub fn top_k(&self, k: usize) -> Vec<&ProxyEntry> {
        let mut defined: Vec<&ProxyEntry> = self.entries.iter().filter(|e| e.rho.is_some()).collect();
        if defined.is_empty() {
            log::warn!("every proxy correlation is undefined");
        }
        defined.sort_by(|a, b| {
            let (x, y) = (a.rho.map_or(0.0, f64::abs), b.rho.map_or(0.0, f64::abs));
            y.total_cmp(&x)
        });
        defined.truncate(k);
        defined
    }

    pub fn undefined(&self) -> Vec<&ProxyEntry> {
        self.entries.iter().filter(|e| e.rho.is_none()).collect()
    }

    /// Schema features ranked by their strongest level.
    pub fn top_features(&self, k: usize) -> Vec<&FeatureAggregate> {
        let mut defined: Vec<&FeatureAggregate> = self.features.iter().filter(|f| f.max_abs_rho.is_some()).collect();
        defined.sort_by(|a, b| b.max_abs_rho.unwrap_or(0.0).total_cmp(&a.max_abs_rho.unwrap_or(0.0)));
        defined.truncate(k);
        defined
    }

    /// CSV with columns `feature, level, rho, n_pairs`; undefined `ρ` is an
    /// empty field.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["feature", "level", "rho", "n_pairs"])?;
        for e in &self.entries {
            w.write_record([
                e.feature.clone(),
                e.level.clone().unwrap_or_default(),
                e.rho.map(|r| r.to_string()).unwrap_or_default(),
                e.n_pairs.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}
