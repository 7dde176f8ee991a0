use serde::Serialize;

use super::dataset::Dataset;
use super::encode::Encoder;
use super::schema::GroupSpec;
use crate::error::{Error, Result};
use crate::stats::{pearson, spearman};

fn counts(dataset: &Dataset, group: &GroupSpec) -> Result<[(usize, usize); 2]> {
    let member = dataset.group_membership(group)?;
    // [privileged, unprivileged] as (rows, positives)
    let mut c = [(0usize, 0usize); 2];
    for (&m, &y) in member.iter().zip(dataset.target()) {
        let slot = &mut c[usize::from(!m)];
        slot.0 += 1;
        slot.1 += usize::from(y);
    }
    Ok(c)
}

/// A-priori statistical parity `P(y=1 | s⁺) − P(y=1 | s⁻)` on ground-truth
/// labels.
pub fn ex_ante_sp(dataset: &Dataset, group: &GroupSpec) -> Result<f64> {
    let [(np, pp), (nu, pu)] = counts(dataset, group)?;
    if np == 0 {
        return Err(Error::Undefined(format!("no rows with {}={}", group.sensitive, group.privileged)));
    }
    if nu == 0 {
        return Err(Error::Undefined(format!("no rows with {}={}", group.sensitive, group.unprivileged)));
    }
    Ok(pp as f64 / np as f64 - pu as f64 / nu as f64)
}

/// `(P(s⁺), P(s⁻))` over the dataset rows.
pub fn group_distribution(dataset: &Dataset, group: &GroupSpec) -> Result<(f64, f64)> {
    let [(np, _), (nu, _)] = counts(dataset, group)?;
    let n = (np + nu) as f64;
    if n == 0.0 {
        return Err(Error::Undefined("empty dataset".into()));
    }
    Ok((np as f64 / n, nu as f64 / n))
}

/// `(P(y=1), P(y=0))`.
pub fn target_distribution(dataset: &Dataset) -> (f64, f64) {
    let n = dataset.len() as f64;
    let pos = dataset.target().iter().filter(|&&y| y == 1).count() as f64;
    (pos / n, 1.0 - pos / n)
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureCorrelation {
    pub column: String,
    pub sensitive: String,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

/// Pearson and Spearman correlation of every encoded feature column with
/// every sensitive column (privileged = 1). Used to decide by hand which
/// features to drop from a schema.
pub fn sensitive_correlations(dataset: &Dataset) -> Result<Vec<FeatureCorrelation>> {
    let enc = Encoder::new(dataset.schema());
    let m = enc.encode(dataset)?;
    let mut out = Vec::new();
    for (spec, col) in dataset.schema().sensitive.iter().zip(dataset.sensitive_columns()) {
        let s: Vec<f64> = col.iter().map(|&b| f64::from(u8::from(b))).collect();
        for (j, c) in enc.column_map().columns().iter().enumerate() {
            let x: Vec<f64> = m.matrix.column(j).to_vec();
            out.push(FeatureCorrelation {
                column: c.label(),
                sensitive: spec.column.clone(),
                pearson: pearson(&x, &s),
                spearman: spearman(&x, &s),
            });
        }
    }
    Ok(out)
}
