//! Metrics and proxy analysis recomputed from a counterfactual dump.

use serde::{Deserialize, Serialize};

use crate::cfgen::{CounterfactualSet, DumpRecord};
use crate::data::{Encoder, FeatureSchema, GroupSpec};
use crate::error::{Error, Result};
use crate::fairmetrics::{cflips_group, delta_cflips, flip_records, FlipRecord, GroupFlipSummary, GroupSide};
use crate::model::ClassifierHandle;
use crate::proxy::{pairs_from_records, proxy_correlations, ProxyReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpMetrics {
    pub samples: usize,
    pub privileged: GroupFlipSummary,
    pub unprivileged: GroupFlipSummary,
    pub delta_cflips: Option<f64>,
}

/// Sets and flip records rebuilt from a dump with a saved `f_s`.
pub fn flips_from_dump(
    schema: &FeatureSchema,
    fs: &ClassifierHandle,
    records: &[DumpRecord],
    group: &GroupSpec,
) -> Result<(Vec<CounterfactualSet>, Vec<FlipRecord>)> {
    let mut sets = Vec::with_capacity(records.len());
    let mut privileged = Vec::with_capacity(records.len());
    let mut ids = Vec::with_capacity(records.len());
    for r in records {
        let value = r.sensitive.get(&group.sensitive).ok_or_else(|| {
            Error::InvalidInput(format!("dump record {} lacks `{}`", r.sample_id, group.sensitive))
        })?;
        let p = if value == &group.privileged {
            true
        } else if value == &group.unprivileged {
            false
        } else {
            return Err(Error::InvalidInput(format!(
                "dump record {}: `{value}` is neither group value",
                r.sample_id
            )));
        };
        sets.push(r.to_set(schema)?);
        privileged.push(p);
        ids.push(r.sample_id);
    }
    let encoder = Encoder::new(schema);
    let flips = flip_records(fs, &encoder, &sets, &privileged, &ids)?;
    Ok((sets, flips))
}

pub fn metrics_from_dump(
    schema: &FeatureSchema,
    fs: &ClassifierHandle,
    records: &[DumpRecord],
    group: &GroupSpec,
    lengths: &[usize],
) -> Result<DumpMetrics> {
    let (_, flips) = flips_from_dump(schema, fs, records, group)?;
    let privileged = cflips_group(&flips, GroupSide::Privileged, lengths);
    let unprivileged = cflips_group(&flips, GroupSide::Unprivileged, lengths);
    Ok(DumpMetrics {
        samples: records.len(),
        delta_cflips: delta_cflips(&privileged, &unprivileged),
        privileged,
        unprivileged,
    })
}

pub fn proxy_from_dump(
    schema: &FeatureSchema,
    fs: &ClassifierHandle,
    records: &[DumpRecord],
    group: &GroupSpec,
    flipped_only: bool,
) -> Result<ProxyReport> {
    let (sets, flips) = flips_from_dump(schema, fs, records, group)?;
    let pairs = pairs_from_records(&sets, &flips, flipped_only);
    proxy_correlations(fs, &Encoder::new(schema), &pairs)
}

/// The sensitive column recorded in a dump, when all records agree on a
/// single one.
pub fn dump_sensitive_column(records: &[DumpRecord]) -> Option<String> {
    let first = records.first()?.sensitive.keys().next()?.clone();
    records
        .iter()
        .all(|r| r.sensitive.len() == 1 && r.sensitive.contains_key(&first))
        .then_some(first)
}
