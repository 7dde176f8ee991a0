use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Which labels define the strata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stratify {
    /// Cross product of the target and every declared sensitive column.
    #[default]
    TargetAndSensitive,
    TargetOnly,
}

/// Row indices of a hold-out split, each list in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Number of test rows for a fraction: `ceil(fraction · n)`, kept inside
/// `[1, n - 1]` for `n ≥ 2`.
pub fn test_size(n: usize, fraction: f64) -> usize {
    let t = (fraction * n as f64).ceil() as usize;
    if n < 2 {
        return t.min(n);
    }
    t.clamp(1, n - 1)
}

fn strata(dataset: &Dataset, how: Stratify) -> BTreeMap<Vec<u8>, Vec<usize>> {
    let mut out: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for i in 0..dataset.len() {
        let mut key = vec![dataset.target()[i]];
        if how == Stratify::TargetAndSensitive {
            key.extend(dataset.sensitive_columns().iter().map(|c| u8::from(c[i])));
        }
        out.entry(key).or_default().push(i);
    }
    out
}

fn stratum_name(dataset: &Dataset, key: &[u8]) -> String {
    let schema = dataset.schema();
    let mut parts = vec![format!("{}={}", schema.target.column, key[0])];
    for (s, &b) in schema.sensitive.iter().zip(&key[1..]) {
        parts.push(format!("{}={}", s.column, if b == 1 { &s.privileged } else { &s.unprivileged }));
    }
    parts.join(",")
}

/// Stratified hold-out split.
///
/// The test size is `ceil(test_fraction · n)`; it is shared among strata by
/// largest remainder (ties go to the stratum that sorts first), and each
/// stratum is shuffled with a ChaCha stream seeded from `seed`.
pub fn stratified_split_indices(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
    how: Stratify,
) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    if dataset.len() < 2 {
        return Err(Error::InvalidInput("need at least two rows to split".into()));
    }
    let strata = strata(dataset, how);
    if let Some((key, _)) = strata.iter().find(|(_, rows)| rows.len() < 2) {
        return Err(Error::SingletonStratum { stratum: stratum_name(dataset, key) });
    }
    let n = dataset.len();
    let n_test = test_size(n, test_fraction);

    let quotas: Vec<f64> = strata.values().map(|r| n_test as f64 * r.len() as f64 / n as f64).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut remaining = n_test - alloc.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..quotas.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &s in by_remainder.iter().cycle() {
        if remaining == 0 {
            break;
        }
        let size = strata.values().nth(s).map(Vec::len).unwrap_or(0);
        if alloc[s] < size {
            alloc[s] += 1;
            remaining -= 1;
        }
    }

    let mut rng = rng_from_seed(seed);
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (rows, &k) in strata.values().zip(&alloc) {
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rng);
        test.extend_from_slice(&shuffled[..k]);
        train.extend_from_slice(&shuffled[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Stratified hold-out split returning `(train, test)` datasets.
pub fn stratified_split(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
    how: Stratify,
) -> Result<(Dataset, Dataset)> {
    let idx = stratified_split_indices(dataset, test_fraction, seed, how)?;
    Ok((dataset.subset(&idx.train), dataset.subset(&idx.test)))
}

/// Like [`stratified_split`] with target-and-sensitive strata, falling back
/// to target-only strata (with a warning) when a stratum has a single row.
pub fn stratified_split_with_fallback(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(SplitIndices, Stratify)> {
    match stratified_split_indices(dataset, test_fraction, seed, Stratify::TargetAndSensitive) {
        Ok(idx) => Ok((idx, Stratify::TargetAndSensitive)),
        Err(Error::SingletonStratum { stratum }) => {
            log::warn!("stratum {stratum} has one row; stratifying on the target only");
            let idx = stratified_split_indices(dataset, test_fraction, seed, Stratify::TargetOnly)?;
            Ok((idx, Stratify::TargetOnly))
        }
        Err(e) => Err(e),
    }
}
