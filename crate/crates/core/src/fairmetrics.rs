//! Counterfactual flip metrics and classical group-fairness metrics.
//!
//! For a negatively predicted sample `x` with counterfactuals `C_x`, the
//! flip rate is the share of members that the sensitive-feature classifier
//! `f_s` places in a different group than `x`:
//!
//! ```text
//! CFlips(x) = |{c ∈ C_x : f_s(c) ≠ f_s(x)}| / |C_x|
//! ```
//!
//! A sample only enters the group averages when `C_x` is non-empty and
//! `f_s` recovers its true group. ΔCFlips is the absolute gap between the
//! privileged and unprivileged averages, in percentage points.
//!
//! ```
//! use cfaudit::fairmetrics::{cflips_group, cflips_sample, delta_cflips, GroupSide};
//!
//! // f_s predicts 1 for the privileged group
//! let records = vec![
//!     cflips_sample(0, true, 1, vec![1, 1, 0, 1]),  // privileged, 1 of 4 flips
//!     cflips_sample(1, false, 0, vec![1, 1]),       // unprivileged, 2 of 2 flip
//!     cflips_sample(2, false, 1, vec![0, 0]),       // f_s misreads the group: excluded
//! ];
//! let p = cflips_group(&records, GroupSide::Privileged, &[]);
//! let u = cflips_group(&records, GroupSide::Unprivileged, &[]);
//! assert_eq!((p.mean, u.mean), (Some(0.25), Some(1.0)));
//! assert_eq!(delta_cflips(&p, &u), Some(75.0));
//! ```

use serde::{Deserialize, Serialize};

use crate::cfgen::CounterfactualSet;
use crate::data::Encoder;
use crate::error::{Error, Result};
use crate::model::ClassifierHandle;

/// Flip outcome for one origin sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipRecord {
    pub sample_id: usize,
    /// True group: `true` for privileged.
    pub privileged: bool,
    /// `f_s(x)`, 1 meaning privileged.
    pub fs_origin: u8,
    /// `f_s(c)` per member, in generation order.
    pub fs_members: Vec<u8>,
    /// `None` when there are no members.
    pub cflips: Option<f64>,
    pub included: bool,
}

fn flip_rate(origin: u8, members: &[u8]) -> Option<f64> {
    if members.is_empty() {
        return None;
    }
    let flips = members.iter().filter(|&&m| m != origin).count();
    Some(flips as f64 / members.len() as f64)
}

/// Flip record from precomputed `f_s` predictions.
pub fn cflips_sample(sample_id: usize, privileged: bool, fs_origin: u8, fs_members: Vec<u8>) -> FlipRecord {
    let cflips = flip_rate(fs_origin, &fs_members);
    let included = cflips.is_some() && (fs_origin == 1) == privileged;
    FlipRecord { sample_id, privileged, fs_origin, fs_members, cflips, included }
}

/// Run `f_s` over every origin and member and build one record per set.
/// `privileged[i]` is the true group of `sets[i]`'s origin.
pub fn flip_records(
    fs: &ClassifierHandle,
    encoder: &Encoder,
    sets: &[CounterfactualSet],
    privileged: &[bool],
    sample_ids: &[usize],
) -> Result<Vec<FlipRecord>> {
    if sets.len() != privileged.len() || sets.len() != sample_ids.len() {
        return Err(Error::InvalidInput("sets, groups and sample ids differ in length".into()));
    }
    let mut rows: Vec<&[f64]> = Vec::new();
    for s in sets {
        rows.push(&s.origin);
        rows.extend(s.members.iter().map(|m| m.row.as_slice()));
    }
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let labels = fs.predict(&encoder.encode_rows(&rows))?;
    let mut at = 0;
    let mut out = Vec::with_capacity(sets.len());
    for ((s, &p), &id) in sets.iter().zip(privileged).zip(sample_ids) {
        let origin = labels[at];
        let members = labels[at + 1..at + 1 + s.members.len()].to_vec();
        at += 1 + s.members.len();
        out.push(cflips_sample(id, p, origin, members));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupSide {
    Privileged,
    Unprivileged,
}

impl GroupSide {
    fn matches(self, privileged: bool) -> bool {
        privileged == (self == GroupSide::Privileged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub length: usize,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFlipSummary {
    pub group: GroupSide,
    /// Records of this group that enter the mean.
    pub n_samples: usize,
    /// Mean CFlips over included records; `None` when there are none.
    pub mean: Option<f64>,
    /// Records of this group left out because `f_s(x)` missed the group.
    pub excluded_misprediction: usize,
    /// Records of this group left out for having no counterfactuals.
    pub excluded_empty: usize,
    pub ablation: Vec<AblationPoint>,
}

fn group_mean(records: &[&FlipRecord], prefix: Option<usize>) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    let total: f64 = records
        .iter()
        .map(|r| {
            let n = prefix.map_or(r.fs_members.len(), |l| l.min(r.fs_members.len()));
            flip_rate(r.fs_origin, &r.fs_members[..n]).unwrap_or(0.0)
        })
        .sum();
    Some(total / records.len() as f64)
}

/// Mean CFlips for one group, with the curve over the given prefix lengths.
pub fn cflips_group(records: &[FlipRecord], group: GroupSide, prefix_lengths: &[usize]) -> GroupFlipSummary {
    let mine: Vec<&FlipRecord> = records.iter().filter(|r| group.matches(r.privileged)).collect();
    let included: Vec<&FlipRecord> = mine.iter().copied().filter(|r| r.included).collect();
    GroupFlipSummary {
        group,
        n_samples: included.len(),
        mean: group_mean(&included, None),
        excluded_misprediction: mine.iter().filter(|r| r.cflips.is_some() && !r.included).count(),
        excluded_empty: mine.iter().filter(|r| r.cflips.is_none()).count(),
        ablation: prefix_lengths
            .iter()
            .map(|&l| AblationPoint { length: l, mean: group_mean(&included, Some(l)) })
            .collect(),
    }
}

/// Mean CFlips per prefix length, recomputed from the first `ℓ` members of
/// every included record of the group.
pub fn ablation_curve(records: &[FlipRecord], group: GroupSide, prefix_lengths: &[usize]) -> Vec<AblationPoint> {
    cflips_group(records, group, prefix_lengths).ablation
}

/// `100 · |mean_unpriv − mean_priv|`, or `None` if either side is undefined.
pub fn delta_cflips(privileged: &GroupFlipSummary, unprivileged: &GroupFlipSummary) -> Option<f64> {
    Some(100.0 * (unprivileged.mean? - privileged.mean?).abs())
}

/// Same gap for a given ablation length.
pub fn delta_at(privileged: &GroupFlipSummary, unprivileged: &GroupFlipSummary, length: usize) -> Option<f64> {
    let find = |s: &GroupFlipSummary| s.ablation.iter().find(|p| p.length == length).and_then(|p| p.mean);
    Some(100.0 * (find(unprivileged)? - find(privileged)?).abs())
}

fn rate(preds: &[u8], keep: impl Fn(usize) -> bool, cell: &str) -> Result<f64> {
    let mut n = 0usize;
    let mut pos = 0usize;
    for (i, &p) in preds.iter().enumerate() {
        if keep(i) {
            n += 1;
            pos += usize::from(p == 1);
        }
    }
    if n == 0 {
        return Err(Error::Undefined(format!("empty cell {cell}")));
    }
    Ok(pos as f64 / n as f64)
}

fn check(preds: &[u8], other: usize) -> Result<()> {
    if preds.len() != other {
        return Err(Error::InvalidInput(format!("{} predictions for {other} rows", preds.len())));
    }
    Ok(())
}

/// Difference in statistical parity: `|P(Ŷ=1|S=1) − P(Ŷ=1|S=0)|`.
pub fn dsp(preds: &[u8], privileged: &[bool]) -> Result<f64> {
    check(preds, privileged.len())?;
    let a = rate(preds, |i| privileged[i], "S=1")?;
    let b = rate(preds, |i| !privileged[i], "S=0")?;
    Ok((a - b).abs())
}

/// Difference in equal opportunity:
/// `|P(Ŷ=1|S=1,Y=1) − P(Ŷ=1|S=0,Y=1)|`.
pub fn deo(preds: &[u8], labels: &[u8], privileged: &[bool]) -> Result<f64> {
    check(preds, privileged.len())?;
    check(labels, privileged.len())?;
    let a = rate(preds, |i| privileged[i] && labels[i] == 1, "S=1,Y=1")?;
    let b = rate(preds, |i| !privileged[i] && labels[i] == 1, "S=0,Y=1")?;
    Ok((a - b).abs())
}

/// Difference in average odds:
/// `½ · |Σ_{y∈{0,1}} (P(Ŷ=1|S=1,Y=y) − P(Ŷ=1|S=0,Y=y))|`.
pub fn dao(preds: &[u8], labels: &[u8], privileged: &[bool]) -> Result<f64> {
    check(preds, privileged.len())?;
    check(labels, privileged.len())?;
    let mut sum = 0.0;
    for y in [0u8, 1] {
        let a = rate(preds, |i| privileged[i] && labels[i] == y, &format!("S=1,Y={y}"))?;
        let b = rate(preds, |i| !privileged[i] && labels[i] == y, &format!("S=0,Y={y}"))?;
        sum += a - b;
    }
    Ok(0.5 * sum.abs())
}

/// DEO, DSP and DAO together; an undefined metric is `None` and its reason
/// is listed in `notes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFairness {
    pub deo: Option<f64>,
    pub dsp: Option<f64>,
    pub dao: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl GroupFairness {
    pub fn compute(preds: &[u8], labels: &[u8], privileged: &[bool]) -> Self {
        let mut notes = Vec::new();
        let mut keep = |name: &str, r: Result<f64>| match r {
            Ok(v) => Some(v),
            Err(e) => {
                notes.push(format!("{name}: {e}"));
                None
            }
        };
        let deo = keep("deo", deo(preds, labels, privileged));
        let dsp = keep("dsp", dsp(preds, privileged));
        let dao = keep("dao", dao(preds, labels, privileged));
        GroupFairness { deo, dsp, dao, notes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_users() {
        // user 2: both counterfactuals land in the other group
        assert_eq!(cflips_sample(2, false, 0, vec![1, 1]).cflips, Some(1.0));
        // user 3: neither does
        assert_eq!(cflips_sample(3, false, 0, vec![0, 0]).cflips, Some(0.0));
        assert_eq!(cflips_sample(4, true, 1, vec![1, 0, 0, 1, 0, 1, 1]).cflips, Some(3.0 / 7.0));
    }

    #[test]
    fn exclusion_rules() {
        let empty = cflips_sample(0, true, 1, vec![]);
        assert_eq!((empty.cflips, empty.included), (None, false));
        let miss = cflips_sample(1, true, 0, vec![1]);
        assert!(!miss.included);
        let s = cflips_group(&[empty, miss], GroupSide::Privileged, &[1]);
        assert_eq!((s.n_samples, s.mean, s.excluded_empty, s.excluded_misprediction), (0, None, 1, 1));
        assert_eq!(s.ablation[0].mean, None);
    }

    #[test]
    fn delta_is_symmetric_and_undefined_propagates() {
        let a = GroupFlipSummary {
            group: GroupSide::Privileged,
            n_samples: 3,
            mean: Some(0.09),
            excluded_misprediction: 0,
            excluded_empty: 0,
            ablation: vec![],
        };
        let b = GroupFlipSummary { group: GroupSide::Unprivileged, mean: Some(0.79), ..a.clone() };
        assert!((delta_cflips(&a, &b).unwrap() - 70.0).abs() < 1e-9);
        assert_eq!(delta_cflips(&a, &b), delta_cflips(&b, &a));
        assert_eq!(delta_cflips(&a, &a), Some(0.0));
        let none = GroupFlipSummary { mean: None, ..a.clone() };
        assert_eq!(delta_cflips(&a, &none), None);
    }

    #[test]
    fn twelve_row_counting_oracle() {
        // rows: (S, Y, Ŷ)
        let rows: [(bool, u8, u8); 12] = [
            (true, 1, 1),
            (true, 1, 1),
            (true, 1, 0),
            (true, 0, 1),
            (true, 0, 0),
            (true, 0, 0),
            (false, 1, 1),
            (false, 1, 0),
            (false, 1, 0),
            (false, 0, 0),
            (false, 0, 0),
            (false, 0, 1),
        ];
        let s: Vec<bool> = rows.iter().map(|r| r.0).collect();
        let y: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let p: Vec<u8> = rows.iter().map(|r| r.2).collect();
        // privileged: TPR 2/3, FPR 1/3, positive rate 3/6; unprivileged: TPR 1/3, FPR 1/3, positive rate 2/6
        assert!((deo(&p, &y, &s).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((dsp(&p, &s).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((dao(&p, &y, &s).unwrap() - 0.5 * (1.0 / 3.0 + 0.0)).abs() < 1e-15);
    }

    #[test]
    fn empty_cell_is_named() {
        let err = deo(&[1, 0], &[0, 1], &[true, true]).unwrap_err();
        assert!(err.to_string().contains("S=1,Y=1") || err.to_string().contains("S=0,Y=1"), "{err}");
        let g = GroupFairness::compute(&[1, 0], &[0, 1], &[true, true]);
        assert_eq!(g.dsp, None);
        assert_eq!(g.notes.len(), 3);
    }

    #[test]
    fn perfect_classifier_has_zero_deo() {
        let y = [1, 0, 1, 1, 0, 0, 1];
        let s = [true, true, false, false, true, false, true];
        assert_eq!(deo(&y, &y, &s).unwrap(), 0.0);
    }

    fn record_strategy() -> impl Strategy<Value = FlipRecord> {
        (any::<bool>(), 0u8..2, prop::collection::vec(0u8..2, 0..30), 0usize..1000)
            .prop_map(|(p, o, m, id)| cflips_sample(id, p, o, m))
    }

    proptest! {
        #[test]
        fn group_mean_matches_hand_sum(records in prop::collection::vec(record_strategy(), 0..60)) {
            for side in [GroupSide::Privileged, GroupSide::Unprivileged] {
                let mut sum = 0.0;
                let mut n = 0usize;
                for r in &records {
                    let want_priv = side == GroupSide::Privileged;
                    if r.privileged != want_priv || r.fs_members.is_empty() || (r.fs_origin == 1) != r.privileged {
                        continue;
                    }
                    let flips = r.fs_members.iter().filter(|&&m| m != r.fs_origin).count();
                    sum += flips as f64 / r.fs_members.len() as f64;
                    n += 1;
                }
                let s = cflips_group(&records, side, &[]);
                prop_assert_eq!(s.n_samples, n);
                match s.mean {
                    Some(m) => prop_assert_eq!(m, sum / n as f64),
                    None => prop_assert_eq!(n, 0),
                }
                if let Some(m) = s.mean {
                    prop_assert!((0.0..=1.0).contains(&m));
                }
            }
        }

        #[test]
        fn ablation_matches_prefix_recomputation(
            records in prop::collection::vec(record_strategy(), 1..40),
            lengths in prop::collection::vec(1usize..40, 1..6),
        ) {
            let curve = ablation_curve(&records, GroupSide::Unprivileged, &lengths);
            for (point, &l) in curve.iter().zip(&lengths) {
                let truncated: Vec<FlipRecord> = records
                    .iter()
                    .map(|r| {
                        let n = l.min(r.fs_members.len());
                        cflips_sample(r.sample_id, r.privileged, r.fs_origin, r.fs_members[..n].to_vec())
                    })
                    .collect();
                prop_assert_eq!(point.mean, cflips_group(&truncated, GroupSide::Unprivileged, &[]).mean);
            }
        }

        #[test]
        fn metrics_ignore_score_transforms(data in prop::collection::vec((any::<bool>(), 0u8..2, 0u8..2), 4..80)) {
            let s: Vec<bool> = data.iter().map(|d| d.0).collect();
            let y: Vec<u8> = data.iter().map(|d| d.1).collect();
            let p: Vec<u8> = data.iter().map(|d| d.2).collect();
            let g = GroupFairness::compute(&p, &y, &s);
            for v in [g.deo, g.dsp, g.dao].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let flipped: Vec<bool> = s.iter().map(|v| !v).collect();
            let h = GroupFairness::compute(&p, &y, &flipped);
            prop_assert_eq!(g.dsp, h.dsp);
        }
    }
}
