//! Grid search with stratified k-fold cross-validation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{auc, f1_score};
use super::{fit, Hyperparams};
use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Auc,
    F1,
}

/// Base hyperparameters plus candidate values per field. Cells are the
/// cartesian product with keys in alphabetical order, the last key varying
/// fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub base: Hyperparams,
    #[serde(default)]
    pub values: BTreeMap<String, Vec<serde_json::Value>>,
}

impl ParamGrid {
    pub fn single(base: Hyperparams) -> Self {
        ParamGrid { base, values: BTreeMap::new() }
    }

    pub fn new(base: Hyperparams, values: BTreeMap<String, Vec<serde_json::Value>>) -> Self {
        ParamGrid { base, values }
    }

    pub fn cells(&self) -> Result<Vec<Hyperparams>> {
        let base = serde_json::to_value(&self.base)?;
        let obj = base.as_object().ok_or_else(|| Error::Config("hyperparameters are not a table".into()))?;
        for (k, v) in &self.values {
            if k == "family" || !obj.contains_key(k) {
                return Err(Error::Config(format!("unknown hyperparameter {k:?} in grid")));
            }
            if v.is_empty() {
                return Err(Error::Config(format!("grid entry {k:?} has no candidates")));
            }
        }
        let keys: Vec<&String> = self.values.keys().collect();
        let mut combos: Vec<serde_json::Map<String, serde_json::Value>> = vec![obj.clone()];
        for k in keys {
            let mut next = Vec::with_capacity(combos.len() * self.values[k].len());
            for c in &combos {
                for v in &self.values[k] {
                    let mut c = c.clone();
                    c.insert(k.clone(), v.clone());
                    next.push(c);
                }
            }
            combos = next;
        }
        combos
            .into_iter()
            .map(|c| {
                serde_json::from_value(serde_json::Value::Object(c))
                    .map_err(|e| Error::Config(format!("invalid grid cell: {e}")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub objective: Objective,
    pub grid: ParamGrid,
    pub seed: u64,
}

impl CvConfig {
    pub fn new(grid: ParamGrid, objective: Objective, seed: u64) -> Self {
        CvConfig { folds: 5, objective, grid, seed }
    }

    fn validate(&self, labels: &[u8]) -> Result<Vec<Hyperparams>> {
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        let pos = labels.iter().filter(|&&y| y == 1).count();
        let smallest = pos.min(labels.len() - pos);
        if self.folds > smallest {
            return Err(Error::Config(format!(
                "{} folds exceed the smallest class count {smallest}",
                self.folds
            )));
        }
        let cells = self.grid.cells()?;
        if cells.is_empty() {
            return Err(Error::Config("empty grid".into()));
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub params: Hyperparams,
    pub fold_scores: Vec<Option<f64>>,
    /// Mean fold score; `None` when some fold was undefined.
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: Hyperparams,
    pub best_score: f64,
    pub cells: Vec<CellScore>,
}

/// Fold index per row. Each class is shuffled separately and dealt
/// round-robin over the folds.
pub fn stratified_folds(labels: &[u8], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    let mut assignment = vec![0; labels.len()];
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            assignment[i] = j % folds;
        }
    }
    assignment
}

fn fold_score(
    params: &Hyperparams,
    x: &EncodedMatrix,
    labels: &[u8],
    assignment: &[usize],
    fold: usize,
    objective: Objective,
    seed: u64,
) -> Option<f64> {
    let train: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] != fold).collect();
    let valid: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] == fold).collect();
    let yv: Vec<u8> = valid.iter().map(|&i| labels[i]).collect();
    if yv.iter().all(|&y| y == yv[0]) {
        return None;
    }
    let yt: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
    let model = fit(params, &x.select_rows(&train), &yt, seed).ok()?;
    let (preds, probas) = model.predict_with_proba(&x.select_rows(&valid)).ok()?;
    match objective {
        Objective::Auc => auc(&probas, &yv),
        Objective::F1 => Some(f1_score(&preds, &yv)),
    }
}

/// Score every grid cell by mean fold objective and return the best one.
/// Ties go to the earliest cell. Cells with an undefined fold are skipped.
pub fn grid_search_cv(cv: &CvConfig, train: &EncodedMatrix, labels: &[u8]) -> Result<GridSearchResult> {
    if labels.len() != train.nrows() {
        return Err(Error::InvalidInput(format!("{} labels for {} rows", labels.len(), train.nrows())));
    }
    let cells = cv.validate(labels)?;
    let assignment = stratified_folds(labels, cv.folds, cv.seed);
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..cv.folds).map(move |f| (c, f))).collect();
    let scores: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(c, f)| {
            fold_score(&cells[c], train, labels, &assignment, f, cv.objective, derive_seed(cv.seed, f as u64))
        })
        .collect();

    let mut out = Vec::with_capacity(cells.len());
    let mut best: Option<(usize, f64)> = None;
    for (c, params) in cells.into_iter().enumerate() {
        let fold_scores = scores[c * cv.folds..(c + 1) * cv.folds].to_vec();
        let mean = if fold_scores.iter().all(Option::is_some) {
            Some(fold_scores.iter().flatten().sum::<f64>() / cv.folds as f64)
        } else {
            log::warn!("grid cell {c} skipped: a fold score is undefined");
            None
        };
        if let Some(m) = mean {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((c, m));
            }
        }
        out.push(CellScore { params, fold_scores, mean });
    }
    let (bi, best_score) = best.ok_or_else(|| Error::Undefined("no grid cell produced a defined score".into()))?;
    Ok(GridSearchResult { best: out[bi].params.clone(), best_score, cells: out })
}
