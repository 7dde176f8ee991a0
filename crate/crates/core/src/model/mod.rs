//! Binary classifiers behind one handle: logistic regression, CART, a small
//! MLP, and external processes.
//!
//! ```
//! use cfaudit::model::{fit, Hyperparams, TreeParams};
//! use cfaudit::data::{ColumnMap, EncodedColumn, EncodedMatrix};
//! use ndarray::array;
//! use std::sync::Arc;
//!
//! let map = Arc::new(ColumnMap(vec![
//!     EncodedColumn { feature: "a".into(), level: None },
//!     EncodedColumn { feature: "b".into(), level: None },
//! ]));
//! let x = EncodedMatrix::new(array![[0., 0.], [0., 1.], [1., 0.], [1., 1.]], map)?;
//! let xor = [0, 1, 1, 0];
//! let tree = fit(&Hyperparams::DecisionTree(TreeParams { max_depth: 2, ..Default::default() }), &x, &xor, 0)?;
//! assert_eq!(tree.predict(&x)?, xor);
//! # Ok::<(), cfaudit::Error>(())
//! ```

mod cv;
mod external;
mod logistic;
mod metrics;
mod mlp;
mod scaler;
mod tree;

use std::path::Path;
use std::sync::Arc;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use cv::{grid_search_cv, stratified_folds, CellScore, CvConfig, GridSearchResult, Objective, ParamGrid};
pub use external::{AdapterProcess, ExternalConfig, ExternalModel};
pub use logistic::{sigmoid, LogisticModel, LogisticParams};
pub use metrics::{auc, confusion, evaluate, f1_score, report_from_predictions, EvalReport};
pub use mlp::{Layer, MlpModel, MlpNet, MlpParams};
pub use scaler::Standardizer;
pub use tree::{DecisionTree, Node, TreeParams};

use crate::data::{ColumnMap, EncodedMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    LogisticRegression,
    DecisionTree,
    Mlp,
    External,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::LogisticRegression => "logistic-regression",
            Family::DecisionTree => "decision-tree",
            Family::Mlp => "mlp",
            Family::External => "external",
        })
    }
}

/// A model family together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Hyperparams {
    LogisticRegression(LogisticParams),
    DecisionTree(TreeParams),
    Mlp(MlpParams),
    External(ExternalConfig),
}

impl Hyperparams {
    pub fn family(&self) -> Family {
        match self {
            Hyperparams::LogisticRegression(_) => Family::LogisticRegression,
            Hyperparams::DecisionTree(_) => Family::DecisionTree,
            Hyperparams::Mlp(_) => Family::Mlp,
            Hyperparams::External(_) => Family::External,
        }
    }

    /// Default hyperparameters for a built-in family.
    pub fn default_for(family: Family) -> Option<Self> {
        match family {
            Family::LogisticRegression => Some(Hyperparams::LogisticRegression(Default::default())),
            Family::DecisionTree => Some(Hyperparams::DecisionTree(Default::default())),
            Family::Mlp => Some(Hyperparams::Mlp(Default::default())),
            Family::External => None,
        }
    }
}

#[derive(Debug)]
enum Fitted {
    Logistic(LogisticModel),
    Tree(DecisionTree),
    Mlp(MlpModel),
    External(ExternalModel),
}

/// A fitted binary classifier. Immutable and safe to share across threads.
#[derive(Debug)]
pub struct ClassifierHandle {
    hyperparameters: Hyperparams,
    model: Fitted,
    column_map: Arc<ColumnMap>,
    seed: u64,
    threshold: f64,
    warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    family: Family,
    hyperparameters: Hyperparams,
    parameters: serde_json::Value,
    column_map: ColumnMap,
    seed: u64,
    threshold: f64,
}

/// Fit a classifier on encoded rows and 0/1 labels.
///
/// Deterministic for a fixed seed. Logistic regression that stops at its
/// iteration cap still returns a handle, with a warning attached.
pub fn fit(params: &Hyperparams, train: &EncodedMatrix, labels: &[u8], seed: u64) -> Result<ClassifierHandle> {
    if labels.len() != train.nrows() {
        return Err(Error::InvalidInput(format!("{} labels for {} rows", labels.len(), train.nrows())));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::InvalidInput("labels must be 0 or 1".into()));
    }
    if train.matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("training matrix has non-finite entries".into()));
    }
    let mut warnings = Vec::new();
    let model = match params {
        Hyperparams::External(cfg) => {
            Fitted::External(ExternalModel::connect(cfg.clone(), train.column_map.labels())?)
        }
        _ => {
            if labels.is_empty() || labels.iter().all(|&y| y == labels[0]) {
                return Err(Error::SingleClass);
            }
            let x = train.view();
            match params {
                Hyperparams::LogisticRegression(p) => {
                    let m = LogisticModel::fit(x, labels, p)?;
                    if !m.converged {
                        let w = format!("logistic regression did not converge in {} iterations", m.iterations);
                        log::warn!("{w}");
                        warnings.push(w);
                    }
                    Fitted::Logistic(m)
                }
                Hyperparams::DecisionTree(p) => Fitted::Tree(DecisionTree::fit(x, labels, p)),
                Hyperparams::Mlp(p) => Fitted::Mlp(MlpModel::fit(x, labels, p, seed)?),
                Hyperparams::External(_) => unreachable!(),
            }
        }
    };
    Ok(ClassifierHandle {
        hyperparameters: params.clone(),
        model,
        column_map: Arc::clone(&train.column_map),
        seed,
        threshold: 0.5,
        warnings,
    })
}

impl ClassifierHandle {
    /// Wrap an already fitted logistic model.
    pub fn from_logistic(model: LogisticModel, column_map: Arc<ColumnMap>) -> Result<Self> {
        if model.weights.len() != column_map.len() {
            return Err(Error::ColumnMapMismatch);
        }
        Ok(ClassifierHandle {
            hyperparameters: Hyperparams::LogisticRegression(LogisticParams { l2: model.l2, ..Default::default() }),
            model: Fitted::Logistic(model),
            column_map,
            seed: 0,
            threshold: 0.5,
            warnings: Vec::new(),
        })
    }

    pub fn family(&self) -> Family {
        self.hyperparameters.family()
    }

    pub fn hyperparameters(&self) -> &Hyperparams {
        &self.hyperparameters
    }

    pub fn column_map(&self) -> &Arc<ColumnMap> {
        &self.column_map
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn logistic(&self) -> Option<&LogisticModel> {
        match &self.model {
            Fitted::Logistic(m) => Some(m),
            _ => None,
        }
    }

    pub fn tree(&self) -> Option<&DecisionTree> {
        match &self.model {
            Fitted::Tree(m) => Some(m),
            _ => None,
        }
    }

    pub fn mlp(&self) -> Option<&MlpModel> {
        match &self.model {
            Fitted::Mlp(m) => Some(m),
            _ => None,
        }
    }

    fn check(&self, x: &EncodedMatrix) -> Result<()> {
        if Arc::ptr_eq(&self.column_map, &x.column_map) || *self.column_map == *x.column_map {
            Ok(())
        } else {
            Err(Error::ColumnMapMismatch)
        }
    }

    fn raw(&self, x: ArrayView2<'_, f64>) -> Result<(Vec<u8>, Vec<f64>)> {
        let probas = match &self.model {
            Fitted::Logistic(m) => m.predict_proba(x),
            Fitted::Tree(m) => m.predict_proba(x),
            Fitted::Mlp(m) => m.predict_proba(x),
            Fitted::External(m) => return m.predict(x),
        };
        let labels = probas.iter().map(|&p| u8::from(p >= self.threshold)).collect();
        Ok((labels, probas))
    }

    /// Labels and probabilities of the positive class in one pass.
    pub fn predict_with_proba(&self, x: &EncodedMatrix) -> Result<(Vec<u8>, Vec<f64>)> {
        self.check(x)?;
        if x.nrows() == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        self.raw(x.view())
    }

    pub fn predict_proba(&self, x: &EncodedMatrix) -> Result<Vec<f64>> {
        self.predict_with_proba(x).map(|r| r.1)
    }

    /// `1` iff the probability reaches the threshold (for external models,
    /// the adapter's labels).
    pub fn predict(&self, x: &EncodedMatrix) -> Result<Vec<u8>> {
        self.predict_with_proba(x).map(|r| r.0)
    }

    pub fn to_json(&self) -> Result<String> {
        let parameters = match &self.model {
            Fitted::Logistic(m) => serde_json::to_value(m)?,
            Fitted::Tree(m) => serde_json::to_value(m)?,
            Fitted::Mlp(m) => serde_json::to_value(m)?,
            Fitted::External(m) => serde_json::to_value(m)?,
        };
        let file = ModelFile {
            family: self.family(),
            hyperparameters: self.hyperparameters.clone(),
            parameters,
            column_map: (*self.column_map).clone(),
            seed: self.seed,
            threshold: self.threshold,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Restore a handle written by [`ClassifierHandle::to_json`]. External
    /// models reconnect to their adapter.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.family != file.hyperparameters.family() {
            return Err(Error::InvalidInput(format!(
                "family {} does not match hyperparameters for {}",
                file.family,
                file.hyperparameters.family()
            )));
        }
        let model = match file.family {
            Family::LogisticRegression => Fitted::Logistic(serde_json::from_value(file.parameters)?),
            Family::DecisionTree => Fitted::Tree(serde_json::from_value(file.parameters)?),
            Family::Mlp => Fitted::Mlp(serde_json::from_value(file.parameters)?),
            Family::External => {
                let m: ExternalModel = serde_json::from_value(file.parameters)?;
                Fitted::External(ExternalModel::connect(m.config, m.columns)?)
            }
        };
        Ok(ClassifierHandle {
            hyperparameters: file.hyperparameters,
            model,
            column_map: Arc::new(file.column_map),
            seed: file.seed,
            threshold: file.threshold,
            warnings: Vec::new(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
