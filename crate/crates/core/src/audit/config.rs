use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cfgen::{GeneticConfig, Strategy};
use crate::error::{Error, Result};
use crate::model::{ExternalConfig, Family, Hyperparams, ParamGrid};

fn default_folds() -> usize {
    5
}

fn default_timeout() -> f64 {
    30.0
}

/// How to obtain one classifier: a built-in family with fixed parameters
/// and an optional search grid, or an external adapter command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    /// Overrides of the family's default hyperparameters.
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    /// Candidate values per hyperparameter; empty means no search.
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<serde_json::Value>>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Adapter program and arguments (external family only).
    #[serde(default)]
    pub command: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

impl ModelSpec {
    pub fn builtin(family: Family) -> Self {
        ModelSpec {
            family,
            params: BTreeMap::new(),
            grid: BTreeMap::new(),
            folds: default_folds(),
            command: Vec::new(),
            timeout_secs: default_timeout(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn with_grid(mut self, key: &str, values: Vec<serde_json::Value>) -> Self {
        self.grid.insert(key.to_string(), values);
        self
    }

    /// Base hyperparameters: family defaults with `params` applied.
    pub fn hyperparams(&self) -> Result<Hyperparams> {
        if self.family == Family::External {
            if self.command.is_empty() {
                return Err(Error::Config("external model needs a command".into()));
            }
            if !self.grid.is_empty() {
                return Err(Error::Config("external models cannot be grid-searched".into()));
            }
            return Ok(Hyperparams::External(ExternalConfig {
                command: self.command.clone(),
                timeout_secs: self.timeout_secs,
            }));
        }
        if !self.command.is_empty() {
            return Err(Error::Config(format!("command given for built-in family {}", self.family)));
        }
        let base = Hyperparams::default_for(self.family).expect("built-in family");
        let mut value = serde_json::to_value(&base)?;
        let obj = value.as_object_mut().expect("hyperparameters serialize to an object");
        for (k, v) in &self.params {
            if k == "family" || !obj.contains_key(k) {
                return Err(Error::Config(format!("unknown {} hyperparameter {k:?}", self.family)));
            }
            obj.insert(k.clone(), v.clone());
        }
        serde_json::from_value(value).map_err(|e| Error::Config(format!("invalid {} hyperparameters: {e}", self.family)))
    }

    pub fn grid(&self) -> Result<ParamGrid> {
        Ok(ParamGrid::new(self.hyperparams()?, self.grid.clone()))
    }

    fn validate(&self, role: &str) -> Result<()> {
        let grid = self.grid().map_err(|e| Error::Config(format!("{role}: {e}")))?;
        grid.cells().map_err(|e| Error::Config(format!("{role}: {e}")))?;
        if !self.grid.is_empty() && self.folds < 2 {
            return Err(Error::Config(format!("{role}: folds must be at least 2")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyChoice {
    Kdtree,
    Genetic,
    Both,
}

impl StrategyChoice {
    pub fn strategies(self) -> Vec<Strategy> {
        match self {
            StrategyChoice::Kdtree => vec![Strategy::Kdtree],
            StrategyChoice::Genetic => vec![Strategy::Genetic],
            StrategyChoice::Both => vec![Strategy::Kdtree, Strategy::Genetic],
        }
    }
}

impl std::str::FromStr for StrategyChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kdtree" => Ok(StrategyChoice::Kdtree),
            "genetic" => Ok(StrategyChoice::Genetic),
            "both" => Ok(StrategyChoice::Both),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

fn default_k() -> usize {
    100
}
fn default_fraction() -> f64 {
    0.1
}
fn default_seed() -> u64 {
    42
}
fn default_strategy() -> StrategyChoice {
    StrategyChoice::Kdtree
}
fn default_ablation() -> Vec<usize> {
    vec![1, 5, 10, 20, 50, 100]
}
fn default_dm() -> ModelSpec {
    ModelSpec::builtin(Family::LogisticRegression)
}

/// One audit run. Relative paths are resolved against the directory of the
/// config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    /// Sensitive column audited in this run.
    pub sensitive: String,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyChoice,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Generation threads; 0 uses every core. Results do not depend on it.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Prefix lengths for the ablation curve; `k` is always added.
    #[serde(default = "default_ablation")]
    pub ablation: Vec<usize>,
    /// Correlate only counterfactuals that flip `f_s`.
    #[serde(default)]
    pub restrict_flipped_pairs: bool,
    #[serde(default = "default_dm")]
    pub decision_maker: ModelSpec,
    #[serde(default = "default_dm")]
    pub sensitive_classifier: ModelSpec,
    #[serde(default)]
    pub genetic: GeneticConfig,
}

impl AuditConfig {
    pub fn new(data: impl Into<PathBuf>, schema: impl Into<PathBuf>, sensitive: impl Into<String>) -> Self {
        AuditConfig {
            data: data.into(),
            schema: schema.into(),
            sensitive: sensitive.into(),
            strategy: default_strategy(),
            k: default_k(),
            test_fraction: default_fraction(),
            seed: default_seed(),
            workers: 0,
            out: None,
            ablation: default_ablation(),
            restrict_flipped_pairs: false,
            decision_maker: default_dm(),
            sensitive_classifier: default_dm(),
            genetic: GeneticConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: AuditConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for p in [&mut cfg.data, &mut cfg.schema] {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        if let Some(out) = cfg.out.as_mut() {
            if out.is_relative() {
                *out = base_dir.join(&*out);
            }
        }
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }

    /// Ablation lengths in ascending order, deduplicated, including `k`.
    pub fn ablation_lengths(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.ablation.iter().copied().filter(|&l| l >= 1).collect();
        v.push(self.k);
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Checks that need no data: run before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction {} outside (0, 1)", self.test_fraction)));
        }
        if self.ablation.contains(&0) {
            return Err(Error::Config("ablation lengths must be at least 1".into()));
        }
        if self.strategy != StrategyChoice::Kdtree {
            self.genetic.validate(self.k)?;
        }
        self.decision_maker.validate("decision_maker")?;
        self.sensitive_classifier.validate("sensitive_classifier")?;
        Ok(())
    }

    /// [`AuditConfig::validate`] plus existence of the input files.
    pub fn validate_files(&self) -> Result<()> {
        self.validate()?;
        for (what, p) in [("data", &self.data), ("schema", &self.schema)] {
            if !p.is_file() {
                return Err(Error::Config(format!("{what} file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"
data = "german.csv"
schema = "german.toml"
sensitive = "personal_status"
strategy = "both"
k = 20

[decision_maker]
family = "decision-tree"
params = { max_depth = 4 }
grid = { min_samples_leaf = [1, 5] }

[sensitive_classifier]
family = "logistic-regression"

[genetic]
population = 60
"#;

    #[test]
    fn parses_and_resolves_paths() {
        let cfg = AuditConfig::from_toml_str(CONFIG, Path::new("/data/german")).unwrap();
        assert_eq!(cfg.data, PathBuf::from("/data/german/german.csv"));
        assert_eq!(cfg.strategy.strategies(), vec![Strategy::Kdtree, Strategy::Genetic]);
        assert_eq!(cfg.ablation_lengths(), vec![1, 5, 10, 20, 50, 100]);
        assert_eq!(cfg.genetic.population, 60);
        cfg.validate().unwrap();
        match cfg.decision_maker.hyperparams().unwrap() {
            Hyperparams::DecisionTree(t) => assert_eq!(t.max_depth, 4),
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.decision_maker.grid().unwrap().cells().unwrap().len(), 2);
    }

    #[test]
    fn zero_k_is_rejected() {
        let mut cfg = AuditConfig::from_toml_str(CONFIG, Path::new("/")).unwrap();
        cfg.k = 0;
        let err = cfg.validate().unwrap_err();
        assert!(err.is_validation(), "{err}");
    }

    #[test]
    fn unknown_param_is_rejected() {
        let spec = ModelSpec::builtin(Family::Mlp).with_param("depth", 3);
        assert!(spec.hyperparams().is_err());
        let ext = ModelSpec::builtin(Family::External);
        assert!(ext.hyperparams().is_err());
    }

    #[test]
    fn genetic_population_must_cover_k() {
        let mut cfg = AuditConfig::from_toml_str(CONFIG, Path::new("/")).unwrap();
        cfg.k = 40;
        assert!(cfg.validate().is_err());
    }
}
