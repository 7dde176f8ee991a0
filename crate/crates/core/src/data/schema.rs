use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a feature column is interpreted.
///
/// Ordinal and categorical values are stored as the index of their level in
/// schema space; only categorical features are one-hot expanded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Ordinal { levels: Vec<String> },
    Categorical { levels: Vec<String> },
}

impl FeatureKind {
    pub fn levels(&self) -> Option<&[String]> {
        match self {
            FeatureKind::Numeric => None,
            FeatureKind::Ordinal { levels } | FeatureKind::Categorical { levels } => Some(levels),
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, FeatureKind::Categorical { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    /// Counterfactual search never changes this feature.
    #[serde(default, skip_serializing_if = "is_false")]
    pub immutable: bool,
    /// Feasible `[min, max]` for counterfactual search; defaults to the
    /// observed training range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Numeric,
            immutable: false,
            range: None,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: &[&str]) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Categorical {
                levels: levels.iter().map(|s| s.to_string()).collect(),
            },
            immutable: false,
            range: None,
        }
    }

    pub fn ordinal(name: impl Into<String>, levels: &[&str]) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Ordinal {
                levels: levels.iter().map(|s| s.to_string()).collect(),
            },
            immutable: false,
            range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub column: String,
    /// Raw value (after remapping) that counts as the positive label.
    pub positive: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveSpec {
    pub column: String,
    pub privileged: String,
    pub unprivileged: String,
    /// Binarize a numeric column: values strictly above the threshold are
    /// privileged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

/// Value substitution applied to a raw column before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Remap {
    pub column: String,
    pub map: BTreeMap<String, String>,
}

fn default_missing() -> String {
    "?".to_string()
}

/// Declared layout of a tabular dataset: which columns are model features
/// (and of which kind), which is the target, which are sensitive.
///
/// Sensitive and target columns are disjoint from the feature list, so no
/// encoded matrix built from a schema can contain them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Sentinel for a missing value in addition to the empty field.
    #[serde(default = "default_missing")]
    pub missing: String,
    /// Columns present in the CSV but not used.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ignore: Vec<String>,
    pub target: TargetSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub remap: Vec<Remap>,
    #[serde(default)]
    pub sensitive: Vec<SensitiveSpec>,
    pub features: Vec<FeatureSpec>,
}

impl FeatureSchema {
    pub fn new(
        features: Vec<FeatureSpec>,
        target: TargetSpec,
        sensitive: Vec<SensitiveSpec>,
    ) -> Result<Self> {
        let schema = FeatureSchema {
            name: None,
            missing: default_missing(),
            ignore: Vec::new(),
            target,
            remap: Vec::new(),
            sensitive,
            features,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: FeatureSchema = toml::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes to toml")
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
            if let Some(levels) = f.kind.levels() {
                if levels.is_empty() {
                    return Err(Error::Schema(format!("feature `{}` has no levels", f.name)));
                }
                let mut lv = HashSet::new();
                for l in levels {
                    if !lv.insert(l) {
                        return Err(Error::Schema(format!(
                            "feature `{}` repeats level `{l}`",
                            f.name
                        )));
                    }
                }
            }
            if let Some([lo, hi]) = f.range {
                if !(lo <= hi) {
                    return Err(Error::Schema(format!("feature `{}` has range [{lo}, {hi}]", f.name)));
                }
            }
        }
        if self.features.is_empty() {
            return Err(Error::Schema("no features declared".into()));
        }
        if seen.contains(self.target.column.as_str()) {
            return Err(Error::Schema(format!(
                "target `{}` is also a feature",
                self.target.column
            )));
        }
        let mut sens = HashSet::new();
        for s in &self.sensitive {
            if seen.contains(s.column.as_str()) {
                return Err(Error::Schema(format!(
                    "sensitive column `{}` is also a feature",
                    s.column
                )));
            }
            if s.column == self.target.column {
                return Err(Error::Schema(format!("sensitive column `{}` is the target", s.column)));
            }
            if s.privileged == s.unprivileged {
                return Err(Error::Schema(format!(
                    "sensitive column `{}`: privileged and unprivileged values coincide",
                    s.column
                )));
            }
            if !sens.insert(s.column.as_str()) {
                return Err(Error::Schema(format!("sensitive column `{}` declared twice", s.column)));
            }
        }
        for c in &self.ignore {
            if seen.contains(c.as_str()) || sens.contains(c.as_str()) || *c == self.target.column {
                return Err(Error::Schema(format!("ignored column `{c}` is also in use")));
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn sensitive_index(&self, column: &str) -> Option<usize> {
        self.sensitive.iter().position(|s| s.column == column)
    }

    /// Group definition for one declared sensitive column.
    pub fn group(&self, column: &str) -> Result<GroupSpec> {
        let s = self
            .sensitive
            .iter()
            .find(|s| s.column == column)
            .ok_or_else(|| Error::UnknownColumn(column.to_string()))?;
        Ok(GroupSpec {
            sensitive: s.column.clone(),
            privileged: s.privileged.clone(),
            unprivileged: s.unprivileged.clone(),
        })
    }

    /// Every column the CSV header may contain.
    pub(crate) fn known_columns(&self) -> HashSet<&str> {
        let mut cols: HashSet<&str> = self.features.iter().map(|f| f.name.as_str()).collect();
        cols.insert(self.target.column.as_str());
        cols.extend(self.sensitive.iter().map(|s| s.column.as_str()));
        cols.extend(self.ignore.iter().map(|s| s.as_str()));
        cols
    }

    /// Render a schema-space value back to its textual form.
    pub fn format_value(&self, feature: usize, value: f64) -> String {
        match self.features[feature].kind.levels() {
            Some(levels) => levels
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| format!("<level {value}>")),
            None => value.to_string(),
        }
    }

    /// Parse a textual value into schema space.
    pub fn parse_value(&self, feature: usize, text: &str) -> Option<f64> {
        match self.features[feature].kind.levels() {
            Some(levels) => levels.iter().position(|l| l == text).map(|i| i as f64),
            None => text.parse::<f64>().ok().filter(|v| v.is_finite()),
        }
    }
}

/// Privileged (`s⁺`) and unprivileged (`s⁻`) values of one sensitive column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub sensitive: String,
    pub privileged: String,
    pub unprivileged: String,
}

impl GroupSpec {
    /// The same column with the roles of the two values exchanged.
    pub fn swapped(&self) -> GroupSpec {
        GroupSpec {
            sensitive: self.sensitive.clone(),
            privileged: self.unprivileged.clone(),
            unprivileged: self.privileged.clone(),
        }
    }
}
