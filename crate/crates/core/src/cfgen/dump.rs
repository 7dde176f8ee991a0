//! Line-delimited JSON dump of counterfactual sets, one record per sample.
//!
//! Feature values are written as numbers for numeric features and as level
//! names for ordinal and categorical ones, so dumps stay readable without
//! the schema.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CounterfactualSet, Member, Strategy};
use crate::data::{FeatureSchema, Row};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpMember {
    pub row: Vec<Value>,
    pub distance: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpRecord {
    pub sample_id: usize,
    /// True value of each sensitive column for the origin sample.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sensitive: BTreeMap<String, String>,
    pub origin: Vec<Value>,
    pub desired: u8,
    pub strategy: Strategy,
    pub seed: u64,
    pub requested: usize,
    pub shortfall: bool,
    pub members: Vec<DumpMember>,
}

fn render(schema: &FeatureSchema, row: &[f64]) -> Vec<Value> {
    row.iter()
        .enumerate()
        .map(|(j, &v)| match schema.features[j].kind.levels() {
            Some(_) => Value::String(schema.format_value(j, v)),
            None => serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null),
        })
        .collect()
}

fn parse(schema: &FeatureSchema, values: &[Value], sample: usize) -> Result<Row> {
    if values.len() != schema.n_features() {
        return Err(Error::InvalidInput(format!(
            "dump record {sample}: {} values for {} features",
            values.len(),
            schema.n_features()
        )));
    }
    values
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let parsed = match v {
                Value::String(s) => schema.parse_value(j, s),
                Value::Number(n) if schema.features[j].kind.levels().is_none() => n.as_f64(),
                _ => None,
            };
            parsed.ok_or_else(|| Error::UnknownLevel {
                row: sample,
                column: schema.features[j].name.clone(),
                value: v.to_string(),
            })
        })
        .collect()
}

impl DumpRecord {
    pub fn from_set(
        schema: &FeatureSchema,
        sample_id: usize,
        sensitive: BTreeMap<String, String>,
        set: &CounterfactualSet,
    ) -> Self {
        DumpRecord {
            sample_id,
            sensitive,
            origin: render(schema, &set.origin),
            desired: set.desired,
            strategy: set.strategy,
            seed: set.seed,
            requested: set.requested,
            shortfall: set.shortfall(),
            members: set
                .members
                .iter()
                .map(|m| DumpMember { row: render(schema, &m.row), distance: m.distance, valid: m.valid })
                .collect(),
        }
    }

    pub fn to_set(&self, schema: &FeatureSchema) -> Result<CounterfactualSet> {
        let members = self
            .members
            .iter()
            .map(|m| {
                Ok(Member { row: parse(schema, &m.row, self.sample_id)?, distance: m.distance, valid: m.valid })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CounterfactualSet {
            origin: parse(schema, &self.origin, self.sample_id)?,
            desired: self.desired,
            strategy: self.strategy,
            seed: self.seed,
            requested: self.requested,
            members,
        })
    }
}

pub fn write_dump(path: impl AsRef<Path>, records: &[DumpRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dump(path: impl AsRef<Path>) -> Result<Vec<DumpRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSpec, TargetSpec};

    #[test]
    fn roundtrip() {
        let schema = FeatureSchema::new(
            vec![FeatureSpec::numeric("age"), FeatureSpec::categorical("wc", &["Private", "Public"])],
            TargetSpec { column: "y".into(), positive: "1".into() },
            vec![],
        )
        .unwrap();
        let set = CounterfactualSet {
            origin: vec![31.5, 1.0],
            desired: 1,
            strategy: Strategy::Genetic,
            seed: 7,
            requested: 3,
            members: vec![Member { row: vec![40.0, 0.0], distance: 0.25, valid: true }],
        };
        let mut sens = BTreeMap::new();
        sens.insert("sex".to_string(), "Female".to_string());
        let rec = DumpRecord::from_set(&schema, 4, sens, &set);
        assert_eq!(rec.origin, vec![serde_json::json!(31.5), serde_json::json!("Public")]);
        assert!(rec.shortfall);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cf.jsonl");
        write_dump(&path, &[rec.clone()]).unwrap();
        let back = read_dump(&path).unwrap();
        assert_eq!(back, vec![rec]);
        assert_eq!(back[0].to_set(&schema).unwrap(), set);
    }
}
