use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use super::schema::{FeatureSchema, GroupSpec};
use crate::error::{Error, Result};

/// A feature row in schema space: numeric values as-is, ordinal and
/// categorical values as level indices.
pub type Row = Vec<f64>;

#[derive(Debug, Clone, Default, Serialize)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    pub raw_rows: usize,
    pub dropped_missing: usize,
    pub log: Vec<String>,
}

/// Rows conforming to a [`FeatureSchema`], with the target and every declared
/// sensitive column held apart from the features.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Arc<FeatureSchema>,
    rows: Vec<Row>,
    target: Vec<u8>,
    /// `sensitive[j][i]` is true when row `i` holds the privileged value of
    /// the `j`-th declared sensitive column.
    sensitive: Vec<Vec<bool>>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        schema: Arc<FeatureSchema>,
        rows: Vec<Row>,
        target: Vec<u8>,
        sensitive: Vec<Vec<bool>>,
    ) -> Result<Self> {
        if target.len() != rows.len() {
            return Err(Error::InvalidInput("target length differs from row count".into()));
        }
        if sensitive.len() != schema.sensitive.len()
            || sensitive.iter().any(|c| c.len() != rows.len())
        {
            return Err(Error::InvalidInput("sensitive columns do not match the schema".into()));
        }
        if target.iter().any(|&y| y > 1) {
            return Err(Error::InvalidInput("target must be 0/1".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.n_features() {
                return Err(Error::InvalidInput(format!("row {i} has {} values", row.len())));
            }
            for (j, (&v, f)) in row.iter().zip(&schema.features).enumerate() {
                let ok = match f.kind.levels() {
                    Some(levels) => v >= 0.0 && v.fract() == 0.0 && (v as usize) < levels.len(),
                    None => v.is_finite(),
                };
                if !ok {
                    return Err(Error::InvalidInput(format!(
                        "row {i}: value {v} does not conform to feature `{}`",
                        schema.features[j].name
                    )));
                }
            }
        }
        Ok(Dataset {
            schema,
            rows,
            target,
            sensitive,
            provenance: Provenance::default(),
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn target(&self) -> &[u8] {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Privileged-membership column for a declared sensitive column.
    pub fn sensitive_column(&self, column: &str) -> Result<&[bool]> {
        let j = self
            .schema
            .sensitive_index(column)
            .ok_or_else(|| Error::UnknownColumn(column.to_string()))?;
        Ok(&self.sensitive[j])
    }

    pub fn sensitive_columns(&self) -> &[Vec<bool>] {
        &self.sensitive
    }

    /// Membership of each row in `group.privileged` (true) or
    /// `group.unprivileged` (false), honouring swapped group specs.
    pub fn group_membership(&self, group: &GroupSpec) -> Result<Vec<bool>> {
        let spec = self
            .schema
            .sensitive
            .iter()
            .find(|s| s.column == group.sensitive)
            .ok_or_else(|| Error::UnknownColumn(group.sensitive.clone()))?;
        let col = self.sensitive_column(&group.sensitive)?;
        if group.privileged == spec.privileged && group.unprivileged == spec.unprivileged {
            Ok(col.to_vec())
        } else if group.privileged == spec.unprivileged && group.unprivileged == spec.privileged {
            Ok(col.iter().map(|&b| !b).collect())
        } else {
            Err(Error::InvalidInput(format!(
                "group values ({}, {}) are not the declared values of `{}`",
                group.privileged, group.unprivileged, group.sensitive
            )))
        }
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            target: indices.iter().map(|&i| self.target[i]).collect(),
            sensitive: self
                .sensitive
                .iter()
                .map(|c| indices.iter().map(|&i| c[i]).collect())
                .collect(),
            provenance: Provenance {
                source: self.provenance.source.clone(),
                raw_rows: self.provenance.raw_rows,
                dropped_missing: self.provenance.dropped_missing,
                log: {
                    let mut log = self.provenance.log.clone();
                    log.push(format!("subset of {} rows", indices.len()));
                    log
                },
            },
        }
    }

    /// Write the dataset back as a CSV with features, sensitive columns and
    /// target, using textual level names.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let schema = &self.schema;
        let mut header: Vec<String> = schema.features.iter().map(|f| f.name.clone()).collect();
        header.extend(schema.sensitive.iter().map(|s| s.column.clone()));
        header.push(schema.target.column.clone());
        w.write_record(&header)?;
        let negative = format!("not-{}", schema.target.positive);
        for i in 0..self.len() {
            let mut rec: Vec<String> = (0..schema.n_features())
                .map(|j| schema.format_value(j, self.rows[i][j]))
                .collect();
            for (spec, col) in schema.sensitive.iter().zip(&self.sensitive) {
                if spec.threshold.is_some() {
                    return Err(Error::InvalidInput(format!(
                        "cannot write thresholded sensitive column `{}`",
                        spec.column
                    )));
                }
                rec.push(if col[i] { spec.privileged.clone() } else { spec.unprivileged.clone() });
            }
            rec.push(if self.target[i] == 1 { schema.target.positive.clone() } else { negative.clone() });
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Load a headed CSV under `schema`. Rows with any empty field or the
/// schema's missing sentinel are dropped and counted.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ds = load_csv_reader(file, schema)?;
    ds.provenance.source = Some(path.to_path_buf());
    Ok(ds)
}

pub fn load_csv_reader<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();
    let known = schema.known_columns();
    for h in &headers {
        if !known.contains(h.as_str()) {
            return Err(Error::UnknownColumn(h.clone()));
        }
    }
    let pos: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let lookup = |name: &str| pos.get(name).copied().ok_or_else(|| Error::MissingColumn(name.to_string()));
    let feature_cols: Vec<usize> = schema.features.iter().map(|f| lookup(&f.name)).collect::<Result<_>>()?;
    let target_col = lookup(&schema.target.column)?;
    let sensitive_cols: Vec<usize> = schema.sensitive.iter().map(|s| lookup(&s.column)).collect::<Result<_>>()?;
    let remaps: Vec<Option<&std::collections::BTreeMap<String, String>>> = headers
        .iter()
        .map(|h| schema.remap.iter().find(|r| &r.column == h).map(|r| &r.map))
        .collect();

    let mut rows = Vec::new();
    let mut target = Vec::new();
    let mut sensitive: Vec<Vec<bool>> = vec![Vec::new(); schema.sensitive.len()];
    let mut raw_rows = 0;
    let mut dropped = 0;
    let mut fields: Vec<String> = Vec::with_capacity(headers.len());
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        raw_rows += 1;
        fields.clear();
        for (c, value) in record.iter().enumerate() {
            let mapped = remaps
                .get(c)
                .copied()
                .flatten()
                .and_then(|m| m.get(value))
                .map(String::as_str)
                .unwrap_or(value);
            fields.push(mapped.to_string());
        }
        if fields.len() != headers.len() || fields.iter().any(|v| v.is_empty() || *v == schema.missing) {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(schema.n_features());
        for (j, &c) in feature_cols.iter().enumerate() {
            let text = &fields[c];
            let v = schema.parse_value(j, text).ok_or_else(|| {
                let column = schema.features[j].name.clone();
                if schema.features[j].kind.levels().is_some() {
                    Error::UnknownLevel { row: row_idx, column, value: text.clone() }
                } else {
                    Error::UnparseableNumeric { row: row_idx, column, value: text.clone() }
                }
            })?;
            row.push(v);
        }
        for (j, (&c, spec)) in sensitive_cols.iter().zip(&schema.sensitive).enumerate() {
            let text = &fields[c];
            let privileged = match spec.threshold {
                Some(t) => {
                    let v: f64 = text.parse().map_err(|_| Error::UnparseableNumeric {
                        row: row_idx,
                        column: spec.column.clone(),
                        value: text.clone(),
                    })?;
                    v > t
                }
                None if *text == spec.privileged => true,
                None if *text == spec.unprivileged => false,
                None => {
                    return Err(Error::UnknownLevel {
                        row: row_idx,
                        column: spec.column.clone(),
                        value: text.clone(),
                    })
                }
            };
            sensitive[j].push(privileged);
        }
        target.push(u8::from(fields[target_col] == schema.target.positive));
        rows.push(row);
    }
    let provenance = Provenance {
        source: None,
        raw_rows,
        dropped_missing: dropped,
        log: vec![format!("rows={raw_rows} dropped={dropped}")],
    };
    Ok(Dataset {
        schema: Arc::new(schema.clone()),
        rows,
        target,
        sensitive,
        provenance,
    })
}
