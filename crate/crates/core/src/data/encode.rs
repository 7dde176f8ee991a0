use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Row};
use super::schema::{FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

/// Source of one encoded column: a numeric/ordinal feature (`level = None`)
/// or one level of a categorical feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub feature: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
}

impl EncodedColumn {
    pub fn label(&self) -> String {
        match &self.level {
            Some(l) => format!("{}={}", self.feature, l),
            None => self.feature.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnMap(pub Vec<EncodedColumn>);

impl ColumnMap {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn columns(&self) -> &[EncodedColumn] {
        &self.0
    }

    pub fn labels(&self) -> Vec<String> {
        self.0.iter().map(EncodedColumn::label).collect()
    }
}

/// Model-ready matrix: one row per sample, categorical features expanded to
/// indicator columns.
#[derive(Debug, Clone)]
pub struct EncodedMatrix {
    pub matrix: Array2<f64>,
    pub column_map: Arc<ColumnMap>,
}

impl EncodedMatrix {
    pub fn new(matrix: Array2<f64>, column_map: Arc<ColumnMap>) -> Result<Self> {
        if matrix.ncols() != column_map.len() {
            return Err(Error::InvalidInput(format!(
                "matrix has {} columns, column map {}",
                matrix.ncols(),
                column_map.len()
            )));
        }
        Ok(EncodedMatrix { matrix, column_map })
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(i)
    }

    pub fn select_rows(&self, indices: &[usize]) -> EncodedMatrix {
        EncodedMatrix {
            matrix: self.matrix.select(ndarray::Axis(0), indices),
            column_map: Arc::clone(&self.column_map),
        }
    }
}

#[derive(Debug, Clone)]
enum Slot {
    Single,
    OneHot(usize),
}

/// Maps schema-space rows to encoded rows and back.
#[derive(Debug, Clone)]
pub struct Encoder {
    slots: Vec<(usize, Slot)>,
    width: usize,
    column_map: Arc<ColumnMap>,
}

impl Encoder {
    pub fn new(schema: &FeatureSchema) -> Self {
        let mut slots = Vec::with_capacity(schema.n_features());
        let mut cols = Vec::new();
        for f in &schema.features {
            let offset = cols.len();
            match &f.kind {
                FeatureKind::Numeric | FeatureKind::Ordinal { .. } => {
                    slots.push((offset, Slot::Single));
                    cols.push(EncodedColumn { feature: f.name.clone(), level: None });
                }
                FeatureKind::Categorical { levels } => {
                    slots.push((offset, Slot::OneHot(levels.len())));
                    cols.extend(levels.iter().map(|l| EncodedColumn {
                        feature: f.name.clone(),
                        level: Some(l.clone()),
                    }));
                }
            }
        }
        Encoder { slots, width: cols.len(), column_map: Arc::new(ColumnMap(cols)) }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn column_map(&self) -> &Arc<ColumnMap> {
        &self.column_map
    }

    /// Encoded column range belonging to schema feature `feature`.
    pub fn feature_span(&self, feature: usize) -> std::ops::Range<usize> {
        let (offset, slot) = &self.slots[feature];
        match slot {
            Slot::Single => *offset..offset + 1,
            Slot::OneHot(n) => *offset..offset + n,
        }
    }

    pub fn encode_into(&self, row: &[f64], out: &mut [f64]) {
        debug_assert_eq!(row.len(), self.slots.len());
        debug_assert_eq!(out.len(), self.width);
        for (&v, (offset, slot)) in row.iter().zip(&self.slots) {
            match slot {
                Slot::Single => out[*offset] = v,
                Slot::OneHot(n) => {
                    out[*offset..offset + n].fill(0.0);
                    out[offset + v as usize] = 1.0;
                }
            }
        }
    }

    pub fn encode_row(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        self.encode_into(row, &mut out);
        out
    }

    pub fn encode_rows<R: AsRef<[f64]>>(&self, rows: &[R]) -> EncodedMatrix {
        let mut m = Array2::zeros((rows.len(), self.width));
        for (i, r) in rows.iter().enumerate() {
            let mut out = m.row_mut(i);
            self.encode_into(r.as_ref(), out.as_slice_mut().expect("standard layout"));
        }
        EncodedMatrix { matrix: m, column_map: Arc::clone(&self.column_map) }
    }

    /// Encode every row of a non-empty dataset.
    pub fn encode(&self, dataset: &Dataset) -> Result<EncodedMatrix> {
        if dataset.is_empty() {
            return Err(Error::InvalidInput("cannot encode an empty dataset".into()));
        }
        Ok(self.encode_rows(dataset.rows()))
    }

    /// Inverse of [`Encoder::encode_row`]. One-hot blocks must contain exactly
    /// one `1`.
    pub fn decode_row(&self, encoded: &[f64]) -> Result<Row> {
        if encoded.len() != self.width {
            return Err(Error::InvalidInput(format!(
                "encoded row has {} values, expected {}",
                encoded.len(),
                self.width
            )));
        }
        self.slots
            .iter()
            .enumerate()
            .map(|(j, (offset, slot))| match slot {
                Slot::Single => Ok(encoded[*offset]),
                Slot::OneHot(n) => {
                    let block = &encoded[*offset..offset + n];
                    let hot: Vec<usize> = (0..*n).filter(|&l| block[l] == 1.0).collect();
                    if hot.len() != 1 || block.iter().any(|&v| v != 0.0 && v != 1.0) {
                        return Err(Error::InvalidInput(format!("feature {j}: not a one-hot block")));
                    }
                    Ok(hot[0] as f64)
                }
            })
            .collect()
    }
}

/// Encode a dataset with a fresh encoder for its schema.
pub fn encode(dataset: &Dataset) -> Result<EncodedMatrix> {
    Encoder::new(dataset.schema()).encode(dataset)
}
