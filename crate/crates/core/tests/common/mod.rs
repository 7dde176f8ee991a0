#![allow(dead_code)]

use cfaudit::data::{FeatureSchema, FeatureSpec, Row, TargetSpec};
use cfaudit::model::LogisticModel;
use cfaudit::{ClassifierHandle, Encoder};

pub fn numeric_schema(names: &[&str]) -> FeatureSchema {
    FeatureSchema::new(
        names.iter().map(|n| FeatureSpec::numeric(*n)).collect(),
        TargetSpec { column: "y".into(), positive: "1".into() },
        vec![],
    )
    .unwrap()
}

/// Logistic model with fixed raw-space weights.
pub fn linear_model(schema: &FeatureSchema, weights: Vec<f64>, bias: f64) -> ClassifierHandle {
    let enc = Encoder::new(schema);
    ClassifierHandle::from_logistic(LogisticModel::from_parameters(weights, bias), enc.column_map().clone()).unwrap()
}

/// The unit square at resolution `step`, as rows.
pub fn unit_grid(step: f64) -> Vec<Row> {
    let n = (1.0 / step).round() as usize;
    let mut out = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        for j in 0..=n {
            out.push(vec![i as f64 * step, j as f64 * step]);
        }
    }
    out
}

/// 2-D toy problem: features in [0, 1]², positive iff `x1 ≥ 0.5`.
pub fn toy_boundary() -> (FeatureSchema, ClassifierHandle) {
    let mut schema = numeric_schema(&["x1", "x2"]);
    for f in &mut schema.features {
        f.range = Some([0.0, 1.0]);
    }
    let model = linear_model(&schema, vec![10.0, 0.0], -5.0);
    (schema, model)
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
