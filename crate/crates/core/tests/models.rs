use std::collections::BTreeMap;
use std::sync::Arc;

use cfaudit::data::{ColumnMap, EncodedColumn, EncodedMatrix};
use cfaudit::model::{
    fit, grid_search_cv, stratified_folds, CvConfig, Hyperparams, LogisticParams, MlpParams, Objective, ParamGrid,
    TreeParams,
};
use cfaudit::ClassifierHandle;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn matrix(rows: &[Vec<f64>]) -> EncodedMatrix {
    let width = rows[0].len();
    let map = Arc::new(ColumnMap(
        (0..width).map(|i| EncodedColumn { feature: format!("x{i}"), level: None }).collect(),
    ));
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    EncodedMatrix::new(Array2::from_shape_vec((rows.len(), width), flat).unwrap(), map).unwrap()
}

fn noisy_problem(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
    let labels = rows
        .iter()
        .map(|r| u8::from(r[0] + 0.3 * r[1] + rng.random_range(-0.3..0.3) > 0.6))
        .collect();
    (rows, labels)
}

fn pair_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                den += 1.0;
                num += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

#[test]
fn grid_search_matches_hand_rolled_cross_validation() {
    let (rows, labels) = noisy_problem(20, 3);
    let x = matrix(&rows);
    let mut values = BTreeMap::new();
    values.insert("max_depth".to_string(), vec![Value::from(1), Value::from(4)]);
    let grid = ParamGrid::new(Hyperparams::DecisionTree(TreeParams::default()), values);
    let mut cv = CvConfig::new(grid, Objective::Auc, 17);
    cv.folds = 4;
    let result = grid_search_cv(&cv, &x, &labels).unwrap();

    let assignment = stratified_folds(&labels, 4, 17);
    let mut best: Option<(usize, f64)> = None;
    for (c, depth) in [1usize, 4].into_iter().enumerate() {
        let params = Hyperparams::DecisionTree(TreeParams { max_depth: depth, ..Default::default() });
        let mut total = 0.0;
        for fold in 0..4 {
            let tr: Vec<usize> = (0..20).filter(|&i| assignment[i] != fold).collect();
            let va: Vec<usize> = (0..20).filter(|&i| assignment[i] == fold).collect();
            let ytr: Vec<u8> = tr.iter().map(|&i| labels[i]).collect();
            let yva: Vec<u8> = va.iter().map(|&i| labels[i]).collect();
            let m = fit(&params, &x.select_rows(&tr), &ytr, 0).unwrap();
            total += pair_auc(&m.predict_proba(&x.select_rows(&va)).unwrap(), &yva);
        }
        let mean = total / 4.0;
        assert!((result.cells[c].mean.unwrap() - mean).abs() < 1e-12);
        if best.is_none_or(|(_, b)| mean > b) {
            best = Some((c, mean));
        }
    }
    let (bc, bs) = best.unwrap();
    assert_eq!(result.best, result.cells[bc].params);
    assert!((result.best_score - bs).abs() < 1e-12);
}

#[test]
fn single_cell_grid_returns_that_cell() {
    let (rows, labels) = noisy_problem(40, 5);
    let x = matrix(&rows);
    let base = Hyperparams::LogisticRegression(LogisticParams::default());
    let cv = CvConfig::new(ParamGrid::single(base.clone()), Objective::F1, 1);
    let result = grid_search_cv(&cv, &x, &labels).unwrap();
    assert_eq!(result.best, base);
    let folds = result.cells[0].fold_scores.iter().flatten().sum::<f64>() / 5.0;
    assert!((result.best_score - folds).abs() < 1e-12);
}

fn walk(nodes: &[Value], row: &[f64]) -> f64 {
    let mut at = 0usize;
    loop {
        let n = &nodes[at];
        match n["node"].as_str().unwrap() {
            "leaf" => return n["proba"].as_f64().unwrap(),
            _ => {
                let f = n["feature"].as_u64().unwrap() as usize;
                let t = n["threshold"].as_f64().unwrap();
                let key = if row[f] <= t { "left" } else { "right" };
                at = n[key].as_u64().unwrap() as usize;
            }
        }
    }
}

#[test]
fn serialized_tree_walks_to_the_same_probabilities() {
    let (rows, labels) = noisy_problem(300, 8);
    let x = matrix(&rows);
    let tree = fit(&Hyperparams::DecisionTree(TreeParams { max_depth: 5, ..Default::default() }), &x, &labels, 0)
        .unwrap();
    let file: Value = serde_json::from_str(&tree.to_json().unwrap()).unwrap();
    let nodes = file["parameters"]["nodes"].as_array().unwrap();
    let (probe, _) = noisy_problem(200, 9);
    let expect = tree.predict_proba(&matrix(&probe)).unwrap();
    for (r, p) in probe.iter().zip(expect) {
        assert_eq!(walk(nodes, r), p);
    }
}

#[test]
fn refits_are_deterministic_and_roundtrip() {
    let (rows, labels) = noisy_problem(150, 10);
    let x = matrix(&rows);
    let (probe, _) = noisy_problem(50, 11);
    let probe = matrix(&probe);
    for params in [
        Hyperparams::LogisticRegression(LogisticParams::default()),
        Hyperparams::DecisionTree(TreeParams::default()),
        Hyperparams::Mlp(MlpParams { epochs: 20, ..Default::default() }),
    ] {
        let a = fit(&params, &x, &labels, 4).unwrap();
        let b = fit(&params, &x, &labels, 4).unwrap();
        let pa = a.predict_proba(&probe).unwrap();
        assert_eq!(pa, b.predict_proba(&probe).unwrap());
        let back = ClassifierHandle::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(pa, back.predict_proba(&probe).unwrap());
    }
}

#[test]
fn mlp_learns_a_nonlinear_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rows: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let labels: Vec<u8> = rows.iter().map(|r| u8::from(r[0] * r[0] + r[1] * r[1] < 0.5)).collect();
    let x = matrix(&rows);
    let params = Hyperparams::Mlp(MlpParams { hidden: vec![16], epochs: 200, ..Default::default() });
    let m = fit(&params, &x, &labels, 0).unwrap();
    let preds = m.predict(&x).unwrap();
    let acc = preds.iter().zip(&labels).filter(|(a, b)| a == b).count() as f64 / 400.0;
    assert!(acc > 0.9, "{acc}");
}
