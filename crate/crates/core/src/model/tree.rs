//! CART classification tree with Gini impurity.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 8, min_samples_split: 2, min_samples_leaf: 1 }
    }
}

/// Tree node. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf { proba: f64, samples: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    columns: Vec<Vec<f64>>,
    y: &'a [u8],
    params: &'a TreeParams,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn best_split(&self, idx: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let total_pos: usize = idx.iter().map(|&i| usize::from(self.y[i])).sum();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<BestSplit> = None;
        let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(n);
        for (f, col) in self.columns.iter().enumerate() {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (col[i], self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[n - 1].0 {
                continue;
            }
            let mut left_pos = 0usize;
            for k in 1..n {
                left_pos += usize::from(pairs[k - 1].1);
                if pairs[k].0 == pairs[k - 1].0 || k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let right_pos = total_pos - left_pos;
                let imp = (k as f64 * gini(left_pos, k) + (n - k) as f64 * gini(right_pos, n - k)) / n as f64;
                if best.as_ref().is_none_or(|b| imp < b.impurity - 1e-12) {
                    let (a, c) = (pairs[k - 1].0, pairs[k].0);
                    let mid = a + (c - a) / 2.0;
                    let threshold = if mid < c { mid } else { a };
                    best = Some(BestSplit { feature: f, threshold, impurity: imp });
                }
            }
        }
        best
    }

    fn leaf(&mut self, idx: &[usize]) -> usize {
        let pos: usize = idx.iter().map(|&i| usize::from(self.y[i])).sum();
        self.nodes.push(Node::Leaf { proba: pos as f64 / idx.len() as f64, samples: idx.len() });
        self.nodes.len() - 1
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let n = idx.len();
        let pos: usize = idx.iter().map(|&i| usize::from(self.y[i])).sum();
        if depth >= self.params.max_depth || n < self.params.min_samples_split.max(2) || pos == 0 || pos == n {
            return self.leaf(&idx);
        }
        let Some(split) = self.best_split(&idx) else {
            return self.leaf(&idx);
        };
        let col = &self.columns[split.feature];
        let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| col[i] <= split.threshold);
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { proba: 0.0, samples: 0 });
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[me] = Node::Split { feature: split.feature, threshold: split.threshold, left: l, right: r };
        me
    }
}

impl DecisionTree {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], params: &TreeParams) -> Self {
        let columns = x.columns().into_iter().map(|c| c.to_vec()).collect();
        let mut b = Builder { columns, y, params, nodes: Vec::new() };
        b.build((0..x.nrows()).collect(), 0);
        DecisionTree { nodes: b.nodes }
    }

    pub fn predict_proba_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { proba, .. } => return *proba,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| self.predict_proba_row(r)).collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
