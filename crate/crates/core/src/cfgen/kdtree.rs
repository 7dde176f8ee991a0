//! Nearest desired-class neighbours from a pool of observed rows.
//!
//! The tree indexes the numeric and ordinal features, each rescaled so that
//! L1 distance in tree coordinates equals that feature's share of the mixed
//! distance. The L1 gap between a query and a node's bounding box is
//! therefore a lower bound on the mixed distance of every row in the node
//! (categorical mismatches only add to it), which makes pruning exact. Leaf
//! rows are scored with the full metric, and ties are broken by pool order,
//! so results equal a linear scan sorted by `(distance, pool index)`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use super::{CfContext, CounterfactualSet, Member, Metric, Strategy};
use crate::data::Row;
use crate::error::Result;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
struct KdNode {
    lo: Vec<f64>,
    hi: Vec<f64>,
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

/// Pool rows predicted with the desired outcome, indexed for k-NN queries.
#[derive(Debug, Clone)]
pub struct KdIndex {
    desired: u8,
    rows: Vec<Row>,
    source: Vec<usize>,
    dims: Vec<(usize, f64)>,
    coords: Vec<Vec<f64>>,
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    dist: f64,
    idx: usize,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KdIndex {
    /// Keep the pool rows that `ctx.model` labels `desired` (dropping exact
    /// duplicates, first occurrence wins) and build the tree over them.
    pub fn build(ctx: &CfContext<'_>, pool: &[Row], desired: u8) -> Result<Self> {
        let (labels, _) = ctx.predict_rows(pool)?;
        let mut seen = HashSet::new();
        let mut rows = Vec::new();
        let mut source = Vec::new();
        for (i, (row, &l)) in pool.iter().zip(&labels).enumerate() {
            if l == desired && seen.insert(row.iter().map(|v| v.to_bits()).collect::<Vec<u64>>()) {
                rows.push(row.clone());
                source.push(i);
            }
        }
        Ok(Self::from_rows(ctx.metric, rows, source, desired))
    }

    fn from_rows(metric: &Metric, rows: Vec<Row>, source: Vec<usize>, desired: u8) -> Self {
        let nf = metric.n_features() as f64;
        let dims: Vec<(usize, f64)> = metric
            .features
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.categorical && f.scale > 0.0)
            .map(|(j, f)| (j, f.scale * nf))
            .collect();
        let coords: Vec<Vec<f64>> = rows.iter().map(|r| dims.iter().map(|&(j, s)| r[j] / s).collect()).collect();
        let mut index = KdIndex {
            desired,
            order: (0..rows.len()).collect(),
            rows,
            source,
            dims,
            coords,
            nodes: Vec::new(),
        };
        if !index.rows.is_empty() {
            index.split(0, index.rows.len());
        }
        index
    }

    fn split(&mut self, start: usize, end: usize) -> usize {
        let d = self.dims.len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &p in &self.order[start..end] {
            for (k, &v) in self.coords[p].iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        let widest = (0..d).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)));
        let me = self.nodes.len();
        self.nodes.push(KdNode { lo, hi, start, end, children: None });
        let Some(dim) = widest else { return me };
        if end - start <= LEAF_SIZE || self.nodes[me].hi[dim] <= self.nodes[me].lo[dim] {
            return me;
        }
        let coords = &self.coords;
        self.order[start..end].sort_by(|&a, &b| coords[a][dim].total_cmp(&coords[b][dim]).then(a.cmp(&b)));
        let mid = start + (end - start) / 2;
        let l = self.split(start, mid);
        let r = self.split(mid, end);
        self.nodes[me].children = Some((l, r));
        me
    }

    pub fn desired(&self) -> u8 {
        self.desired
    }

    /// Number of distinct desired-class rows.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &Row {
        &self.rows[i]
    }

    /// Index of indexed row `i` in the pool passed to [`KdIndex::build`].
    pub fn source_index(&self, i: usize) -> usize {
        self.source[i]
    }

    fn bound(&self, node: &KdNode, q: &[f64]) -> f64 {
        q.iter()
            .zip(node.lo.iter().zip(&node.hi))
            .map(|(&v, (&l, &h))| {
                if v < l {
                    l - v
                } else if v > h {
                    v - h
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn search(&self, at: usize, x: &[f64], q: &[f64], k: usize, metric: &Metric, heap: &mut BinaryHeap<Cand>) {
        let node = &self.nodes[at];
        if heap.len() == k {
            let worst = heap.peek().map_or(f64::INFINITY, |c| c.dist);
            if self.bound(node, q) > worst * (1.0 + 1e-9) + 1e-12 {
                return;
            }
        }
        match node.children {
            None => {
                for &p in &self.order[node.start..node.end] {
                    let cand = Cand { dist: metric.distance(x, &self.rows[p]), idx: p };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if heap.peek().is_some_and(|top| cand < *top) {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Some((l, r)) => {
                let (bl, br) = (self.bound(&self.nodes[l], q), self.bound(&self.nodes[r], q));
                let (first, second) = if bl <= br { (l, r) } else { (r, l) };
                self.search(first, x, q, k, metric, heap);
                self.search(second, x, q, k, metric, heap);
            }
        }
    }

    /// The `k` nearest indexed rows as `(index, distance)`, nearest first.
    pub fn query(&self, x: &[f64], k: usize, metric: &Metric) -> Vec<(usize, f64)> {
        if k == 0 || self.rows.is_empty() {
            return Vec::new();
        }
        let q: Vec<f64> = self.dims.iter().map(|&(j, s)| x[j] / s).collect();
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, x, &q, k, metric, &mut heap);
        heap.into_sorted_vec().into_iter().map(|c| (c.idx, c.dist)).collect()
    }
}

/// The `k` pool rows nearest to `x` among those the decision maker labels
/// `desired`. Fewer than `k` members means the pool ran out.
pub fn generate_kdtree(
    ctx: &CfContext<'_>,
    x: &[f64],
    desired: u8,
    k: usize,
    index: &KdIndex,
    seed: u64,
) -> Result<CounterfactualSet> {
    ctx.check_origin(x, desired)?;
    if index.desired() != desired {
        return Err(crate::error::Error::Precondition(format!(
            "index holds rows predicted {}, not {desired}",
            index.desired()
        )));
    }
    let members = index
        .query(x, k, ctx.metric)
        .into_iter()
        .map(|(i, d)| Member { row: index.row(i).clone(), distance: d, valid: true })
        .collect();
    let set = CounterfactualSet { origin: x.to_vec(), desired, strategy: Strategy::Kdtree, seed, requested: k, members };
    ctx.finalize(set)
}
