//! Genetic counterfactual search.
//!
//! Candidates are scored by
//!
//! ```text
//! loss(c) = hinge(c) + w_p · d(x, c) + w_s · #changed(x, c)
//! hinge(c) = 0 if f(c) is the desired outcome, else 10 + |P(c) − threshold|
//! ```
//!
//! Each generation keeps the best tenth of the population and fills the rest
//! with offspring of binary tournaments (uniform crossover, per-gene
//! mutation). Every valid candidate seen is archived; the returned set is
//! picked greedily from the archive to minimise
//! `Σ loss(c) − w_d · mean pairwise distance`.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::distance::changed_features;
use super::{CfContext, CounterfactualSet, Member, Strategy};
use crate::data::Row;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

const INVALID_PENALTY: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneticConfig {
    pub population: usize,
    pub generations: usize,
    /// Probability that a mutable gene is mutated in an offspring.
    pub mutation_rate: f64,
    /// Probability that an offspring is produced by crossover rather than
    /// cloning its first parent.
    pub crossover_rate: f64,
    pub proximity_weight: f64,
    pub sparsity_weight: f64,
    pub diversity_weight: f64,
    /// Features held fixed in addition to those the schema marks immutable.
    pub immutable: Vec<String>,
    /// Per-feature `[lo, hi]` overriding the schema and training ranges.
    pub ranges: BTreeMap<String, [f64; 2]>,
}

impl Default for GeneticConfig {
    fn default() -> Self {
        GeneticConfig {
            population: 200,
            generations: 100,
            mutation_rate: 0.1,
            crossover_rate: 0.8,
            proximity_weight: 1.0,
            sparsity_weight: 0.5,
            diversity_weight: 1.0,
            immutable: Vec::new(),
            ranges: BTreeMap::new(),
        }
    }
}

impl GeneticConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        let weights = [self.proximity_weight, self.sparsity_weight, self.diversity_weight];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("genetic weights must be finite and non-negative".into()));
        }
        for (name, r) in [("mutation_rate", self.mutation_rate), ("crossover_rate", self.crossover_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("{name} {r} outside [0, 1]")));
            }
        }
        if self.population < 2 * k.max(1) {
            return Err(Error::Config(format!(
                "population {} must be at least twice k = {k}",
                self.population
            )));
        }
        for (name, [lo, hi]) in &self.ranges {
            if !(lo <= hi) {
                return Err(Error::Config(format!("range for {name} has lo > hi")));
            }
        }
        Ok(())
    }
}

struct Gene {
    index: usize,
    categorical: bool,
    levels: Option<usize>,
    lo: f64,
    hi: f64,
    sigma: f64,
    discrete: bool,
}

impl Gene {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.categorical {
            return rng.random_range(0..self.levels.unwrap_or(1)) as f64;
        }
        if self.discrete {
            let (a, b) = (self.lo.ceil() as i64, self.hi.floor() as i64);
            if a >= b {
                return a.max(self.lo as i64) as f64;
            }
            return rng.random_range(a..=b) as f64;
        }
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    fn mutate(&self, v: f64, rng: &mut ChaCha8Rng) -> f64 {
        if self.categorical {
            return self.sample(rng);
        }
        if self.sigma <= 0.0 {
            return v;
        }
        let step = Normal::new(0.0, self.sigma).expect("positive sigma").sample(rng);
        let mut out = (v + step).clamp(self.lo, self.hi);
        if self.discrete {
            out = out.round().clamp(self.lo.ceil(), self.hi.floor());
        }
        out
    }
}

fn genes(ctx: &CfContext<'_>, cfg: &GeneticConfig) -> Result<Vec<Gene>> {
    let mut out = Vec::new();
    for (j, spec) in ctx.schema.features.iter().enumerate() {
        if spec.immutable || cfg.immutable.iter().any(|n| n == &spec.name) {
            continue;
        }
        let prof = &ctx.metric.features[j];
        let (mut lo, mut hi) = prof.range;
        if let Some([a, b]) = cfg.ranges.get(&spec.name) {
            (lo, hi) = (*a, *b);
        }
        if let Some(n) = prof.levels {
            lo = lo.max(0.0);
            hi = hi.min((n - 1) as f64);
        }
        let discrete = prof.levels.is_some() || prof.integral;
        let mut sigma = 0.1 * prof.std;
        if sigma == 0.0 {
            sigma = 0.1 * (hi - lo);
        }
        if discrete && hi > lo {
            // sub-unit steps would almost never survive rounding
            sigma = sigma.max(1.0);
        }
        out.push(Gene { index: j, categorical: prof.categorical, levels: prof.levels, lo, hi, sigma, discrete });
    }
    if out.is_empty() {
        return Err(Error::NoMutableFeatures);
    }
    Ok(out)
}

fn key(row: &[f64]) -> Vec<u64> {
    row.iter().map(|v| v.to_bits()).collect()
}

struct Scored {
    loss: Vec<f64>,
    valid: Vec<bool>,
}

fn score(ctx: &CfContext<'_>, cfg: &GeneticConfig, x: &[f64], desired: u8, pop: &[Row]) -> Result<Scored> {
    let (labels, probas) = ctx.predict_rows(pop)?;
    let threshold = ctx.model.threshold();
    let mut loss = Vec::with_capacity(pop.len());
    let mut valid = Vec::with_capacity(pop.len());
    for ((c, &l), &p) in pop.iter().zip(&labels).zip(&probas) {
        let ok = l == desired;
        let hinge = if ok { 0.0 } else { INVALID_PENALTY + (p - threshold).abs() };
        loss.push(
            hinge
                + cfg.proximity_weight * ctx.metric.distance(x, c)
                + cfg.sparsity_weight * changed_features(x, c) as f64,
        );
        valid.push(ok);
    }
    Ok(Scored { loss, valid })
}

fn tournament(loss: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.random_range(0..loss.len());
    let b = rng.random_range(0..loss.len());
    if loss[b] < loss[a] || (loss[b] == loss[a] && b < a) {
        b
    } else {
        a
    }
}

/// Greedy set selection: repeatedly add the candidate that most reduces
/// `Σ loss − w_d · Σ_{pairs} d / (k(k−1)/2)`. Ties go to the earlier
/// candidate.
fn select_diverse(
    ctx: &CfContext<'_>,
    candidates: &[(Row, f64)],
    k: usize,
    diversity_weight: f64,
) -> Vec<usize> {
    let pairs = if k > 1 { (k * (k - 1) / 2) as f64 } else { 1.0 };
    let mut spread = vec![0.0; candidates.len()];
    let mut taken = vec![false; candidates.len()];
    let mut chosen = Vec::with_capacity(k);
    while chosen.len() < k.min(candidates.len()) {
        let mut best: Option<(usize, f64)> = None;
        for (i, (_, loss)) in candidates.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let marginal = loss - diversity_weight * spread[i] / pairs;
            if best.is_none_or(|(_, b)| marginal < b) {
                best = Some((i, marginal));
            }
        }
        let Some((pick, _)) = best else { break };
        taken[pick] = true;
        chosen.push(pick);
        if diversity_weight > 0.0 {
            for (i, (row, _)) in candidates.iter().enumerate() {
                if !taken[i] {
                    spread[i] += ctx.metric.distance(row, &candidates[pick].0);
                }
            }
        }
    }
    chosen
}

/// Evolve up to `k` distinct counterfactuals for `x`. Immutable features
/// are never touched and mutable genes stay inside their ranges.
pub fn generate_genetic(
    ctx: &CfContext<'_>,
    x: &[f64],
    desired: u8,
    k: usize,
    cfg: &GeneticConfig,
    seed: u64,
) -> Result<CounterfactualSet> {
    cfg.validate(k)?;
    let genes = genes(ctx, cfg)?;
    ctx.check_origin(x, desired)?;
    let mut rng = rng_from_seed(seed);
    let n = cfg.population;

    let mut pop: Vec<Row> = Vec::with_capacity(n);
    for i in 0..n {
        let mut c = x.to_vec();
        for g in &genes {
            if i >= n / 2 || rng.random_bool(0.5) {
                c[g.index] = g.sample(&mut rng);
            }
        }
        pop.push(c);
    }

    let origin = key(x);
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut archive: Vec<(Row, f64)> = Vec::new();
    let n_elite = (n / 10).max(1);
    for generation in 0..=cfg.generations {
        let scored = score(ctx, cfg, x, desired, &pop)?;
        for (i, c) in pop.iter().enumerate() {
            if scored.valid[i] {
                let kc = key(c);
                if kc != origin && seen.insert(kc) {
                    archive.push((c.clone(), scored.loss[i]));
                }
            }
        }
        if generation == cfg.generations {
            break;
        }
        let mut ranked: Vec<usize> = (0..n).collect();
        ranked.sort_by(|&a, &b| scored.loss[a].total_cmp(&scored.loss[b]).then(a.cmp(&b)));
        let mut next: Vec<Row> = Vec::with_capacity(n);
        let mut elite_keys = HashSet::new();
        for &i in &ranked {
            if next.len() == n_elite {
                break;
            }
            if elite_keys.insert(key(&pop[i])) {
                next.push(pop[i].clone());
            }
        }
        while next.len() < n {
            let a = tournament(&scored.loss, &mut rng);
            let mut child = pop[a].clone();
            if rng.random_bool(cfg.crossover_rate) {
                let b = tournament(&scored.loss, &mut rng);
                for g in &genes {
                    if rng.random_bool(0.5) {
                        child[g.index] = pop[b][g.index];
                    }
                }
            }
            for g in &genes {
                if rng.random_bool(cfg.mutation_rate) {
                    child[g.index] = g.mutate(child[g.index], &mut rng);
                }
            }
            next.push(child);
        }
        pop = next;
    }

    archive.sort_by(|a, b| a.1.total_cmp(&b.1));
    archive.truncate((20 * k).max(200));
    let picks = select_diverse(ctx, &archive, k, cfg.diversity_weight);
    let members = picks
        .into_iter()
        .map(|i| {
            let row = archive[i].0.clone();
            Member { distance: ctx.metric.distance(x, &row), row, valid: true }
        })
        .collect();
    let set = CounterfactualSet { origin: x.to_vec(), desired, strategy: Strategy::Genetic, seed, requested: k, members };
    ctx.finalize(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let cfg = GeneticConfig::default();
        assert!(cfg.validate(100).is_ok());
        assert!(cfg.validate(101).is_err());
        assert!(GeneticConfig { proximity_weight: -1.0, ..cfg.clone() }.validate(1).is_err());
        assert!(GeneticConfig { mutation_rate: 1.5, ..cfg }.validate(1).is_err());
    }
}
