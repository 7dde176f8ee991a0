use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_genetic, generate_kdtree, CfContext, CounterfactualSet, GeneticConfig, KdIndex, Strategy};
use crate::data::Row;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub strategy: Strategy,
    pub k: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub genetic: GeneticConfig,
}

impl BatchConfig {
    pub fn new(strategy: Strategy, k: usize, seed: u64) -> Self {
        BatchConfig { strategy, k, seed, workers: 0, genetic: GeneticConfig::default() }
    }
}

/// How many members each sample received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortfallStats {
    pub samples: usize,
    pub requested: usize,
    pub generated: usize,
    /// Samples with fewer than `k` members.
    pub shortfall_samples: usize,
    /// Samples with no members at all.
    pub empty_samples: usize,
    /// Median `|C_x|`; `None` for an empty batch.
    pub median_size: Option<f64>,
    pub min_size: Option<usize>,
    pub max_size: Option<usize>,
}

impl ShortfallStats {
    pub fn from_sets(sets: &[CounterfactualSet], k: usize) -> Self {
        let sizes: Vec<usize> = sets.iter().map(CounterfactualSet::len).collect();
        let as_f: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
        ShortfallStats {
            samples: sets.len(),
            requested: k * sets.len(),
            generated: sizes.iter().sum(),
            shortfall_samples: sets.iter().filter(|s| s.shortfall()).count(),
            empty_samples: sets.iter().filter(|s| s.is_empty()).count(),
            median_size: (!sizes.is_empty()).then(|| median(&as_f)),
            min_size: sizes.iter().copied().min(),
            max_size: sizes.iter().copied().max(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchOutput {
    /// One set per input sample, in input order.
    pub sets: Vec<CounterfactualSet>,
    pub stats: ShortfallStats,
}

/// Generate counterfactuals with outcome 1 for every sample, all of which
/// must be predicted 0. Sample `i` uses the seed `derive_seed(seed, i)`, and
/// results do not depend on the number of workers. `pool` supplies the rows
/// the k-d tree strategy searches.
pub fn batch_generate(ctx: &CfContext<'_>, samples: &[Row], pool: &[Row], cfg: &BatchConfig) -> Result<BatchOutput> {
    if cfg.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if samples.is_empty() {
        return Ok(BatchOutput { sets: Vec::new(), stats: ShortfallStats::from_sets(&[], cfg.k) });
    }
    if cfg.strategy == Strategy::Genetic {
        cfg.genetic.validate(cfg.k)?;
    }
    let (labels, _) = ctx.predict_rows(samples)?;
    if let Some(i) = labels.iter().position(|&l| l != 0) {
        return Err(Error::Precondition(format!("sample {i} is not negatively predicted")));
    }
    let index = match cfg.strategy {
        Strategy::Kdtree => {
            if pool.is_empty() {
                return Err(Error::InvalidInput("k-d tree search needs a non-empty pool".into()));
            }
            Some(KdIndex::build(ctx, pool, 1)?)
        }
        Strategy::Genetic => None,
    };
    if let Some(ix) = &index {
        if ix.is_empty() {
            log::warn!("no pool row is predicted 1; every sample gets an empty set");
        }
    }

    let run = || -> Result<Vec<CounterfactualSet>> {
        samples
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let seed = derive_seed(cfg.seed, i as u64);
                let set = match &index {
                    Some(ix) => generate_kdtree(ctx, x, 1, cfg.k, ix, seed),
                    None => generate_genetic(ctx, x, 1, cfg.k, &cfg.genetic, seed),
                }?;
                if set.is_empty() {
                    log::info!("sample {i}: no counterfactual found; excluded from flip metrics");
                }
                Ok(set)
            })
            .collect()
    };
    let sets = if cfg.workers == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?
            .install(run)?
    };
    let stats = ShortfallStats::from_sets(&sets, cfg.k);
    Ok(BatchOutput { sets, stats })
}
