use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{AuditConfig, ModelSpec};
use super::report::{AblationRow, AuditReport, DataStats, ModelSummary, SearchSummary, SeedPlan, StrategyReport};
use crate::cfgen::{batch_generate, BatchConfig, CounterfactualSet, DumpRecord, Metric, Strategy};
use crate::data::{
    ex_ante_sp, group_distribution, load_csv, stratified_split_with_fallback, target_distribution, Dataset,
    EncodedMatrix, Encoder, FeatureSchema, GroupSpec, Row,
};
use crate::error::{Error, Result, StageExt};
use crate::fairmetrics::{cflips_group, delta_at, delta_cflips, flip_records, FlipRecord, GroupFairness, GroupSide};
use crate::model::{evaluate, fit, grid_search_cv, ClassifierHandle, CvConfig, Objective};
use crate::proxy::{pairs_from_records, proxy_correlations, ProxyReport};
use crate::rng::derive_seed;

/// Number of proxy features listed by name in the report.
const TOP_PROXIES: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Wall-clock time per stage, kept out of the report so that reports stay
/// byte-identical across runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<StageTiming>,
}

impl Timings {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().stage(stage);
        self.stages.push(StageTiming { stage: stage.to_string(), seconds: start.elapsed().as_secs_f64() });
        out
    }

    pub fn total(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }
}

/// Intermediate results of one strategy.
#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub strategy: Strategy,
    /// One set per sample of `X⁻`, in test order.
    pub sets: Vec<CounterfactualSet>,
    pub flips: Vec<FlipRecord>,
    pub dump: Vec<DumpRecord>,
}

/// A finished audit: the report plus everything needed to recompute it.
#[derive(Debug)]
pub struct AuditRun {
    pub report: AuditReport,
    pub timings: Timings,
    pub schema: Arc<FeatureSchema>,
    pub group: GroupSpec,
    pub decision_maker: ClassifierHandle,
    pub sensitive_classifier: ClassifierHandle,
    pub strategies: Vec<StrategyRun>,
}

fn fit_spec(
    spec: &ModelSpec,
    objective: Objective,
    train: &EncodedMatrix,
    labels: &[u8],
    seed: u64,
) -> Result<(ClassifierHandle, Option<SearchSummary>)> {
    let grid = spec.grid()?;
    if spec.grid.is_empty() {
        return Ok((fit(&grid.base, train, labels, derive_seed(seed, 0))?, None));
    }
    let mut cv = CvConfig::new(grid, objective, derive_seed(seed, 1));
    cv.folds = spec.folds;
    let search = grid_search_cv(&cv, train, labels)?;
    let model = fit(&search.best, train, labels, derive_seed(seed, 0))?;
    let summary = SearchSummary {
        objective,
        folds: spec.folds,
        cells: search.cells.len(),
        best_score: search.best_score,
    };
    Ok((model, Some(summary)))
}

fn summarize(model: &ClassifierHandle, search: Option<SearchSummary>, test: &EncodedMatrix, labels: &[u8]) -> Result<ModelSummary> {
    Ok(ModelSummary {
        family: model.family(),
        hyperparameters: model.hyperparameters().clone(),
        search,
        warnings: model.warnings().to_vec(),
        test: evaluate(model, test, labels)?,
    })
}

/// Load the configured data and run the audit.
pub fn run_audit(cfg: &AuditConfig) -> Result<AuditRun> {
    cfg.validate_files()?;
    let schema = FeatureSchema::from_path(&cfg.schema)?;
    schema.group(&cfg.sensitive).map_err(|_| {
        Error::Config(format!("`{}` is not a declared sensitive column", cfg.sensitive))
    })?;
    let start = Instant::now();
    let dataset = load_csv(&cfg.data, &schema).stage("load")?;
    let mut run = run_audit_on(cfg, &dataset)?;
    run.timings
        .stages
        .insert(0, StageTiming { stage: "load".into(), seconds: start.elapsed().as_secs_f64() - run.timings.total() });
    Ok(run)
}

/// Run the audit on an already loaded dataset; `cfg.data` and `cfg.schema`
/// are not read.
pub fn run_audit_on(cfg: &AuditConfig, dataset: &Dataset) -> Result<AuditRun> {
    cfg.validate()?;
    let schema = Arc::clone(dataset.schema_arc());
    let group = schema
        .group(&cfg.sensitive)
        .map_err(|_| Error::Config(format!("`{}` is not a declared sensitive column", cfg.sensitive)))?;
    let seeds = SeedPlan {
        split: cfg.seed,
        decision_maker: derive_seed(cfg.seed, 1),
        sensitive_classifier: derive_seed(cfg.seed, 2),
        generation: derive_seed(cfg.seed, 3),
    };
    let mut timings = Timings::default();

    let (split, stratify) =
        timings.time("split", || stratified_split_with_fallback(dataset, cfg.test_fraction, seeds.split))?;
    let train = dataset.subset(&split.train);
    let test = dataset.subset(&split.test);

    let encoder = Encoder::new(&schema);
    let sensitive_cols: Vec<&str> = schema.sensitive.iter().map(|s| s.column.as_str()).collect();
    if let Some(c) = encoder.column_map().columns().iter().find(|c| sensitive_cols.contains(&c.feature.as_str())) {
        return Err(Error::Schema(format!("sensitive column `{}` is encoded as a feature", c.feature)));
    }
    let x_train = encoder.encode_rows(train.rows());
    let x_test = encoder.encode_rows(test.rows());
    let s_train: Vec<u8> = train.group_membership(&group)?.into_iter().map(u8::from).collect();
    let s_test_bool = test.group_membership(&group)?;
    let s_test: Vec<u8> = s_test_bool.iter().map(|&b| u8::from(b)).collect();

    let (f, f_search) = timings.time("decision_maker", || {
        fit_spec(&cfg.decision_maker, Objective::Auc, &x_train, train.target(), seeds.decision_maker)
    })?;
    let (fs, fs_search) = timings.time("sensitive_classifier", || {
        fit_spec(&cfg.sensitive_classifier, Objective::F1, &x_train, &s_train, seeds.sensitive_classifier)
    })?;

    let (dm_summary, fs_summary, preds) = timings.time("evaluate", || {
        let dm = summarize(&f, f_search, &x_test, test.target())?;
        let sc = summarize(&fs, fs_search, &x_test, &s_test)?;
        Ok((dm, sc, f.predict(&x_test)?))
    })?;
    let fairness = GroupFairness::compute(&preds, test.target(), &s_test_bool);

    let negatives: Vec<usize> = (0..test.len()).filter(|&i| preds[i] == 0).collect();
    let neg_rows: Vec<Row> = negatives.iter().map(|&i| test.rows()[i].clone()).collect();
    let neg_priv: Vec<bool> = negatives.iter().map(|&i| s_test_bool[i]).collect();
    let neg_ids: Vec<usize> = negatives.iter().map(|&i| split.test[i]).collect();

    let metric = Metric::fit(&schema, train.rows()).stage("generate")?;
    let ctx = crate::cfgen::CfContext::new(&schema, &encoder, &f, &metric);
    let lengths = cfg.ablation_lengths();
    let mut notes = Vec::new();
    if negatives.is_empty() {
        notes.push("no test sample is predicted negative; the CFlips section is empty".to_string());
    }

    let mut strategy_reports = Vec::new();
    let mut strategy_runs = Vec::new();
    for strategy in cfg.strategy.strategies() {
        let mut batch = BatchConfig::new(strategy, cfg.k, seeds.generation);
        batch.workers = cfg.workers;
        batch.genetic = cfg.genetic.clone();
        let out = timings.time(strategy_stage(strategy, "generate"), || {
            batch_generate(&ctx, &neg_rows, train.rows(), &batch)
        })?;
        let flips = timings.time(strategy_stage(strategy, "flips"), || {
            flip_records(&fs, &encoder, &out.sets, &neg_priv, &neg_ids)
        })?;
        let privileged = cflips_group(&flips, GroupSide::Privileged, &lengths);
        let unprivileged = cflips_group(&flips, GroupSide::Unprivileged, &lengths);
        let delta = delta_cflips(&privileged, &unprivileged);
        let ablation = lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| AblationRow {
                length: l,
                privileged: privileged.ablation[i].mean,
                unprivileged: unprivileged.ablation[i].mean,
                delta: delta_at(&privileged, &unprivileged, l),
            })
            .collect();

        let mut strategy_notes = Vec::new();
        let pairs = pairs_from_records(&out.sets, &flips, cfg.restrict_flipped_pairs);
        let proxy: Option<ProxyReport> = if pairs.len() < 3 {
            strategy_notes.push(format!("proxy analysis skipped: {} pairs, at least 3 needed", pairs.len()));
            None
        } else {
            Some(timings.time(strategy_stage(strategy, "proxy"), || proxy_correlations(&fs, &encoder, &pairs))?)
        };
        if let Some(p) = &proxy {
            if !p.undefined().is_empty() {
                strategy_notes.push(format!(
                    "undefined proxy correlation (constant column) for {}",
                    p.undefined().iter().map(|e| e.label()).collect::<Vec<_>>().join(", ")
                ));
            }
        }
        let top_proxies = proxy
            .as_ref()
            .map(|p| p.top_features(TOP_PROXIES).iter().map(|f| f.feature.clone()).collect())
            .unwrap_or_default();

        let dump = out
            .sets
            .iter()
            .zip(&neg_ids)
            .zip(&neg_priv)
            .map(|((set, &id), &p)| {
                let value = if p { &group.privileged } else { &group.unprivileged };
                let sens = BTreeMap::from([(group.sensitive.clone(), value.clone())]);
                DumpRecord::from_set(&schema, id, sens, set)
            })
            .collect();

        strategy_reports.push(StrategyReport {
            strategy,
            empty: negatives.is_empty(),
            shortfall: out.stats,
            privileged,
            unprivileged,
            delta_cflips: delta,
            ablation,
            proxy,
            top_proxies,
            notes: strategy_notes,
        });
        strategy_runs.push(StrategyRun { strategy, sets: out.sets, flips, dump });
    }

    let (pos_rate, _) = target_distribution(dataset);
    let (priv_share, unpriv_share) = group_distribution(dataset, &group)?;
    let prov = dataset.provenance();
    let data = DataStats {
        raw_rows: prov.raw_rows.max(dataset.len()),
        dropped_missing: prov.dropped_missing,
        rows: dataset.len(),
        train: train.len(),
        test: test.len(),
        stratified_on_sensitive: stratify == crate::data::Stratify::TargetAndSensitive,
        group: group.clone(),
        positive_rate: pos_rate,
        privileged_share: priv_share,
        unprivileged_share: unpriv_share,
        ex_ante_sp: ex_ante_sp(dataset, &group).ok(),
        test_negatives: negatives.len(),
    };

    let report = AuditReport {
        config: AuditReport::config_echo(cfg)?,
        seeds,
        data,
        decision_maker: dm_summary,
        sensitive_classifier: fs_summary,
        group_fairness: fairness,
        strategies: strategy_reports,
        notes,
    };
    Ok(AuditRun {
        report,
        timings,
        schema,
        group,
        decision_maker: f,
        sensitive_classifier: fs,
        strategies: strategy_runs,
    })
}

fn strategy_stage(strategy: Strategy, stage: &'static str) -> &'static str {
    match (strategy, stage) {
        (Strategy::Kdtree, "generate") => "generate[kdtree]",
        (Strategy::Genetic, "generate") => "generate[genetic]",
        (Strategy::Kdtree, "flips") => "flips[kdtree]",
        (Strategy::Genetic, "flips") => "flips[genetic]",
        (Strategy::Kdtree, _) => "proxy[kdtree]",
        (Strategy::Genetic, _) => "proxy[genetic]",
    }
}
