use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::AuditConfig;
use super::pipeline::{AuditRun, StrategyRun};
use crate::cfgen::{write_dump, ShortfallStats, Strategy};
use crate::data::GroupSpec;
use crate::error::{Error, Result, StageExt};
use crate::fairmetrics::{GroupFairness, GroupFlipSummary};
use crate::model::{EvalReport, Family, Hyperparams, Objective};
use crate::proxy::ProxyReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedPlan {
    pub split: u64,
    pub decision_maker: u64,
    pub sensitive_classifier: u64,
    /// Base of the per-sample generation seeds.
    pub generation: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataStats {
    pub raw_rows: usize,
    pub dropped_missing: usize,
    pub rows: usize,
    pub train: usize,
    pub test: usize,
    /// False when the split fell back to target-only strata.
    pub stratified_on_sensitive: bool,
    pub group: GroupSpec,
    pub positive_rate: f64,
    pub privileged_share: f64,
    pub unprivileged_share: f64,
    pub ex_ante_sp: Option<f64>,
    /// `|X⁻|`: test samples the decision maker rejects.
    pub test_negatives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub objective: Objective,
    pub folds: usize,
    pub cells: usize,
    pub best_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub family: Family,
    pub hyperparameters: Hyperparams,
    pub search: Option<SearchSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Scores on the test split.
    pub test: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub length: usize,
    pub privileged: Option<f64>,
    pub unprivileged: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: Strategy,
    /// True when `X⁻` was empty and nothing was generated.
    pub empty: bool,
    pub shortfall: ShortfallStats,
    pub privileged: GroupFlipSummary,
    pub unprivileged: GroupFlipSummary,
    /// Percentage points.
    pub delta_cflips: Option<f64>,
    pub ablation: Vec<AblationRow>,
    pub proxy: Option<ProxyReport>,
    /// Features ranked by their strongest `|ρ|`.
    pub top_proxies: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Everything an audit concludes. Field order is the key order of the
/// emitted JSON; timings live in a separate file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub config: serde_json::Value,
    pub seeds: SeedPlan,
    pub data: DataStats,
    pub decision_maker: ModelSummary,
    pub sensitive_classifier: ModelSummary,
    pub group_fairness: GroupFairness,
    pub strategies: Vec<StrategyReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl AuditReport {
    /// The configuration minus settings that cannot change results
    /// (worker count, output directory).
    pub fn config_echo(cfg: &AuditConfig) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(cfg)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("workers");
            obj.remove("out");
        }
        Ok(v)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn strategy(&self, strategy: Strategy) -> Option<&StrategyReport> {
        self.strategies.iter().find(|s| s.strategy == strategy)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Included flip records only: `sample_id, group, fs_origin, n_members,
/// n_flipped, cflips`.
pub fn write_flips_csv(path: &Path, run: &StrategyRun, group: &GroupSpec) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample_id", "group", "fs_origin", "n_members", "n_flipped", "cflips"])?;
    for r in run.flips.iter().filter(|r| r.included) {
        let flipped = r.fs_members.iter().filter(|&&m| m != r.fs_origin).count();
        w.write_record([
            r.sample_id.to_string(),
            if r.privileged { group.privileged.clone() } else { group.unprivileged.clone() },
            r.fs_origin.to_string(),
            r.fs_members.len().to_string(),
            flipped.to_string(),
            opt(r.cflips),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_ablation_csv(path: &Path, report: &StrategyReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["length", "privileged", "unprivileged", "delta"])?;
    for a in &report.ablation {
        w.write_record([a.length.to_string(), opt(a.privileged), opt(a.unprivileged), opt(a.delta)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl AuditRun {
    /// Write the report and its artifacts:
    ///
    /// ```text
    /// out/report.json                 out/timings.json
    /// out/decision_maker.json         out/sensitive_classifier.json
    /// out/schema.toml
    /// out/<strategy>/counterfactuals.jsonl
    /// out/<strategy>/flips.csv        out/<strategy>/ablation.csv
    /// out/<strategy>/proxy.csv        (when the proxy analysis ran)
    /// ```
    pub fn write(&self, out: &Path) -> Result<()> {
        let inner = || -> Result<()> {
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            write_text(&out.join("report.json"), &self.report.to_json()?)?;
            let mut timings = serde_json::to_string_pretty(&self.timings)?;
            timings.push('\n');
            write_text(&out.join("timings.json"), &timings)?;
            self.decision_maker.save(out.join("decision_maker.json"))?;
            self.sensitive_classifier.save(out.join("sensitive_classifier.json"))?;
            write_text(&out.join("schema.toml"), &self.schema.to_toml_string())?;
            for (run, rep) in self.strategies.iter().zip(&self.report.strategies) {
                let dir = out.join(run.strategy.to_string());
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                write_dump(dir.join("counterfactuals.jsonl"), &run.dump)?;
                write_flips_csv(&dir.join("flips.csv"), run, &self.group)?;
                write_ablation_csv(&dir.join("ablation.csv"), rep)?;
                if let Some(p) = &rep.proxy {
                    p.write_csv(dir.join("proxy.csv"))?;
                }
            }
            Ok(())
        };
        inner().stage("write")
    }
}
