//! End-to-end audit: split, fit the decision maker `f` and the sensitive
//! classifier `f_s`, generate counterfactuals for rejected test samples,
//! and aggregate flip rates, group metrics and proxy correlations.
//!
//! ```no_run
//! use cfaudit::audit::{run_audit, AuditConfig};
//!
//! let cfg = AuditConfig::from_path("data/german/audit.toml")?;
//! let run = run_audit(&cfg)?;
//! println!("{}", run.report.to_json()?);
//! run.write("out".as_ref())?;
//! # Ok::<(), cfaudit::Error>(())
//! ```

mod config;
mod pipeline;
mod recompute;
mod report;
mod synth;

pub use config::{AuditConfig, ModelSpec, StrategyChoice};
pub use pipeline::{run_audit, run_audit_on, AuditRun, StageTiming, StrategyRun, Timings};
pub use recompute::{dump_sensitive_column, flips_from_dump, metrics_from_dump, proxy_from_dump, DumpMetrics};
pub use report::{
    write_ablation_csv, write_flips_csv, AblationRow, AuditReport, DataStats, ModelSummary, SearchSummary, SeedPlan,
    StrategyReport,
};
pub use synth::{generate_synthetic, SynthSpec};
