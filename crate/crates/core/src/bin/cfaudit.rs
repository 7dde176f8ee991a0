use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cfaudit::audit::{
    dump_sensitive_column, generate_synthetic, metrics_from_dump, proxy_from_dump, run_audit, AuditConfig,
    AuditReport, StrategyChoice, SynthSpec,
};
use cfaudit::cfgen::read_dump;
use cfaudit::data::{ex_ante_sp, group_distribution, load_csv, sensitive_correlations, target_distribution};
use cfaudit::{ClassifierHandle, Error, FeatureSchema, Result};

#[derive(Parser)]
#[command(name = "cfaudit", version, about = "Counterfactual bias audit for classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full audit pipeline from a config file.
    Audit(AuditArgs),
    /// Recompute CFlips metrics from a counterfactual dump.
    Metrics(DumpArgs),
    /// Correlate perturbations with sensitive-classifier shifts from a dump.
    Proxy(ProxyArgs),
    /// Write a planted-proxy synthetic dataset and its schema.
    Synth(SynthArgs),
    /// Group statistics and feature/sensitive correlations of a dataset.
    InspectSchema(InspectArgs),
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    strategy: Option<StrategyChoice>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    /// `counterfactuals.jsonl` written by `audit`.
    #[arg(long)]
    dump: PathBuf,
    /// Defaults to `schema.toml` next to the dump or one level up.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Sensitive classifier; defaults to `sensitive_classifier.json` next
    /// to the dump or one level up.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Sensitive column; defaults to the one recorded in the dump.
    #[arg(long)]
    sensitive: Option<String>,
    /// Ablation prefix lengths.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10, 20, 50, 100])]
    ablation: Vec<usize>,
}

#[derive(Args)]
struct ProxyArgs {
    #[command(flatten)]
    dump: DumpArgs,
    /// Use only counterfactuals that flip the sensitive classifier.
    #[arg(long)]
    flipped_only: bool,
    #[arg(long, default_value_t = 6)]
    top: usize,
    /// Also write the per-column correlations as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 4000)]
    n: usize,
    /// Proxy strength in [0, 1].
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    /// Weight of the proxy in the label.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 2)]
    noise_features: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving `synthetic.csv` and `synthetic.toml`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn audit(args: AuditArgs) -> Result<()> {
    let mut cfg = AuditConfig::from_path(&args.config)?;
    if let Some(s) = args.strategy {
        cfg.strategy = s;
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(out) = args.out {
        cfg.out = Some(out);
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("cfaudit-out"));
    let run = run_audit(&cfg)?;
    run.write(&out)?;
    summarize(&run.report);
    println!("wrote {}", out.display());
    Ok(())
}

fn fmt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.digits$}"))
}

fn summarize(r: &AuditReport) {
    let d = &r.data;
    println!(
        "split {}/{}; {}={} share {:.3}, ex-ante SP {}",
        d.train,
        d.test,
        d.group.sensitive,
        d.group.privileged,
        d.privileged_share,
        fmt(d.ex_ante_sp, 4)
    );
    println!(
        "f   {}: AUC {}, F1 {:.3}",
        r.decision_maker.family,
        fmt(r.decision_maker.test.auc, 3),
        r.decision_maker.test.f1
    );
    println!(
        "f_s {}: AUC {}, F1 {:.3}",
        r.sensitive_classifier.family,
        fmt(r.sensitive_classifier.test.auc, 3),
        r.sensitive_classifier.test.f1
    );
    let g = &r.group_fairness;
    println!("DEO {}  DSP {}  DAO {}", fmt(g.deo, 4), fmt(g.dsp, 4), fmt(g.dao, 4));
    for s in &r.strategies {
        println!(
            "{}: |X-| {}, CFlips priv {} ({} samples), unpriv {} ({} samples), delta {} pp; top proxies {}",
            s.strategy,
            s.shortfall.samples,
            fmt(s.privileged.mean, 3),
            s.privileged.n_samples,
            fmt(s.unprivileged.mean, 3),
            s.unprivileged.n_samples,
            fmt(s.delta_cflips, 2),
            s.top_proxies.join(", ")
        );
    }
    for n in &r.notes {
        println!("note: {n}");
    }
}

fn sibling(dump: &Path, name: &str) -> PathBuf {
    let dir = dump.parent().unwrap_or_else(|| Path::new("."));
    let here = dir.join(name);
    if here.exists() {
        return here;
    }
    dir.parent().map(|p| p.join(name)).filter(|p| p.exists()).unwrap_or(here)
}

struct DumpInputs {
    schema: FeatureSchema,
    model: ClassifierHandle,
    records: Vec<cfaudit::cfgen::DumpRecord>,
    group: cfaudit::GroupSpec,
}

fn load_dump(args: &DumpArgs) -> Result<DumpInputs> {
    let schema_path = args.schema.clone().unwrap_or_else(|| sibling(&args.dump, "schema.toml"));
    let model_path = args.model.clone().unwrap_or_else(|| sibling(&args.dump, "sensitive_classifier.json"));
    let schema = FeatureSchema::from_path(&schema_path)?;
    let model = ClassifierHandle::load(&model_path)?;
    let records = read_dump(&args.dump)?;
    let column = match &args.sensitive {
        Some(c) => c.clone(),
        None => dump_sensitive_column(&records)
            .ok_or_else(|| Error::Config("dump does not name a single sensitive column; pass --sensitive".into()))?,
    };
    let group = schema.group(&column).map_err(|_| Error::Config(format!("`{column}` is not a sensitive column")))?;
    Ok(DumpInputs { schema, model, records, group })
}

fn metrics(args: DumpArgs) -> Result<()> {
    if args.ablation.contains(&0) {
        return Err(Error::Config("ablation lengths must be at least 1".into()));
    }
    let d = load_dump(&args)?;
    print_json(&metrics_from_dump(&d.schema, &d.model, &d.records, &d.group, &args.ablation)?)
}

fn proxy(args: ProxyArgs) -> Result<()> {
    let d = load_dump(&args.dump)?;
    let report = proxy_from_dump(&d.schema, &d.model, &d.records, &d.group, args.flipped_only)?;
    if let Some(path) = &args.csv {
        report.write_csv(path)?;
    }
    let top: Vec<_> = report
        .top_k(args.top)
        .into_iter()
        .map(|e| json!({"column": e.label(), "rho": e.rho}))
        .collect();
    let features: Vec<_> = report.top_features(args.top).into_iter().cloned().collect();
    print_json(&json!({"n_pairs": report.n_pairs, "top_columns": top, "top_features": features}))
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n: args.n,
        proxy_strength: args.beta,
        label_bias: args.gamma,
        noise: args.noise,
        noise_features: args.noise_features,
        seed: args.seed,
    };
    let ds = generate_synthetic(&spec)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Config(format!("{}: {e}", args.out.display())))?;
    ds.write_csv(args.out.join("synthetic.csv"))?;
    let toml_path = args.out.join("synthetic.toml");
    std::fs::write(&toml_path, ds.schema().to_toml_string())
        .map_err(|e| Error::Config(format!("{}: {e}", toml_path.display())))?;
    println!("wrote {} rows to {}", ds.len(), args.out.display());
    Ok(())
}

fn inspect(args: InspectArgs) -> Result<()> {
    let schema = FeatureSchema::from_path(&args.schema)?;
    let ds = load_csv(&args.data, &schema)?;
    let (pos, _) = target_distribution(&ds);
    let mut groups = Vec::new();
    for s in &schema.sensitive {
        let g = schema.group(&s.column)?;
        let (p, u) = group_distribution(&ds, &g)?;
        groups.push(json!({
            "sensitive": g.sensitive,
            "privileged": g.privileged,
            "unprivileged": g.unprivileged,
            "privileged_share": p,
            "unprivileged_share": u,
            "ex_ante_sp": ex_ante_sp(&ds, &g).ok(),
        }));
    }
    print_json(&json!({
        "rows": ds.len(),
        "dropped_missing": ds.provenance().dropped_missing,
        "positive_rate": pos,
        "groups": groups,
        "correlations": sensitive_correlations(&ds)?,
    }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Audit(a) => audit(a),
        Command::Metrics(a) => metrics(a),
        Command::Proxy(a) => proxy(a),
        Command::Synth(a) => synth(a),
        Command::InspectSchema(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
