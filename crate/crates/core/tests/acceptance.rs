//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero when any criterion fails.

mod common;

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use cfaudit::audit::{generate_synthetic, run_audit, run_audit_on, AuditConfig, ModelSpec, StrategyChoice, SynthSpec};
use cfaudit::cfgen::{generate_genetic, generate_kdtree, CfContext, GeneticConfig, KdIndex, Metric};
use cfaudit::data::{
    ex_ante_sp, load_csv, stratified_split_with_fallback, ColumnMap, EncodedColumn, FeatureSchema, FeatureSpec,
    Row, TargetSpec,
};
use cfaudit::fairmetrics::{cflips_group, cflips_sample, dao, delta_cflips, deo, dsp, GroupSide};
use cfaudit::model::{auc, fit, Family, Hyperparams, LogisticParams, MlpNet};
use cfaudit::proxy::correlations_from_parts;
use cfaudit::{Dataset, Encoder};
use common::{l1, linear_model, toy_boundary, unit_grid};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("{what} took {t:?}, limit {limit:?}"))
}

// ---------------------------------------------------------------------------
// 1. dataset reproduction

fn load(name: &str, schema: &str) -> Result<Dataset, String> {
    let schema = FeatureSchema::from_path(data_dir().join(name).join(schema)).map_err(|e| e.to_string())?;
    load_csv(data_dir().join(name).join(format!("{name}.csv")), &schema).map_err(|e| e.to_string())
}

fn split_sizes(ds: &Dataset) -> Result<(usize, usize), String> {
    let (idx, _) = stratified_split_with_fallback(ds, 0.1, 42).map_err(|e| e.to_string())?;
    Ok((idx.train.len(), idx.test.len()))
}

fn sp(ds: &Dataset, column: &str) -> Result<f64, String> {
    let g = ds.schema().group(column).map_err(|e| e.to_string())?;
    ex_ante_sp(ds, &g).map_err(|e| e.to_string())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let adult = load("adult", "adult.toml")?;
    ensure(adult.provenance().raw_rows == 48842, || format!("adult raw rows {}", adult.provenance().raw_rows))?;
    ensure(adult.len() == 45222, || format!("adult rows {}", adult.len()))?;
    let sizes = split_sizes(&adult)?;
    ensure(sizes == (40699, 4523), || format!("adult split {sizes:?}"))?;
    let gender = sp(&adult, "sex")?;
    let marital = sp(&adult, "marital-status")?;
    ensure(close(gender, 0.199, 0.005), || format!("adult gender SP {gender}"))?;
    ensure(close(marital, 0.378, 0.005), || format!("adult marital SP {marital}"))?;
    let german = load("german", "german.toml")?;
    let gs = split_sizes(&german)?;
    ensure(gs == (900, 100), || format!("german split {gs:?}"))?;
    let g_sp = sp(&german, "personal_status")?;
    ensure(close(g_sp, 0.075, 0.005), || format!("german gender SP {g_sp}"))?;
    within(start, Duration::from_secs(30), "ingestion")?;
    Ok(format!(
        "adult {}/{} SP gender {gender:.4} marital {marital:.4}; german {}/{} SP {g_sp:.4}; {:.1?}",
        sizes.0,
        sizes.1,
        gs.0,
        gs.1,
        start.elapsed()
    ))
}

// ---------------------------------------------------------------------------
// 2. metric oracles

fn oracle_rate(preds: &[u8], keep: &[bool]) -> Option<f64> {
    let mut n = 0.0;
    let mut pos = 0.0;
    for (p, k) in preds.iter().zip(keep) {
        if *k {
            n += 1.0;
            if *p == 1 {
                pos += 1.0;
            }
        }
    }
    (n > 0.0).then(|| pos / n)
}

fn oracle_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx.sqrt() * vy.sqrt()))
}

fn oracle_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (si, li) in scores.iter().zip(labels) {
        for (sj, lj) in scores.iter().zip(labels) {
            if *li == 1 && *lj == 0 {
                den += 1.0;
                num += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

fn same(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => close(x, y, 1e-12),
        (None, None) => true,
        _ => false,
    }
}

fn one_instance(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.random_range(1..=100);
    let privileged: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();

    // CFlips per sample, per group and the gap
    let mut records = Vec::with_capacity(n);
    let mut sums = [(0.0, 0usize); 2];
    for (i, &p) in privileged.iter().enumerate() {
        let origin = u8::from(rng.random_bool(0.6));
        let m = rng.random_range(0..=100);
        let members: Vec<u8> = (0..m).map(|_| u8::from(rng.random_bool(0.4))).collect();
        let flips = members.iter().filter(|&&c| c != origin).count();
        let expect = (m > 0).then(|| flips as f64 / m as f64);
        let rec = cflips_sample(i, p, origin, members);
        ensure(same(rec.cflips, expect), || format!("cflips {:?} vs {expect:?}", rec.cflips))?;
        if m > 0 && (origin == 1) == p {
            let side = usize::from(p);
            sums[side].0 += expect.unwrap();
            sums[side].1 += 1;
        }
        records.push(rec);
    }
    let mean = |s: (f64, usize)| (s.1 > 0).then(|| s.0 / s.1 as f64);
    let gp = cflips_group(&records, GroupSide::Privileged, &[]);
    let gu = cflips_group(&records, GroupSide::Unprivileged, &[]);
    ensure(same(gp.mean, mean(sums[1])), || format!("priv mean {:?} vs {:?}", gp.mean, mean(sums[1])))?;
    ensure(same(gu.mean, mean(sums[0])), || format!("unpriv mean {:?} vs {:?}", gu.mean, mean(sums[0])))?;
    let gap = match (mean(sums[1]), mean(sums[0])) {
        (Some(a), Some(b)) => Some(100.0 * (b - a).abs()),
        _ => None,
    };
    ensure(same(delta_cflips(&gp, &gu), gap), || "delta cflips".into())?;

    // group fairness metrics
    let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
    let preds: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
    let cell = |s: bool, y: Option<u8>| -> Vec<bool> {
        (0..n).map(|i| privileged[i] == s && y.is_none_or(|y| labels[i] == y)).collect()
    };
    let r = |s: bool, y: Option<u8>| oracle_rate(&preds, &cell(s, y));
    let o_dsp = r(true, None).zip(r(false, None)).map(|(a, b)| (a - b).abs());
    let o_deo = r(true, Some(1)).zip(r(false, Some(1))).map(|(a, b)| (a - b).abs());
    let o_dao = match (r(true, Some(0)), r(false, Some(0)), r(true, Some(1)), r(false, Some(1))) {
        (Some(a), Some(b), Some(c), Some(d)) => Some(0.5 * ((a - b) + (c - d)).abs()),
        _ => None,
    };
    ensure(same(dsp(&preds, &privileged).ok(), o_dsp), || "dsp".into())?;
    ensure(same(deo(&preds, &labels, &privileged).ok(), o_deo), || "deo".into())?;
    ensure(same(dao(&preds, &labels, &privileged).ok(), o_dao), || "dao".into())?;

    // AUC with ties
    let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0..20) as f64) / 20.0).collect();
    ensure(same(auc(&scores, &labels), oracle_auc(&scores, &labels)), || "auc".into())?;

    // Pearson ρ per encoded column
    let pairs = rng.random_range(3..=100);
    let width = rng.random_range(1..=6);
    let map = ColumnMap((0..width).map(|j| EncodedColumn { feature: format!("f{j}"), level: None }).collect());
    let eps: Vec<Vec<f64>> = (0..pairs)
        .map(|_| {
            (0..width)
                .map(|j| if j == 0 { rng.random_range(-1..=1) as f64 } else { rng.random_range(-5.0..5.0) })
                .collect()
        })
        .collect();
    let delta: Vec<f64> = (0..pairs).map(|_| rng.random_range(-1.0..1.0)).collect();
    let report = correlations_from_parts(&map, &eps, &delta).map_err(|e| e.to_string())?;
    for (j, e) in report.entries.iter().enumerate() {
        let col: Vec<f64> = eps.iter().map(|r| r[j]).collect();
        ensure(same(e.rho, oracle_pearson(&col, &delta)), || format!("rho {:?}", e.rho))?;
    }
    Ok(())
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..1000 {
        one_instance(&mut rng).map_err(|e| format!("instance {i}: {e}"))?;
    }
    within(start, Duration::from_secs(60), "oracle suite")?;
    Ok(format!("1000 instances agree with brute force; {:.1?}", start.elapsed()))
}

// ---------------------------------------------------------------------------
// 3. k-d tree against linear scan

fn mixed_schema() -> FeatureSchema {
    FeatureSchema::new(
        vec![
            FeatureSpec::numeric("n1"),
            FeatureSpec::ordinal("o", &["lo", "mid", "hi", "top"]),
            FeatureSpec::categorical("c", &["p", "q", "r"]),
            FeatureSpec::numeric("n2"),
        ],
        TargetSpec { column: "y".into(), positive: "1".into() },
        vec![],
    )
    .unwrap()
}

fn random_row(rng: &mut ChaCha8Rng) -> Row {
    vec![
        rng.random_range(0..50) as f64 * 0.5,
        rng.random_range(0..4) as f64,
        rng.random_range(0..3) as f64,
        rng.random_range(-3.0..3.0),
    ]
}

fn one_pool(rng: &mut ChaCha8Rng) -> Result<bool, String> {
    let schema = mixed_schema();
    let enc = Encoder::new(&schema);
    let weights: Vec<f64> = (0..enc.width()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f = linear_model(&schema, weights, rng.random_range(-1.0..1.0));
    let n = rng.random_range(10..=2000);
    let pool: Vec<Row> = (0..n).map(|_| random_row(rng)).collect();
    let metric = Metric::fit(&schema, &pool).map_err(|e| e.to_string())?;
    let ctx = CfContext::new(&schema, &enc, &f, &metric);
    let x = (0..50).map(|_| random_row(rng)).find(|r| ctx.predict_rows(&[r]).unwrap().0[0] == 0);
    let Some(x) = x else { return Ok(false) };
    let k = rng.random_range(1..=60);
    let index = KdIndex::build(&ctx, &pool, 1).map_err(|e| e.to_string())?;
    let set = generate_kdtree(&ctx, &x, 1, k, &index, 0).map_err(|e| e.to_string())?;

    let (labels, _) = ctx.predict_rows(&pool).unwrap();
    let mut seen = HashSet::new();
    let mut scan: Vec<f64> = Vec::new();
    for (r, &l) in pool.iter().zip(&labels) {
        let key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
        if l == 1 && seen.insert(key) {
            scan.push(metric.distance(&x, r));
        }
    }
    scan.sort_by(f64::total_cmp);
    scan.truncate(k);

    let pool_keys: HashSet<Vec<u64>> = pool.iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
    let rows: Vec<&Row> = set.members.iter().map(|m| &m.row).collect();
    let (member_labels, _) = ctx.predict_rows(&rows).unwrap();
    ensure(member_labels.iter().all(|&l| l == 1), || "invalid member".into())?;
    ensure(
        rows.iter().all(|r| pool_keys.contains(&r.iter().map(|v| v.to_bits()).collect::<Vec<_>>())),
        || "member outside the pool".into(),
    )?;
    let got: Vec<f64> = set.members.iter().map(|m| m.distance).collect();
    ensure(got == scan, || format!("distances {got:?} vs scan {scan:?}"))?;
    Ok(true)
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut done = 0;
    let mut tries = 0;
    while done < 200 {
        tries += 1;
        if tries > 1000 {
            return Err("could not draw 200 usable pools".into());
        }
        if one_pool(&mut rng).map_err(|e| format!("pool {done}: {e}"))? {
            done += 1;
        }
    }
    Ok(format!("200 pools match the linear scan exactly; {:.1?}", start.elapsed()))
}

// ---------------------------------------------------------------------------
// 4. genetic strategy on the toy boundary

fn criterion_4() -> Outcome {
    let (schema, f) = toy_boundary();
    let enc = Encoder::new(&schema);
    let grid = unit_grid(0.01);
    let metric = Metric::fit(&schema, &grid).map_err(|e| e.to_string())?;
    let ctx = CfContext::new(&schema, &enc, &f, &metric);
    let x = [0.2, 0.3];
    let (labels, _) = ctx.predict_rows(&grid).unwrap();
    let nearest = grid
        .iter()
        .zip(&labels)
        .filter(|(_, &l)| l == 1)
        .map(|(r, _)| l1(&x, r))
        .fold(f64::INFINITY, f64::min);
    let cfg = GeneticConfig::default();
    let a = generate_genetic(&ctx, &x, 1, 10, &cfg, 7).map_err(|e| e.to_string())?;
    let b = generate_genetic(&ctx, &x, 1, 10, &cfg, 7).map_err(|e| e.to_string())?;
    ensure(a.len() == 10, || format!("{} members", a.len()))?;
    let rows: Vec<&Row> = a.members.iter().map(|m| &m.row).collect();
    let (valid, _) = ctx.predict_rows(&rows).unwrap();
    ensure(valid.iter().all(|&l| l == 1), || "invalid member".into())?;
    let mean = rows.iter().map(|r| l1(&x, r)).sum::<f64>() / rows.len() as f64;
    ensure(mean <= 2.0 * nearest, || format!("mean L1 {mean} > 2 × {nearest}"))?;
    let ja = serde_json::to_vec(&a.members).unwrap();
    let jb = serde_json::to_vec(&b.members).unwrap();
    ensure(ja == jb, || "reruns differ".into())?;
    Ok(format!("10/10 valid, mean L1 {mean:.4} vs grid nearest {nearest:.2}, reproducible"))
}

// ---------------------------------------------------------------------------
// 5 and 6. planted proxy

struct PlantedRun {
    auc: f64,
    delta: f64,
    top: String,
    gap_20_50: f64,
}

fn planted(seed: u64) -> Result<PlantedRun, String> {
    let ds = generate_synthetic(&SynthSpec::new(4000, 0.9, seed)).map_err(|e| e.to_string())?;
    let mut cfg = AuditConfig::new("", "", "group");
    cfg.k = 50;
    cfg.seed = seed;
    cfg.decision_maker = ModelSpec::builtin(Family::DecisionTree);
    let run = run_audit_on(&cfg, &ds).map_err(|e| e.to_string())?;
    let r = &run.report;
    let s = &r.strategies[0];
    let at = |l: usize| s.ablation.iter().find(|a| a.length == l).and_then(|a| a.delta);
    Ok(PlantedRun {
        auc: r.sensitive_classifier.test.auc.ok_or("undefined AUC")?,
        delta: s.delta_cflips.ok_or("undefined delta")?,
        top: s.top_proxies.first().cloned().unwrap_or_default(),
        gap_20_50: (at(20).ok_or("no l=20")? - at(50).ok_or("no l=50")?).abs(),
    })
}

fn criterion_5_and_6() -> (Outcome, Outcome) {
    let start = Instant::now();
    let runs: Result<Vec<PlantedRun>, String> = (0..5).map(planted).collect();
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return (Err(e.clone()), Err(e)),
    };
    let elapsed = start.elapsed();
    let c5 = (|| {
        for (seed, r) in runs.iter().enumerate() {
            ensure(r.auc >= 0.9, || format!("seed {seed}: f_s AUC {}", r.auc))?;
            ensure(r.delta >= 30.0, || format!("seed {seed}: delta {}", r.delta))?;
            ensure(r.top == "proxy", || format!("seed {seed}: top proxy {}", r.top))?;
        }
        ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
        let min_auc = runs.iter().map(|r| r.auc).fold(f64::INFINITY, f64::min);
        let min_delta = runs.iter().map(|r| r.delta).fold(f64::INFINITY, f64::min);
        Ok(format!(
            "5 seeds: min f_s AUC {min_auc:.3}, min delta {min_delta:.1} pp, proxy ranked first; {elapsed:.1?}"
        ))
    })();
    let c6 = (|| {
        let worst = runs.iter().map(|r| r.gap_20_50).fold(0.0, f64::max);
        ensure(worst <= 10.0, || format!("|delta(20) - delta(50)| = {worst}"))?;
        Ok(format!("max |delta(20) - delta(50)| = {worst:.2} pp over 5 seeds"))
    })();
    (c5, c6)
}

// ---------------------------------------------------------------------------
// 7. numerical model checks

fn criterion_7() -> Outcome {
    let german = load("german", "german.toml")?;
    let enc = Encoder::new(german.schema());
    let x = enc.encode_rows(german.rows());
    let lr = fit(&Hyperparams::LogisticRegression(LogisticParams::default()), &x, german.target(), 0)
        .map_err(|e| e.to_string())?;
    let grad = lr.logistic().unwrap().objective_gradient(x.view(), german.target());
    let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    ensure(gmax <= 1e-4, || format!("LR gradient max-norm {gmax}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for net_i in 0..20 {
        let inputs = rng.random_range(1..=5);
        let hidden: Vec<usize> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(1..=6)).collect();
        let n = rng.random_range(2..=12);
        let mut net = MlpNet::random(inputs, &hidden, &mut rng);
        // nonzero biases keep every pre-activation off the ReLU kink
        let theta: Vec<f64> = (0..net.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        net.set_flat_params(&theta);
        let data = Array2::from_shape_fn((n, inputs), |_| rng.random_range(-2.0..2.0));
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
        let alpha = 1e-3;
        let (_, analytic) = net.loss_and_gradient(data.view(), &y, alpha);
        let theta = net.flat_params();
        let h = 1e-6;
        let mut numeric = vec![0.0; theta.len()];
        for j in 0..theta.len() {
            let mut t = theta.clone();
            t[j] = theta[j] + h;
            net.set_flat_params(&t);
            let up = net.loss_and_gradient(data.view(), &y, alpha).0;
            t[j] = theta[j] - h;
            net.set_flat_params(&t);
            let down = net.loss_and_gradient(data.view(), &y, alpha).0;
            numeric[j] = (up - down) / (2.0 * h);
        }
        net.set_flat_params(&theta);
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
        let rel = if norm > 0.0 { diff / norm } else { diff };
        ensure(rel <= 1e-4, || format!("network {net_i}: relative gradient error {rel}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("LR gradient max-norm {gmax:.2e}; 20 MLPs, worst relative error {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 8. determinism

fn criterion_8() -> Outcome {
    let mut cfg = AuditConfig::from_path(data_dir().join("german/audit.toml")).map_err(|e| e.to_string())?;
    cfg.strategy = StrategyChoice::Both;
    cfg.genetic.population = 60;
    cfg.genetic.generations = 20;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for (i, workers) in [1usize, 4, 0].into_iter().enumerate() {
        cfg.workers = workers;
        let out = dir.path().join(format!("run{i}"));
        let run = run_audit(&cfg).map_err(|e| e.to_string())?;
        run.write(&out).map_err(|e| e.to_string())?;
        let report = std::fs::read(out.join("report.json")).map_err(|e| e.to_string())?;
        let dump = std::fs::read(out.join("genetic/counterfactuals.jsonl")).map_err(|e| e.to_string())?;
        files.push((report, dump));
    }
    ensure(files.windows(2).all(|w| w[0] == w[1]), || "reports differ across runs".into())?;
    Ok(format!("3 German runs (workers 1, 4, all; kdtree + genetic) byte-identical, {} bytes", files[0].0.len()))
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 dataset reproduction", criterion_1()),
        ("2 metric oracles", criterion_2()),
        ("3 kd-tree exactness", criterion_3()),
        ("4 genetic toy boundary", criterion_4()),
    ];
    let (c5, c6) = criterion_5_and_6();
    results.push(("5 planted proxy", c5));
    results.push(("6 ablation stability", c6));
    results.push(("7 gradient checks", criterion_7()));
    results.push(("8 determinism", criterion_8()));

    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(msg) => println!("PASS  {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
