//! Planted-proxy synthetic data.
//!
//! A hidden group bit `s ~ Bern(0.5)` (1 = group `a`, privileged) drives one
//! binary feature `proxy`, equal to `s` with probability `(1 + β)/2` and to
//! `1 − s` otherwise. The label is
//!
//! ```text
//! y = 1  iff  merit + γ · 1.5 · (proxy − ½) + N(0, noise²) > 0.5
//! ```
//!
//! with `merit ~ N(0, 1)` and `noise_features` further `N(0, 1)` columns that
//! the label ignores. Since `P(proxy = 1 | a) − P(proxy = 1 | b) = β`, the
//! ex-ante statistical parity is `β · (P(y | proxy=1) − P(y | proxy=0))`,
//! about `0.45 · β` with the defaults.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSchema, FeatureSpec, Provenance, SensitiveSpec, TargetSpec};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n: usize,
    /// `β ∈ [0, 1]`: agreement between the proxy and the group bit.
    pub proxy_strength: f64,
    /// `γ`: weight of the proxy in the label; 0 makes the label
    /// independent of the proxy.
    pub label_bias: f64,
    /// Standard deviation of the label noise.
    pub noise: f64,
    pub noise_features: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { n: 4000, proxy_strength: 0.9, label_bias: 1.0, noise: 0.5, noise_features: 2, seed: 0 }
    }
}

impl SynthSpec {
    pub fn new(n: usize, proxy_strength: f64, seed: u64) -> Self {
        SynthSpec { n, proxy_strength, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.proxy_strength) {
            return Err(Error::Config(format!("proxy strength {} outside [0, 1]", self.proxy_strength)));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) || !self.label_bias.is_finite() {
            return Err(Error::Config("noise must be finite and non-negative".into()));
        }
        if self.n < 2 {
            return Err(Error::Config("at least two rows are needed".into()));
        }
        Ok(())
    }

    /// Schema of the generated data: `merit`, `proxy`, `noise_1..`, with
    /// sensitive column `group` (`a` privileged) and target `outcome`.
    pub fn schema(&self) -> FeatureSchema {
        let mut features = vec![FeatureSpec::numeric("merit"), FeatureSpec::categorical("proxy", &["0", "1"])];
        features.extend((1..=self.noise_features).map(|i| FeatureSpec::numeric(format!("noise_{i}"))));
        let mut schema = FeatureSchema::new(
            features,
            TargetSpec { column: "outcome".into(), positive: "1".into() },
            vec![SensitiveSpec {
                column: "group".into(),
                privileged: "a".into(),
                unprivileged: "b".into(),
                threshold: None,
            }],
        )
        .expect("synthetic schema is valid");
        schema.name = Some("synthetic".into());
        schema
    }
}

/// Draw a dataset from `spec`. The same spec always yields the same rows.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let schema = Arc::new(spec.schema());
    let mut rng = rng_from_seed(spec.seed);
    let label_noise = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let agree = (1.0 + spec.proxy_strength) / 2.0;
    let mut rows = Vec::with_capacity(spec.n);
    let mut target = Vec::with_capacity(spec.n);
    let mut group = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let s = rng.random_bool(0.5);
        let proxy = if rng.random_bool(agree) { s } else { !s };
        let merit: f64 = StandardNormal.sample(&mut rng);
        let p = f64::from(u8::from(proxy));
        let mut row = vec![merit, p];
        for _ in 0..spec.noise_features {
            row.push(StandardNormal.sample(&mut rng));
        }
        let score = merit + spec.label_bias * 1.5 * (p - 0.5) + label_noise.sample(&mut rng);
        rows.push(row);
        target.push(u8::from(score > 0.5));
        group.push(s);
    }
    let ds = Dataset::new(schema, rows, target, vec![group])?;
    Ok(ds.with_provenance(Provenance {
        source: None,
        raw_rows: spec.n,
        dropped_missing: 0,
        log: vec![format!(
            "synthetic n={} beta={} gamma={} noise={} seed={}",
            spec.n, spec.proxy_strength, spec.label_bias, spec.noise, spec.seed
        )],
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proxy_agreement_matches_strength() {
        let ds = generate_synthetic(&SynthSpec::new(4000, 0.8, 3)).unwrap();
        let s = ds.sensitive_column("group").unwrap();
        let agree = ds.rows().iter().zip(s).filter(|(r, &g)| (r[1] == 1.0) == g).count();
        let rate = agree as f64 / 4000.0;
        assert!((rate - 0.9).abs() <= 0.02, "{rate}");
    }

    #[test]
    fn deterministic_and_validated() {
        let a = generate_synthetic(&SynthSpec::new(50, 0.5, 1)).unwrap();
        let b = generate_synthetic(&SynthSpec::new(50, 0.5, 1)).unwrap();
        assert_eq!(a.rows(), b.rows());
        assert!(generate_synthetic(&SynthSpec::new(50, 1.5, 1)).is_err());
    }

    #[test]
    fn full_strength_copies_group() {
        let ds = generate_synthetic(&SynthSpec::new(500, 1.0, 9)).unwrap();
        let s = ds.sensitive_column("group").unwrap();
        assert!(ds.rows().iter().zip(s).all(|(r, &g)| (r[1] == 1.0) == g));
    }
}
