// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic activation archives with planted belief structure.
//!
//! A unit direction `w` is drawn from the seeded RNG in the positive orthant
//! (so the planted orientation survives the probe sign convention), and each
//! variant row sits at a multiple of `signal_strength · w` plus isotropic
//! Gaussian noise:
//!
//! | scenario           | x⁺       | x⁻        | x̄⁺           | x̄⁻            |
//! |--------------------|----------|-----------|--------------|---------------|
//! | strong_safe        | +w       | −w        | −w           | +w            |
//! | strong_harm        | −w       | +w        | +w           | −w            |
//! | inverted           | y·w      | −y·w      | (y + ½)·w    | (−y + ½)·w    |
//! | without_polarity   | 0        | 0         | 0            | 0             |
//! | polarity_collapsed | y·w      | −y·w      | y·w          | −y·w          |
//!
//! `y ∈ {−1, +1}` is drawn per pair. In `inverted` the safe and harmful
//! statements share a truth value and the harmful completions are shifted
//! along `w`, so no probe can score them consistently. In
//! `polarity_collapsed` the two statements of a pair are indistinguishable,
//! which is what a meaningless negation token does to the data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::activations::{ActivationArchive, ArchiveManifest, LayerActivations, Matrix, TokenPolicy};
use crate::dataset::synthetic_pair_dataset;
use crate::error::{PaccsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthScenario {
    StrongSafe,
    StrongHarm,
    Inverted,
    WithoutPolarity,
    PolarityCollapsed,
}

impl SynthScenario {
    pub const ALL: [SynthScenario; 5] = [
        SynthScenario::StrongSafe,
        SynthScenario::StrongHarm,
        SynthScenario::Inverted,
        SynthScenario::WithoutPolarity,
        SynthScenario::PolarityCollapsed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SynthScenario::StrongSafe => "strong_safe",
            SynthScenario::StrongHarm => "strong_harm",
            SynthScenario::Inverted => "inverted",
            SynthScenario::WithoutPolarity => "without_polarity",
            SynthScenario::PolarityCollapsed => "polarity_collapsed",
        }
    }
}

impl std::str::FromStr for SynthScenario {
    type Err = PaccsError;

    fn from_str(s: &str) -> Result<Self> {
        SynthScenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| PaccsError::Config(format!("unknown synthetic scenario `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub d: usize,
    pub n_pairs: usize,
    pub scenario: SynthScenario,
    pub signal_strength: f64,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            d: 16,
            n_pairs: 64,
            scenario: SynthScenario::StrongSafe,
            signal_strength: 5.0,
            noise_sigma: 0.1,
            rng_seed: crate::ccs::DEFAULT_SEED,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || self.n_pairs < 4 {
            return Err(PaccsError::Config(format!(
                "synthetic archives need d >= 2 and n_pairs >= 4 (got d = {}, n_pairs = {})",
                self.d, self.n_pairs
            )));
        }
        for (name, v) in [("signal_strength", self.signal_strength), ("noise_sigma", self.noise_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PaccsError::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Positive-orthant unit vector.
fn planted_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let std = Normal::<f64>::new(0.0, 1.0).expect("unit normal");
    loop {
        let w: Vec<f64> = (0..d).map(|_| std.sample(rng).abs()).collect();
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return w.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Coefficients along `w` of (x⁺, x⁻, x̄⁺, x̄⁻) for one pair.
fn coefficients(scenario: SynthScenario, rng: &mut ChaCha8Rng) -> [f64; 4] {
    match scenario {
        SynthScenario::StrongSafe => [1.0, -1.0, -1.0, 1.0],
        SynthScenario::StrongHarm => [-1.0, 1.0, 1.0, -1.0],
        SynthScenario::WithoutPolarity => [0.0; 4],
        SynthScenario::Inverted => {
            let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
            [y, -y, y + 0.5, -y + 0.5]
        }
        SynthScenario::PolarityCollapsed => {
            let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
            [y, -y, y, -y]
        }
    }
}

/// One synthetic layer with the given index. Returns the planted direction.
pub fn generate_layer(cfg: &SynthConfig, layer_index: usize) -> Result<(LayerActivations, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let w = planted_direction(&mut rng, cfg.d);
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| PaccsError::Config(format!("noise: {e}")))?;
    let mut data: [Vec<f32>; 4] = Default::default();
    for _ in 0..cfg.n_pairs {
        let coef = coefficients(cfg.scenario, &mut rng);
        for (buf, c) in data.iter_mut().zip(coef) {
            for wj in &w {
                buf.push((c * cfg.signal_strength * wj + noise.sample(&mut rng)) as f32);
            }
        }
    }
    let [a, b, c, d] = data;
    let m = |v| Matrix::new(cfg.n_pairs, cfg.d, v);
    Ok((LayerActivations::new(layer_index, m(a)?, m(b)?, m(c)?, m(d)?)?, w))
}

/// Fingerprint of the placeholder dataset that synthetic archives pair with.
pub fn synthetic_fingerprint(n_pairs: usize) -> Result<String> {
    Ok(synthetic_pair_dataset(n_pairs)?.fingerprint())
}

/// Single-layer archive; the manifest records the configuration.
pub fn generate_synthetic_archive(cfg: &SynthConfig) -> Result<ActivationArchive> {
    generate_stacked_archive(std::slice::from_ref(cfg))
}

/// Archive with one independently generated layer per configuration.
/// All configurations must agree on `d` and `n_pairs`.
pub fn generate_stacked_archive(cfgs: &[SynthConfig]) -> Result<ActivationArchive> {
    let first = cfgs.first().ok_or_else(|| PaccsError::Config("no synthetic layer configurations".into()))?;
    if cfgs.iter().any(|c| c.d != first.d || c.n_pairs != first.n_pairs) {
        return Err(PaccsError::Config("stacked synthetic layers must share d and n_pairs".into()));
    }
    let layers = cfgs
        .iter()
        .enumerate()
        .map(|(i, c)| generate_layer(c, i).map(|(la, _)| la))
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = ArchiveManifest::new(
        format!("synthetic/{}", first.scenario.as_str()),
        cfgs.len(),
        first.d,
        first.n_pairs,
        TokenPolicy::LastToken,
        synthetic_fingerprint(first.n_pairs)?,
    );
    let synth = if cfgs.len() == 1 { serde_json::to_value(first)? } else { serde_json::to_value(cfgs)? };
    manifest.extra.insert("synth".into(), synth);
    ActivationArchive::from_layers(manifest, layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            SynthConfig { d: 1, ..Default::default() },
            SynthConfig { n_pairs: 3, ..Default::default() },
            SynthConfig { noise_sigma: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(generate_synthetic_archive(&c).is_err());
        }
    }

    #[test]
    fn direction_is_unit_and_positive() {
        let (_, w) = generate_layer(&SynthConfig::default(), 0).unwrap();
        assert!((w.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn noiseless_strong_safe_rows_follow_table() {
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            signal_strength: 2.0,
            d: 3,
            n_pairs: 4,
            ..Default::default()
        };
        let (la, w) = generate_layer(&cfg, 0).unwrap();
        for (j, &wj) in w.iter().enumerate() {
            assert_eq!(la.x_plus.get(0, j), (2.0 * wj) as f32);
            assert_eq!(la.x_minus.get(1, j), (-2.0 * wj) as f32);
            assert_eq!(la.xbar_minus.get(2, j), la.x_plus.get(2, j));
            assert_eq!(la.xbar_plus.get(3, j), la.x_minus.get(3, j));
        }
    }

    #[test]
    fn manifest_records_config() {
        let cfg = SynthConfig::default();
        let a = generate_synthetic_archive(&cfg).unwrap();
        let back: SynthConfig = serde_json::from_value(a.manifest().extra["synth"].clone()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(a.manifest().n_layers, 1);
    }

    #[test]
    fn scenario_names_parse() {
        for s in SynthScenario::ALL {
            assert_eq!(s.as_str().parse::<SynthScenario>().unwrap(), s);
        }
    }
}
