// SPDX-License-Identifier: MIT OR Apache-2.0

//! Linear CCS probe: loss, multi-restart training and scoring.
//!
//! A probe maps a hidden state `x` to `σ(θᵀx + b)`. Training minimises the
//! mean CCS loss over both contrast pairs of every item (safe statement with
//! Yes/No, harmful statement with Yes/No) by full-batch Adam in `f64`.
//! Parameters are rounded to `f32` when a run finishes, and scores are
//! computed from the rounded values so a saved probe reproduces them.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activations::LayerActivations;
use crate::error::{PaccsError, Result};
use crate::io_util;

pub const DEFAULT_SEED: u64 = 42;
const HOLDOUT_SALT: u64 = 0x0068_6f6c_646f_7574;

fn check_unit(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(PaccsError::Domain(format!("{name} = {p} is outside [0, 1]")))
    }
}

/// The four probe outputs for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreQuadruple {
    /// p(x⁺): safe statement + Yes
    pub p_plus: f64,
    /// p(x⁻): safe statement + No
    pub p_minus: f64,
    /// p(x̄⁺): harmful statement + Yes
    pub pbar_plus: f64,
    /// p(x̄⁻): harmful statement + No
    pub pbar_minus: f64,
}

impl ScoreQuadruple {
    pub fn new(p_plus: f64, p_minus: f64, pbar_plus: f64, pbar_minus: f64) -> Result<Self> {
        let q = ScoreQuadruple {
            p_plus,
            p_minus,
            pbar_plus,
            pbar_minus,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("p_plus", self.p_plus)?;
        check_unit("p_minus", self.p_minus)?;
        check_unit("pbar_plus", self.pbar_plus)?;
        check_unit("pbar_minus", self.pbar_minus)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.p_plus, self.p_minus, self.pbar_plus, self.pbar_minus]
    }

    /// Scores of the negated probe.
    pub fn negated(&self) -> Self {
        ScoreQuadruple {
            p_plus: 1.0 - self.p_plus,
            p_minus: 1.0 - self.p_minus,
            pbar_plus: 1.0 - self.pbar_plus,
            pbar_minus: 1.0 - self.pbar_minus,
        }
    }

    /// Exchange the safe and harmful statements.
    pub fn swapped(&self) -> Self {
        ScoreQuadruple {
            p_plus: self.pbar_plus,
            p_minus: self.pbar_minus,
            pbar_plus: self.p_plus,
            pbar_minus: self.p_minus,
        }
    }
}

fn loss_unchecked(p_plus: f64, p_minus: f64) -> f64 {
    // p⁺ − (1 − p⁻), written so the swap (p⁺, p⁻) → (p⁻, p⁺) is exact
    let c = p_plus + p_minus - 1.0;
    let m = p_plus.min(p_minus);
    c * c + m * m
}

/// CCS loss of one contrast pair: consistency plus confidence.
pub fn ccs_loss(p_plus: f64, p_minus: f64) -> Result<f64> {
    check_unit("p_plus", p_plus)?;
    check_unit("p_minus", p_minus)?;
    Ok(loss_unchecked(p_plus, p_minus))
}

/// Symmetric truth estimate ½(p⁺ + 1 − p⁻).
pub fn belief_score(p_plus: f64, p_minus: f64) -> Result<f64> {
    check_unit("p_plus", p_plus)?;
    check_unit("p_minus", p_minus)?;
    Ok(0.5 * (p_plus + 1.0 - p_minus))
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    AverageMetrics,
    BestLoss,
}

/// How the sign of a trained probe is fixed. The CCS loss cannot tell a
/// probe from its negation; metrics that care about which side is "safe"
/// need a shared convention across runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// Keep whatever sign training produced.
    AsTrained,
    /// Negate (θ, b) when the coordinates of θ sum to a negative value.
    #[default]
    PositiveSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_runs: usize,
    pub n_epochs: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub rng_seed: u64,
    pub aggregation: Aggregation,
    pub sign_convention: SignConvention,
    /// Fraction of pairs held out from training and used for scoring.
    /// `None` trains and scores on every pair.
    pub holdout: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_runs: 10,
            n_epochs: 1500,
            learning_rate: 1e-3,
            init_scale: 1.0,
            rng_seed: DEFAULT_SEED,
            aggregation: Aggregation::AverageMetrics,
            sign_convention: SignConvention::PositiveSum,
            holdout: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 || self.n_epochs == 0 {
            return Err(PaccsError::Config("n_runs and n_epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(PaccsError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(PaccsError::Config(format!("init_scale must be positive, got {}", self.init_scale)));
        }
        if let Some(h) = self.holdout {
            if !(h > 0.0 && h < 1.0) {
                return Err(PaccsError::Config(format!("holdout must lie in (0, 1), got {h}")));
            }
        }
        Ok(())
    }
}

/// Trained probe parameters with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub theta: Vec<f32>,
    pub bias: f32,
    pub seed: u64,
    pub final_loss: f64,
    /// Whether the sign convention negated the trained parameters.
    pub sign_flipped: bool,
}

#[derive(Serialize, Deserialize)]
struct ProbeMeta {
    seed: u64,
    final_loss: f64,
    bias: f32,
    #[serde(default)]
    sign_flipped: bool,
    dim: usize,
}

impl Probe {
    pub fn score(&self, x: &[f32]) -> f64 {
        let z = self.theta.iter().zip(x).map(|(&t, &v)| t as f64 * v as f64).sum::<f64>() + self.bias as f64;
        sigmoid(z).clamp(0.0, 1.0)
    }

    pub fn negated(&self) -> Probe {
        Probe {
            theta: self.theta.iter().map(|t| -t).collect(),
            bias: -self.bias,
            ..self.clone()
        }
    }

    /// Score every pair of a layer.
    pub fn score_layer(&self, acts: &LayerActivations) -> Vec<ScoreQuadruple> {
        (0..acts.n_pairs())
            .map(|i| ScoreQuadruple {
                p_plus: self.score(acts.x_plus.row(i)),
                p_minus: self.score(acts.x_minus.row(i)),
                pbar_plus: self.score(acts.xbar_plus.row(i)),
                pbar_minus: self.score(acts.xbar_minus.row(i)),
            })
            .collect()
    }

    /// Write `{stem}.json` (seed, loss, bias) and `{stem}.f32` (θ, f32le).
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let meta = ProbeMeta {
            seed: self.seed,
            final_loss: self.final_loss,
            bias: self.bias,
            sign_flipped: self.sign_flipped,
            dim: self.theta.len(),
        };
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        io_util::write_atomic(&dir.join(format!("{stem}.json")), text.as_bytes())?;
        let bytes: Vec<u8> = self.theta.iter().flat_map(|v| v.to_le_bytes()).collect();
        io_util::write_atomic(&dir.join(format!("{stem}.f32")), &bytes)
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Probe> {
        let meta: ProbeMeta = serde_json::from_str(&io_util::read_to_string(&dir.join(format!("{stem}.json")))?)?;
        let path = dir.join(format!("{stem}.f32"));
        let bytes = std::fs::read(&path).map_err(|e| PaccsError::io(format!("reading {}", path.display()), e))?;
        if bytes.len() != meta.dim * 4 {
            return Err(PaccsError::Integrity(format!(
                "{}: expected {} floats, file holds {} bytes",
                path.display(),
                meta.dim,
                bytes.len()
            )));
        }
        let theta = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Ok(Probe {
            theta,
            bias: meta.bias,
            seed: meta.seed,
            final_loss: meta.final_loss,
            sign_flipped: meta.sign_flipped,
        })
    }
}

/// Training inputs in `f64`, rows in pair order.
#[derive(Debug, Clone)]
pub struct ContrastBatch {
    dim: usize,
    x_plus: Vec<Vec<f64>>,
    x_minus: Vec<Vec<f64>>,
    xbar_plus: Vec<Vec<f64>>,
    xbar_minus: Vec<Vec<f64>>,
}

impl ContrastBatch {
    pub fn from_layer(acts: &LayerActivations) -> Self {
        let conv = |m: &crate::activations::Matrix| -> Vec<Vec<f64>> {
            (0..m.rows()).map(|i| m.row(i).iter().map(|&v| v as f64).collect()).collect()
        };
        ContrastBatch {
            dim: acts.dim(),
            x_plus: conv(&acts.x_plus),
            x_minus: conv(&acts.x_minus),
            xbar_plus: conv(&acts.xbar_plus),
            xbar_minus: conv(&acts.xbar_minus),
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.x_plus.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Mean CCS loss over the 2·n_pairs contrast pairs and its gradient
    /// with respect to (θ, b).
    pub fn loss_and_grad(&self, theta: &[f64], bias: f64) -> (f64, Vec<f64>, f64) {
        let mut loss = 0.0;
        let mut g_theta = vec![0.0; self.dim];
        let mut g_bias = 0.0;
        let terms = [(&self.x_plus, &self.x_minus), (&self.xbar_plus, &self.xbar_minus)];
        let z = |x: &[f64]| theta.iter().zip(x).map(|(t, v)| t * v).sum::<f64>() + bias;
        for (yes, no) in terms {
            for (a, b) in yes.iter().zip(no.iter()) {
                let p = sigmoid(z(a));
                let q = sigmoid(z(b));
                loss += loss_unchecked(p, q);
                let c = 2.0 * (p + q - 1.0);
                // min(p, q) routes its gradient to p on ties
                let (dp, dq) = if p <= q { (c + 2.0 * p, c) } else { (c, c + 2.0 * q) };
                let gp = dp * p * (1.0 - p);
                let gq = dq * q * (1.0 - q);
                for ((g, va), vb) in g_theta.iter_mut().zip(a).zip(b) {
                    *g += gp * va + gq * vb;
                }
                g_bias += gp + gq;
            }
        }
        let n = (2 * self.n_pairs()) as f64;
        g_theta.iter_mut().for_each(|g| *g /= n);
        (loss / n, g_theta, g_bias / n)
    }

    pub fn loss(&self, theta: &[f64], bias: f64) -> f64 {
        self.loss_and_grad(theta, bias).0
    }
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Train one probe. `run` is only used for error reporting.
pub fn train_single(batch: &ContrastBatch, cfg: &TrainConfig, seed: u64, run: usize) -> Result<Probe> {
    let d = batch.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, cfg.init_scale / (d.max(1) as f64).sqrt())
        .map_err(|e| PaccsError::Config(format!("init distribution: {e}")))?;
    // params = [θ..., b]
    let mut params: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
    params.push(0.0);
    let mut opt = Adam::new(d + 1, cfg.learning_rate);
    let mut grad = vec![0.0; d + 1];
    for epoch in 0..cfg.n_epochs {
        let (loss, g_theta, g_bias) = batch.loss_and_grad(&params[..d], params[d]);
        if !loss.is_finite() {
            return Err(PaccsError::Divergence { run, epoch });
        }
        grad[..d].copy_from_slice(&g_theta);
        grad[d] = g_bias;
        opt.step(&mut params, &grad);
        if params.iter().any(|p| !p.is_finite()) {
            return Err(PaccsError::Divergence { run, epoch });
        }
    }
    let mut theta: Vec<f32> = params[..d].iter().map(|&v| v as f32).collect();
    let mut bias = params[d] as f32;
    let theta64: Vec<f64> = theta.iter().map(|&v| v as f64).collect();
    let final_loss = batch.loss(&theta64, bias as f64);
    if !final_loss.is_finite() {
        return Err(PaccsError::Divergence { run, epoch: cfg.n_epochs });
    }
    let mut sign_flipped = false;
    if cfg.sign_convention == SignConvention::PositiveSum && theta.iter().map(|&v| v as f64).sum::<f64>() < 0.0 {
        theta.iter_mut().for_each(|v| *v = -*v);
        bias = -bias;
        sign_flipped = true;
    }
    Ok(Probe {
        theta,
        bias,
        seed,
        final_loss,
        sign_flipped,
    })
}

/// Deterministic (train, eval) pair split. Without a holdout both are the
/// full index range.
pub fn holdout_split(n_pairs: usize, cfg: &TrainConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let all: Vec<usize> = (0..n_pairs).collect();
    let Some(frac) = cfg.holdout else {
        return Ok((all.clone(), all));
    };
    let n_eval = ((n_pairs as f64) * frac).round() as usize;
    if n_eval == 0 || n_pairs - n_eval.min(n_pairs) < 2 {
        return Err(PaccsError::Config(format!(
            "holdout {frac} of {n_pairs} pairs leaves {n_eval} for scoring and {} for training",
            n_pairs.saturating_sub(n_eval)
        )));
    }
    let mut perm = all;
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ HOLDOUT_SALT));
    let mut eval = perm[..n_eval].to_vec();
    let mut train = perm[n_eval..].to_vec();
    eval.sort_unstable();
    train.sort_unstable();
    Ok((train, eval))
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub probes: Vec<Probe>,
    /// `per_run_scores[r][k]` scores pair `eval_pairs[k]` under run `r`.
    pub per_run_scores: Vec<Vec<ScoreQuadruple>>,
    /// Pair indices the scores refer to.
    pub eval_pairs: Vec<usize>,
}

/// Multi-restart training. Runs execute in parallel and are collected in
/// run order, so results do not depend on the thread count.
pub fn train_probe(acts: &LayerActivations, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    if acts.dim() == 0 || acts.n_pairs() < 2 {
        return Err(PaccsError::Config(format!(
            "training needs d >= 1 and at least 2 pairs, layer {} has d = {}, n_pairs = {}",
            acts.layer_index,
            acts.dim(),
            acts.n_pairs()
        )));
    }
    let (train_idx, eval_idx) = holdout_split(acts.n_pairs(), cfg)?;
    let train_acts = if cfg.holdout.is_some() { acts.select_pairs(&train_idx) } else { acts.clone() };
    let eval_acts = if cfg.holdout.is_some() { acts.select_pairs(&eval_idx) } else { acts.clone() };
    let batch = ContrastBatch::from_layer(&train_acts);
    let probes = (0..cfg.n_runs)
        .into_par_iter()
        .map(|r| train_single(&batch, cfg, cfg.rng_seed.wrapping_add(r as u64), r))
        .collect::<Result<Vec<_>>>()?;
    let per_run_scores = probes.iter().map(|p| p.score_layer(&eval_acts)).collect();
    Ok(TrainOutput {
        probes,
        per_run_scores,
        eval_pairs: eval_idx,
    })
}

/// Metrics of one training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub esa_raw: f64,
    pub pc: f64,
    pub ci: f64,
    pub final_loss: f64,
}

/// Run metrics folded into one value per metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub esa_raw: f64,
    pub pc: f64,
    pub ci: f64,
    pub esa_std: f64,
    pub pc_std: f64,
    pub ci_std: f64,
    /// Run chosen under best_loss.
    pub selected_run: Option<usize>,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn aggregate_runs(runs: &[RunMetrics], mode: Aggregation) -> Result<RunAggregate> {
    if runs.is_empty() {
        return Err(PaccsError::Domain("aggregate_runs needs at least one run".into()));
    }
    let esa: Vec<f64> = runs.iter().map(|r| r.esa_raw).collect();
    let pc: Vec<f64> = runs.iter().map(|r| r.pc).collect();
    let ci: Vec<f64> = runs.iter().map(|r| r.ci).collect();
    let (esa_std, pc_std, ci_std) = (sample_std(&esa), sample_std(&pc), sample_std(&ci));
    Ok(match mode {
        Aggregation::AverageMetrics => RunAggregate {
            esa_raw: mean(&esa),
            pc: mean(&pc),
            ci: mean(&ci),
            esa_std,
            pc_std,
            ci_std,
            selected_run: None,
        },
        Aggregation::BestLoss => {
            let best = runs
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.final_loss.total_cmp(&b.1.final_loss))
                .map(|(i, _)| i)
                .unwrap();
            RunAggregate {
                esa_raw: runs[best].esa_raw,
                pc: runs[best].pc,
                ci: runs[best].ci,
                esa_std,
                pc_std,
                ci_std,
                selected_run: Some(best),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::Matrix;
    use approx::assert_abs_diff_eq;

    #[test]
    fn loss_examples() {
        assert_eq!(ccs_loss(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(ccs_loss(0.5, 0.5).unwrap(), 0.25);
        assert_abs_diff_eq!(ccs_loss(0.8, 0.1).unwrap(), 0.02, epsilon = 1e-12);
        assert!(matches!(ccs_loss(1.2, 0.0), Err(PaccsError::Domain(_))));
        assert!(ccs_loss(0.2, -0.1).is_err());
    }

    #[test]
    fn belief_examples() {
        assert_eq!(belief_score(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(belief_score(0.5, 0.5).unwrap(), 0.5);
        assert_abs_diff_eq!(belief_score(0.92, 0.08).unwrap(), 0.92, epsilon = 1e-12);
        assert!(belief_score(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn aggregate_modes() {
        let r = |esa, loss| RunMetrics {
            esa_raw: esa,
            pc: 0.1,
            ci: 0.2,
            final_loss: loss,
        };
        let runs = [r(0.8, 0.3), r(0.9, 0.1)];
        let avg = aggregate_runs(&runs, Aggregation::AverageMetrics).unwrap();
        assert_abs_diff_eq!(avg.esa_raw, 0.85, epsilon = 1e-12);
        let best = aggregate_runs(&runs, Aggregation::BestLoss).unwrap();
        assert_eq!(best.esa_raw, 0.9);
        assert_eq!(best.selected_run, Some(1));
        for mode in [Aggregation::AverageMetrics, Aggregation::BestLoss] {
            let one = aggregate_runs(&runs[..1], mode).unwrap();
            assert_eq!((one.esa_raw, one.pc, one.ci, one.esa_std), (0.8, 0.1, 0.2, 0.0));
        }
        assert!(aggregate_runs(&[], Aggregation::BestLoss).is_err());
    }

    fn zero_layer(n: usize, d: usize) -> LayerActivations {
        let m = Matrix::zeros(n, d);
        LayerActivations::new(0, m.clone(), m.clone(), m.clone(), m).unwrap()
    }

    #[test]
    fn zero_activations_score_sigma_b() {
        let cfg = TrainConfig {
            n_runs: 1,
            n_epochs: 200,
            ..Default::default()
        };
        let out = train_probe(&zero_layer(4, 3), &cfg).unwrap();
        let p = &out.probes[0];
        assert!(p.final_loss > 0.1);
        let s = sigmoid(p.bias as f64);
        for q in &out.per_run_scores[0] {
            assert_eq!(q.as_array(), [s; 4]);
        }
    }

    #[test]
    fn training_is_reproducible() {
        let rows: Vec<Vec<f32>> = (0..6).map(|i| vec![i as f32 * 0.3 - 0.7, 1.0 - i as f32 * 0.2]).collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let neg = Matrix::new(6, 2, m.data().iter().map(|v| -v).collect()).unwrap();
        let la = LayerActivations::new(0, m.clone(), neg.clone(), neg, m).unwrap();
        let cfg = TrainConfig {
            n_runs: 3,
            n_epochs: 100,
            ..Default::default()
        };
        let a = train_probe(&la, &cfg).unwrap();
        let b = train_probe(&la, &cfg).unwrap();
        assert_eq!(a.probes, b.probes);
        assert_eq!(a.probes[1].seed, DEFAULT_SEED + 1);
    }

    #[test]
    fn too_few_pairs_is_config_error() {
        assert!(matches!(train_probe(&zero_layer(1, 3), &TrainConfig::default()), Err(PaccsError::Config(_))));
    }

    #[test]
    fn holdout_split_is_disjoint_and_seeded() {
        let cfg = TrainConfig {
            holdout: Some(0.25),
            ..Default::default()
        };
        let (tr, ev) = holdout_split(20, &cfg).unwrap();
        assert_eq!(ev.len(), 5);
        assert_eq!(tr.len(), 15);
        assert!(ev.iter().all(|i| !tr.contains(i)));
        assert_eq!(holdout_split(20, &cfg).unwrap(), (tr, ev));
        let bad = TrainConfig {
            holdout: Some(0.9),
            ..Default::default()
        };
        assert!(holdout_split(2, &bad).is_err());
    }

    #[test]
    fn probe_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = Probe {
            theta: vec![0.25, -1.5, 3.0e-7],
            bias: -0.125,
            seed: 7,
            final_loss: 0.0123,
            sign_flipped: true,
        };
        p.save(dir.path(), "run0").unwrap();
        assert_eq!(Probe::load(dir.path(), "run0").unwrap(), p);
    }

    #[test]
    fn negated_probe_complements_scores() {
        let p = Probe {
            theta: vec![0.5, -2.0],
            bias: 0.3,
            seed: 0,
            final_loss: 0.0,
            sign_flipped: false,
        };
        let x = [1.0f32, 0.25];
        assert_abs_diff_eq!(p.score(&x) + p.negated().score(&x), 1.0, epsilon = 1e-12);
    }
}
