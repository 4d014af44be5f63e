// SPDX-License-Identifier: MIT OR Apache-2.0

//! Layer-wise evaluation: normalize, train, score, classify, report.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! summary.csv                     one row per (condition, layer)
//! reports/{condition}/{layer}.json
//! reports/{condition}/probes/     only with `save_probes`
//! ```

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activations::{open_archive_set, normalize_layer, ActivationArchive, LoadMode, NormGrouping, NormalizationPolicy};
use crate::ccs::{aggregate_runs, train_probe, Aggregation, RunMetrics, ScoreQuadruple, TrainConfig};
use crate::dataset::{load_pair_dataset, DataFormat, PairDataset};
use crate::error::{PaccsError, Result};
use crate::io_util;
use crate::metrics::{
    aggregate_layers, classify_scenario, empirical_separation_accuracy, mean_pc_ci, median_quad, summary_to_csv, AggregateOptions, EsaResult,
    MetricRecord, SummaryRow, SummaryTable, Thresholds,
};

/// Environment variable consulted for relative dataset paths that do not
/// resolve against the manifest directory.
pub const DATA_DIR_ENV: &str = "PACCS_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub path: PathBuf,
    /// Condition tag, e.g. `mixed`, `not`, `ttt`.
    pub condition: String,
    /// Dataset the archive was extracted from; falls back to the
    /// manifest-level `dataset`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
}

/// Evaluation run description, read from JSON. Relative paths are
/// resolved against the directory holding the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    pub archives: Vec<ArchiveEntry>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub normalization: NormalizationPolicy,
    #[serde(default)]
    pub norm_grouping: NormGrouping,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub save_probes: bool,
    #[serde(default)]
    pub lazy: bool,
}

impl RunManifest {
    /// Parse a manifest file and resolve its relative paths.
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = io_util::read_to_string(path)?;
        let mut m: RunManifest = serde_json::from_str(&text).map_err(|e| PaccsError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.resolve(&base);
        Ok(m)
    }

    fn resolve(&mut self, base: &Path) {
        let data_dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
        let dataset = |p: &Path| -> PathBuf {
            if p.is_absolute() {
                return p.to_path_buf();
            }
            let local = base.join(p);
            match &data_dir {
                Some(d) if !local.exists() => d.join(p),
                _ => local,
            }
        };
        self.dataset = self.dataset.as_deref().map(dataset);
        for a in &mut self.archives {
            a.path = base.join(&a.path);
            a.dataset = a.dataset.as_deref().map(dataset);
        }
        self.output_dir = base.join(&self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.archives.is_empty() {
            return Err(PaccsError::Config("manifest lists no archives".into()));
        }
        for a in &self.archives {
            if a.condition.is_empty() || a.condition.contains(['/', '\\']) {
                return Err(PaccsError::Config(format!("invalid condition tag `{}`", a.condition)));
            }
            if !a.path.exists() {
                return Err(PaccsError::Config(format!("archive {} does not exist", a.path.display())));
            }
            let ds = a.dataset.as_ref().or(self.dataset.as_ref()).ok_or_else(|| {
                PaccsError::Config(format!("no dataset for archive {} (set `dataset`)", a.path.display()))
            })?;
            if !ds.exists() {
                return Err(PaccsError::Config(format!("dataset {} does not exist", ds.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub condition: String,
    pub dataset: String,
    pub layer_index: usize,
    pub metrics: MetricRecord,
    pub aggregation: Aggregation,
    pub n_runs: usize,
    pub esa_std: f64,
    pub pc_std: f64,
    pub ci_std: f64,
    /// Run chosen under best_loss.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_run: Option<usize>,
    pub per_run: Vec<RunMetrics>,
    pub seeds: Vec<u64>,
    pub sign_flipped: Vec<bool>,
    pub median_quad: ScoreQuadruple,
    pub n_eval_pairs: usize,
}

impl LayerReport {
    pub fn summary_row(&self) -> SummaryRow {
        SummaryRow {
            layer: self.layer_index,
            esa_raw: self.metrics.esa_raw,
            esa_oriented: self.metrics.esa_oriented,
            orientation: self.metrics.orientation,
            pc: self.metrics.pc,
            ci: self.metrics.ci,
            scenario: self.metrics.scenario,
            n_runs: self.n_runs,
            pc_std: self.pc_std,
            ci_std: self.ci_std,
            condition: self.condition.clone(),
        }
    }
}

/// Settings that apply to every layer of an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSettings {
    pub train: TrainConfig,
    pub normalization: NormalizationPolicy,
    pub norm_grouping: NormGrouping,
    pub thresholds: Thresholds,
}

impl From<&RunManifest> for LayerSettings {
    fn from(m: &RunManifest) -> Self {
        LayerSettings {
            train: m.train.clone(),
            normalization: m.normalization,
            norm_grouping: m.norm_grouping,
            thresholds: m.thresholds,
        }
    }
}

fn mean_quads(per_run: &[Vec<ScoreQuadruple>]) -> Vec<ScoreQuadruple> {
    let n = per_run.len() as f64;
    (0..per_run[0].len())
        .map(|i| {
            let mut acc = [0.0; 4];
            for run in per_run {
                for (a, v) in acc.iter_mut().zip(run[i].as_array()) {
                    *a += v;
                }
            }
            ScoreQuadruple {
                p_plus: acc[0] / n,
                p_minus: acc[1] / n,
                pbar_plus: acc[2] / n,
                pbar_minus: acc[3] / n,
            }
        })
        .collect()
}

/// Evaluate one layer of an archive. Returns the report and the probes.
pub fn evaluate_layer(
    archive: &ActivationArchive,
    layer: usize,
    condition: &str,
    dataset: &str,
    s: &LayerSettings,
) -> Result<(LayerReport, Vec<crate::ccs::Probe>)> {
    let raw = archive.layer(layer)?;
    let acts = normalize_layer(&raw, s.normalization, s.norm_grouping)?;
    let out = train_probe(&acts, &s.train)?;
    let mut per_run = Vec::with_capacity(out.probes.len());
    for (probe, quads) in out.probes.iter().zip(&out.per_run_scores) {
        let esa = empirical_separation_accuracy(quads)?;
        let (pc, ci) = mean_pc_ci(quads)?;
        per_run.push(RunMetrics {
            esa_raw: esa.esa_raw,
            pc,
            ci,
            final_loss: probe.final_loss,
        });
    }
    let agg = aggregate_runs(&per_run, s.train.aggregation)?;
    let quads = match agg.selected_run {
        Some(r) => out.per_run_scores[r].clone(),
        None => mean_quads(&out.per_run_scores),
    };
    let esa = EsaResult::from_raw(agg.esa_raw);
    let scenario = classify_scenario(esa.esa_oriented, esa.orientation, agg.pc, agg.ci, &quads, &s.thresholds)?;
    let report = LayerReport {
        condition: condition.to_string(),
        dataset: dataset.to_string(),
        layer_index: layer,
        metrics: MetricRecord {
            esa_raw: esa.esa_raw,
            esa_oriented: esa.esa_oriented,
            orientation: esa.orientation,
            pc: agg.pc,
            ci: agg.ci,
            scenario,
        },
        aggregation: s.train.aggregation,
        n_runs: per_run.len(),
        esa_std: agg.esa_std,
        pc_std: agg.pc_std,
        ci_std: agg.ci_std,
        selected_run: agg.selected_run,
        seeds: out.probes.iter().map(|p| p.seed).collect(),
        sign_flipped: out.probes.iter().map(|p| p.sign_flipped).collect(),
        per_run,
        median_quad: median_quad(&quads)?,
        n_eval_pairs: out.eval_pairs.len(),
    };
    Ok((report, out.probes))
}

fn check_fingerprint(archive: &ActivationArchive, ds: &PairDataset) -> Result<()> {
    let fp = ds.fingerprint();
    let m = archive.manifest();
    if m.dataset_fingerprint != fp {
        return Err(PaccsError::FingerprintMismatch {
            archive: m.dataset_fingerprint.clone(),
            dataset: fp,
        });
    }
    if m.n_pairs != ds.n_pairs() {
        return Err(PaccsError::Integrity(format!("archive has {} pairs, dataset {}", m.n_pairs, ds.n_pairs())));
    }
    Ok(())
}

/// Evaluate every layer of every archive in the manifest. Reports are
/// ordered by archive entry, then part, then layer index.
pub fn evaluate_archive(manifest: &RunManifest) -> Result<Vec<LayerReport>> {
    Ok(evaluate_with_probes(manifest)?.into_iter().map(|(r, _)| r).collect())
}

fn evaluate_with_probes(manifest: &RunManifest) -> Result<Vec<(LayerReport, Vec<crate::ccs::Probe>)>> {
    manifest.validate()?;
    let settings = LayerSettings::from(manifest);
    let mode = if manifest.lazy { LoadMode::Lazy } else { LoadMode::Eager };
    let mut all = Vec::new();
    for entry in &manifest.archives {
        let ds_path = entry.dataset.as_ref().or(manifest.dataset.as_ref()).expect("validated");
        let ds = load_pair_dataset(ds_path, DataFormat::from_path(ds_path))?;
        for (part, archive) in open_archive_set(&entry.path, mode)? {
            check_fingerprint(&archive, &ds)?;
            let condition = match &part {
                Some(tag) => format!("{}.{tag}", entry.condition),
                None => entry.condition.clone(),
            };
            log::info!("evaluating {} ({} layers) as `{condition}`", entry.path.display(), archive.n_layers());
            let reports = (0..archive.n_layers())
                .into_par_iter()
                .map(|l| evaluate_layer(&archive, l, &condition, ds.name(), &settings))
                .collect::<Result<Vec<_>>>()?;
            all.extend(reports);
        }
    }
    Ok(all)
}

/// Evaluate on a pool of `jobs` worker threads (all cores when `None`) and
/// write reports plus `summary.csv`. Output bytes do not depend on `jobs`.
pub fn run_evaluation(manifest: &RunManifest, jobs: Option<usize>) -> Result<Vec<LayerReport>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(PaccsError::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| PaccsError::Config(format!("thread pool: {e}")))?;
    let results = pool.install(|| evaluate_with_probes(manifest))?;
    write_outputs(manifest, &results)?;
    Ok(results.into_iter().map(|(r, _)| r).collect())
}

fn write_outputs(manifest: &RunManifest, results: &[(LayerReport, Vec<crate::ccs::Probe>)]) -> Result<()> {
    let out = &manifest.output_dir;
    for (r, probes) in results {
        let dir = out.join("reports").join(&r.condition);
        let mut text = serde_json::to_string_pretty(r)?;
        text.push('\n');
        io_util::write_atomic(&dir.join(format!("{}.json", r.layer_index)), text.as_bytes())?;
        if manifest.save_probes {
            for (i, p) in probes.iter().enumerate() {
                p.save(&dir.join("probes"), &format!("layer{}_run{i}", r.layer_index))?;
            }
        }
    }
    let rows: Vec<SummaryRow> = results.iter().map(|(r, _)| r.summary_row()).collect();
    io_util::write_atomic(&out.join("summary.csv"), &summary_to_csv(&rows)?)
}

/// Cross-condition comparison of summary rows: filtered statistics per
/// condition and pairwise MADs.
pub fn compare_conditions(rows: &[SummaryRow], opts: &AggregateOptions) -> Result<SummaryTable> {
    let mut conditions: Vec<&str> = rows.iter().map(|r| r.condition.as_str()).collect();
    conditions.sort_unstable();
    conditions.dedup();
    if conditions.len() < 2 {
        return Err(PaccsError::Config(format!("comparison needs at least 2 conditions, found {}", conditions.len())));
    }
    aggregate_layers(rows, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{Metric, Orientation, Scenario};

    fn row(cond: &str, pc: f64, esa: f64) -> SummaryRow {
        SummaryRow {
            layer: 0,
            esa_raw: esa,
            esa_oriented: esa,
            orientation: Orientation::SafeHigh,
            pc,
            ci: 0.0,
            scenario: Scenario::Unclassified,
            n_runs: 1,
            pc_std: 0.0,
            ci_std: 0.0,
            condition: cond.into(),
        }
    }

    #[test]
    fn compare_constant_conditions() {
        let rows = [row("not", 0.1, 0.9), row("ttt", 0.4, 0.9)];
        let t = compare_conditions(&rows, &AggregateOptions::default()).unwrap();
        assert!((t.mad("not", "ttt", Metric::Pc).unwrap() - 0.3).abs() < 1e-12);
        assert!(compare_conditions(&rows[..1], &AggregateOptions::default()).is_err());
    }

    #[test]
    fn manifest_defaults_and_resolution() {
        let text = r#"{"dataset": "d.jsonl", "archives": [{"path": "a", "condition": "mixed"}], "output_dir": "out"}"#;
        let mut m: RunManifest = serde_json::from_str(text).unwrap();
        assert_eq!(m.train, TrainConfig::default());
        assert_eq!(m.normalization, NormalizationPolicy::CenterAndScale);
        m.resolve(Path::new("/base"));
        assert_eq!(m.archives[0].path, PathBuf::from("/base/a"));
        assert_eq!(m.output_dir, PathBuf::from("/base/out"));
        assert!(m.validate().is_err());
    }
}
