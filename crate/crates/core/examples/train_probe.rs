// SPDX-License-Identifier: MIT OR Apache-2.0
//! Train unsupervised probes on one synthetic layer and inspect the runs.

use paccs::activations::{normalize_layer, NormGrouping, NormalizationPolicy};
use paccs::ccs::{aggregate_runs, Aggregation, RunMetrics, TrainConfig};
use paccs::metrics::{metric_record, Thresholds};
use paccs::synth::{generate_layer, SynthConfig};

fn main() -> paccs::Result<()> {
    let (raw, _w) = generate_layer(&SynthConfig::default(), 0)?;
    let acts = normalize_layer(&raw, NormalizationPolicy::CenterAndScale, NormGrouping::SuffixPooled)?;
    let cfg = TrainConfig { n_runs: 5, n_epochs: 500, ..Default::default() };
    let out = paccs::ccs::train_probe(&acts, &cfg)?;
    let th = Thresholds::default();
    let mut runs = Vec::new();
    for (probe, scores) in out.probes.iter().zip(&out.per_run_scores) {
        let m = metric_record(scores, &th)?;
        println!(
            "seed {:>3}  loss {:.5}  flipped {:<5}  esa {:.3}  pc {:+.3}  ci {:.3}  {}",
            probe.seed, probe.final_loss, probe.sign_flipped, m.esa_oriented, m.pc, m.ci, m.scenario
        );
        runs.push(RunMetrics { esa_raw: m.esa_raw, pc: m.pc, ci: m.ci, final_loss: probe.final_loss });
    }
    let agg = aggregate_runs(&runs, Aggregation::AverageMetrics)?;
    println!("{agg:?}");
    Ok(())
}
