// SPDX-License-Identifier: MIT OR Apache-2.0
//! Full evaluation of a multi-layer synthetic archive through a run
//! manifest, writing reports and summary.csv to a temp directory.

use paccs::ccs::TrainConfig;
use paccs::harness::{run_evaluation, ArchiveEntry, RunManifest};
use paccs::synth::{generate_stacked_archive, SynthConfig, SynthScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let layers: Vec<SynthConfig> = [SynthScenario::StrongSafe, SynthScenario::Inverted, SynthScenario::WithoutPolarity, SynthScenario::StrongHarm]
        .into_iter()
        .enumerate()
        .map(|(l, scenario)| SynthConfig { scenario, rng_seed: 42 + l as u64, ..Default::default() })
        .collect();
    let archive_dir = tmp.path().join("archive");
    generate_stacked_archive(&layers)?.write(&archive_dir)?;
    let ds = paccs::dataset::synthetic_pair_dataset(layers[0].n_pairs)?;
    let ds_path = tmp.path().join("dataset.jsonl");
    ds.save(&ds_path, paccs::dataset::DataFormat::Jsonl)?;

    let manifest: RunManifest = serde_json::from_value(serde_json::json!({
        "dataset": ds_path,
        "archives": [ArchiveEntry { path: archive_dir, condition: "synthetic".into(), dataset: None }],
        "output_dir": tmp.path().join("out"),
        "train": TrainConfig { n_runs: 4, n_epochs: 800, ..Default::default() },
    }))
?;
    for r in run_evaluation(&manifest, None)? {
        println!(
            "layer {}  esa {:.3}±{:.3}  pc {:+.3}  ci {:.3}  {}",
            r.layer_index, r.metrics.esa_oriented, r.esa_std, r.metrics.pc, r.metrics.ci, r.metrics.scenario
        );
    }
    print!("{}", std::fs::read_to_string(tmp.path().join("out/summary.csv"))?);
    Ok(())
}
