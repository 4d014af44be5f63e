// SPDX-License-Identifier: MIT OR Apache-2.0
//! Write a small synthetic archive per scenario and read it back lazily.

use paccs::activations::{read_activation_archive_with, LoadMode, Variant};
use paccs::synth::{generate_synthetic_archive, SynthConfig, SynthScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    for scenario in SynthScenario::ALL {
        let cfg = SynthConfig { scenario, d: 8, n_pairs: 16, ..Default::default() };
        let dir = tmp.path().join(scenario.as_str());
        generate_synthetic_archive(&cfg)?.write(&dir)?;
        let back = read_activation_archive_with(&dir, LoadMode::Lazy)?;
        let layer = back.layer(0)?;
        let m = back.manifest();
        println!(
            "{:<18} {} layer(s), d={}, n={}, x_plus[0][..3]={:?}",
            scenario.as_str(),
            m.n_layers,
            m.hidden_dim,
            m.n_pairs,
            &layer.get(Variant::SafeYes).row(0)[..3]
        );
    }
    Ok(())
}
