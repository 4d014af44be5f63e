// SPDX-License-Identifier: MIT OR Apache-2.0
//! Replace a polarity token with a meaningless control token and show
//! that the negation signal is gone while everything else is untouched.

use paccs::dataset::{dataset_stats, load_pair_dataset, substitute_polarity_token, DataFormat};

fn main() -> paccs::Result<()> {
    let path = std::path::Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data/not.jsonl"));
    let ds = load_pair_dataset(path, DataFormat::Jsonl)?;
    for control in ["ttt", "/////", "|"] {
        let (out, n) = substitute_polarity_token(&ds, "not", control)?;
        let st = dataset_stats(&out, "not");
        println!("{control:>6}: {n} replacements, residual 'not' fraction harm={} safe={}", st.frac_token_harm, st.frac_token_safe);
        let changed = ds.statements().iter().zip(out.statements()).find(|(a, b)| a.text != b.text);
        if let Some((a, b)) = changed {
            println!("        {}\n     -> {}", a.text, b.text);
        }
    }
    Ok(())
}
