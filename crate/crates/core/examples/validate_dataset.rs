// SPDX-License-Identifier: MIT OR Apache-2.0
//! Load a paired dataset, check its invariants and print token statistics.
//!
//! cargo run --example validate_dataset -- crates/core/data/not.jsonl

use std::path::PathBuf;

use paccs::dataset::{dataset_stats, load_pair_dataset, DataFormat};

fn main() -> paccs::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data/not.jsonl")));
    let ds = load_pair_dataset(&path, DataFormat::from_path(&path))?;
    println!("{} pairs, type {:?}, fingerprint {}", ds.n_pairs(), ds.pair_type(), ds.fingerprint());
    let (s, h) = ds.pair(0);
    println!("first pair: harmful [{}] {}  <->  safe [{}] {}", h.id, h.text, s.id, s.text);
    println!("{}", dataset_stats(&ds, "not"));
    Ok(())
}
