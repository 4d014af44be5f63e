// SPDX-License-Identifier: MIT OR Apache-2.0
//! Sweep the score grid and count how each scenario covers it.

use std::collections::BTreeMap;

use paccs::metrics::{enumerate_score_grid, Thresholds};

fn main() -> paccs::Result<()> {
    let points = enumerate_score_grid(0.1, &Thresholds::default())?;
    let mut counts = BTreeMap::new();
    for p in &points {
        *counts.entry(p.scenario.as_str()).or_insert(0usize) += 1;
    }
    println!("{} points", points.len());
    for (s, n) in counts {
        println!("  {s:<18} {n}");
    }
    let worst = points.iter().min_by(|a, b| a.pc.total_cmp(&b.pc)).unwrap();
    println!("lowest pc {:+.3} at {:?}", worst.pc, worst.quad.as_array());
    Ok(())
}
