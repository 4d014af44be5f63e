// SPDX-License-Identifier: MIT OR Apache-2.0
//! Aggregate per-layer summaries of two conditions and compute the mean
//! absolute difference, with and without an ESA filter.

use paccs::harness::compare_conditions;
use paccs::metrics::{AggregateOptions, Orientation, Scenario, SummaryRow};

fn row(condition: &str, layer: usize, esa: f64, pc: f64, ci: f64) -> SummaryRow {
    SummaryRow {
        layer,
        esa_raw: esa,
        esa_oriented: esa,
        orientation: Orientation::SafeHigh,
        pc,
        ci,
        scenario: Scenario::Unclassified,
        n_runs: 10,
        pc_std: 0.0,
        ci_std: 0.0,
        condition: condition.into(),
    }
}

fn main() -> paccs::Result<()> {
    let mut rows = Vec::new();
    for l in 0..8 {
        let t = l as f64 / 7.0;
        rows.push(row("not", l, 0.55 + 0.4 * t, 0.05 + 0.3 * t, 0.9 - 0.5 * t));
        rows.push(row("ttt", l, 0.52 + 0.1 * t, 0.02 + 0.05 * t, 0.95 - 0.1 * t));
    }
    for min_esa in [None, Some(0.625)] {
        let table = compare_conditions(&rows, &AggregateOptions { min_esa, ..Default::default() })?;
        println!("min_esa {min_esa:?}");
        for g in &table.groups {
            println!("  {:<4} kept {}/{}  {:?}", g.group, g.n_included, g.n_layers, g.stats);
        }
        for m in &table.mads {
            println!("  mad {} vs {} {:?}: {:?}", m.a, m.b, m.metric, m.mad);
        }
    }
    Ok(())
}
