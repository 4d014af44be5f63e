// SPDX-License-Identifier: MIT OR Apache-2.0
//! PC, CI and belief scores for a handful of hand-written score
//! quadruples (p+, p-, p̄+, p̄-).

use paccs::ccs::{belief_score, ccs_loss, ScoreQuadruple};
use paccs::metrics::{contradiction_index, polar_consistency};

fn main() -> paccs::Result<()> {
    let cases = [
        ("consistent", [0.9, 0.1, 0.1, 0.9]),
        ("confident contradiction", [0.85, 0.15, 0.88, 0.12]),
        ("flipped pair", [0.2, 0.8, 0.9, 0.1]),
        ("undecided", [0.5, 0.5, 0.5, 0.5]),
        ("everything yes", [1.0, 1.0, 1.0, 1.0]),
    ];
    println!("{:<24} {:>7} {:>7} {:>7} {:>7} {:>7}", "case", "pc", "ci", "s_harm", "s_safe", "loss");
    for (name, [a, b, c, d]) in cases {
        let q = ScoreQuadruple::new(a, b, c, d)?;
        println!(
            "{name:<24} {:>+7.4} {:>7.4} {:>7.3} {:>7.3} {:>7.4}",
            polar_consistency(&q)?,
            contradiction_index(&q)?,
            belief_score(a, b)?,
            belief_score(c, d)?,
            ccs_loss(a, b)? + ccs_loss(c, d)?
        );
    }
    Ok(())
}
