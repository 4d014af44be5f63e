// SPDX-License-Identifier: MIT OR Apache-2.0

//! Polarity-aware diagnostics over probe scores.
//!
//! * ESA: how well thresholded belief scores separate safe from harmful
//!   statements, with orientation resolved afterwards.
//! * Polar consistency (PC): signed agreement between a statement's beliefs
//!   and those of its polarity inverse, in `[-1, 1]`.
//! * Contradiction index (CI): simultaneous agreement with incompatible
//!   statements, in `[0, 2]`.
//!
//! Plus the scenario classifier, cross-layer summaries and the score grid.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ccs::{belief_score, mean, ScoreQuadruple};
use crate::error::{PaccsError, Result};
use crate::io_util::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    SafeHigh,
    HarmHigh,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::SafeHigh => "safe_high",
            Orientation::HarmHigh => "harm_high",
        }
    }

    pub fn from_raw(esa_raw: f64) -> Self {
        if esa_raw >= 0.5 {
            Orientation::SafeHigh
        } else {
            Orientation::HarmHigh
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    StrongSafe,
    StrongHarm,
    Inverted,
    WithoutPolarity,
    Unclassified,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::StrongSafe => "strong_safe",
            Scenario::StrongHarm => "strong_harm",
            Scenario::Inverted => "inverted",
            Scenario::WithoutPolarity => "without_polarity",
            Scenario::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsaResult {
    pub esa_raw: f64,
    pub esa_oriented: f64,
    pub orientation: Orientation,
}

impl EsaResult {
    pub fn from_raw(esa_raw: f64) -> Self {
        EsaResult {
            esa_raw,
            esa_oriented: esa_raw.max(1.0 - esa_raw),
            orientation: Orientation::from_raw(esa_raw),
        }
    }
}

/// Separation accuracy over the 2·n statements, safe statements labelled 1.
/// A belief score above 0.5 predicts 1; exact ties predict 0.
pub fn empirical_separation_accuracy(quads: &[ScoreQuadruple]) -> Result<EsaResult> {
    if quads.is_empty() {
        return Err(PaccsError::Domain("ESA needs at least one score quadruple".into()));
    }
    let mut correct = 0usize;
    for q in quads {
        if belief_score(q.p_plus, q.p_minus)? > 0.5 {
            correct += 1;
        }
        if belief_score(q.pbar_plus, q.pbar_minus)? <= 0.5 {
            correct += 1;
        }
    }
    Ok(EsaResult::from_raw(correct as f64 / (2 * quads.len()) as f64))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn pc_unchecked(q: &ScoreQuadruple) -> f64 {
    let a = q.p_plus - q.pbar_minus;
    let b = q.p_minus - q.pbar_plus;
    0.5 * (a * a + b * b) * sign(q.p_plus - q.pbar_plus) * sign(q.pbar_minus - q.p_minus)
}

pub(crate) fn ci_unchecked(q: &ScoreQuadruple) -> f64 {
    q.p_plus * q.pbar_plus + q.p_minus * q.pbar_minus
}

pub fn polar_consistency(q: &ScoreQuadruple) -> Result<f64> {
    q.validate()?;
    Ok(pc_unchecked(q))
}

pub fn contradiction_index(q: &ScoreQuadruple) -> Result<f64> {
    q.validate()?;
    Ok(ci_unchecked(q))
}

/// Mean PC and CI over pairs.
pub fn mean_pc_ci(quads: &[ScoreQuadruple]) -> Result<(f64, f64)> {
    if quads.is_empty() {
        return Err(PaccsError::Domain("no score quadruples".into()));
    }
    let mut pc = 0.0;
    let mut ci = 0.0;
    for q in quads {
        pc += polar_consistency(q)?;
        ci += ci_unchecked(q);
    }
    let n = quads.len() as f64;
    Ok((pc / n, ci / n))
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Component-wise median quadruple.
pub fn median_quad(quads: &[ScoreQuadruple]) -> Result<ScoreQuadruple> {
    if quads.is_empty() {
        return Err(PaccsError::Domain("median of zero quadruples".into()));
    }
    let col = |f: fn(&ScoreQuadruple) -> f64| median(quads.iter().map(f).collect());
    Ok(ScoreQuadruple {
        p_plus: col(|q| q.p_plus),
        p_minus: col(|q| q.p_minus),
        pbar_plus: col(|q| q.pbar_plus),
        pbar_minus: col(|q| q.pbar_minus),
    })
}

/// Every threshold used by classification and filtering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// esa_oriented at or above this marks a strong scenario.
    pub strong_esa: f64,
    /// Layer filter used when comparing conditions.
    pub min_esa: f64,
    /// Open interval in which both PC and CI count as "low".
    pub low_band: (f64, f64),
    /// A polarity whose best suffix score is at or below this is absent.
    pub polarity_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            strong_esa: 0.75,
            min_esa: 0.625,
            low_band: (0.05, 0.25),
            polarity_max: 0.5,
        }
    }
}

impl Thresholds {
    fn in_band(&self, x: f64) -> bool {
        x > self.low_band.0 && x < self.low_band.1
    }
}

/// Rule-ordered scenario: inverted, strong safe, strong harm, without
/// polarity, unclassified. `quads` feed the median quadruple used by the
/// without-polarity test.
pub fn classify_scenario(
    esa_oriented: f64,
    orientation: Orientation,
    pc: f64,
    ci: f64,
    quads: &[ScoreQuadruple],
    th: &Thresholds,
) -> Result<Scenario> {
    if pc < 0.0 {
        return Ok(Scenario::Inverted);
    }
    if esa_oriented >= th.strong_esa {
        return Ok(match orientation {
            Orientation::SafeHigh => Scenario::StrongSafe,
            Orientation::HarmHigh => Scenario::StrongHarm,
        });
    }
    let m = median_quad(quads)?;
    let no_polarity = m.p_plus.max(m.p_minus) <= th.polarity_max || m.pbar_plus.max(m.pbar_minus) <= th.polarity_max;
    if no_polarity || (th.in_band(pc) && th.in_band(ci)) {
        return Ok(Scenario::WithoutPolarity);
    }
    Ok(Scenario::Unclassified)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub esa_raw: f64,
    pub esa_oriented: f64,
    pub orientation: Orientation,
    pub pc: f64,
    pub ci: f64,
    pub scenario: Scenario,
}

/// Metrics of one set of scores.
pub fn metric_record(quads: &[ScoreQuadruple], th: &Thresholds) -> Result<MetricRecord> {
    let esa = empirical_separation_accuracy(quads)?;
    let (pc, ci) = mean_pc_ci(quads)?;
    let scenario = classify_scenario(esa.esa_oriented, esa.orientation, pc, ci, quads, th)?;
    Ok(MetricRecord {
        esa_raw: esa.esa_raw,
        esa_oriented: esa.esa_oriented,
        orientation: esa.orientation,
        pc,
        ci,
        scenario,
    })
}

// ---------------------------------------------------------------------------
// Summary rows and cross-layer aggregation
// ---------------------------------------------------------------------------

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "layer",
    "esa_raw",
    "esa_oriented",
    "orientation",
    "pc",
    "ci",
    "scenario",
    "n_runs",
    "pc_std",
    "ci_std",
    "condition",
];

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub layer: usize,
    pub esa_raw: f64,
    pub esa_oriented: f64,
    pub orientation: Orientation,
    pub pc: f64,
    pub ci: f64,
    pub scenario: Scenario,
    pub n_runs: usize,
    pub pc_std: f64,
    pub ci_std: f64,
    pub condition: String,
}

impl SummaryRow {
    fn fields(&self) -> [String; 11] {
        [
            self.layer.to_string(),
            fmt_f64(self.esa_raw),
            fmt_f64(self.esa_oriented),
            self.orientation.to_string(),
            fmt_f64(self.pc),
            fmt_f64(self.ci),
            self.scenario.to_string(),
            self.n_runs.to_string(),
            fmt_f64(self.pc_std),
            fmt_f64(self.ci_std),
            self.condition.clone(),
        ]
    }
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.into_inner().map_err(|e| PaccsError::Config(format!("csv buffer: {e}")))
}

pub fn summary_from_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rd.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Pc,
    Ci,
    Esa,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Pc => "pc",
            Metric::Ci => "ci",
            Metric::Esa => "esa_oriented",
        }
    }

    fn value(self, row: &SummaryRow, pc_mode: PcMode) -> f64 {
        match self {
            Metric::Pc => match pc_mode {
                PcMode::Signed => row.pc,
                PcMode::Magnitude => row.pc.abs(),
            },
            Metric::Ci => row.ci,
            Metric::Esa => row.esa_oriented,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = PaccsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pc" => Ok(Metric::Pc),
            "ci" => Ok(Metric::Ci),
            "esa" | "esa_oriented" => Ok(Metric::Esa),
            other => Err(PaccsError::Config(format!("unknown metric `{other}` (pc, ci, esa)"))),
        }
    }
}

/// Whether cross-layer PC statistics use signed values or magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcMode {
    #[default]
    Signed,
    Magnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MadMode {
    /// |mean(A) − mean(B)|.
    #[default]
    DiffOfMeans,
    /// Mean of |a_l − b_l| over layers present in both groups.
    PairedMeanAbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateOptions {
    /// Keep only layers with esa_oriented at or above this value.
    pub min_esa: Option<f64>,
    pub pc_mode: PcMode,
    pub mad_mode: MadMode,
    pub metrics: Vec<Metric>,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        AggregateOptions {
            min_esa: None,
            pc_mode: PcMode::Signed,
            mad_mode: MadMode::DiffOfMeans,
            metrics: vec![Metric::Pc, Metric::Ci],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub mean: f64,
    /// 1.96 · standard error over layers.
    pub ci_half_width: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub n_layers: usize,
    pub n_included: usize,
    pub fraction_included: f64,
    /// `None` when no layer passed the filter.
    pub stats: BTreeMap<Metric, Option<GroupStat>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMad {
    pub a: String,
    pub b: String,
    pub metric: Metric,
    pub mad: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub options: AggregateOptions,
    pub groups: Vec<GroupSummary>,
    pub mads: Vec<PairMad>,
}

fn group_stat(xs: &[f64]) -> Option<GroupStat> {
    if xs.is_empty() {
        return None;
    }
    let half = if xs.len() > 1 {
        1.96 * crate::ccs::sample_std(xs) / (xs.len() as f64).sqrt()
    } else {
        0.0
    };
    Some(GroupStat {
        mean: mean(xs),
        ci_half_width: half,
        median: median(xs.to_vec()),
    })
}

/// Group rows by condition (first-seen order), filter by ESA and compute
/// per-group statistics plus pairwise MADs.
pub fn aggregate_layers(rows: &[SummaryRow], opts: &AggregateOptions) -> Result<SummaryTable> {
    if rows.is_empty() {
        return Err(PaccsError::Domain("aggregate_layers needs at least one layer report".into()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut by_group: BTreeMap<String, Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        if !by_group.contains_key(&r.condition) {
            order.push(r.condition.clone());
        }
        by_group.entry(r.condition.clone()).or_default().push(r);
    }
    let pass = |r: &&SummaryRow| opts.min_esa.is_none_or(|m| r.esa_oriented >= m);
    let included: BTreeMap<&str, Vec<&SummaryRow>> = by_group
        .iter()
        .map(|(g, rs)| (g.as_str(), rs.iter().copied().filter(pass).collect()))
        .collect();

    let mut groups = Vec::new();
    for g in &order {
        let inc = &included[g.as_str()];
        let n_layers = by_group[g].len();
        let stats = opts
            .metrics
            .iter()
            .map(|&m| {
                let xs: Vec<f64> = inc.iter().map(|r| m.value(r, opts.pc_mode)).collect();
                (m, group_stat(&xs))
            })
            .collect();
        groups.push(GroupSummary {
            group: g.clone(),
            n_layers,
            n_included: inc.len(),
            fraction_included: inc.len() as f64 / n_layers as f64,
            stats,
        });
    }

    let mut mads = Vec::new();
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            let (ga, gb) = (&included[order[i].as_str()], &included[order[j].as_str()]);
            for &m in &opts.metrics {
                let mad = match opts.mad_mode {
                    MadMode::DiffOfMeans => {
                        if ga.is_empty() || gb.is_empty() {
                            None
                        } else {
                            let ma = mean(&ga.iter().map(|r| m.value(r, opts.pc_mode)).collect::<Vec<_>>());
                            let mb = mean(&gb.iter().map(|r| m.value(r, opts.pc_mode)).collect::<Vec<_>>());
                            Some((ma - mb).abs())
                        }
                    }
                    MadMode::PairedMeanAbs => {
                        let diffs: Vec<f64> = ga
                            .iter()
                            .filter_map(|ra| {
                                gb.iter()
                                    .find(|rb| rb.layer == ra.layer)
                                    .map(|rb| (m.value(ra, opts.pc_mode) - m.value(rb, opts.pc_mode)).abs())
                            })
                            .collect();
                        (!diffs.is_empty()).then(|| mean(&diffs))
                    }
                };
                mads.push(PairMad {
                    a: order[i].clone(),
                    b: order[j].clone(),
                    metric: m,
                    mad,
                });
            }
        }
    }
    Ok(SummaryTable {
        options: opts.clone(),
        groups,
        mads,
    })
}

impl SummaryTable {
    pub fn group(&self, name: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.group == name)
    }

    /// MAD between two groups, in either order.
    pub fn mad(&self, a: &str, b: &str, metric: Metric) -> Option<f64> {
        self.mads
            .iter()
            .find(|p| p.metric == metric && ((p.a == a && p.b == b) || (p.a == b && p.b == a)))
            .and_then(|p| p.mad)
    }

    /// Long-format CSV: `condition,other,metric,statistic,value`. Group rows
    /// leave `other` empty; empty statistics are written as empty values.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["condition", "other", "metric", "statistic", "value"])?;
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        for g in &self.groups {
            w.write_record([g.group.as_str(), "", "", "n_layers", &g.n_layers.to_string()])?;
            w.write_record([g.group.as_str(), "", "", "n_included", &g.n_included.to_string()])?;
            w.write_record([g.group.as_str(), "", "", "fraction_included", &fmt_f64(g.fraction_included)])?;
            for (m, s) in &g.stats {
                let s = s.as_ref();
                w.write_record([g.group.as_str(), "", m.as_str(), "mean", &opt(s.map(|s| s.mean))])?;
                w.write_record([g.group.as_str(), "", m.as_str(), "ci_half_width", &opt(s.map(|s| s.ci_half_width))])?;
                w.write_record([g.group.as_str(), "", m.as_str(), "median", &opt(s.map(|s| s.median))])?;
            }
        }
        for p in &self.mads {
            w.write_record([p.a.as_str(), p.b.as_str(), p.metric.as_str(), "mad", &opt(p.mad)])?;
        }
        w.into_inner().map_err(|e| PaccsError::Config(format!("csv buffer: {e}")))
    }
}

// ---------------------------------------------------------------------------
// Score grid
// ---------------------------------------------------------------------------

pub const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub quad: ScoreQuadruple,
    pub pc: f64,
    pub ci: f64,
    pub esa_raw: f64,
    pub scenario: Scenario,
}

/// Number of intervals `1 / step`, if `step` divides 1.
pub fn grid_divisions(step: f64) -> Result<usize> {
    if !(step > 0.0 && step < 1.0) {
        return Err(PaccsError::Config(format!("grid step must lie in (0, 1), got {step}")));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-12 {
        return Err(PaccsError::Config(format!("grid step {step} does not divide 1")));
    }
    Ok(n as usize)
}

/// Every quadruple on `{0, step, ..., 1}⁴` with its PC, CI and scenario.
/// Each point is treated as a one-pair layer.
pub fn enumerate_score_grid(step: f64, th: &Thresholds) -> Result<Vec<GridPoint>> {
    let n = grid_divisions(step)?;
    let points = (n + 1).checked_pow(4).unwrap_or(usize::MAX);
    if points > MAX_GRID_POINTS {
        return Err(PaccsError::Config(format!(
            "step {step} gives {points} grid points, more than {MAX_GRID_POINTS}; use a coarser step"
        )));
    }
    let vals: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let mut out = Vec::with_capacity(points);
    for &a in &vals {
        for &b in &vals {
            for &c in &vals {
                for &d in &vals {
                    let quad = ScoreQuadruple {
                        p_plus: a,
                        p_minus: b,
                        pbar_plus: c,
                        pbar_minus: d,
                    };
                    let rec = metric_record(std::slice::from_ref(&quad), th)?;
                    out.push(GridPoint {
                        quad,
                        pc: rec.pc,
                        ci: rec.ci,
                        esa_raw: rec.esa_raw,
                        scenario: rec.scenario,
                    });
                }
            }
        }
    }
    Ok(out)
}

pub const GRID_COLUMNS: [&str; 8] = ["p_plus", "p_minus", "pbar_plus", "pbar_minus", "pc", "ci", "esa_raw", "scenario"];

pub fn grid_to_csv(points: &[GridPoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GRID_COLUMNS)?;
    for p in points {
        w.write_record([
            fmt_f64(p.quad.p_plus),
            fmt_f64(p.quad.p_minus),
            fmt_f64(p.quad.pbar_plus),
            fmt_f64(p.quad.pbar_minus),
            fmt_f64(p.pc),
            fmt_f64(p.ci),
            fmt_f64(p.esa_raw),
            p.scenario.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| PaccsError::Config(format!("csv buffer: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn q(a: f64, b: f64, c: f64, d: f64) -> ScoreQuadruple {
        ScoreQuadruple::new(a, b, c, d).unwrap()
    }

    #[test]
    fn pc_and_ci_examples() {
        assert_abs_diff_eq!(polar_consistency(&q(0.92, 0.08, 0.11, 0.89)).unwrap(), 0.0009, epsilon = 1e-12);
        assert_abs_diff_eq!(polar_consistency(&q(0.74, 0.26, 0.84, 0.46)).unwrap(), -0.2074, epsilon = 1e-12);
        assert_eq!(polar_consistency(&q(1.0, 0.0, 0.0, 1.0)).unwrap(), 0.0);
        // 0.85·0.88 + 0.15·0.12 = 0.748 + 0.018
        assert_abs_diff_eq!(contradiction_index(&q(0.85, 0.15, 0.88, 0.12)).unwrap(), 0.766, epsilon = 1e-12);
        assert_abs_diff_eq!(contradiction_index(&q(0.92, 0.08, 0.14, 0.86)).unwrap(), 0.1976, epsilon = 1e-12);
        assert_eq!(contradiction_index(&q(0.0, 1.0, 1.0, 0.0)).unwrap(), 0.0);
        assert!(polar_consistency(&ScoreQuadruple {
            p_plus: 1.5,
            p_minus: 0.0,
            pbar_plus: 0.0,
            pbar_minus: 0.0
        })
        .is_err());
    }

    #[test]
    fn esa_examples() {
        let r = empirical_separation_accuracy(&[q(0.92, 0.08, 0.11, 0.89)]).unwrap();
        assert_eq!((r.esa_raw, r.orientation), (1.0, Orientation::SafeHigh));
        let r = empirical_separation_accuracy(&[q(0.14, 0.86, 0.91, 0.09)]).unwrap();
        assert_eq!((r.esa_raw, r.esa_oriented, r.orientation), (0.0, 1.0, Orientation::HarmHigh));
        let r = empirical_separation_accuracy(&[q(0.5, 0.5, 0.5, 0.5); 3]).unwrap();
        assert_eq!(r.esa_raw, 0.5);
        assert!(empirical_separation_accuracy(&[]).is_err());
    }

    #[test]
    fn median_quad_even_and_odd() {
        let qs = [q(0.1, 0.2, 0.3, 0.4), q(0.3, 0.4, 0.5, 0.6), q(0.2, 0.0, 1.0, 0.5)];
        assert_eq!(median_quad(&qs).unwrap(), q(0.2, 0.2, 0.5, 0.5));
        let m = median_quad(&qs[..2]).unwrap();
        assert_abs_diff_eq!(m.p_plus, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(m.pbar_minus, 0.5, epsilon = 1e-15);
    }

    fn row(cond: &str, layer: usize, pc: f64, ci: f64, esa: f64) -> SummaryRow {
        SummaryRow {
            layer,
            esa_raw: esa,
            esa_oriented: esa,
            orientation: Orientation::SafeHigh,
            pc,
            ci,
            scenario: Scenario::Unclassified,
            n_runs: 1,
            pc_std: 0.0,
            ci_std: 0.0,
            condition: cond.into(),
        }
    }

    #[test]
    fn mad_of_group_means() {
        let rows = [row("a", 0, 0.1, 0.0, 1.0), row("a", 1, 0.2, 0.0, 1.0), row("b", 0, 0.4, 0.0, 1.0), row("b", 1, 0.5, 0.0, 1.0)];
        let t = aggregate_layers(&rows, &AggregateOptions::default()).unwrap();
        assert_abs_diff_eq!(t.mad("a", "b", Metric::Pc).unwrap(), 0.3, epsilon = 1e-12);
        assert_eq!(t.mad("b", "a", Metric::Ci), Some(0.0));
        let paired = AggregateOptions {
            mad_mode: MadMode::PairedMeanAbs,
            ..Default::default()
        };
        let t = aggregate_layers(&rows, &paired).unwrap();
        assert_abs_diff_eq!(t.mad("a", "b", Metric::Pc).unwrap(), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn single_layer_group_and_filtering() {
        let rows = [row("a", 0, 0.25, 0.1, 0.9), row("b", 0, 0.4, 0.2, 0.55)];
        let opts = AggregateOptions {
            min_esa: Some(0.625),
            ..Default::default()
        };
        let t = aggregate_layers(&rows, &opts).unwrap();
        let a = t.group("a").unwrap().stats[&Metric::Pc].unwrap();
        assert_eq!((a.mean, a.median, a.ci_half_width), (0.25, 0.25, 0.0));
        let b = t.group("b").unwrap();
        assert_eq!((b.n_included, b.fraction_included), (0, 0.0));
        assert!(b.stats[&Metric::Pc].is_none());
        assert_eq!(t.mad("a", "b", Metric::Pc), None);
        assert!(String::from_utf8(t.to_csv().unwrap()).unwrap().contains("b,,pc,mean,\n"));
    }

    #[test]
    fn magnitude_mode_uses_abs_pc() {
        let rows = [row("a", 0, -0.2, 0.0, 1.0), row("b", 0, 0.2, 0.0, 1.0)];
        let opts = AggregateOptions {
            pc_mode: PcMode::Magnitude,
            ..Default::default()
        };
        assert_eq!(aggregate_layers(&rows, &opts).unwrap().mad("a", "b", Metric::Pc), Some(0.0));
    }

    #[test]
    fn grid_small() {
        let g = enumerate_score_grid(0.5, &Thresholds::default()).unwrap();
        assert_eq!(g.len(), 81);
        let p = g.iter().find(|p| p.quad.as_array() == [1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!((p.pc, p.ci), (0.0, 0.0));
        assert!(enumerate_score_grid(0.3, &Thresholds::default()).is_err());
        assert!(enumerate_score_grid(0.001, &Thresholds::default()).is_err());
    }

    #[test]
    fn summary_csv_round_trip() {
        let rows = vec![row("mixed", 3, -0.0, 0.125, 0.75)];
        let bytes = summary_to_csv(&rows).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("layer,esa_raw,esa_oriented,orientation,pc,ci,scenario,n_runs,pc_std,ci_std,condition\n"));
        assert!(text.contains("3,0.75,0.75,safe_high,0,0.125,unclassified,1,0,0,mixed"));
        assert_eq!(summary_from_csv(&text).unwrap()[0].ci, 0.125);
    }
}
