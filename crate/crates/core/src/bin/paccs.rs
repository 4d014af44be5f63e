// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use paccs::activations::NormalizationPolicy;
use paccs::ccs::{Aggregation, DEFAULT_SEED};
use paccs::dataset::{dataset_stats, load_pair_dataset, substitute_polarity_token, DataFormat, PairType, CONTROL_TOKENS};
use paccs::harness::{compare_conditions, run_evaluation, RunManifest, DATA_DIR_ENV};
use paccs::io_util::{read_to_string, write_atomic};
use paccs::metrics::{enumerate_score_grid, grid_to_csv, summary_from_csv, AggregateOptions, MadMode, Metric, PcMode, Thresholds};
use paccs::synth::{generate_stacked_archive, SynthConfig, SynthScenario};
use paccs::{PaccsError, Result};

#[derive(Parser)]
#[command(name = "paccs", version, about = "Polarity-aware CCS probing and diagnostics")]
struct Cli {
    /// Run manifest (JSON). Required by `evaluate`; supplies defaults elsewhere.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// RNG seed. Defaults to 42, or the manifest's training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a pair dataset and print its statistics.
    ValidateData(ValidateArgs),
    /// Replace a polarity token throughout a dataset.
    Perturb(PerturbArgs),
    /// Write a synthetic activation archive.
    Synth(SynthArgs),
    /// Train probes on every layer of the manifest's archives.
    Evaluate(EvaluateArgs),
    /// Compare conditions in one or more summary.csv files.
    Compare(CompareArgs),
    /// Emit PC, CI and scenario over a grid of score quadruples.
    Grid(GridArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Dataset file (.jsonl or .csv). Relative paths also resolve under $PACCS_DATA_DIR.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Token whose whole-word frequency is reported.
    #[arg(long, default_value = "not")]
    token: String,
    #[arg(long, value_enum)]
    pair_type: Option<PairTypeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairTypeArg {
    Antagonistic,
    Concurrent,
    Mixed,
}

impl From<PairTypeArg> for PairType {
    fn from(p: PairTypeArg) -> Self {
        match p {
            PairTypeArg::Antagonistic => PairType::Antagonistic,
            PairTypeArg::Concurrent => PairType::Concurrent,
            PairTypeArg::Mixed => PairType::Mixed,
        }
    }
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Token to replace (whole word, case-insensitive).
    #[arg(long, default_value = "not")]
    token: String,
    /// Replacement token; repeat for several runs. Default: ttt, eps, moo, urm, 432, /////.
    #[arg(long = "replace")]
    replace: Vec<String>,
    /// Output file for a single replacement, or directory for several.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    StrongSafe,
    StrongHarm,
    Inverted,
    WithoutPolarity,
    PolarityCollapsed,
}

impl From<ScenarioArg> for SynthScenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::StrongSafe => SynthScenario::StrongSafe,
            ScenarioArg::StrongHarm => SynthScenario::StrongHarm,
            ScenarioArg::Inverted => SynthScenario::Inverted,
            ScenarioArg::WithoutPolarity => SynthScenario::WithoutPolarity,
            ScenarioArg::PolarityCollapsed => SynthScenario::PolarityCollapsed,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "strong-safe")]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long, default_value_t = 64)]
    n_pairs: usize,
    #[arg(long, default_value_t = 5.0)]
    signal: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Number of layers; layer l uses seed + l.
    #[arg(long, default_value_t = 1)]
    layers: usize,
    /// Archive directory. The matching placeholder dataset is written
    /// into it as dataset.jsonl.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Hold out this fraction of pairs from training and score on them.
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long, value_enum)]
    aggregation: Option<AggregationArg>,
    #[arg(long, value_enum)]
    normalization: Option<NormArg>,
    /// Save trained probes next to the reports.
    #[arg(long)]
    save_probes: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    AverageMetrics,
    BestLoss,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    CenterOnly,
    CenterAndScale,
}

#[derive(Args)]
struct CompareArgs {
    /// summary.csv files; defaults to the manifest's output.
    #[arg(long = "summary")]
    summaries: Vec<PathBuf>,
    /// Metrics to compare (pc, ci, esa).
    #[arg(long, value_delimiter = ',', default_value = "pc,ci")]
    metric: Vec<String>,
    /// Only include layers with esa_oriented at or above this value.
    #[arg(long)]
    min_esa: Option<f64>,
    #[arg(long, value_enum, default_value = "signed")]
    pc_mode: PcModeArg,
    #[arg(long, value_enum, default_value = "diff-of-means")]
    mad: MadArg,
    /// Output CSV; JSON is written alongside with a .json extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PcModeArg {
    Signed,
    Magnitude,
}

#[derive(Clone, Copy, ValueEnum)]
enum MadArg {
    DiffOfMeans,
    PairedMeanAbs,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long)]
    out: PathBuf,
}

fn resolve_data(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            return Path::new(&dir).join(path);
        }
    }
    path.to_path_buf()
}

fn dataset_arg(input: Option<PathBuf>, manifest: Option<&Path>) -> Result<PathBuf> {
    if let Some(p) = input {
        return Ok(resolve_data(&p));
    }
    if let Some(m) = manifest {
        if let Some(d) = RunManifest::load(m)?.dataset {
            return Ok(d);
        }
    }
    Err(PaccsError::Config("no dataset given (use --in or a manifest with `dataset`)".into()))
}

fn file_safe(token: &str) -> String {
    if token.chars().all(|c| c.is_ascii_alphanumeric()) {
        token.to_string()
    } else {
        hex::encode(token)
    }
}

fn run(cli: Cli) -> Result<()> {
    let manifest = cli.manifest.as_deref();
    match cli.command {
        Command::ValidateData(a) => {
            let path = dataset_arg(a.input, manifest)?;
            let mut ds = load_pair_dataset(&path, DataFormat::from_path(&path))?;
            if let Some(pt) = a.pair_type {
                ds = ds.with_pair_type(pt.into());
            }
            println!("{}", dataset_stats(&ds, &a.token));
        }
        Command::Perturb(a) => {
            let path = dataset_arg(a.input, manifest)?;
            let ds = load_pair_dataset(&path, DataFormat::from_path(&path))?;
            let single = a.replace.len() == 1;
            let tokens: Vec<String> = if a.replace.is_empty() {
                CONTROL_TOKENS.iter().map(|s| s.to_string()).collect()
            } else {
                a.replace
            };
            for tok in &tokens {
                let (out_ds, n) = substitute_polarity_token(&ds, &a.token, tok)?;
                let out = if single {
                    a.out.clone()
                } else {
                    a.out.join(format!("{}_{}.jsonl", ds.name(), file_safe(tok)))
                };
                let out_ds = out_ds.with_name(out.file_stem().and_then(|s| s.to_str()).unwrap_or(tok));
                out_ds.save(&out, DataFormat::from_path(&out))?;
                println!("{}\t{}\t{n}", tok, out.display());
            }
        }
        Command::Synth(a) => {
            if a.layers == 0 {
                return Err(PaccsError::Config("--layers must be at least 1".into()));
            }
            let seed = cli.seed.unwrap_or(DEFAULT_SEED);
            let cfgs: Vec<SynthConfig> = (0..a.layers)
                .map(|l| SynthConfig {
                    d: a.d,
                    n_pairs: a.n_pairs,
                    scenario: a.scenario.into(),
                    signal_strength: a.signal,
                    noise_sigma: a.noise,
                    rng_seed: seed.wrapping_add(l as u64),
                })
                .collect();
            let archive = generate_stacked_archive(&cfgs)?;
            archive.write(&a.out)?;
            paccs::dataset::synthetic_pair_dataset(a.n_pairs)?.save(&a.out.join("dataset.jsonl"), DataFormat::Jsonl)?;
            println!("{}", a.out.display());
        }
        Command::Evaluate(a) => {
            let path = manifest.ok_or_else(|| PaccsError::Config("evaluate requires --manifest".into()))?;
            let mut m = RunManifest::load(path)?;
            if let Some(s) = cli.seed {
                m.train.rng_seed = s;
            }
            if let Some(r) = a.runs {
                m.train.n_runs = r;
            }
            if let Some(e) = a.epochs {
                m.train.n_epochs = e;
            }
            if a.holdout.is_some() {
                m.train.holdout = a.holdout;
            }
            if let Some(ag) = a.aggregation {
                m.train.aggregation = match ag {
                    AggregationArg::AverageMetrics => Aggregation::AverageMetrics,
                    AggregationArg::BestLoss => Aggregation::BestLoss,
                };
            }
            if let Some(n) = a.normalization {
                m.normalization = match n {
                    NormArg::CenterOnly => NormalizationPolicy::CenterOnly,
                    NormArg::CenterAndScale => NormalizationPolicy::CenterAndScale,
                };
            }
            m.save_probes |= a.save_probes;
            let reports = run_evaluation(&m, cli.jobs)?;
            println!("condition\tlayer\tesa_oriented\torientation\tpc\tci\tscenario");
            for r in &reports {
                println!(
                    "{}\t{}\t{:.4}\t{}\t{:.4}\t{:.4}\t{}",
                    r.condition, r.layer_index, r.metrics.esa_oriented, r.metrics.orientation, r.metrics.pc, r.metrics.ci, r.metrics.scenario
                );
            }
            println!("wrote {}", m.output_dir.join("summary.csv").display());
        }
        Command::Compare(a) => {
            let mut summaries = a.summaries;
            let mut min_esa = a.min_esa;
            if summaries.is_empty() {
                let path = manifest.ok_or_else(|| PaccsError::Config("compare needs --summary or --manifest".into()))?;
                let m = RunManifest::load(path)?;
                summaries.push(m.output_dir.join("summary.csv"));
                min_esa = min_esa.or(Some(m.thresholds.min_esa));
            }
            let mut rows = Vec::new();
            for s in &summaries {
                rows.extend(summary_from_csv(&read_to_string(s)?)?);
            }
            let opts = AggregateOptions {
                min_esa,
                pc_mode: match a.pc_mode {
                    PcModeArg::Signed => PcMode::Signed,
                    PcModeArg::Magnitude => PcMode::Magnitude,
                },
                mad_mode: match a.mad {
                    MadArg::DiffOfMeans => MadMode::DiffOfMeans,
                    MadArg::PairedMeanAbs => MadMode::PairedMeanAbs,
                },
                metrics: a.metric.iter().map(|m| m.parse()).collect::<Result<Vec<Metric>>>()?,
            };
            let table = compare_conditions(&rows, &opts)?;
            let csv = table.to_csv()?;
            match a.out {
                Some(out) => {
                    write_atomic(&out, &csv)?;
                    let mut json = serde_json::to_string_pretty(&table)?;
                    json.push('\n');
                    write_atomic(&out.with_extension("json"), json.as_bytes())?;
                }
                None => print!("{}", String::from_utf8_lossy(&csv)),
            }
        }
        Command::Grid(a) => {
            let th = match manifest {
                Some(m) => RunManifest::load(m)?.thresholds,
                None => Thresholds::default(),
            };
            let points = enumerate_score_grid(a.step, &th)?;
            write_atomic(&a.out, &grid_to_csv(&points)?)?;
            println!("{} rows -> {}", points.len(), a.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            eprintln!("error[{}]: {}", kind.tag(), e.to_string().replace('\n', " "));
            ExitCode::from(kind.exit_code() as u8)
        }
    }
}
