use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use freqband_cli::config::{read_embedded, BenchConfig, ComponentsConfig, RunConfig, SimulateConfig};
use freqband_cli::run::{run_bench, run_components, run_detect, run_simulate, write_curves, write_json, write_text};
use freqband_cli::table::write_csv;
use freqband_cli::{CliError, Result};

/// Frequency band estimation for multivariate nonstationary time series.
#[derive(Parser)]
#[command(name = "freqband", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate frequency partition points.
    Detect(DetectArgs),
    /// Test which components drive given partition points.
    Components(ComponentsArgs),
    /// Write a simulated series and its ground truth.
    Simulate(SimulateArgs),
    /// Replicate a benchmark table by Monte Carlo.
    Bench(BenchArgs),
}

#[derive(Args)]
struct AnalysisArgs {
    /// CSV file, rows = time, columns = channels, optional header.
    #[arg(long, required_unless_present = "replay", conflicts_with = "replay")]
    input: Option<PathBuf>,
    /// Samples per second; adds Hz to reported frequencies.
    #[arg(long)]
    sampling_rate: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bootstrap resamples per test.
    #[arg(long, default_value_t = 100)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Step of the local-spectrum time grid.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Smallest half-width is N / wmin-div.
    #[arg(long = "wmin-div", default_value_t = 8)]
    wmin_div: usize,
    /// Largest half-width is N / wmax-div.
    #[arg(long = "wmax-div", default_value_t = 4)]
    wmax_div: usize,
    /// Number of half-widths.
    #[arg(long, default_value_t = 5)]
    scales: usize,
    /// Re-run with the configuration embedded in an earlier result document.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Result document; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl AnalysisArgs {
    fn run_config(&self) -> RunConfig {
        RunConfig {
            input: self.input.clone().unwrap_or_default(),
            sampling_rate: self.sampling_rate,
            alpha: self.alpha,
            resamples: self.resamples,
            seed: self.seed,
            stride: self.stride,
            w_min_divisor: self.wmin_div,
            w_max_divisor: self.wmax_div,
            scales: self.scales,
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: AnalysisArgs,
    /// Also write the per-scale discrepancy curves as CSV.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct ComponentsArgs {
    #[command(flatten)]
    common: AnalysisArgs,
    /// Frequency in cycles per sample; repeatable. Snapped to the nearest grid point.
    #[arg(long, required_unless_present = "replay")]
    omega: Vec<f64>,
    /// Neighbourhood half-width in bins; defaults to the smallest scale.
    #[arg(long)]
    half_width: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// WN1B, L3B, S3B, M3B-1, M3B-2 or custom.
    #[arg(long)]
    scheme: String,
    /// JSON band description for the custom scheme.
    #[arg(long)]
    bands: Option<PathBuf>,
    #[arg(long = "T", default_value_t = 1000)]
    len: usize,
    #[arg(long = "p", default_value_t = 10)]
    channels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Ground-truth document; defaults to `<output>.truth.json`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Table 1 to 4.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    table: u8,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    resamples: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 5)]
    scales: usize,
    #[arg(long = "wmax-div", default_value_t = 4)]
    wmax_div: usize,
    /// Only cells of this scheme.
    #[arg(long)]
    scheme: Option<String>,
    /// Only cells with this many channels.
    #[arg(long = "p")]
    channels: Option<usize>,
    /// Only cells with this length.
    #[arg(long = "T")]
    len: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn detect(args: DetectArgs) -> Result<()> {
    let cfg = match &args.common.replay {
        Some(p) => read_embedded(p)?,
        None => args.common.run_config(),
    };
    let doc = run_detect(&cfg)?;
    if let Some(path) = &args.curves {
        let mut buf = Vec::new();
        write_curves(&doc, &mut buf)?;
        write_text(&buf, Some(path))?;
    }
    write_json(&doc, args.common.output.as_deref())
}

fn components(args: ComponentsArgs) -> Result<()> {
    let cfg = match &args.common.replay {
        Some(p) => read_embedded(p)?,
        None => ComponentsConfig { run: args.common.run_config(), omega: args.omega, half_width: args.half_width },
    };
    write_json(&run_components(&cfg)?, args.common.output.as_deref())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = SimulateConfig {
        scheme: args.scheme,
        bands: args.bands,
        len: args.len,
        channels: args.channels,
        seed: args.seed,
    };
    let (ts, truth) = run_simulate(&cfg)?;
    let mut buf = Vec::new();
    write_csv(&ts, &mut buf)?;
    write_text(&buf, args.output.as_deref())?;
    let truth_path = args.truth.or_else(|| args.output.as_ref().map(|o| o.with_extension("truth.json")));
    match truth_path {
        Some(p) => write_json(&truth, Some(&p)),
        None => Ok(()),
    }
}

fn bench(args: BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        table: args.table,
        reps: args.reps,
        seed: args.seed,
        resamples: args.resamples,
        alpha: args.alpha,
        scales: args.scales,
        w_max_divisor: args.wmax_div,
        scheme: args.scheme,
        channels: args.channels,
        len: args.len,
    };
    write_json(&run_bench(&cfg)?, args.output.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Detect(a) => detect(a),
        Command::Components(a) => components(a),
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("freqband: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    e.exit_code() as u8
}
