//! `cobsim` command line.
//!
//! Exit codes: 0 success, 2 usage, configuration or data error, 3 I/O error
//! while writing results.

mod analyze;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cobsim::batch::{map_batch, with_seeds};
use cobsim::engine::{calibrate_limit_rates, run};
use cobsim::flow::flow_diagnostics;
use cobsim::io::{read_config, read_run, write_run, IoError};
use cobsim::presets::{self, describe, NAMES};
use cobsim::SimConfig;

#[derive(Parser)]
#[command(name = "cobsim", version, about = "Poissonian limit order book simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write its event, trade, series and profile files.
    Simulate(SimulateArgs),
    /// Compute statistics over a run directory or a multi-seed batch.
    Analyze(AnalyzeArgs),
    /// List the built-in presets.
    Presets,
    /// Print the liquidity balance of a configuration.
    Diagnostics(DiagnosticsArgs),
}

#[derive(Args)]
struct Source {
    /// Built-in preset name (see `cobsim presets`).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set rates.market_ask=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    /// Random seed (overrides the configuration).
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Inclusive seed range `a..b`; each seed is written to `<out>/seed-<n>`.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<(u64, u64)>,
    /// Output directory (default `runs/<name>-seed<seed>` or
    /// `runs/<name>-seeds<a>-<b>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Directory written by `simulate` (single run or seed batch).
    dir: PathBuf,
    /// Where to write the tables (default: the run directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnosticsArgs {
    #[command(flatten)]
    source: Source,
    /// Use the mean cancelled volume measured in this run directory.
    #[arg(long, conflicts_with = "calibrate")]
    from_run: Option<PathBuf>,
    /// Rebalance limit rates against the measured cancelled volume over this
    /// many pilot runs and print the result.
    #[arg(long, value_name = "ROUNDS")]
    calibrate: Option<usize>,
}

/// A failure with its exit code.
#[derive(Debug)]
enum CliError {
    /// Bad arguments, configuration or input data.
    Data(String),
    /// Failure writing results.
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Data(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Data(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

/// Reading inputs only ever fails as a data error; missing inputs included.
fn read_err(e: IoError) -> CliError {
    CliError::Data(e.to_string())
}

fn write_err(e: IoError) -> CliError {
    if e.is_data() {
        CliError::Data(e.to_string())
    } else {
        CliError::Io(e.to_string())
    }
}

fn parse_seeds(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected `a..b`, got `{s}`"))?;
    let a: u64 = a.trim().parse().map_err(|_| format!("bad seed `{a}`"))?;
    let b: u64 = b.trim().parse().map_err(|_| format!("bad seed `{b}`"))?;
    if b < a {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok((a, b))
}

fn load(source: &Source) -> Result<SimConfig, CliError> {
    let base = match (&source.preset, &source.config) {
        (Some(name), _) => presets::preset(name).map_err(|e| CliError::Data(e.to_string()))?,
        (None, Some(path)) => read_config(path).map_err(read_err)?,
        (None, None) => return Err(CliError::Data("one of --preset or --config is required".into())),
    };
    base.with_overrides(&source.overrides).map_err(|e| CliError::Data(format!("--set: {e}")))
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut config = load(&args.source)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate().map_err(|e| CliError::Data(e.to_string()))?;

    if let Some((a, b)) = args.seeds {
        let out = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("runs/{}-seeds{a}-{b}", config.name)));
        let configs = with_seeds(&config, a..=b);
        // each run writes its own directory; nothing is shared between them
        let results = map_batch(&configs, |c| -> Result<String, CliError> {
            let dir = out.join(format!("seed-{}", c.seed));
            let output = run(c).map_err(|e| CliError::Data(e.to_string()))?;
            write_run(&dir, &output).map_err(write_err)?;
            Ok(summary_line(&dir, &output))
        });
        for r in results {
            println!("{}", r?);
        }
        return Ok(());
    }

    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{}", config.name, config.seed)));
    let output = run(&config).map_err(|e| CliError::Data(e.to_string()))?;
    write_run(&out, &output).map_err(write_err)?;
    println!("{}", summary_line(&out, &output));
    Ok(())
}

fn summary_line(dir: &Path, out: &cobsim::RunOutput) -> String {
    let d = out.final_depth();
    format!(
        "{}: seed {} events {} trades {} simulated {:.1} s, final depth ask {} bid {}{}",
        dir.display(),
        out.config.seed,
        out.counters.events,
        out.trades.len(),
        out.end_time,
        d.s_total,
        d.d_total,
        if out.halted { " (halted: all rates gated)" } else { "" }
    )
}

fn list_presets() {
    for name in NAMES {
        println!("{name:<22} {}", describe(name).unwrap_or(""));
    }
}

fn diagnostics(args: &DiagnosticsArgs) -> Result<(), CliError> {
    let mut config = load(&args.source)?;
    config.validate().map_err(|e| CliError::Data(e.to_string()))?;
    let mut s_c_hat = None;
    let mut note = String::from("cancelled volume not measured; using the mean limit volume (provisional)");
    if let Some(dir) = &args.from_run {
        let loaded = read_run(dir).map_err(read_err)?;
        let tracker = loaded.cancel_volume();
        if let (Some(m), Some(se)) = (tracker.mean(), tracker.std_error()) {
            s_c_hat = Some(m);
            note = format!(
                "mean cancelled volume {m:.4} ± {se:.4} from {} cancellations in {}",
                tracker.count,
                dir.display()
            );
        }
    }
    if let Some(rounds) = args.calibrate {
        let (calibrated, s_c) = calibrate_limit_rates(&config, rounds).map_err(|e| CliError::Data(e.to_string()))?;
        config = calibrated;
        s_c_hat = Some(s_c);
        note = format!("limit rates rebalanced over {rounds} pilot runs, mean cancelled volume {s_c:.4}");
        println!("rates.limit_bid = {}", config.rates.limit_bid);
        println!("rates.limit_ask = {}", config.rates.limit_ask);
    }
    let d = flow_diagnostics(&config.rates, &config.volume_model_limit, &config.volume_model_market, s_c_hat)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let r = &config.rates;
    println!("configuration {} ({note})", config.name);
    println!("total rate          {:.4} events/s", r.total());
    println!("market share        {:.4}", (r.market_ask + r.market_bid) / r.total());
    println!("mean limit volume   {:.4}", d.s_l);
    println!("mean market volume  {:.4}", d.s_m);
    println!("mean cancel volume  {:.4}{}", d.s_c, if d.provisional { " (provisional)" } else { "" });
    println!("inflow  V_in        {:.4}", d.v_in);
    println!("outflow V_out       {:.4}", d.v_out);
    println!(
        "ask side change     {:.4} ({})",
        d.delta_s,
        if d.ask_contracting() { "contracting" } else { "not contracting" }
    );
    println!(
        "bid side change     {:.4} ({})",
        d.delta_d,
        if d.bid_contracting() { "contracting" } else { "not contracting" }
    );
    println!("supply S            {:.4}", d.supply);
    println!("demand D            {:.4}", d.demand);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze::analyze(&a.dir, a.out.as_deref()),
        Command::Presets => {
            list_presets();
            Ok(())
        }
        Command::Diagnostics(a) => diagnostics(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cobsim: {e}");
            ExitCode::from(e.code())
        }
    }
}
