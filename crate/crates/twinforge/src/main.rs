//! Command-line front end. Exit codes: 0 success, 1 invalid input,
//! 2 stage failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use twinforge::bench::bench;
use twinforge::config::PipelineConfig;
use twinforge::model_file::load_model;
use twinforge::pipeline::Pipeline;
use twinforge::report::fmt_num;
use twinforge::store::write_atomic;
use twinforge::{AppError, AppResult};
use twinforge_core::signals::{ExcitationSignal, SignalKind, TimeGrid};

#[derive(Parser)]
#[command(name = "twinforge", version, about = "Neural-ODE reduced-order models from transient simulations")]
struct Cli {
    /// JSON pipeline configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Store root; overrides the config and $TWINFORGE_STORE.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Report directory; overrides the config.
    #[arg(long, global = true)]
    report_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the excitation signals of the plan.
    GenSignals,
    /// Simulate the full-order model for every planned signal.
    Simulate,
    /// Compute the per-data-set feature vectors.
    Features,
    /// Select the test group by chi-square uniformity of T_A medians.
    SelectTest,
    /// Train one ROM per non-test data set.
    Train,
    /// Evaluate every trained ROM on the test group.
    Evaluate,
    /// Emit the feature/error correlation matrix.
    Correlate,
    /// Emit the training-partner chart for the base data set.
    PartnerChart,
    /// Confirm top partners with 2-set trainings and export the final model.
    Finalize,
    /// Run the full pipeline end to end.
    Run,
    /// Integrate a stored model file on an excitation CSV.
    Predict(PredictArgs),
    /// Compare ROM and FOM wall times on one signal.
    Bench(BenchArgs),
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// Excitation CSV with header `t,T_oven` (extra columns ignored).
    #[arg(long)]
    signal: PathBuf,
    /// Initial outputs, kelvin, comma-separated (e.g. "278,278").
    #[arg(long)]
    x0: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// Excitation CSV with header `t,T_oven`.
    #[arg(long)]
    signal: PathBuf,
    /// ROM timing repetitions (minimum 10).
    #[arg(long, default_value_t = 10)]
    reps: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut cause = std::error::Error::source(&e);
            while let Some(c) = cause {
                eprintln!("  caused by: {c}");
                cause = c.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> AppResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(AppError::Validation)?,
        None => PipelineConfig::default(),
    };
    if let Some(store) = cli.store {
        cfg.store_root = Some(store);
    }
    if let Some(dir) = cli.report_dir {
        cfg.report_dir = dir;
    }

    match cli.command {
        Command::Predict(args) => return predict(&args).map_err(AppError::Validation),
        Command::Bench(args) => return run_bench(&cfg, &args).map_err(AppError::Validation),
        _ => {}
    }

    let mut pipeline = Pipeline::new(cfg)?;
    match cli.command {
        Command::GenSignals => {
            let signals = pipeline.ensure_signals()?;
            println!("{} signals ready", signals.len());
        }
        Command::Simulate => {
            let datasets = pipeline.ensure_datasets()?;
            println!("{} data sets in the store", datasets.len());
        }
        Command::Features => {
            let features = pipeline.ensure_features()?;
            println!("features for {} data sets", features.len());
        }
        Command::SelectTest => {
            let ids = pipeline.ensure_test_group()?;
            println!("test group: {}", ids.join(", "));
        }
        Command::Train => {
            let models = pipeline.ensure_single_roms()?;
            println!("{} single-set models trained", models.len());
        }
        Command::Evaluate => {
            let evals = pipeline.ensure_evaluations()?;
            for row in &evals {
                println!("{}: rmse {:.4} K (i = {})", row.id, row.metrics.mean.rmse, row.aug);
            }
        }
        Command::Correlate => {
            pipeline.ensure_correlation()?;
            println!("correlation matrix written to {}", pipeline.report_dir().display());
        }
        Command::PartnerChart => {
            let chart = pipeline.ensure_partner_chart()?;
            println!("partner chart for base {} ({} rows)", chart.base_id, chart.rows.len());
        }
        Command::Finalize | Command::Run => {
            let summary = pipeline.ensure_final()?;
            println!(
                "final model: {} + {} | rmseg {:.4} K vs best single {:.4} K ({:.1}% reduction)",
                summary.base_id,
                summary.selected_partner,
                summary.final_rmseg,
                summary.best_single_rmseg,
                summary.reduction_percent
            );
            if summary.no_improvement {
                println!("warning: no confirmed partner improved on the best 1-set model");
            }
        }
        Command::Predict(_) | Command::Bench(_) => unreachable!("handled above"),
    }
    Ok(())
}

/// Parses an excitation CSV: comment lines ignored, header `t,T_oven` (or the
/// full dataset header), uniformly spaced times.
fn read_signal_csv(path: &Path) -> Result<ExcitationSignal> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if !saw_header {
            if !(line.starts_with("t,T_oven")) {
                bail!("{}:{}: expected header starting with 't,T_oven'", path.display(), lineno);
            }
            saw_header = true;
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| -> Result<f64> {
            let raw = fields
                .next()
                .ok_or_else(|| anyhow!("{}:{}: missing column {name}", path.display(), lineno))?;
            raw.parse::<f64>()
                .map_err(|e| anyhow!("{}:{}: '{raw}': {e}", path.display(), lineno))
        };
        times.push(next("t")?);
        values.push(next("T_oven")?);
    }
    if times.len() < 2 {
        bail!("{}: need at least 2 samples", path.display());
    }
    let dt = times[1] - times[0];
    let grid = TimeGrid::new(times.len(), dt, times[0]).map_err(|e| anyhow!("{e}"))?;
    for (k, &t) in times.iter().enumerate() {
        if (t - grid.time(k)).abs() > 1e-9 * dt.abs().max(1.0) {
            bail!("{}: sample {k} at t = {t} is off the uniform grid", path.display());
        }
    }
    Ok(ExcitationSignal {
        grid,
        values,
        kind: SignalKind::Aprbs,
        jumps: Vec::new(),
        seed: 0,
        id: String::new(),
    })
}

fn predict(args: &PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let signal = read_signal_csv(&args.signal)?;
    let x0: Vec<f64> = args
        .x0
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("x0 '{s}': {e}")))
        .collect::<Result<_>>()?;
    if x0.len() != model.n {
        bail!("x0 has {} entries, model expects {}", x0.len(), model.n);
    }
    let traj = model.integrate(&signal, &x0).map_err(|e| anyhow!("{e}"))?;

    let mut text = String::from("t");
    for j in 0..model.n {
        text.push(',');
        if model.n == 2 {
            text.push_str(twinforge_core::fom::CHANNEL_NAMES[j]);
        } else {
            text.push_str(&format!("y{}", j + 1));
        }
    }
    text.push('\n');
    for k in 0..signal.grid.n_samples {
        text.push_str(&fmt_num(signal.grid.time(k)));
        for ch in &traj.outputs {
            text.push(',');
            text.push_str(&fmt_num(ch[k]));
        }
        text.push('\n');
    }
    write_atomic(&args.out, text.as_bytes())?;
    println!("wrote {} rows to {}", signal.grid.n_samples, args.out.display());
    Ok(())
}

fn run_bench(cfg: &PipelineConfig, args: &BenchArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let signal = read_signal_csv(&args.signal)?;
    let report = bench(&model, &cfg.fom, &signal, args.reps)?;
    println!(
        "rom: {:.6} s/trajectory | fom: {:.6} s | Sp = {:.1}",
        report.rom_wall_time, report.fom_wall_time, report.speedup
    );
    Ok(())
}
