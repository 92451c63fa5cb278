use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use panelcast::harness::{emit_report, metrics_csv, read_report, recompute_metrics, run_backtest, weekly_mape_csv, RunConfig};
use panelcast::metrics::MetricConfig;
use panelcast::panel::{generate_synthetic_panel, write_panel_csv, SyntheticConfig};
use panelcast::Error;

/// Grouped time-series forecasting backtests.
#[derive(Parser)]
#[command(name = "panelcast", version)]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a backtest and write the report directory.
    Run {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Report directory, overriding `output_dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic panel CSV and its schema file.
    Synth {
        /// Generator settings (TOML); missing keys take their defaults.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV. The schema is written next to it as `<stem>.schema.toml`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute metrics from forecast and actual CSVs.
    Metrics {
        /// Forecasts CSV (`group,origin_date,step,point,lower,upper,model`).
        #[arg(long)]
        forecasts: PathBuf,
        /// Actuals CSV (`group,date,actual`).
        #[arg(long)]
        actuals: PathBuf,
        /// Actuals with absolute value at or below this are left out of MAPE.
        #[arg(long, default_value_t = MetricConfig::default().mape_epsilon)]
        mape_epsilon: f64,
        /// Interval-score alpha.
        #[arg(long, default_value_t = MetricConfig::default().mis_alpha)]
        mis_alpha: f64,
        /// Print the per-week MAPE table instead of the metric table.
        #[arg(long)]
        weekly: bool,
        /// Steps per week for `--weekly`.
        #[arg(long, default_value_t = 7)]
        week_len: usize,
    },
    /// Summarize a report directory.
    Report {
        /// Directory written by `run`.
        #[arg(long = "in")]
        dir: PathBuf,
        /// Print report.json instead of the table.
        #[arg(long)]
        json: bool,
    },
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn schema_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or("panel".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.schema.toml"))
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { config, out } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let report = run_backtest(&cfg)?;
            emit_report(&report, &cfg.output_dir)?;
            print!("{}", report.summary());
            println!("report written to {}", cfg.output_dir.display());
        }
        Command::Synth { config, out } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
            let cfg: SyntheticConfig =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
            cfg.validate()?;
            let ds = generate_synthetic_panel(&cfg)?;
            let schema = write_panel_csv(&ds, &out)?;
            let spath = schema_path(&out);
            schema.write(&spath)?;
            println!("wrote {} rows to {} (schema {})", ds.n_rows(), out.display(), spath.display());
        }
        Command::Metrics { forecasts, actuals, mape_epsilon, mis_alpha, weekly, week_len } => {
            let cfg = MetricConfig { mape_epsilon, mis_alpha };
            let rows = recompute_metrics(&forecasts, &actuals, &cfg, week_len)?;
            print!("{}", if weekly { weekly_mape_csv(&rows) } else { metrics_csv(&rows) });
        }
        Command::Report { dir, json } => {
            if json {
                let path = dir.join("report.json");
                print!("{}", std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?);
            } else {
                print!("{}", read_report(&dir)?.summary());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim(), 2),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), 1),
    }
}
