//! Run a backtest from a TOML config and write the report files.
//!
//! `cargo run --release --example backtest -- path/to/run.toml`

use std::path::PathBuf;
use std::time::Instant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path: PathBuf = std::env::args().nth(1).ok_or("usage: backtest <config.toml>")?.into();
    let cfg = panelcast::harness::RunConfig::from_file(&path)?;
    let t = Instant::now();
    let report = panelcast::harness::run_backtest(&cfg)?;
    panelcast::harness::emit_report(&report, &cfg.output_dir)?;
    print!("{}", report.summary());
    for m in &report.models {
        for n in &m.notes {
            println!("{}: {n}", m.name);
        }
    }
    println!("elapsed {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
