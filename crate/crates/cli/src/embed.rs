use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use graphdd_core::pipeline::{embed, EmbedConfig, Strategy};

use crate::io;
use crate::Outcome;

#[derive(Args)]
pub struct EmbedArgs {
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    device: PathBuf,
    /// graphdd, standard or none.
    #[arg(long)]
    strategy: Strategy,
    /// Override the device's long-idle threshold, in ticks.
    #[arg(long)]
    max_idle: Option<i64>,
    /// Unit granularity and instantaneous pulses; no rounding.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    out: PathBuf,
    /// Stats JSON destination; printed to stdout when absent.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Graph and traversal dump (graphdd only).
    #[arg(long)]
    graph_dump: Option<PathBuf>,
}

pub fn run(args: &EmbedArgs) -> Result<Outcome> {
    let device = io::read_device(&args.device)?;
    // Exact-mode outputs carry fractional pulse times, so re-reading one
    // needs the exact grid.
    let read_as = if args.exact { device.exact() } else { device.clone() };
    let circuit = io::read_circuit(&args.circuit, &read_as)?;

    let config = EmbedConfig {
        strategy: args.strategy,
        max_idle: args.max_idle,
        exact: args.exact,
    };
    let e = embed(&circuit, &device, &config)?;
    log::info!(
        "{}: {} idles, {} gates, max |Z| {}, max |ZZ| {}",
        args.strategy,
        e.stats.idles,
        e.stats.gates,
        e.ledger.max_abs_z,
        e.ledger.max_abs_zz
    );

    io::write(&args.out, &e.circuit.to_json())?;
    io::write_or_print(args.stats.as_deref(), &serde_json::to_string_pretty(&e.stats)?)?;
    if let Some(path) = &args.graph_dump {
        match e.graph_dump() {
            Some(dump) => io::write(path, &serde_json::to_string_pretty(&dump)?)?,
            None => log::warn!("--graph-dump ignored: strategy {} builds no graph", args.strategy),
        }
    }
    Ok(Outcome::Passed)
}
