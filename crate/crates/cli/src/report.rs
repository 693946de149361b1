//! `compare` and `bench`: per-width CSV reports over generated benchmarks.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use graphdd_core::bench::{gen_bv, gen_qft, gen_random, GateDurations, TopologySpec};
use graphdd_core::oracle::{model_selectivity, success_proxy, NoiseDraw, NoiseRange};
use graphdd_core::pipeline::{embed, EmbedConfig, Strategy};
use graphdd_core::{DeviceModel, Qubit, ScheduledCircuit};
use serde::Serialize;

use crate::io;
use crate::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Bv,
    Qft,
    Random,
}

const STRATEGIES: [Strategy; 2] = [Strategy::GraphDd, Strategy::Standard];

pub(crate) fn generate(
    algorithm: Algorithm,
    width: usize,
    device: &DeviceModel,
    durations: &GateDurations,
    depth: usize,
    seed: u64,
) -> Result<ScheduledCircuit> {
    Ok(match algorithm {
        Algorithm::Bv => gen_bv(width, device, durations)?,
        Algorithm::Qft => gen_qft(width, device, durations)?,
        Algorithm::Random => gen_random(width, depth, seed, device, durations)?,
    })
}

fn measured_qubits(c: &ScheduledCircuit) -> Vec<Qubit> {
    let mut qs: Vec<Qubit> = c
        .instructions()
        .iter()
        .filter(|i| i.is_measure())
        .flat_map(|i| i.qubits.iter().copied())
        .collect();
    qs.sort_unstable();
    qs.dedup();
    qs
}

fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

#[derive(Args)]
pub struct CompareArgs {
    /// bv or qft.
    #[arg(long, value_enum)]
    algorithm: Algorithm,
    /// Comma-separated widths.
    #[arg(long, value_delimiter = ',', required = true)]
    widths: Vec<usize>,
    /// Line device at least as wide as the largest width.
    #[arg(long)]
    device: PathBuf,
    /// Monte-Carlo noise draws per circuit.
    #[arg(long, default_value_t = 100)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    exact: bool,
    /// Gate-duration JSON for the generators.
    #[arg(long)]
    durations: Option<PathBuf>,
    /// Half-width of the uniform per-qubit Z rate range, rad per tick.
    #[arg(long, default_value_t = NoiseRange::default().eps)]
    eps: f64,
    /// Half-width of the uniform per-pair ZZ rate range, rad per tick.
    #[arg(long, default_value_t = NoiseRange::default().j)]
    j: f64,
}

#[derive(Serialize)]
struct CompareRow {
    width: usize,
    strategy: Strategy,
    proxy: f64,
    max_zz_residual: String,
    gates: usize,
    embed_time_us: u64,
    selectivity: f64,
}

pub fn compare(args: &CompareArgs) -> Result<Outcome> {
    if args.algorithm == Algorithm::Random {
        bail!("compare supports bv and qft");
    }
    let device = io::read_device(&args.device)?;
    let durations = io::read_durations(args.durations.as_deref())?;
    let draws = NoiseDraw::series(&device, args.seed, args.draws, NoiseRange { eps: args.eps, j: args.j });

    let mut out = csv_writer(Some(&args.out))?;
    let mut outcome = Outcome::Passed;
    for &width in &args.widths {
        let circuit = generate(args.algorithm, width, &device, &durations, 0, args.seed)?;
        let readout = measured_qubits(&circuit);
        let mut proxies = [0.0; 2];
        for (k, strategy) in STRATEGIES.into_iter().enumerate() {
            let config = EmbedConfig {
                exact: args.exact,
                ..EmbedConfig::new(strategy)
            };
            let e = embed(&circuit, &device, &config)?;
            proxies[k] = success_proxy(&e.ledger, &draws);
            out.serialize(CompareRow {
                width,
                strategy,
                proxy: proxies[k],
                max_zz_residual: e.ledger.max_abs_zz.to_string(),
                gates: e.stats.gates,
                embed_time_us: e.stats.wall_time_us,
                selectivity: model_selectivity(&e.ledger, &draws, &readout),
            })?;
        }
        if proxies[0] < proxies[1] {
            log::error!("width {width}: graphdd proxy {} below standard {}", proxies[0], proxies[1]);
            outcome = Outcome::Violated;
        }
    }
    out.flush()?;
    Ok(outcome)
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    algorithm: Algorithm,
    /// Comma-separated widths.
    #[arg(long, value_delimiter = ',', required = true)]
    widths: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Device file; defaults to a line of each width with default timing.
    #[arg(long)]
    device: Option<PathBuf>,
    /// Layers per random circuit.
    #[arg(long, default_value_t = 20)]
    depth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the long-idle threshold, in ticks.
    #[arg(long)]
    max_idle: Option<i64>,
    #[arg(long)]
    durations: Option<PathBuf>,
    /// CSV destination; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct BenchRow {
    width: usize,
    idles: usize,
    strategy: Strategy,
    median_embed_time_us: f64,
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort_unstable();
    xs[xs.len() / 2]
}

pub fn bench(args: &BenchArgs) -> Result<Outcome> {
    if args.repeats == 0 {
        bail!("--repeats must be positive");
    }
    let shared = args.device.as_deref().map(io::read_device).transpose()?;
    let durations = io::read_durations(args.durations.as_deref())?;

    let mut out = csv_writer(args.out.as_deref())?;
    for &width in &args.widths {
        let device = match &shared {
            Some(d) => d.clone(),
            None => TopologySpec::line(width).default_device()?,
        };
        let circuit = generate(args.algorithm, width, &device, &durations, args.depth, args.seed)?;
        for strategy in STRATEGIES {
            let config = EmbedConfig {
                max_idle: args.max_idle,
                ..EmbedConfig::new(strategy)
            };
            let mut times = Vec::with_capacity(args.repeats);
            let mut idles = 0;
            for _ in 0..args.repeats {
                let e = embed(&circuit, &device, &config)?;
                idles = e.stats.idles;
                times.push(e.stats.wall_time);
            }
            out.serialize(BenchRow {
                width,
                idles,
                strategy,
                median_embed_time_us: median(times).as_secs_f64() * 1e6,
            })?;
        }
    }
    out.flush()?;
    Ok(Outcome::Passed)
}
