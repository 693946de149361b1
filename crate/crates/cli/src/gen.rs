use std::path::PathBuf;

use anyhow::Result;
use clap::Subcommand;
use graphdd_core::bench::{TopologyKind, TopologySpec};
use graphdd_core::Tick;

use crate::io;
use crate::report::{generate, Algorithm};
use crate::Outcome;

#[derive(Subcommand)]
pub enum GenCommand {
    /// Device JSON for a line, ring or heavy-hex topology.
    Device {
        /// line, ring or heavy_hex (127 qubits only).
        #[arg(long)]
        topology: TopologyKind,
        #[arg(long)]
        width: usize,
        #[arg(long, default_value_t = 8)]
        granularity: Tick,
        #[arg(long, default_value_t = 40)]
        x_duration: Tick,
        #[arg(long, default_value_t = 4000)]
        max_idle: Tick,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// ASAP-scheduled benchmark circuit JSON.
    Circuit {
        #[arg(long, value_enum)]
        algorithm: Algorithm,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        device: PathBuf,
        /// Layers per random circuit.
        #[arg(long, default_value_t = 20)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        durations: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cmd: &GenCommand) -> Result<Outcome> {
    match cmd {
        GenCommand::Device { topology, width, granularity, x_duration, max_idle, out } => {
            let spec = TopologySpec { kind: *topology, width: *width };
            let device = spec.device(*granularity, *x_duration, *max_idle)?;
            io::write_or_print(out.as_deref(), &device.to_json())?;
        }
        GenCommand::Circuit { algorithm, width, device, depth, seed, durations, out } => {
            let device = io::read_device(device)?;
            let durations = io::read_durations(durations.as_deref())?;
            let circuit = generate(*algorithm, *width, &device, &durations, *depth, *seed)?;
            io::write_or_print(out.as_deref(), &circuit.to_json())?;
        }
    }
    Ok(Outcome::Passed)
}
