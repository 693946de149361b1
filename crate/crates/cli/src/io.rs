use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use graphdd_core::bench::GateDurations;
use graphdd_core::{parse_circuit, parse_device, DeviceModel, ScheduledCircuit};

pub fn read_device(path: &Path) -> Result<DeviceModel> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_device(&bytes).with_context(|| format!("parsing device {}", path.display()))
}

pub fn read_circuit(path: &Path, device: &DeviceModel) -> Result<ScheduledCircuit> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_circuit(&bytes, device).with_context(|| format!("parsing circuit {}", path.display()))
}

pub fn read_durations(path: Option<&Path>) -> Result<GateDurations> {
    let Some(path) = path else {
        return Ok(GateDurations::default());
    };
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing durations {}", path.display()))
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Write to `path`, or to stdout when no path is given.
pub fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write(p, text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
