use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use graphdd_core::oracle::compute_residuals;
use graphdd_core::RationalTime;

use crate::io;
use crate::Outcome;

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    device: PathBuf,
    /// Read the circuit on the exact grid; the default tolerance becomes 0.
    #[arg(long)]
    exact: bool,
    /// Largest accepted |ZZ| residual in ticks [default: 4 x granularity, 0 with --exact].
    #[arg(long)]
    tolerance: Option<i64>,
    /// Largest accepted |Z| residual in ticks.
    #[arg(long, default_value_t = 0)]
    z_tolerance: i64,
    /// Ledger JSON destination; printed to stdout when absent.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

pub fn run(args: &VerifyArgs) -> Result<Outcome> {
    let mut device = io::read_device(&args.device)?;
    if args.exact {
        device = device.exact();
    }
    let circuit = io::read_circuit(&args.circuit, &device)?;
    let ledger = compute_residuals(&circuit, &device);
    io::write_or_print(args.ledger.as_deref(), &ledger.to_json())?;

    let zz_tol = RationalTime::from_tick(args.tolerance.unwrap_or(if args.exact { 0 } else { 4 * device.granularity() }));
    let z_tol = RationalTime::from_tick(args.z_tolerance);
    let mut violations = 0;
    for e in ledger.z.iter().filter(|e| e.residual.abs() > z_tol) {
        eprintln!("Z residual {} on idle {} (qubit {}, [{}, {}))", e.residual, e.idle, e.qubit, e.start, e.end);
        violations += 1;
    }
    for e in ledger.zz.iter().filter(|e| e.residual.abs() > zz_tol) {
        eprintln!(
            "ZZ residual {} on edge {} (idles {} and {}, qubits {} and {}, overlap {})",
            e.residual, e.edge, e.idles[0], e.idles[1], e.qubits[0], e.qubits[1], e.overlap
        );
        violations += 1;
    }
    if violations > 0 {
        eprintln!("{violations} residuals exceed tolerance (|Z| <= {z_tol}, |ZZ| <= {zz_tol})");
        return Ok(Outcome::Violated);
    }
    log::info!(
        "{} Z and {} ZZ entries within tolerance; max |Z| {}, max |ZZ| {}",
        ledger.z.len(),
        ledger.zz.len(),
        ledger.max_abs_z,
        ledger.max_abs_zz
    );
    Ok(Outcome::Passed)
}
