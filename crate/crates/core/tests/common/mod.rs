#![allow(dead_code)]

use std::path::PathBuf;

use graphdd_core::bench::{gen_random, GateDurations, TopologyKind, TopologySpec};
use graphdd_core::{parse_circuit, parse_device, DeviceModel, ScheduledCircuit};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// 4-qubit line whose schedule yields nine windows in two acyclic components.
pub fn two_component_fixture() -> (ScheduledCircuit, DeviceModel) {
    let dev = parse_device(&std::fs::read(data("line4_device.json")).unwrap()).unwrap();
    let c = parse_circuit(&std::fs::read(data("two_component_circuit.json")).unwrap(), &dev).unwrap();
    (c, dev)
}

/// Width and depth for the `k`-th random suite member: widths 2..=16,
/// depths 1..=40, alternating line and ring topologies.
pub fn suite_shape(k: u64) -> (usize, usize, TopologySpec) {
    let width = 2 + (k % 15) as usize;
    let depth = 1 + ((k * 7 + k / 15) % 40) as usize;
    let kind = if k % 2 == 1 && width >= 3 {
        TopologyKind::Ring
    } else {
        TopologyKind::Line
    };
    (width, depth, TopologySpec { kind, width })
}

pub fn suite_member(k: u64, granularity: i64, x_dur: i64, max_idle: i64) -> (ScheduledCircuit, DeviceModel) {
    let (width, depth, topo) = suite_shape(k);
    let dev = topo.device(granularity, x_dur, max_idle).unwrap();
    let c = gen_random(width, depth, 1000 + k, &dev, &GateDurations::default()).unwrap();
    (c, dev)
}

/// The 200-circuit random suite on the default timing model.
pub fn random_suite() -> Vec<(ScheduledCircuit, DeviceModel)> {
    (0..200).map(|k| suite_member(k, 8, 40, 4000)).collect()
}
