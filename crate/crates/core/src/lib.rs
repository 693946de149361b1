pub mod bench;
pub mod error;
pub mod graph;
pub mod oracle;
pub mod pipeline;
pub mod schedule;
pub mod solver;
pub mod splitter;
pub mod time;

pub use error::{Error, Result};
pub use schedule::{
    extract_idles, extract_idles_with, insert_gates, parse_circuit, parse_device, DdPulses,
    DeviceModel, IdleExtraction, IdleWindow, Instruction, InstructionKind, Qubit,
    ScheduledCircuit, SkippedIdle, WindowOrigin,
};
pub use time::{Interval, RationalTime, Tick};
