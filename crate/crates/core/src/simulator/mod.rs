//! Exact event simulation of the N-agent process.

pub mod config;
pub mod engine;
pub mod population;

pub use config::{Density, InitialCondition, SimConfig};
pub use engine::{
    exact_total_rate, infection_rate, run, run_tracked, total_event_rate_bound, EventKind, EventRecord,
    MartingaleTrack, RunOutput, RunStats, Simulation, Snapshot, StepOutcome, TrackRecord,
};
pub use population::{pair, sample_initial, EmpiricalMeasures, Health, Population};
