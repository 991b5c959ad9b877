//! Three-element Windkessel pressure simulator and the synthetic dataset
//! generator built on it.

mod sim;
mod synth;

pub use sim::{
    periodic_initial_pressure, simulate_pressure, wk3_rhs, InflowProfile, PressureTrace, Wk3Params,
};
pub use synth::{
    synth_dataset, write_ground_truth, write_synth, ParamRanges, SubjectTruth, SynthConfig,
    SynthDataset,
};
