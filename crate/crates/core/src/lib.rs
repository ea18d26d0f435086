//! Simulation and analysis of qubit readout with simultaneous qubit and
//! resonator driving.
//!
//! The crate covers the transmon–resonator Hamiltonians, a Lindblad
//! integrator, closed-form dispersive trajectories, readout protocol presets
//! and the single-shot statistics pipeline.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analytic;
pub mod engine;
pub mod error;
pub mod fit;
pub mod operator;
pub mod protocols;
pub mod shots;
pub mod system;

pub use analytic::AnalyticParams;
pub use engine::{
    evolve, evolve_pair, leakage, EvolveOptions, Frame, InitialState, PulseSchedule, Segment,
    Trajectory,
};
pub use error::{Error, Result};
pub use operator::{ComplexMatrix, DensityMatrix, C64};
pub use protocols::{ProtocolKind, ProtocolSpec, SeparationDiagnostics};
pub use shots::{NoiseModel, ShotRecord, WeightFunctions};
pub use system::{DispersiveConstants, Qubit, SystemParams};
