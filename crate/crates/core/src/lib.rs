//! Traffic speed field reconstruction from sparse stationary detectors.
//!
//! Observed detector rows are smoothed along several characteristic wave speeds
//! ([`kernel`]), and the resulting a priori fields are superposed either with the
//! conventional tanh heuristic ([`asm`]) or with weights that solve a constrained
//! matrix-completion problem by ADMM ([`admm`]).
//!
//! ```no_run
//! use adaptive_smoothing::prelude::*;
//!
//! # fn main() -> adaptive_smoothing::Result<()> {
//! let truth = adaptive_smoothing::io::read_field("truth.txt".as_ref())?;
//! let rows = equally_spaced_detectors(truth.grid(), 4)?;
//! let mask = detector_mask(truth.grid(), &rows)?;
//! let observed = apply_mask(&truth, &mask)?;
//! let est = estimate(&observed, &mask, Method::Admm, &EstimationConfig::default())?;
//! println!("m_r = {}", relative_error(&est.field, &truth)?);
//! # Ok(())
//! # }
//! ```

pub mod admm;
pub mod asm;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod heatmap;
pub mod io;
pub mod kernel;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::admm::{solve, AdmmParams, AdmmResult, WeightBank};
    pub use crate::asm::{asm_estimate, AsmParams};
    pub use crate::evaluation::{coverage_sweep, evaluate, relative_error, wavespeed_sweep};
    pub use crate::grid::{
        aggregate_trajectories, apply_mask, detector_mask, equally_spaced_detectors, GridSpec, ObservationMask,
        Sample, SpeedField, Trajectory,
    };
    pub use crate::kernel::{build_priori_bank, smooth_along_wave, KernelParams, KernelShape, PrioriBank};
    pub use crate::pipeline::{estimate, EstimationConfig, Method};
    pub use crate::synth::{brute_force_weights, generate_field, SyntheticSpec, WaveSegment};
}
