//! Exact, event-driven simulation of pulse-coupled oscillators running the
//! phase-desynchronization response, plus the metrics used to check that a
//! population spreads evenly around the circle.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the scenario
//! schema and the command-line tool live in the `desync` companion crate.
//!
//! ```
//! use desync_core::{run, InitialPhases, NetworkState, PrcConfig, StopCondition};
//!
//! let prc = PrcConfig::new(5, 0.85).unwrap();
//! let state = NetworkState::from_initial(
//!     prc,
//!     core::f64::consts::TAU,
//!     &InitialPhases::UniformRandom,
//!     42,
//! )
//! .unwrap();
//! let out = run(state, &StopCondition::default_for(5));
//! assert!(out.converged);
//! ```

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;

pub mod engine;
pub mod init;
pub mod metrics;
pub mod phase;

pub use crate::engine::{
    run, EventKind, ListenerUpdate, NetworkState, OscillatorId, PulseEvent, Reset, RunOutput,
    StopCondition,
};
pub use crate::error::{Error, Result};
pub use crate::init::InitialPhases;
pub use crate::metrics::{
    classify_pulse, compute_deltas, compute_p, predict_delta_p, silent_run_length, ActiveCase,
    DeltaVector, DesyncIndex, DesyncObserver, Observation, PulseClassification, PulseKind,
    RingOrder, CONVERGENCE_THRESHOLD,
};
pub use crate::phase::{apply_prc, canonicalize, forward_diff, prc_response, PhaseAngle, PrcConfig};
