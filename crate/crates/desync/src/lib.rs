//! Scenario files, trace output, parameter sweeps and the property suite
//! for the pulse-coupled desynchronization engine in `desync-core`.

pub mod scenario;
pub mod simulate;
pub mod sweep;
pub mod trace;
pub mod verify;
