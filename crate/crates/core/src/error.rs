use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("phase value {0} is not finite")]
    NonFinitePhase(f64),
    #[error("phase value {0} is outside [0, 2π)")]
    PhaseOutOfRange(f64),
    #[error("network size must be at least 2, got {0}")]
    NetworkTooSmall(usize),
    #[error("coupling strength must lie strictly between 0 and 1, got {0}")]
    CouplingOutOfRange(f64),
    #[error("natural frequency must be finite and positive, got {0}")]
    InvalidFrequency(f64),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("phase difference {0} is outside [0, 2π]")]
    DeltaOutOfRange(f64),
    #[error("empty phase list")]
    EmptyPhases,
    #[error("time step {0} is negative or not finite")]
    InvalidTimeStep(f64),
    #[error("advancing {dt} s would skip the firing due in {limit} s")]
    AdvancePastFire { dt: f64, limit: f64 },
    #[error("no oscillator is at the firing point")]
    NoPendingFire,
    #[error("pulse classification is undefined for an event with {0} simultaneous firers")]
    CollisionEvent(usize),
    #[error("trailing gap went from {before} to {after}, crossing the slot width {slot} upwards")]
    ForbiddenCase { before: f64, after: f64, slot: f64 },
}
