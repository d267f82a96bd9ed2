//! Initial phase generators.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::Rng;

use crate::error::{Error, Result};
use crate::phase::PhaseAngle;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPhases {
    /// One value per oscillator, each in `[0, 2π)`.
    Explicit(Vec<f64>),
    /// Independent uniform draws on `[0, 2π)`, redrawn until all distinct.
    UniformRandom,
    /// Every oscillator starts at the same phase.
    AllEqual(f64),
    /// `k·2π/N` for oscillator `k`.
    EvenlySpaced,
}

impl InitialPhases {
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<PhaseAngle>> {
        match self {
            InitialPhases::Explicit(values) => {
                if values.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        got: values.len(),
                    });
                }
                values.iter().map(|&v| in_range(v)).collect()
            }
            InitialPhases::UniformRandom => {
                let mut out: Vec<PhaseAngle> = Vec::with_capacity(n);
                while out.len() < n {
                    let draw = uniform_phase(rng);
                    if !out.contains(&draw) {
                        out.push(draw);
                    }
                }
                Ok(out)
            }
            InitialPhases::AllEqual(v) => {
                let phase = in_range(*v)?;
                Ok(alloc::vec![phase; n])
            }
            InitialPhases::EvenlySpaced => {
                let slot = TAU / n as f64;
                Ok((0..n)
                    .map(|k| PhaseAngle::from_canonical(k as f64 * slot))
                    .collect())
            }
        }
    }
}

fn in_range(v: f64) -> Result<PhaseAngle> {
    if !v.is_finite() {
        return Err(Error::NonFinitePhase(v));
    }
    if !(0.0..TAU).contains(&v) {
        return Err(Error::PhaseOutOfRange(v));
    }
    Ok(PhaseAngle::from_canonical(v))
}

/// Uniform on `[0, 2π)`.
pub(crate) fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> PhaseAngle {
    loop {
        let x = rng.gen::<f64>() * TAU;
        if x < TAU {
            return PhaseAngle::from_canonical(x);
        }
    }
}
