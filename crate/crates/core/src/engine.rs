//! Exact event-driven evolution of an all-to-all oscillator network.
//!
//! Between pulses every phase moves at the same speed, so the state jumps
//! analytically from one firing instant to the next. At a firing instant the
//! oscillators at `2π` emit pulses and reset, every other oscillator applies
//! the phase response once per pulse.
//!
//! A lone firer resets to `0`. Oscillators that reach `2π` together each hear
//! the others' pulses, and each resets to an independent uniform phase drawn
//! from the network's seeded generator, in ascending id order. Those draws are
//! what separate oscillators that would otherwise stay locked together.

use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::init::{uniform_phase, InitialPhases};
use crate::metrics::{RingOrder, CONVERGENCE_THRESHOLD};
use crate::phase::{apply_prc, canonicalize, PhaseAngle, PrcConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OscillatorId(pub usize);

impl OscillatorId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for OscillatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// Single firer, at least one listener inside the effective interval.
    Active,
    /// Single firer, no listener inside the effective interval.
    Silent,
    /// Two or more oscillators fired at the same instant.
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ListenerUpdate {
    pub id: OscillatorId,
    pub before: PhaseAngle,
    pub after: PhaseAngle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reset {
    pub id: OscillatorId,
    pub value: PhaseAngle,
}

/// Everything that happened at one firing instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseEvent {
    pub time: f64,
    /// Ascending ids.
    pub firers: Vec<OscillatorId>,
    /// One entry per non-firer, ascending ids.
    pub updates: Vec<ListenerUpdate>,
    /// One entry per firer, in the order of `firers`.
    pub resets: Vec<Reset>,
    pub kind: EventKind,
}

impl PulseEvent {
    pub fn n(&self) -> usize {
        self.firers.len() + self.updates.len()
    }

    pub fn single_firer(&self) -> Option<OscillatorId> {
        match self.firers.as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }

    /// Phases at the firing instant, before any update. Firers sit at the
    /// wrap point, which reads as `0`.
    pub fn phases_before(&self) -> Vec<PhaseAngle> {
        let mut out = alloc::vec![PhaseAngle::ZERO; self.n()];
        for u in &self.updates {
            out[u.id.0] = u.before;
        }
        out
    }

    pub fn phases_after(&self) -> Vec<PhaseAngle> {
        let mut out = alloc::vec![PhaseAngle::ZERO; self.n()];
        for u in &self.updates {
            out[u.id.0] = u.after;
        }
        for r in &self.resets {
            out[r.id.0] = r.value;
        }
        out
    }
}

/// Oscillator population plus the clock and the generator used for
/// collision resets.
#[derive(Debug, Clone)]
pub struct NetworkState {
    time: f64,
    omega: f64,
    phases: Vec<PhaseAngle>,
    // Oscillators sitting at 2π, waiting for `fire`. Their stored phase is 0.
    at_wrap: Vec<bool>,
    prc: PrcConfig,
    rng: ChaCha8Rng,
    flipped_prc: bool,
}

impl NetworkState {
    /// Starts at time 0 with the given phases. `seed` drives collision resets.
    pub fn new(prc: PrcConfig, omega: f64, phases: Vec<PhaseAngle>, seed: u64) -> Result<Self> {
        Self::with_rng(prc, omega, phases, ChaCha8Rng::seed_from_u64(seed))
    }

    /// Generates the initial phases from `seed`, then keeps drawing collision
    /// resets from the same stream.
    pub fn from_initial(
        prc: PrcConfig,
        omega: f64,
        initial: &InitialPhases,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phases = initial.generate(prc.n(), &mut rng)?;
        Self::with_rng(prc, omega, phases, rng)
    }

    fn with_rng(
        prc: PrcConfig,
        omega: f64,
        phases: Vec<PhaseAngle>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidFrequency(omega));
        }
        if phases.len() != prc.n() {
            return Err(Error::LengthMismatch {
                expected: prc.n(),
                got: phases.len(),
            });
        }
        Ok(NetworkState {
            time: 0.0,
            omega,
            at_wrap: alloc::vec![false; phases.len()],
            phases,
            prc,
            rng,
            flipped_prc: false,
        })
    }

    /// Negative control for the verification suite: listeners move away from
    /// `2π/N` instead of toward it.
    #[doc(hidden)]
    pub fn inject_flipped_prc(&mut self) {
        self.flipped_prc = true;
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn prc(&self) -> &PrcConfig {
        &self.prc
    }

    pub fn n(&self) -> usize {
        self.phases.len()
    }

    pub fn phases(&self) -> &[PhaseAngle] {
        &self.phases
    }

    /// Oscillators currently at the wrap point.
    pub fn pending_firers(&self) -> Vec<OscillatorId> {
        self.at_wrap
            .iter()
            .enumerate()
            .filter(|(_, &w)| w)
            .map(|(i, _)| OscillatorId(i))
            .collect()
    }

    fn max_phase(&self) -> f64 {
        self.phases.iter().fold(0.0, |m, p| m.max(p.value()))
    }

    /// Seconds until the leading oscillator reaches `2π`; zero while a
    /// firing is pending.
    pub fn time_to_next_fire(&self) -> f64 {
        if self.at_wrap.iter().any(|&w| w) {
            0.0
        } else {
            (TAU - self.max_phase()) / self.omega
        }
    }

    /// Moves every phase forward by `omega * dt`.
    ///
    /// Advancing by exactly [`time_to_next_fire`](Self::time_to_next_fire)
    /// puts the leading oscillators (all of those sharing the maximal phase)
    /// at the wrap point. A longer step would skip a firing and is rejected.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::InvalidTimeStep(dt));
        }
        let limit = self.time_to_next_fire();
        if dt > limit {
            return Err(Error::AdvancePastFire { dt, limit });
        }
        if dt == 0.0 {
            return Ok(());
        }
        let max = self.max_phase();
        let to_fire = dt == limit;
        // On a full advance the increment is taken in phase units so that
        // the leaders land on 2π exactly and tied phases stay tied.
        let increment = if to_fire { TAU - max } else { self.omega * dt };
        for (phase, wrap) in self.phases.iter_mut().zip(self.at_wrap.iter_mut()) {
            let moved = phase.value() + increment;
            if (to_fire && phase.value() == max) || moved >= TAU {
                *phase = PhaseAngle::ZERO;
                *wrap = true;
            } else {
                *phase = PhaseAngle::from_canonical(moved);
            }
        }
        self.time += dt;
        Ok(())
    }

    fn respond(&self, phi: PhaseAngle) -> PhaseAngle {
        if self.flipped_prc && phi.value() < self.prc.slot() {
            let pushed = phi.value() + self.prc.l() * (phi.value() - self.prc.slot());
            canonicalize(pushed).expect("finite phase")
        } else {
            apply_prc(phi, &self.prc)
        }
    }

    /// Emits the pending pulses, updates listeners and resets the firers.
    pub fn fire(&mut self) -> Result<PulseEvent> {
        let firers = self.pending_firers();
        if firers.is_empty() {
            return Err(Error::NoPendingFire);
        }
        let slot = self.prc.slot();
        let mut active = false;
        let mut updates = Vec::with_capacity(self.n() - firers.len());
        for i in 0..self.n() {
            if self.at_wrap[i] {
                continue;
            }
            let before = self.phases[i];
            active |= before.value() < slot;
            let mut after = before;
            for _ in 0..firers.len() {
                after = self.respond(after);
            }
            assert!(
                self.flipped_prc || (after >= before && (before.value() >= slot || after.value() < slot)),
                "listener {i} moved from {before} to {after}"
            );
            self.phases[i] = after;
            updates.push(ListenerUpdate {
                id: OscillatorId(i),
                before,
                after,
            });
        }

        let mut resets: Vec<Reset> = Vec::with_capacity(firers.len());
        if firers.len() == 1 {
            resets.push(Reset {
                id: firers[0],
                value: PhaseAngle::ZERO,
            });
        } else {
            for &id in &firers {
                let value = loop {
                    let draw = uniform_phase(&mut self.rng);
                    if resets.iter().all(|r| r.value != draw) {
                        break draw;
                    }
                };
                resets.push(Reset { id, value });
            }
        }
        for r in &resets {
            self.phases[r.id.0] = r.value;
            self.at_wrap[r.id.0] = false;
        }

        let kind = match (firers.len(), active) {
            (1, true) => EventKind::Active,
            (1, false) => EventKind::Silent,
            _ => EventKind::Collision,
        };
        Ok(PulseEvent {
            time: self.time,
            firers,
            updates,
            resets,
            kind,
        })
    }

    /// Advances to the next firing instant and fires.
    pub fn step(&mut self) -> Result<PulseEvent> {
        self.advance(self.time_to_next_fire())?;
        self.fire()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCondition {
    pub max_events: usize,
    /// Stop once the desynchronization index has stayed at or below this
    /// value for N consecutive events.
    pub p_threshold: Option<f64>,
}

impl StopCondition {
    /// `200·N` events, threshold `1e-6`.
    pub fn default_for(n: usize) -> Self {
        StopCondition {
            max_events: 200 * n,
            p_threshold: Some(CONVERGENCE_THRESHOLD),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: NetworkState,
    pub events: Vec<PulseEvent>,
    /// The threshold was held for N consecutive events before the budget ran
    /// out.
    pub converged: bool,
}

pub fn run(mut state: NetworkState, stop: &StopCondition) -> RunOutput {
    let n = state.n();
    let mut order = RingOrder::from_phases(state.phases());
    let mut events = Vec::new();
    let mut held = 0usize;
    let mut converged = false;
    while events.len() < stop.max_events {
        let event = state
            .step()
            .expect("a valid state always reaches its next firing");
        if event.kind == EventKind::Collision {
            order = RingOrder::from_phases(state.phases());
        }
        events.push(event);
        if let Some(eps) = stop.p_threshold {
            let p = order.desync_index(state.phases(), state.prc());
            held = if p.value() <= eps { held + 1 } else { 0 };
            if held >= n {
                converged = true;
                break;
            }
        }
    }
    RunOutput {
        state,
        events,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{compute_deltas, compute_p};
    use core::f64::consts::PI;

    fn state(n: usize, l: f64, phases: &[f64]) -> NetworkState {
        let prc = PrcConfig::new(n, l).unwrap();
        let phases = phases.iter().map(|&x| PhaseAngle::new(x).unwrap()).collect();
        NetworkState::new(prc, TAU, phases, 7).unwrap()
    }

    #[test]
    fn time_to_next_fire_examples() {
        assert_eq!(state(2, 0.5, &[3.0 * PI / 2.0, PI]).time_to_next_fire(), 0.25);
        assert_eq!(state(2, 0.5, &[0.0, PI]).time_to_next_fire(), 0.5);
        let s = state(2, 0.5, &[TAU - 1e-12, 1.0]);
        let dt = s.time_to_next_fire();
        assert!(dt > 0.0 && (dt - 1e-12 / TAU).abs() < 1e-15);
    }

    #[test]
    fn advance_examples() {
        let mut s = state(2, 0.5, &[1.0, 2.0]);
        let before = s.clone();
        s.advance(0.0).unwrap();
        assert_eq!(s.phases(), before.phases());
        assert_eq!(s.time(), 0.0);

        s.advance(0.1).unwrap();
        assert!((s.phases()[0].value() - (1.0 + 0.2 * PI)).abs() < 1e-15);
        assert!((s.phases()[1].value() - (2.0 + 0.2 * PI)).abs() < 1e-15);
        assert_eq!(s.time(), 0.1);
        assert!((s.phases()[1] - s.phases()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn advance_rejects_overshoot() {
        let mut s = state(2, 0.5, &[3.0 * PI / 2.0, PI]);
        assert!(matches!(s.advance(0.3), Err(Error::AdvancePastFire { .. })));
        assert!(matches!(s.advance(-1.0), Err(Error::InvalidTimeStep(_))));
        assert!(matches!(s.advance(f64::NAN), Err(Error::InvalidTimeStep(_))));
    }

    #[test]
    fn fire_without_pending_is_rejected() {
        let mut s = state(2, 0.5, &[1.0, 2.0]);
        assert_eq!(s.fire(), Err(Error::NoPendingFire));
    }

    #[test]
    fn active_fire_example() {
        // N=3, l=0.85: firer at 2π, listeners at 1.0 and 3.0.
        let mut s = state(3, 0.85, &[TAU - 0.5, 1.0 - 0.5, 3.0 - 0.5]);
        s.advance(s.time_to_next_fire()).unwrap();
        assert_eq!(s.pending_firers(), [OscillatorId(0)]);
        assert_eq!(s.time_to_next_fire(), 0.0);
        let ev = s.fire().unwrap();
        assert_eq!(ev.kind, EventKind::Active);
        assert_eq!(ev.firers, [OscillatorId(0)]);
        assert_eq!(ev.resets, [Reset { id: OscillatorId(0), value: PhaseAngle::ZERO }]);
        // 0.15 * 1.0 + 0.85 * 2π/3, evaluated independently.
        assert!((s.phases()[1].value() - 1.9302358370342159).abs() < 1e-12);
        assert!((s.phases()[2].value() - 3.0).abs() < 1e-12);
        assert_eq!(ev.updates.len(), 2);
        assert!(s.time_to_next_fire() > 0.0);
    }

    #[test]
    fn silent_fire_example() {
        let mut s = state(3, 0.85, &[TAU - 0.5, 2.2 - 0.5, 4.0 - 0.5]);
        let ev = s.step().unwrap();
        assert_eq!(ev.kind, EventKind::Silent);
        for u in &ev.updates {
            assert_eq!(u.before, u.after);
        }
        assert_eq!(s.phases()[0], PhaseAngle::ZERO);
    }

    #[test]
    fn step_example() {
        let mut s = state(2, 0.5, &[3.0 * PI / 2.0, PI]);
        let ev = s.step().unwrap();
        assert_eq!(ev.time, 0.25);
        assert_eq!(ev.firers, [OscillatorId(0)]);
        assert_eq!(s.n(), 2);
        assert_eq!(s.omega(), TAU);
    }

    #[test]
    fn collision_resets_randomly_and_reproducibly() {
        let run_once = || {
            let mut s = state(2, 0.5, &[PI, PI]);
            let ev = s.step().unwrap();
            (ev, s.phases().to_vec())
        };
        let (ev, phases) = run_once();
        assert_eq!(ev.kind, EventKind::Collision);
        assert_eq!(ev.firers, [OscillatorId(0), OscillatorId(1)]);
        assert!(ev.updates.is_empty());
        assert_ne!(phases[0], phases[1]);
        assert_eq!(run_once(), (ev, phases));
    }

    #[test]
    fn collision_listeners_hear_every_pulse() {
        let mut s = state(3, 0.5, &[PI, PI, 0.0]);
        let ev = s.step().unwrap();
        assert_eq!(ev.kind, EventKind::Collision);
        let u = ev.updates[0];
        // listener was at π before the pulses (2π/3 slot): unchanged.
        assert!((u.before.value() - PI).abs() < 1e-12);
        assert_eq!(u.before, u.after);

        let prc = PrcConfig::new(3, 0.5).unwrap();
        let mut s = state(3, 0.5, &[5.0, 5.0, 0.5]);
        let ev = s.step().unwrap();
        let u = ev.updates[0];
        let twice = apply_prc(apply_prc(u.before, &prc), &prc);
        assert_eq!(u.after, twice);
    }

    // Independent event simulation (Python, double precision) of
    // N=3, l=0.5, w=2π from phases {5.0, 0.1, 0.2}.
    #[test]
    fn matches_reference_trajectory() {
        let want: [(f64, usize, [f64; 3], f64); 6] = [
            (0.2042252845405233, 0, [0.0, 1.7387902047863908, 1.7887902047863906], 4.8),
            (0.9195304812944054, 2, [4.494395102393195, 6.2331853071795855, 0.0], 4.8),
            (0.9274882284490003, 1, [4.544395102393196, 0.0, 1.072197551196598], 2.7556048976068053),
            (1.2042252845405232, 0, [0.0, 1.9165926535897928, 2.810987755982988], 2.755604897606805),
            (1.7568426882050363, 2, [3.472197551196598, 5.388790204786391, 0.0], 2.7556048976068053),
            (1.8991900898280953, 1, [4.366592653589794, 0.0, 1.4943951023931954], 1.5556048976068058),
        ];
        let mut s = state(3, 0.5, &[5.0, 0.1, 0.2]);
        let order = RingOrder::from_phases(s.phases());
        for (time, firer, phases, p) in want {
            let ev = s.step().unwrap();
            assert!((ev.time - time).abs() < 1e-12);
            assert_eq!(ev.firers, [OscillatorId(firer)]);
            for (got, want) in s.phases().iter().zip(phases) {
                assert!((got.value() - want).abs() < 1e-12, "{got} vs {want}");
            }
            let deltas = compute_deltas(&order.arrange(s.phases())).unwrap();
            let got_p = compute_p(&deltas, s.prc()).unwrap().value();
            assert!((got_p - p).abs() < 1e-12);
        }
    }

    #[test]
    fn n_steps_fire_each_oscillator_once() {
        let prc = PrcConfig::new(6, 0.3).unwrap();
        for seed in 0..50 {
            let mut s = NetworkState::from_initial(prc, TAU, &InitialPhases::UniformRandom, seed).unwrap();
            let mut seen: Vec<usize> = (0..6).map(|_| s.step().unwrap().firers[0].0).collect();
            seen.sort_unstable();
            assert_eq!(seen, [0, 1, 2, 3, 4, 5]);
        }
    }

    #[test]
    fn run_respects_budget() {
        let s = state(3, 0.5, &[5.0, 0.1, 0.2]);
        let out = run(s, &StopCondition { max_events: 1, p_threshold: Some(1e-6) });
        assert_eq!(out.events.len(), 1);
        assert!(!out.converged);

        let s = state(3, 0.5, &[5.0, 0.1, 0.2]);
        let out = run(s, &StopCondition { max_events: 0, p_threshold: None });
        assert!(out.events.is_empty());
    }

    #[test]
    fn run_converges_from_random_and_equal_phases() {
        let prc = PrcConfig::new(5, 0.85).unwrap();
        for init in [InitialPhases::UniformRandom, InitialPhases::AllEqual(PI)] {
            let s = NetworkState::from_initial(prc, TAU, &init, 42).unwrap();
            let out = run(s, &StopCondition::default_for(5));
            assert!(out.converged, "{init:?}");
            assert!(out.events.windows(2).all(|w| w[0].time < w[1].time));
        }
    }

    #[test]
    fn rejects_bad_construction() {
        let prc = PrcConfig::new(2, 0.5).unwrap();
        assert!(NetworkState::new(prc, 0.0, alloc::vec![PhaseAngle::ZERO; 2], 0).is_err());
        assert!(NetworkState::new(prc, TAU, alloc::vec![PhaseAngle::ZERO; 3], 0).is_err());
    }
}
