//! Property suite run by `desync verify`.
//!
//! Each seeded run draws distinct uniform initial phases on one cell of the
//! `(n, l)` grid (run `i` uses cell `i mod cells` and seed `i`), runs to the
//! default stop condition, and checks every event against the response,
//! engine and metric invariants. A smaller batch starts from identical
//! phases to exercise collision resets.

use std::f64::consts::{PI, TAU};

use desync_core::{
    apply_prc, classify_pulse, predict_delta_p, prc_response, run, silent_run_length, ActiveCase,
    Error, EventKind, InitialPhases, NetworkState, PhaseAngle, PrcConfig, PulseKind, RingOrder,
    StopCondition, CONVERGENCE_THRESHOLD,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::trace::TraceRecord;

pub const ORACLE_TOLERANCE: f64 = 1e-9;
pub const RING_SUM_TOLERANCE: f64 = 1e-9;
pub const MONOTONE_SLACK: f64 = 1e-12;
pub const ROTATION_TOLERANCE: f64 = 1e-12;
/// Relative to `2π/N`.
pub const CONTRACTION_TOLERANCE: f64 = 1e-12;
pub const COLLISION_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub runs: usize,
    pub n_values: Vec<usize>,
    pub l_values: Vec<f64>,
    /// Event budget per oscillator for each corpus run. Weak coupling
    /// needs more than the default stop condition allows.
    pub events_per_oscillator: usize,
    /// Negative control: run the engine with the response sign flipped.
    pub flip_prc: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            runs: 1000,
            n_values: vec![2, 3, 5, 8],
            l_values: vec![0.1, 0.5, 0.85, 0.99],
            events_per_oscillator: 1000,
            flip_prc: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub seed: u64,
    pub n: usize,
    pub l: f64,
    pub event_index: Option<usize>,
    pub detail: String,
    /// Records leading up to the failure.
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub checks: u64,
    pub failures: u64,
    pub passed: bool,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Coverage {
    pub case1: u64,
    pub case2: u64,
    pub case3: u64,
    pub silent: u64,
    pub collision: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub runs: usize,
    pub collision_runs: usize,
    pub n_values: Vec<usize>,
    pub l_values: Vec<f64>,
    pub events_per_oscillator: usize,
    pub injected_fault: bool,
    pub properties: Vec<PropertyResult>,
    pub coverage: Coverage,
    pub passed: bool,
}

impl VerifyReport {
    pub fn property(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }
}

macro_rules! properties {
    ($($id:ident => $name:literal),* $(,)?) => {
        #[derive(Clone, Copy)]
        #[allow(non_camel_case_types)]
        enum Prop { $($id),* }
        const NAMES: &[&str] = &[$($name),*];
    };
}

properties! {
    PrcAdvancesInside => "prc_advances_inside_effective_interval",
    PrcIdentityOutside => "prc_identity_outside_effective_interval",
    PrcOrderPreserving => "prc_order_preserving",
    PrcContinuous => "prc_continuous_at_slot",
    PrcContraction => "prc_geometric_contraction",
    Convergence => "convergence",
    OrderInvariance => "firing_order_invariance",
    NoOvertaking => "no_overtaking",
    NoSpuriousFire => "no_spurious_fire",
    RingSum => "ring_sum",
    Determinism => "determinism",
    DpOracle => "delta_p_oracle",
    Monotone => "monotone_index",
    ZeroIff => "index_zero_iff_even",
    NoFourthCase => "no_fourth_case",
    SilentBound => "silent_pulse_bound",
    Rotation => "index_rotation_invariance",
    Collision => "identical_phase_resolution",
    CaseCoverage => "case_coverage",
}

#[derive(Default)]
struct Entry {
    checks: u64,
    failures: u64,
    first: Option<Counterexample>,
}

struct Tally {
    entries: Vec<Entry>,
    coverage: Coverage,
}

impl Tally {
    fn new() -> Self {
        Tally {
            entries: NAMES.iter().map(|_| Entry::default()).collect(),
            coverage: Coverage::default(),
        }
    }

    fn check(&mut self, prop: Prop, ok: bool, counterexample: impl FnOnce() -> Counterexample) {
        let e = &mut self.entries[prop as usize];
        e.checks += 1;
        if !ok {
            e.failures += 1;
            if e.first.is_none() {
                e.first = Some(counterexample());
            }
        }
    }

    fn merge(&mut self, other: Tally) {
        for (mine, theirs) in self.entries.iter_mut().zip(other.entries) {
            mine.checks += theirs.checks;
            mine.failures += theirs.failures;
            if mine.first.is_none() {
                mine.first = theirs.first;
            }
        }
        let c = &mut self.coverage;
        c.case1 += other.coverage.case1;
        c.case2 += other.coverage.case2;
        c.case3 += other.coverage.case3;
        c.silent += other.coverage.silent;
        c.collision += other.coverage.collision;
    }
}

struct RunContext<'a> {
    seed: u64,
    prc: PrcConfig,
    records: &'a [TraceRecord],
}

impl RunContext<'_> {
    fn at(&self, event_index: Option<usize>, detail: String) -> Counterexample {
        let n = self.prc.n();
        let end = event_index.map_or(self.records.len(), |i| i + 1);
        let start = end.saturating_sub(2 * n);
        Counterexample {
            seed: self.seed,
            n,
            l: self.prc.l(),
            event_index,
            detail,
            trace: self.records[start..end].to_vec(),
        }
    }
}

fn phase(x: f64) -> PhaseAngle {
    PhaseAngle::new(x).expect("finite")
}

fn check_response(prc: &PrcConfig, seed: u64, t: &mut Tally) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d);
    let slot = prc.slot();
    let l = prc.l();
    let cx = |detail: String| Counterexample {
        seed,
        n: prc.n(),
        l,
        event_index: None,
        detail,
        trace: Vec::new(),
    };
    for _ in 0..8 {
        let phi = phase(rng.gen::<f64>() * slot);
        let moved = apply_prc(phi, prc);
        t.check(Prop::PrcAdvancesInside, moved > phi && moved.value() < slot, || {
            cx(format!("apply_prc({phi}) = {moved}"))
        });

        let outside = phase(slot + rng.gen::<f64>() * (TAU - slot));
        if outside.value() >= slot {
            let same = apply_prc(outside, prc);
            t.check(
                Prop::PrcIdentityOutside,
                same.value().to_bits() == outside.value().to_bits(),
                || cx(format!("apply_prc({outside}) = {same}")),
            );
        }

        let (a, b) = (rng.gen::<f64>() * slot, rng.gen::<f64>() * slot);
        let (lo, hi) = (phase(a.min(b)), phase(a.max(b)));
        if hi.value() - lo.value() > 1e-12 {
            let (flo, fhi) = (apply_prc(lo, prc), apply_prc(hi, prc));
            t.check(Prop::PrcOrderPreserving, flo < fhi, || {
                cx(format!("{lo} < {hi} but images {flo} >= {fhi}"))
            });
        }

        let k = rng.gen_range(0..=50);
        let mut x = phi;
        for _ in 0..k {
            x = apply_prc(x, prc);
        }
        let got = slot - x.value();
        let want = (1.0 - l).powi(k) * (slot - phi.value());
        t.check(
            Prop::PrcContraction,
            (got - want).abs() <= CONTRACTION_TOLERANCE * slot,
            || cx(format!("{k} applications from {phi}: offset {got}, expected {want}")),
        );
    }
    let at = prc_response(phase(slot), prc);
    let below = prc_response(PhaseAngle::new(slot.next_down()).expect("finite"), prc);
    t.check(Prop::PrcContinuous, at == 0.0 && below.abs() <= 1e-12, || {
        cx(format!("F(2π/N) = {at}, F just below = {below}"))
    });
}

fn check_run(n: usize, l: f64, seed: u64, opts: &VerifyOptions, t: &mut Tally) {
    let prc = PrcConfig::new(n, l).expect("grid values are valid");
    check_response(&prc, seed, t);

    let mut initial = NetworkState::from_initial(prc, TAU, &InitialPhases::UniformRandom, seed)
        .expect("valid scenario");
    if opts.flip_prc {
        initial.inject_flipped_prc();
    }
    let stop = StopCondition {
        max_events: opts.events_per_oscillator * n,
        p_threshold: Some(CONVERGENCE_THRESHOLD),
    };
    let out = run(initial.clone(), &stop);
    let events = &out.events;
    let slot = prc.slot();

    // Metrics, labeling and records, kept separate from the library observer.
    let mut order = RingOrder::from_phases(initial.phases());
    let mut p_before = Vec::with_capacity(events.len());
    let mut records = Vec::with_capacity(events.len());
    let mut max_dev = Vec::with_capacity(events.len());
    for (i, ev) in events.iter().enumerate() {
        let before = ev.phases_before();
        let after = ev.phases_after();
        p_before.push(order.desync_index(&before, &prc).value());
        if ev.kind == EventKind::Collision {
            order = RingOrder::from_phases(&after);
        }
        let deltas = order.deltas(&after);
        max_dev.push(deltas.as_slice().iter().map(|d| (d - slot).abs()).fold(0.0, f64::max));
        records.push(TraceRecord {
            event_index: i,
            time: ev.time,
            firers: ev.firers.iter().map(|f| f.index()).collect(),
            kind: ev.kind.into(),
            phases_after: after.iter().map(|p| p.value()).collect(),
            p_after: compute_p_of(&deltas, &prc),
            deltas_after: deltas.into_vec(),
            predicted_dp: predict_delta_p(ev, &prc).ok(),
        });
    }
    let ctx = RunContext {
        seed,
        prc,
        records: &records,
    };

    t.check(Prop::Convergence, out.converged, || {
        ctx.at(None, format!("not converged after {} events", events.len()))
    });

    let again = run(initial, &stop);
    let same = again.converged == out.converged
        && again.events.len() == events.len()
        && again.events.iter().zip(events).all(|(a, b)| a == b);
    t.check(Prop::Determinism, same, || {
        ctx.at(None, "repeated run produced a different event sequence".into())
    });

    let order_violation = events.iter().enumerate().find_map(|(i, ev)| {
        let Some(f) = ev.single_firer() else {
            return Some((i, format!("{} simultaneous firers", ev.firers.len())));
        };
        if i < n {
            let repeat = events[..i].iter().any(|e| e.firers.first() == Some(&f));
            repeat.then(|| (i, format!("oscillator {f} fired twice in the first cycle")))
        } else {
            let expected = events[i - n].firers[0];
            (f != expected).then(|| (i, format!("oscillator {f} fired where {expected} was due")))
        }
    });
    t.check(Prop::OrderInvariance, order_violation.is_none(), || {
        let (i, detail) = order_violation.clone().expect("violation");
        ctx.at(Some(i), detail)
    });

    let silent = silent_run_length(events, &prc, CONVERGENCE_THRESHOLD);
    t.check(Prop::SilentBound, silent < n, || {
        ctx.at(None, format!("{silent} consecutive silent pulses before convergence"))
    });

    for (i, ev) in events.iter().enumerate() {
        let rec = &records[i];
        let (pb, pa) = (p_before[i], rec.p_after);

        let ring = rec.deltas_after.iter().sum::<f64>();
        t.check(Prop::RingSum, (ring - TAU).abs() <= RING_SUM_TOLERANCE, || {
            ctx.at(Some(i), format!("gaps sum to {ring}"))
        });

        let dev = max_dev[i];
        let zero_iff = pa >= 0.0 && dev <= pa + MONOTONE_SLACK && pa <= n as f64 * dev + MONOTONE_SLACK;
        t.check(Prop::ZeroIff, zero_iff, || {
            ctx.at(Some(i), format!("P = {pa} with largest gap deviation {dev}"))
        });

        let bad_update = ev.updates.iter().find(|u| {
            u.after < u.before || (u.before.value() < slot && u.after.value() >= slot)
        });
        t.check(Prop::NoSpuriousFire, bad_update.is_none(), || {
            let u = bad_update.expect("bad update");
            ctx.at(Some(i), format!("listener {} moved {} -> {}", u.id, u.before, u.after))
        });

        let overtaken = ev.updates.iter().find_map(|a| {
            ev.updates
                .iter()
                .find(|b| a.before < b.before && a.after >= b.after)
                .map(|b| (a, b))
        });
        t.check(Prop::NoOvertaking, overtaken.is_none(), || {
            let (a, b) = overtaken.expect("overtaking pair");
            ctx.at(
                Some(i),
                format!(
                    "oscillator {} ({} -> {}) caught oscillator {} ({} -> {})",
                    a.id, a.before, a.after, b.id, b.before, b.after
                ),
            )
        });

        let after: Vec<PhaseAngle> = rec.phases_after.iter().map(|&x| phase(x)).collect();
        let ring_order = RingOrder::from_phases(&after);
        let p0 = ring_order.desync_index(&after, &prc).value();
        let mut rotated = NetworkState::new(prc, TAU, after, 0).expect("valid phases");
        rotated
            .advance(0.5 * rotated.time_to_next_fire())
            .expect("within the next firing");
        let p1 = ring_order.desync_index(rotated.phases(), &prc).value();
        t.check(Prop::Rotation, (p1 - p0).abs() <= ROTATION_TOLERANCE, || {
            ctx.at(Some(i), format!("P {p0} became {p1} under a common rotation"))
        });

        if ev.kind == EventKind::Collision {
            t.coverage.collision += 1;
            continue;
        }
        let class = classify_pulse(ev, &prc);
        t.check(
            Prop::NoFourthCase,
            !matches!(class, Err(Error::ForbiddenCase { .. })),
            || ctx.at(Some(i), format!("{:?}", class.clone().unwrap_err())),
        );
        let case = match class {
            Ok(c) if c.kind == PulseKind::Silent => {
                t.coverage.silent += 1;
                None
            }
            Ok(c) => c.case,
            Err(_) => None,
        };
        match case {
            Some(ActiveCase::Case1) => t.coverage.case1 += 1,
            Some(ActiveCase::Case2) => t.coverage.case2 += 1,
            Some(ActiveCase::Case3) => t.coverage.case3 += 1,
            None => {}
        }

        let predicted = rec.predicted_dp.unwrap_or(f64::NAN);
        let measured = pa - pb;
        t.check(
            Prop::DpOracle,
            (predicted - measured).abs() <= ORACLE_TOLERANCE,
            || ctx.at(Some(i), format!("predicted {predicted}, measured {measured}")),
        );

        let strict = matches!(case, Some(ActiveCase::Case1 | ActiveCase::Case2));
        let monotone = pa <= pb + MONOTONE_SLACK && (!strict || pa < pb);
        t.check(Prop::Monotone, monotone, || {
            ctx.at(Some(i), format!("P went from {pb} to {pa} ({case:?})"))
        });
    }
}

fn compute_p_of(deltas: &desync_core::DeltaVector, prc: &PrcConfig) -> f64 {
    desync_core::compute_p(deltas, prc)
        .expect("matching length")
        .value()
}

fn check_collision_run(n: usize, l: f64, seed: u64, flip: bool, t: &mut Tally) {
    let prc = PrcConfig::new(n, l).expect("grid values are valid");
    let mut state = NetworkState::from_initial(prc, TAU, &InitialPhases::AllEqual(PI), seed)
        .expect("valid scenario");
    if flip {
        state.inject_flipped_prc();
    }
    let stop = StopCondition {
        max_events: 10 * StopCondition::default_for(n).max_events,
        p_threshold: Some(COLLISION_THRESHOLD),
    };
    let out = run(state, &stop);
    t.check(Prop::Collision, out.converged, || Counterexample {
        seed,
        n,
        l,
        event_index: None,
        detail: format!("identical start not resolved after {} events", out.events.len()),
        trace: Vec::new(),
    });
}

pub fn verify(opts: &VerifyOptions) -> VerifyReport {
    let cells: Vec<(usize, f64)> = opts
        .n_values
        .iter()
        .flat_map(|&n| opts.l_values.iter().map(move |&l| (n, l)))
        .collect();
    assert!(!cells.is_empty(), "verification grid is empty");
    let collision_runs = (opts.runs / 10).max(1);

    let tallies: Vec<Tally> = (0..opts.runs)
        .into_par_iter()
        .map(|i| {
            let (n, l) = cells[i % cells.len()];
            let mut t = Tally::new();
            check_run(n, l, i as u64, opts, &mut t);
            t
        })
        .chain((0..collision_runs).into_par_iter().map(|j| {
            let (n, l) = cells[j % cells.len()];
            let mut t = Tally::new();
            check_collision_run(n, l, j as u64, opts.flip_prc, &mut t);
            t
        }))
        .collect();
    let mut total = Tally::new();
    for t in tallies {
        total.merge(t);
    }

    let c = total.coverage;
    let covered = [c.case1, c.case2, c.case3, c.silent].iter().all(|&x| x > 0);
    total.check(Prop::CaseCoverage, covered, || Counterexample {
        seed: 0,
        n: 0,
        l: 0.0,
        event_index: None,
        detail: format!(
            "case1={} case2={} case3={} silent={}",
            c.case1, c.case2, c.case3, c.silent
        ),
        trace: Vec::new(),
    });

    let properties: Vec<PropertyResult> = NAMES
        .iter()
        .zip(total.entries)
        .map(|(&name, e)| PropertyResult {
            name,
            checks: e.checks,
            failures: e.failures,
            passed: e.failures == 0 && e.checks > 0,
            counterexample: e.first,
        })
        .collect();
    let passed = properties.iter().all(|p| p.passed);
    VerifyReport {
        runs: opts.runs,
        collision_runs,
        n_values: opts.n_values.clone(),
        l_values: opts.l_values.clone(),
        events_per_oscillator: opts.events_per_oscillator,
        injected_fault: opts.flip_prc,
        properties,
        coverage: c,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(flip: bool) -> VerifyOptions {
        VerifyOptions {
            runs: 64,
            flip_prc: flip,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn small_grid_passes() {
        let report = verify(&small(false));
        for p in &report.properties {
            assert!(p.passed, "{} failed: {:?}", p.name, p.counterexample);
        }
        assert!(report.passed);
    }

    #[test]
    fn flipped_response_is_caught() {
        let report = verify(&small(true));
        assert!(!report.passed);
        let order = report.property("firing_order_invariance").unwrap();
        assert!(order.failures > 0);
        let cx = order.counterexample.as_ref().unwrap();
        assert!(cx.event_index.is_some());
        assert!(!cx.trace.is_empty());
    }
}
