//! Desynchronization measurement.
//!
//! The gaps `Δ_k` are taken around a fixed ring labeling: oscillators sorted
//! by descending phase at the start of a run (ties by ascending id). The
//! response never lets one phase overtake another, so the labeling stays
//! valid until a collision reset reshuffles phases, at which point it is
//! rebuilt. The index `P = Σ |Δ_k - 2π/N|` is zero exactly when every gap
//! equals `2π/N`.
//!
//! Each single-firer pulse can also be predicted in closed form. Let `M` be
//! the number of listeners in the effective interval, `lead` the largest of
//! them and `bound` the smallest phase outside it (`2π` when `M = N-1`).
//! The trailing gap `bound - lead` decides the change in `P`:
//!
//! | case | gap before | gap after | `P⁺ - P`                 |
//! |------|------------|-----------|--------------------------|
//! | 1    | `> 2π/N`   | `≥ 2π/N`  | `2l(lead - 2π/N)`        |
//! | 2    | `> 2π/N`   | `< 2π/N`  | `2(lead - bound + 2π/N)` |
//! | 3    | `≤ 2π/N`   | `< 2π/N`  | `0`                      |
//!
//! A gap at or below `2π/N` can never grow past it, so there is no fourth
//! case. Silent pulses leave `P` unchanged.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::engine::{NetworkState, OscillatorId, PulseEvent};
use crate::error::{Error, Result};
use crate::phase::{forward_diff, PhaseAngle, PrcConfig};

/// `P` at or below this counts as desynchronized.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-6;

/// Ring labeling: descending phase, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingOrder(Vec<OscillatorId>);

impl RingOrder {
    pub fn from_phases(phases: &[PhaseAngle]) -> Self {
        let mut ids: Vec<OscillatorId> = (0..phases.len()).map(OscillatorId).collect();
        ids.sort_by(|a, b| {
            phases[b.0]
                .value()
                .total_cmp(&phases[a.0].value())
                .then(a.cmp(b))
        });
        RingOrder(ids)
    }

    pub fn ids(&self) -> &[OscillatorId] {
        &self.0
    }

    /// `phases` (indexed by id) rearranged into ring order.
    pub fn arrange(&self, phases: &[PhaseAngle]) -> Vec<PhaseAngle> {
        self.0.iter().map(|id| phases[id.0]).collect()
    }

    pub fn deltas(&self, phases: &[PhaseAngle]) -> DeltaVector {
        compute_deltas(&self.arrange(phases)).expect("ring order covers a non-empty network")
    }

    pub fn desync_index(&self, phases: &[PhaseAngle], cfg: &PrcConfig) -> DesyncIndex {
        compute_p(&self.deltas(phases), cfg).expect("ring order matches the network size")
    }
}

/// Gaps between ring neighbours, `deltas[k] = (φ_k - φ_{k+1}) mod 2π` with
/// the last entry closing the ring.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaVector(Vec<f64>);

impl DeltaVector {
    /// Each entry must lie in `[0, 2π]`. A full turn is only produced when
    /// every oscillator sits on the same point.
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = deltas.iter().find(|d| !(0.0..=TAU).contains(*d)) {
            return Err(Error::DeltaOutOfRange(bad));
        }
        Ok(DeltaVector(deltas))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Gaps of `ordered`, which must already be in ring order.
pub fn compute_deltas(ordered: &[PhaseAngle]) -> Result<DeltaVector> {
    let n = ordered.len();
    if n == 0 {
        return Err(Error::EmptyPhases);
    }
    let mut deltas: Vec<f64> = (0..n)
        .map(|k| forward_diff(ordered[k], ordered[(k + 1) % n]))
        .collect();
    if deltas.iter().all(|&d| d == 0.0) {
        // Everyone on one point: the closing gap is the whole circle.
        deltas[n - 1] = TAU;
    }
    Ok(DeltaVector(deltas))
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DesyncIndex(f64);

impl DesyncIndex {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_converged(self, eps: f64) -> bool {
        self.0 <= eps
    }
}

/// `P = Σ |Δ_k - 2π/N|`.
pub fn compute_p(deltas: &DeltaVector, cfg: &PrcConfig) -> Result<DesyncIndex> {
    if deltas.len() != cfg.n() {
        return Err(Error::LengthMismatch {
            expected: cfg.n(),
            got: deltas.len(),
        });
    }
    let slot = cfg.slot();
    Ok(DesyncIndex(deltas.0.iter().map(|d| (d - slot).abs()).sum()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseKind {
    Active,
    Silent,
}

/// How an active pulse moves the trailing gap (see the module docs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActiveCase {
    /// Wide gap stays at or above `2π/N`: `P` drops by `2l(2π/N - lead)`.
    Case1,
    /// Wide gap shrinks below `2π/N`: `P` drops by `2(gap - 2π/N)`.
    Case2,
    /// Gap already at or below `2π/N`: `P` unchanged.
    Case3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseClassification {
    pub kind: PulseKind,
    /// Listeners inside the effective interval when the pulse fired.
    pub m: usize,
    pub case: Option<ActiveCase>,
}

struct Trailing {
    m: usize,
    lead_before: f64,
    lead_after: f64,
    bound: f64,
}

fn trailing(event: &PulseEvent, cfg: &PrcConfig) -> Result<Option<Trailing>> {
    if event.firers.len() != 1 {
        return Err(Error::CollisionEvent(event.firers.len()));
    }
    let slot = cfg.slot();
    let mut m = 0;
    let mut lead: Option<(f64, f64)> = None;
    let mut bound = TAU;
    for u in &event.updates {
        let before = u.before.value();
        if before < slot {
            m += 1;
            if lead.is_none_or(|(b, _)| before > b) {
                lead = Some((before, u.after.value()));
            }
        } else {
            bound = bound.min(before);
        }
    }
    Ok(lead.map(|(lead_before, lead_after)| Trailing {
        m,
        lead_before,
        lead_after,
        bound,
    }))
}

fn case_of(gap_before: f64, gap_after: f64, slot: f64) -> Result<ActiveCase> {
    if gap_before > slot {
        Ok(if gap_after >= slot {
            ActiveCase::Case1
        } else {
            ActiveCase::Case2
        })
    } else if gap_after >= slot {
        Err(Error::ForbiddenCase {
            before: gap_before,
            after: gap_after,
            slot,
        })
    } else {
        Ok(ActiveCase::Case3)
    }
}

/// Classifies a single-firer pulse from the phases the engine recorded.
///
/// Fails on collision events, and on the impossible transition where a gap
/// at or below `2π/N` ends up at or above it.
pub fn classify_pulse(event: &PulseEvent, cfg: &PrcConfig) -> Result<PulseClassification> {
    let Some(t) = trailing(event, cfg)? else {
        return Ok(PulseClassification {
            kind: PulseKind::Silent,
            m: 0,
            case: None,
        });
    };
    let case = case_of(t.bound - t.lead_before, t.bound - t.lead_after, cfg.slot())?;
    Ok(PulseClassification {
        kind: PulseKind::Active,
        m: t.m,
        case: Some(case),
    })
}

/// Closed-form `P⁺ - P` for a single-firer pulse.
///
/// Only the before-phases in `event` are read; the after-gap comes from the
/// update formula, not from what the engine produced.
pub fn predict_delta_p(event: &PulseEvent, cfg: &PrcConfig) -> Result<f64> {
    let Some(t) = trailing(event, cfg)? else {
        return Ok(0.0);
    };
    let (l, slot) = (cfg.l(), cfg.slot());
    let gap_before = t.bound - t.lead_before;
    let gap_after = t.bound - (1.0 - l) * t.lead_before - l * slot;
    Ok(match case_of(gap_before, gap_after, slot) {
        Ok(ActiveCase::Case1) => 2.0 * l * (t.lead_before - slot),
        Ok(ActiveCase::Case2) => 2.0 * (t.lead_before - t.bound + slot),
        Ok(ActiveCase::Case3) | Err(_) => 0.0,
    })
}

/// Longest streak of silent pulses fired while `P > eps`.
///
/// `P` is measured at each firing instant, before listeners update. Any
/// other event, or a silent pulse at `P <= eps`, ends a streak.
pub fn silent_run_length(events: &[PulseEvent], cfg: &PrcConfig, eps: f64) -> usize {
    let mut longest = 0;
    let mut current = 0;
    for event in events {
        let before = event.phases_before();
        let p = RingOrder::from_phases(&before).desync_index(&before, cfg);
        if event.kind == crate::engine::EventKind::Silent && p.value() > eps {
            current += 1;
            longest = longest.max(current);
        } else {
            current = 0;
        }
    }
    longest
}

/// Metrics for one event.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub deltas_before: DeltaVector,
    pub p_before: DesyncIndex,
    pub deltas_after: DeltaVector,
    pub p_after: DesyncIndex,
    /// `None` for collisions.
    pub classification: Option<PulseClassification>,
    /// `None` for collisions.
    pub predicted_dp: Option<f64>,
}

impl Observation {
    pub fn measured_dp(&self) -> f64 {
        self.p_after.value() - self.p_before.value()
    }
}

/// Follows a run event by event, keeping the ring labeling current.
#[derive(Debug, Clone)]
pub struct DesyncObserver {
    prc: PrcConfig,
    order: RingOrder,
}

impl DesyncObserver {
    pub fn new(state: &NetworkState) -> Self {
        Self::from_phases(*state.prc(), state.phases())
    }

    pub fn from_phases(prc: PrcConfig, phases: &[PhaseAngle]) -> Self {
        DesyncObserver {
            prc,
            order: RingOrder::from_phases(phases),
        }
    }

    pub fn order(&self) -> &RingOrder {
        &self.order
    }

    pub fn observe(&mut self, event: &PulseEvent) -> Result<Observation> {
        let before = event.phases_before();
        let after = event.phases_after();
        let deltas_before = self.order.deltas(&before);
        let p_before = compute_p(&deltas_before, &self.prc)?;
        let single = event.single_firer().is_some();
        if !single {
            self.order = RingOrder::from_phases(&after);
        }
        let deltas_after = self.order.deltas(&after);
        let p_after = compute_p(&deltas_after, &self.prc)?;
        let (classification, predicted_dp) = if single {
            (
                Some(classify_pulse(event, &self.prc)?),
                Some(predict_delta_p(event, &self.prc)?),
            )
        } else {
            (None, None)
        };
        Ok(Observation {
            deltas_before,
            p_before,
            deltas_after,
            p_after,
            classification,
            predicted_dp,
        })
    }
}
