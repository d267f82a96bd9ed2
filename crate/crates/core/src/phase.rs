//! Circle arithmetic on S¹ and the desynchronization phase response.
//!
//! Phases are radians in `[0, 2π)`. The response only acts on the
//! *effective interval* `[0, 2π/N)`: a listener there is pulled toward
//! `2π/N` by a fraction `l` of its distance, every other listener is left
//! alone.

use core::cmp::Ordering;
use core::f64::consts::TAU;
use core::fmt;
use core::ops::Sub;

use crate::error::{Error, Result};

/// A point on the unit circle, stored as its representative in `[0, 2π)`.
///
/// A phase of exactly `2π` is the same point as `0`. The engine tracks the
/// "reached 2π" firing condition separately.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseAngle(f64);

impl PhaseAngle {
    pub const ZERO: PhaseAngle = PhaseAngle(0.0);

    /// Same as [`canonicalize`].
    pub fn new(raw: f64) -> Result<Self> {
        canonicalize(raw)
    }

    /// Caller guarantees `0 <= value < 2π`.
    pub(crate) fn from_canonical(value: f64) -> Self {
        debug_assert!((0.0..TAU).contains(&value), "non-canonical phase {value}");
        PhaseAngle(value)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl PartialOrd for PhaseAngle {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl fmt::Display for PhaseAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Forward circular difference, see [`forward_diff`].
impl Sub for PhaseAngle {
    type Output = f64;

    fn sub(self, rhs: PhaseAngle) -> f64 {
        forward_diff(self, rhs)
    }
}

/// Maps any finite angle onto its representative in `[0, 2π)`.
pub fn canonicalize(raw: f64) -> Result<PhaseAngle> {
    if !raw.is_finite() {
        return Err(Error::NonFinitePhase(raw));
    }
    let mut r = raw % TAU;
    if r < 0.0 {
        r += TAU;
    }
    // -tiny + 2π rounds up to 2π; -0.0 becomes 0.0.
    if r >= TAU || r == 0.0 {
        r = 0.0;
    }
    Ok(PhaseAngle(r))
}

/// `(a - b) mod 2π`, in `[0, 2π)`.
pub fn forward_diff(a: PhaseAngle, b: PhaseAngle) -> f64 {
    let d = a.0 - b.0;
    if d >= 0.0 {
        d
    } else {
        // a sits just below b: nearly a full turn, never a full one.
        (d + TAU).min(TAU.next_down())
    }
}

/// Network size and coupling strength of the desynchronization response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrcConfig {
    n: usize,
    l: f64,
    slot: f64,
}

impl PrcConfig {
    /// `n >= 2` oscillators, coupling `0 < l < 1`.
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::NetworkTooSmall(n));
        }
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::CouplingOutOfRange(l));
        }
        Ok(PrcConfig {
            n,
            l,
            slot: TAU / n as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// `2π/N`, the width of the effective interval and the target spacing.
    /// Every branch decision and update uses this one value.
    pub fn slot(&self) -> f64 {
        self.slot
    }
}

/// The phase shift `F(φ)` a pulse induces in a listener at `phi`.
pub fn prc_response(phi: PhaseAngle, cfg: &PrcConfig) -> f64 {
    if phi.0 < cfg.slot {
        -cfg.l * (phi.0 - cfg.slot)
    } else {
        0.0
    }
}

/// The listener update `φ⁺ = φ + F(φ)`.
///
/// Inside the effective interval this is `(1-l)φ + l·2π/N`, which always
/// stays below `2π/N`. When `φ` is within a rounding step of `2π/N` the
/// exact result has no double-precision representation below the boundary,
/// so it is pinned to the largest double under `2π/N`.
pub fn apply_prc(phi: PhaseAngle, cfg: &PrcConfig) -> PhaseAngle {
    if phi.0 < cfg.slot {
        let moved = (1.0 - cfg.l) * phi.0 + cfg.l * cfg.slot;
        PhaseAngle(if moved < cfg.slot {
            moved
        } else {
            cfg.slot.next_down()
        })
    } else {
        phi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn p(x: f64) -> PhaseAngle {
        PhaseAngle::new(x).unwrap()
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(canonicalize(0.0).unwrap().value(), 0.0);
        assert_eq!(canonicalize(TAU).unwrap().value(), 0.0);
        assert_eq!(canonicalize(-PI / 2.0).unwrap().value(), 3.0 * PI / 2.0);
        assert_eq!(canonicalize(-0.0).unwrap().value().to_bits(), 0.0f64.to_bits());
        assert_eq!(canonicalize(-1e-300).unwrap().value(), 0.0);
        assert!((canonicalize(5.0 * TAU + 1.0).unwrap().value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonicalize_rejects_non_finite() {
        assert_eq!(canonicalize(f64::NAN).unwrap_err().to_string(), "phase value NaN is not finite");
        assert!(canonicalize(f64::INFINITY).is_err());
        assert!(canonicalize(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn forward_diff_examples() {
        assert_eq!(forward_diff(p(PI), p(PI / 2.0)), PI / 2.0);
        assert_eq!(forward_diff(p(PI / 2.0), p(3.0 * PI / 2.0)), PI);
        assert_eq!(forward_diff(p(2.5), p(2.5)), 0.0);
        assert_eq!(p(PI) - p(PI / 2.0), PI / 2.0);
    }

    #[test]
    fn forward_diff_just_below_is_less_than_full_turn() {
        let b = p(1.0);
        let a = PhaseAngle::from_canonical(1.0f64.next_down());
        let d = forward_diff(a, b);
        assert!(d < TAU && d > TAU - 1e-12);
    }

    #[test]
    fn config_validation() {
        assert_eq!(PrcConfig::new(1, 0.5), Err(Error::NetworkTooSmall(1)));
        assert_eq!(PrcConfig::new(5, 1.0), Err(Error::CouplingOutOfRange(1.0)));
        assert!(PrcConfig::new(5, 0.0).is_err());
        assert!(PrcConfig::new(5, f64::NAN).is_err());
        let cfg = PrcConfig::new(5, 0.85).unwrap();
        assert_eq!(cfg.slot(), TAU / 5.0);
    }

    #[test]
    fn prc_response_examples() {
        let cfg = PrcConfig::new(5, 0.85).unwrap();
        assert!((prc_response(p(0.0), &cfg) - 1.0681415022205296).abs() < 1e-12);
        assert_eq!(prc_response(p(cfg.slot()), &cfg), 0.0);
        assert_eq!(prc_response(p(PI), &cfg), 0.0);
    }

    #[test]
    fn apply_prc_examples() {
        let cfg = PrcConfig::new(3, 0.85).unwrap();
        // 0.15 * 0.5 + 0.85 * 2π/3, evaluated independently.
        assert!((apply_prc(p(0.5), &cfg).value() - 1.855235837034216).abs() < 1e-12);
        assert_eq!(apply_prc(p(3.0), &cfg).value(), 3.0);
        for eps in [1e-3, 1e-9, 1e-15] {
            let moved = apply_prc(p(cfg.slot() - eps), &cfg);
            assert!(moved.value() < cfg.slot());
        }
    }

    #[test]
    fn apply_prc_pins_below_boundary() {
        let cfg = PrcConfig::new(5, 0.85).unwrap();
        let phi = PhaseAngle::from_canonical(cfg.slot().next_down());
        let moved = apply_prc(phi, &cfg);
        assert!(moved.value() < cfg.slot());
        assert!(moved >= phi);
    }

    #[test]
    fn response_is_continuous_at_slot() {
        let cfg = PrcConfig::new(4, 0.6).unwrap();
        assert_eq!(prc_response(p(cfg.slot()), &cfg), 0.0);
        let below = PhaseAngle::from_canonical(cfg.slot().next_down());
        assert!(prc_response(below, &cfg) < 1e-15);
    }

    fn cfg_strategy() -> impl Strategy<Value = PrcConfig> {
        (2usize..=16, 0.001f64..0.999).prop_map(|(n, l)| PrcConfig::new(n, l).unwrap())
    }

    proptest! {
        #[test]
        fn moves_strictly_inside_effective_interval(cfg in cfg_strategy(), u in 0.0f64..1.0) {
            let phi = p(u * cfg.slot());
            prop_assume!(phi.value() < cfg.slot());
            let moved = apply_prc(phi, &cfg);
            prop_assert!(moved > phi);
            prop_assert!(moved.value() < cfg.slot());
        }

        #[test]
        fn identity_outside_effective_interval(cfg in cfg_strategy(), u in 0.0f64..1.0) {
            let phi = p(cfg.slot() + u * (TAU - cfg.slot()));
            prop_assume!(phi.value() >= cfg.slot());
            prop_assert_eq!(apply_prc(phi, &cfg).value().to_bits(), phi.value().to_bits());
        }

        // The map contracts gaps by (1 - l), so inputs a few ulps apart can
        // land on the same double; the assumption keeps pairs resolvable.
        #[test]
        fn order_preserving(cfg in cfg_strategy(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
            let (lo, hi) = (u.min(v) * cfg.slot(), u.max(v) * cfg.slot());
            prop_assume!(hi - lo > 1e-12);
            prop_assert!(apply_prc(p(lo), &cfg) < apply_prc(p(hi), &cfg));
        }

        #[test]
        fn geometric_contraction(cfg in cfg_strategy(), u in 0.0f64..1.0, k in 0usize..=50) {
            let phi = p(u * cfg.slot());
            let mut x = phi;
            for _ in 0..k {
                x = apply_prc(x, &cfg);
            }
            let got = cfg.slot() - x.value();
            let want = repeated_product(1.0 - cfg.l(), k) * (cfg.slot() - phi.value());
            prop_assert!((got - want).abs() <= 1e-12 * cfg.slot(), "got {got}, want {want}");
        }

        #[test]
        fn canonical_range(raw in -1e6f64..1e6) {
            let v = canonicalize(raw).unwrap().value();
            prop_assert!((0.0..TAU).contains(&v));
        }

        #[test]
        fn forward_diff_range(a in 0.0f64..TAU, b in 0.0f64..TAU) {
            let d = forward_diff(p(a), p(b));
            prop_assert!((0.0..TAU).contains(&d));
            let round_trip = forward_diff(p(a), p(b)) + forward_diff(p(b), p(a));
            let want = if a == b { 0.0 } else { TAU };
            prop_assert!((round_trip - want).abs() < 1e-12);
        }
    }

    fn repeated_product(base: f64, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, _| acc * base)
    }
}
