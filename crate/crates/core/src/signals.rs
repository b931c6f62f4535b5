//! Time-varying droop gains, references and angle perturbations.

use serde::{Deserialize, Serialize};

use crate::network::PowerNetwork;
use crate::{Error, Result};

/// Scalar signal of time.
///
/// Only constants and single-tone sinusoids are supported. Other shapes
/// would need a new variant plus an analytic envelope so that the
/// boundedness checks stay exact for all times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    Constant {
        value: f64,
    },
    /// `offset + amplitude * sin(angular_frequency * t + phase)`
    Sinusoid {
        offset: f64,
        amplitude: f64,
        angular_frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Default for Signal {
    fn default() -> Self {
        Signal::Constant { value: 0.0 }
    }
}

impl Signal {
    pub const fn constant(value: f64) -> Self {
        Signal::Constant { value }
    }

    pub const fn sinusoid(offset: f64, amplitude: f64, angular_frequency: f64, phase: f64) -> Self {
        Signal::Sinusoid {
            offset,
            amplitude,
            angular_frequency,
            phase,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Signal::Constant { value } => value,
            Signal::Sinusoid {
                offset,
                amplitude,
                angular_frequency,
                phase,
            } => offset + amplitude * (angular_frequency * t + phase).sin(),
        }
    }

    /// Closed interval containing every value the signal takes.
    pub fn envelope(&self) -> (f64, f64) {
        match *self {
            Signal::Constant { value } => (value, value),
            Signal::Sinusoid {
                offset, amplitude, ..
            } => (offset - amplitude.abs(), offset + amplitude.abs()),
        }
    }

    /// Largest absolute value the signal can take.
    pub fn magnitude_bound(&self) -> f64 {
        let (lo, hi) = self.envelope();
        lo.abs().max(hi.abs())
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            Signal::Constant { .. } => true,
            Signal::Sinusoid { amplitude, .. } => amplitude == 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            Signal::Constant { value } => value.is_finite(),
            Signal::Sinusoid {
                offset,
                amplitude,
                angular_frequency,
                phase,
            } => {
                offset.is_finite()
                    && amplitude.is_finite()
                    && angular_frequency.is_finite()
                    && phase.is_finite()
            }
        }
    }
}

/// All time-dependent parameters of a network held at one instant `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenScenario {
    pub sigma: f64,
    /// Nodal angles, in node order.
    pub theta: Vec<f64>,
    /// Relative angle `theta_from - theta_to` of every line (plus any
    /// per-line perturbation), in line order.
    pub edge_angles: Vec<f64>,
    pub k: Vec<f64>,
    pub v_star: Vec<f64>,
}

/// Evaluates every node and line signal of `net` at `sigma`.
///
/// Fails if a frozen droop gain is not strictly positive.
pub fn freeze(net: &PowerNetwork, sigma: f64) -> Result<FrozenScenario> {
    let frozen = net.snapshot(sigma);
    if let Some((index, &value)) = frozen.k.iter().enumerate().find(|(_, &k)| !(k > 0.0)) {
        return Err(Error::NonPositiveGain { index, value });
    }
    Ok(frozen)
}

pub fn eval_signal(spec: &Signal, t: f64) -> f64 {
    spec.eval(t)
}

/// Bounds on droop gains and drive terms over all time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Assumption1Bounds {
    /// Supremum of `k_i(t)` over nodes and time.
    pub c_k: f64,
    /// Supremum of `|k_i(t) V_i*(t)|` over nodes and time.
    pub c_r: f64,
    /// Infimum of `k_i(t)`; must be positive.
    pub k_lower: f64,
    /// Maxima observed on the sampling grid (diagnostic only).
    pub grid_c_k: f64,
    pub grid_c_r: f64,
}

impl Assumption1Bounds {
    pub fn gains_positive(&self) -> bool {
        self.k_lower > 0.0
    }

    pub fn finite(&self) -> bool {
        self.c_k.is_finite() && self.c_r.is_finite()
    }
}

/// Gain/reference bounds for a network, combining analytic envelopes with
/// samples on `t_grid`.
pub fn assumption1_bounds(net: &PowerNetwork, t_grid: &[f64]) -> Result<Assumption1Bounds> {
    let pairs: Vec<(Signal, Signal)> = net
        .nodes()
        .iter()
        .map(|n| (n.droop_gain, n.reference))
        .collect();
    signal_bounds(&pairs, t_grid)
}

/// Same as [`assumption1_bounds`] on raw `(gain, reference)` signal pairs.
pub fn signal_bounds(pairs: &[(Signal, Signal)], t_grid: &[f64]) -> Result<Assumption1Bounds> {
    if t_grid.is_empty() {
        return Err(Error::Invalid("sampling grid is empty".into()));
    }
    let mut bounds = Assumption1Bounds {
        c_k: f64::NEG_INFINITY,
        c_r: f64::NEG_INFINITY,
        k_lower: f64::INFINITY,
        grid_c_k: f64::NEG_INFINITY,
        grid_c_r: f64::NEG_INFINITY,
    };
    for (gain, reference) in pairs {
        let (k_lo, k_hi) = gain.envelope();
        bounds.c_k = bounds.c_k.max(k_hi);
        bounds.k_lower = bounds.k_lower.min(k_lo);
        // exact when either factor is constant, an upper bound otherwise
        bounds.c_r = bounds.c_r.max(gain.magnitude_bound() * reference.magnitude_bound());
        for &t in t_grid {
            let k = gain.eval(t);
            bounds.grid_c_k = bounds.grid_c_k.max(k);
            bounds.grid_c_r = bounds.grid_c_r.max((k * reference.eval(t)).abs());
        }
    }
    bounds.c_k = bounds.c_k.max(bounds.grid_c_k);
    bounds.c_r = bounds.c_r.max(bounds.grid_c_r);
    Ok(bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_ignores_time() {
        let s = Signal::constant(5.0);
        assert_eq!(s.eval(0.0), 5.0);
        assert_eq!(s.eval(-3.7), 5.0);
        assert_eq!(s.eval(1e9), 5.0);
    }

    #[test]
    fn sinusoid_reference_values() {
        let s = Signal::sinusoid(2.0, 0.2, 1.0, 0.0);
        assert_eq!(s.eval(0.0), 2.0);
        assert!((s.eval(PI / 2.0) - 2.2).abs() < 1e-15);
        let c = Signal::sinusoid(2.0, 0.2, 1.0, PI / 2.0);
        assert_eq!(c.eval(0.0), 2.2);
    }

    #[test]
    fn envelope_of_negative_amplitude() {
        let s = Signal::sinusoid(1.0, -2.0, 3.0, 0.0);
        assert_eq!(s.envelope(), (-1.0, 3.0));
        assert_eq!(s.magnitude_bound(), 3.0);
    }

    #[test]
    fn bounds_for_constants() {
        let b = signal_bounds(&[(Signal::constant(5.0), Signal::constant(2.0))], &[0.0, 1.0]).unwrap();
        assert_eq!((b.c_k, b.c_r), (5.0, 10.0));
        assert!(b.gains_positive());
    }

    #[test]
    fn bounds_for_sinusoidal_reference() {
        let grid: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let b = signal_bounds(
            &[(Signal::constant(5.0), Signal::sinusoid(2.0, 0.2, 1.0, 0.0))],
            &grid,
        )
        .unwrap();
        assert_eq!(b.c_k, 5.0);
        assert!((b.c_r - 11.0).abs() < 1e-12);
        assert!(b.grid_c_r <= b.c_r);
    }

    #[test]
    fn zero_gain_flagged() {
        let b = signal_bounds(&[(Signal::constant(0.0), Signal::constant(2.0))], &[0.0]).unwrap();
        assert!(!b.gains_positive());
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(signal_bounds(&[], &[]).is_err());
    }

    #[test]
    fn serde_forms() {
        let s: Signal = toml::from_str("form = \"sinusoid\"\noffset = 2.0\namplitude = 0.2\nangular_frequency = 1.0\n").unwrap();
        assert_eq!(s, Signal::sinusoid(2.0, 0.2, 1.0, 0.0));
        let c: Signal = toml::from_str("form = \"constant\"\nvalue = 5.0\n").unwrap();
        assert_eq!(c, Signal::constant(5.0));
        assert!(toml::from_str::<Signal>("form = \"constant\"\nvalue = 5.0\nextra = 1\n").is_err());
    }

    #[test]
    fn envelope_holds_on_a_million_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let s = Signal::sinusoid(2.0, 0.2, 120.0, 0.3);
        let (lo, hi) = s.envelope();
        for _ in 0..1_000_000 {
            let t: f64 = rng.random_range(-1e4..1e4);
            let v = s.eval(t);
            assert!(v >= lo && v <= hi, "t = {t}: {v} outside [{lo}, {hi}]");
        }
    }

    proptest! {
        #[test]
        fn positive_declared_signals_stay_positive(
            offset in 0.01f64..10.0,
            frac in 0.0f64..0.999,
            w in -200.0f64..200.0,
            phase in -PI..PI,
            t in -1e3f64..1e3,
        ) {
            let s = Signal::sinusoid(offset, frac * offset, w, phase);
            prop_assume!(s.envelope().0 > 0.0);
            prop_assert!(s.eval(t) > 0.0);
        }
    }
}
