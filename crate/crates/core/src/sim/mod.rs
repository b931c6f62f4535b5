//! Adaptive integration of the voltage dynamics.
//!
//! Steps are taken with the Dormand-Prince 5(4) pair under a proportional
//! step-size controller. Two guards keep the numerical flow in the
//! nonnegative orthant:
//!
//! * a step that would make any free component negative is rejected and
//!   retried at half the step size;
//! * components that start at exactly zero are held at exactly zero (their
//!   derivative vanishes identically).
//!
//! Steps are shortened to land on every recording stamp
//! `t0 + m * record_stride`, so runs with the same stride share a time grid.

pub mod rk;

use serde::{Deserialize, Serialize};

use crate::model::{field_into, Forcing};
use crate::network::PowerNetwork;
use crate::signals::FrozenScenario;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSettings {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub record_stride: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_min: 1e-10,
            dt_max: 1e-2,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            record_stride: 1e-2,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_min <= self.dt_init
            && self.dt_init <= self.dt_max
            && self.dt_max.is_finite()
            && self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.record_stride > 0.0
            && self.record_stride.is_finite();
        if !ok {
            return Err(Error::Invalid(format!(
                "integrator settings need 0 < dt_min <= dt_init <= dt_max and positive tolerances and stride: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_stride(mut self, stride: f64) -> Self {
        self.record_stride = stride;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub scenario: String,
    pub settings: IntegratorSettings,
    pub accepted_steps: usize,
    /// Error-control rejections.
    pub rejected_steps: usize,
    /// Rejections caused by the positivity guard.
    pub positivity_rejections: usize,
}

/// Recorded solution: `states[m]` is the voltage vector at `times[m]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    /// Builds a trajectory from samples, checking that times increase
    /// strictly and all states share one dimension.
    pub fn from_samples(times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::Dimension {
                what: "states",
                got: states.len(),
                expected: times.len(),
            });
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid(format!("times not strictly increasing at {} -> {}", w[0], w[1])));
        }
        if let Some(first) = states.first() {
            let n = first.len();
            if let Some(bad) = states.iter().find(|s| s.len() != n) {
                return Err(Error::Dimension {
                    what: "state",
                    got: bad.len(),
                    expected: n,
                });
            }
        }
        Ok(Self {
            times,
            states,
            meta: TrajectoryMeta::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    pub fn with_scenario(mut self, name: impl Into<String>) -> Self {
        self.meta.scenario = name.into();
        self
    }
}

/// Integrates the time-varying system, evaluating every signal at each stage
/// time.
pub fn integrate(
    net: &PowerNetwork,
    v0: &[f64],
    t0: f64,
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    check_state(net, v0)?;
    integrate_with(
        |t, v, dv| field_into(net, &net.snapshot(t), v, dv, Forcing::Full),
        v0,
        t0,
        t_end,
        settings,
    )
}

/// Integrates the frozen system with every signal held at `sigma`.
pub fn integrate_frozen(
    net: &PowerNetwork,
    sigma: f64,
    v0: &[f64],
    t0: f64,
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    check_state(net, v0)?;
    let frozen = crate::signals::freeze(net, sigma)?;
    integrate_frozen_with(net, &frozen, Forcing::Full, v0, t0, t_end, settings)
}

/// Integrates the drift-only frozen system `diag(tau) dV/dt = diag(V) Psi V`.
pub fn integrate_frozen_drift(
    net: &PowerNetwork,
    sigma: f64,
    v0: &[f64],
    t0: f64,
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    check_state(net, v0)?;
    let frozen = crate::signals::freeze(net, sigma)?;
    integrate_frozen_with(net, &frozen, Forcing::DriftOnly, v0, t0, t_end, settings)
}

/// Integrates with an explicit frozen parameter set.
pub fn integrate_frozen_with(
    net: &PowerNetwork,
    frozen: &FrozenScenario,
    forcing: Forcing,
    v0: &[f64],
    t0: f64,
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    check_state(net, v0)?;
    integrate_with(
        |_, v, dv| field_into(net, frozen, v, dv, forcing),
        v0,
        t0,
        t_end,
        settings,
    )
}

/// Independent runs from each initial state; runs execute on separate
/// threads and share the recording grid.
pub fn batch_integrate(
    net: &PowerNetwork,
    initial_states: &[Vec<f64>],
    t0: f64,
    t_end: f64,
    settings: &IntegratorSettings,
) -> Vec<Result<Trajectory>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = initial_states
            .iter()
            .map(|v0| scope.spawn(move || integrate(net, v0, t0, t_end, settings)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("integration thread panicked"))
            .collect()
    })
}

fn check_state(net: &PowerNetwork, v0: &[f64]) -> Result<()> {
    if v0.len() != net.len() {
        return Err(Error::Dimension {
            what: "V0",
            got: v0.len(),
            expected: net.len(),
        });
    }
    Ok(())
}

/// Positivity-guarded adaptive integration of an arbitrary field on the
/// nonnegative orthant.
pub fn integrate_with<F>(
    mut field: F,
    v0: &[f64],
    t0: f64,
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    settings.validate()?;
    if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::Invalid(format!("need t_end > t0, got [{t0}, {t_end}]")));
    }
    if let Some(i) = v0.iter().position(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Invalid(format!(
            "initial state must be finite and nonnegative; V0[{i}] = {}",
            v0[i]
        )));
    }

    let n = v0.len();
    let pinned: Vec<bool> = v0.iter().map(|&x| x == 0.0).collect();
    let span = t_end - t0;
    let stamp = |m: usize| {
        let s = t0 + m as f64 * settings.record_stride;
        if s >= t_end - 1e-12 * span {
            t_end
        } else {
            s
        }
    };

    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![v0.to_vec()],
        meta: TrajectoryMeta {
            settings: *settings,
            ..TrajectoryMeta::default()
        },
    };

    let mut ws = rk::Workspace::new(n);
    let mut y = v0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    field(t0, &y, ws.first_stage_mut());

    let mut t = t0;
    let mut h = settings.dt_init.min(settings.dt_max);
    let mut m = 1;
    let mut target = stamp(m);
    let exponent = -1.0 / rk::ORDER as f64;

    while t < t_end {
        let remaining = target - t;
        let (h_try, hits) = if h >= remaining - settings.dt_min {
            (remaining, true)
        } else {
            (h, false)
        };
        rk::step(&mut field, t, &y, h_try, &mut ws, &mut y_new, &mut err);

        if y_new.iter().chain(&err).any(|x| !x.is_finite()) {
            traj.meta.rejected_steps += 1;
            h = h_try * 0.5;
            if h < settings.dt_min {
                return Err(Error::NonFinite { t, state: y });
            }
            continue;
        }

        let err_norm = (y
            .iter()
            .zip(&y_new)
            .zip(&err)
            .zip(&pinned)
            .filter(|(_, &p)| !p)
            .map(|(((a, b), e), _)| {
                let sc = settings.abs_tol + settings.rel_tol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum::<f64>()
            / n.max(1) as f64)
            .sqrt();

        if err_norm > 1.0 {
            traj.meta.rejected_steps += 1;
            h = h_try * (0.9 * err_norm.powf(exponent)).max(0.2);
            if h < settings.dt_min {
                return Err(Error::StepUnderflow { t, dt: h, state: y });
            }
            continue;
        }

        if y_new.iter().zip(&pinned).any(|(&x, &p)| !p && x < 0.0) {
            traj.meta.positivity_rejections += 1;
            h = h_try * 0.5;
            if h < settings.dt_min {
                return Err(Error::StepUnderflow { t, dt: h, state: y });
            }
            continue;
        }

        traj.meta.accepted_steps += 1;
        t = if hits { target } else { t + h_try };
        std::mem::swap(&mut y, &mut y_new);
        for (yi, &p) in y.iter_mut().zip(&pinned) {
            if p {
                *yi = 0.0;
            }
        }
        ws.advance();

        let factor = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(exponent)).clamp(0.2, 5.0)
        };
        let proposal = h_try * factor;
        h = if hits { h.max(proposal) } else { proposal }.min(settings.dt_max);

        if hits {
            traj.times.push(t);
            traj.states.push(y.clone());
            m += 1;
            target = stamp(m);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{five_bus, NodeParams};
    use crate::signals::Signal;

    fn decoupled() -> PowerNetwork {
        five_bus(5.0, 2.0, 0.0)
    }

    #[test]
    fn decoupled_run_converges_to_reference() {
        let traj = integrate(&decoupled(), &[1.8, 1.6, 1.4, 1.2, 1.0], 0.0, 10.0, &IntegratorSettings::default()).unwrap();
        assert_eq!(traj.states[0], vec![1.8, 1.6, 1.4, 1.2, 1.0]);
        assert_eq!(*traj.times.last().unwrap(), 10.0);
        for x in traj.last_state().unwrap() {
            assert!((x - 2.0).abs() < 1e-6, "{x}");
        }
        assert_eq!(traj.len(), 1001);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let traj = integrate(&decoupled(), &[2.0; 5], 0.0, 10.0, &IntegratorSettings::default()).unwrap();
        let dev = traj
            .states
            .iter()
            .flatten()
            .map(|x| (x - 2.0).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-9, "{dev}");
    }

    #[test]
    fn zero_components_stay_exactly_zero() {
        let traj = integrate(&decoupled(), &[1.8, 1.6, 0.0, 1.2, 1.0], 0.0, 10.0, &IntegratorSettings::default()).unwrap();
        assert!(traj.states.iter().all(|s| s[2] == 0.0));
        assert!(traj.states.iter().flatten().all(|&x| x >= 0.0));
    }

    #[test]
    fn record_stamps_are_exact_multiples_of_the_stride() {
        let s = IntegratorSettings::default().with_stride(0.05);
        let traj = integrate(&decoupled(), &[1.0; 5], 0.0, 1.01, &s).unwrap();
        assert_eq!(traj.times.len(), 22);
        for (m, t) in traj.times.iter().enumerate().take(21) {
            assert_eq!(*t, m as f64 * 0.05);
        }
        assert_eq!(*traj.times.last().unwrap(), 1.01);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn frozen_and_time_varying_agree_for_constant_signals() {
        let net = decoupled();
        let s = IntegratorSettings::default();
        let v0 = [1.8, 1.6, 1.4, 1.2, 1.0];
        let a = integrate(&net, &v0, 0.0, 5.0, &s).unwrap();
        let b = integrate_frozen(&net, 123.0, &v0, 0.0, 5.0, &s).unwrap();
        assert_eq!(a.times, b.times);
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn zero_state_stays_zero_in_the_drift_system() {
        let traj = integrate_frozen_drift(&five_bus(5.0, 2.0, 0.5), 0.0, &[0.0; 5], 0.0, 10.0, &IntegratorSettings::default()).unwrap();
        assert!(traj.states.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn drift_only_sum_decreases() {
        let mut nodes: Vec<NodeParams> = five_bus(5.0, 2.0, 0.5).nodes().to_vec();
        for (node, th) in nodes.iter_mut().zip([20.0, 25.0, 30.0, 35.0, 40.0]) {
            node.theta0 = std::f64::consts::PI / th;
        }
        let net = PowerNetwork::new(nodes, five_bus(5.0, 2.0, 0.5).lines().to_vec()).unwrap();
        let traj = integrate_frozen_drift(&net, 0.0, &[1.0; 5], 0.0, 10.0, &IntegratorSettings::default()).unwrap();
        let sums: Vec<f64> = traj.states.iter().map(|s| s.iter().sum()).collect();
        assert!(sums.windows(2).all(|w| w[1] <= w[0]));
        assert!(sums.last().unwrap() < &(0.05 * sums[0]));
    }

    #[test]
    fn batch_runs_share_grids() {
        let net = decoupled();
        let s = IntegratorSettings::default();
        let runs = batch_integrate(&net, &[vec![1.0; 5], vec![3.0; 5]], 0.0, 2.0, &s);
        let runs: Vec<Trajectory> = runs.into_iter().map(|r| r.unwrap()).collect();
        assert_eq!(runs[0].times, runs[1].times);
        let single = integrate(&net, &[1.0; 5], 0.0, 2.0, &s).unwrap();
        assert_eq!(runs[0], single);
        assert!(batch_integrate(&net, &[], 0.0, 1.0, &s).is_empty());
    }

    #[test]
    fn deterministic() {
        let mut nodes = five_bus(5.0, 2.0, 0.5).nodes().to_vec();
        nodes[0].reference = Signal::sinusoid(2.0, 0.2, 1.0, 0.0);
        nodes[1].theta_perturbation = Signal::sinusoid(0.0, 0.3, 120.0, 0.0);
        let net = PowerNetwork::new(nodes, five_bus(5.0, 2.0, 0.5).lines().to_vec()).unwrap();
        let s = IntegratorSettings::default();
        let a = integrate(&net, &[1.0; 5], 0.0, 2.0, &s).unwrap();
        let b = integrate(&net, &[1.0; 5], 0.0, 2.0, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let net = decoupled();
        let s = IntegratorSettings::default();
        assert!(integrate(&net, &[1.0; 4], 0.0, 1.0, &s).is_err());
        assert!(integrate(&net, &[-1.0, 1.0, 1.0, 1.0, 1.0], 0.0, 1.0, &s).is_err());
        assert!(integrate(&net, &[1.0; 5], 1.0, 1.0, &s).is_err());
        let bad = IntegratorSettings { dt_min: 1.0, ..s };
        assert!(integrate(&net, &[1.0; 5], 0.0, 1.0, &bad).is_err());
    }

    #[test]
    fn step_underflow_is_reported() {
        // dy/dt = y^2 blows up at t = 1
        let s = IntegratorSettings {
            dt_min: 1e-6,
            ..IntegratorSettings::default()
        };
        let err = integrate_with(|_, y, dy| dy[0] = y[0] * y[0], &[1.0], 0.0, 2.0, &s).unwrap_err();
        match err {
            Error::StepUnderflow { t, .. } | Error::NonFinite { t, .. } => assert!(t < 1.0 && t > 0.99),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn positivity_guard_rejects_overshoot() {
        // dy/dt = -50 y: large steps overshoot below zero before error control
        // catches them; the guard must keep every state nonnegative.
        let s = IntegratorSettings {
            dt_init: 0.5,
            dt_max: 0.5,
            rel_tol: 1e-2,
            abs_tol: 1e-2,
            record_stride: 0.5,
            ..IntegratorSettings::default()
        };
        let traj = integrate_with(|_, y, dy| dy[0] = -50.0 * y[0], &[1.0], 0.0, 5.0, &s).unwrap();
        assert!(traj.states.iter().flatten().all(|&x| x >= 0.0));
    }
}
