//! Post-hoc property checks on trajectories and vector fields.
//!
//! Rate comparisons assume unit time constants, matching the Lyapunov
//! functions they test.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::certify::{lyapunov_entropy, lyapunov_entropy_rate, lyapunov_l1_rate};
use crate::model::drift_field;
use crate::network::PowerNetwork;
use crate::signals::{signal_bounds, Signal};
use crate::sim::Trajectory;
use crate::{Error, Result};

/// Slack for componentwise order between trajectories.
pub const MONOTONE_TOL: f64 = 1e-7;
/// Allowed increase of the entropy Lyapunov function between stamps.
pub const DESCENT_TOL: f64 = 1e-8;
/// Relative agreement between discrete and analytic Lyapunov rates.
pub const RATE_TOL: f64 = 0.05;
/// Relative error allowed in the homogeneity identity.
pub const HOMOGENEITY_TOL: f64 = 1e-10;
/// Allowed growth of the sup-norm in the final decile, relative to `R`.
pub const GROWTH_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleLocation {
    pub time: f64,
    pub node: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub holds: bool,
    /// Largest violation, in the units of `tolerance`.
    pub worst_violation: f64,
    pub tolerance: f64,
    pub location: Option<SampleLocation>,
    pub samples_checked: usize,
    pub metrics: BTreeMap<String, f64>,
    pub notes: String,
}

impl PropertyReport {
    fn new(property: &str, worst_violation: f64, tolerance: f64) -> Self {
        Self {
            property: property.to_string(),
            holds: worst_violation <= tolerance,
            worst_violation,
            tolerance,
            location: None,
            samples_checked: 0,
            metrics: BTreeMap::new(),
            notes: String::new(),
        }
    }

    fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    /// Marks the report failed with an explanation, whatever the numbers say.
    pub fn fail(mut self, why: impl Into<String>) -> Self {
        self.holds = false;
        self.notes = why.into();
        self
    }
}

fn non_empty(traj: &Trajectory) -> Result<()> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    Ok(())
}

/// Every recorded component `>= -tol`.
pub fn check_positivity(traj: &Trajectory, tol: f64) -> Result<PropertyReport> {
    non_empty(traj)?;
    let mut min = (f64::INFINITY, 0.0, None);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        for (i, &x) in s.iter().enumerate() {
            if x < min.0 {
                min = (x, *t, Some(i));
            }
        }
    }
    let mut r = PropertyReport::new("positivity", (-min.0).max(0.0), tol).metric("min_component", min.0);
    r.location = Some(SampleLocation {
        time: min.1,
        node: min.2,
    });
    r.samples_checked = traj.len();
    Ok(r)
}

/// `a(t) <= b(t) + tol` componentwise at every shared stamp.
pub fn check_monotone_order(a: &Trajectory, b: &Trajectory, tol: f64) -> Result<PropertyReport> {
    non_empty(a)?;
    non_empty(b)?;
    if a.len() != b.len() || a.dim() != b.dim() {
        return Err(Error::GridMismatch(format!(
            "{} x {} stamps/nodes vs {} x {}",
            a.len(),
            a.dim(),
            b.len(),
            b.dim()
        )));
    }
    if let Some((ta, tb)) = a.times.iter().zip(&b.times).find(|(x, y)| x != y) {
        return Err(Error::GridMismatch(format!("stamp {ta} vs {tb}")));
    }
    if let Some(index) = (0..a.dim()).find(|&i| a.states[0][i] > b.states[0][i]) {
        return Err(Error::Unordered { index });
    }
    let mut worst = (0.0f64, None);
    for (m, (sa, sb)) in a.states.iter().zip(&b.states).enumerate() {
        for (i, (x, y)) in sa.iter().zip(sb).enumerate() {
            if x - y > worst.0 {
                worst = (x - y, Some((m, i)));
            }
        }
    }
    let mut r = PropertyReport::new("monotone_order", worst.0, tol);
    r.location = worst.1.map(|(m, i)| SampleLocation {
        time: a.times[m],
        node: Some(i),
    });
    r.samples_checked = a.len();
    Ok(r)
}

/// Tolerances for [`check_lyapunov_descent_with`] and
/// [`check_l1_descent_frozen_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentTolerances {
    /// Allowed increase between consecutive stamps.
    pub increase: f64,
    /// Allowed relative mismatch between difference quotient and rate.
    pub rate_rel: f64,
    /// Intervals whose predicted rate is below this fraction of the largest
    /// predicted rate are not rate-compared (the difference quotient there is
    /// dominated by integrator and rounding error).
    pub significance: f64,
}

impl Default for DescentTolerances {
    fn default() -> Self {
        Self {
            increase: DESCENT_TOL,
            rate_rel: RATE_TOL,
            significance: 1e-6,
        }
    }
}

struct DescentStats {
    max_increase: f64,
    increase_at: Option<usize>,
    max_rate_err: f64,
    rate_err_at: Option<usize>,
    median_rate_err: f64,
    compared: usize,
}

/// Compares `values` along `traj` with `rate(midpoint state)` on each interval.
fn descent_stats<R>(traj: &Trajectory, values: &[f64], tol: &DescentTolerances, mut rate: R) -> Result<DescentStats>
where
    R: FnMut(&[f64]) -> Result<f64>,
{
    let mut stats = DescentStats {
        max_increase: 0.0,
        increase_at: None,
        max_rate_err: 0.0,
        rate_err_at: None,
        median_rate_err: 0.0,
        compared: 0,
    };
    let mut predicted = Vec::with_capacity(traj.len().saturating_sub(1));
    for m in 0..traj.len().saturating_sub(1) {
        let rise = values[m + 1] - values[m];
        if rise > stats.max_increase {
            stats.max_increase = rise;
            stats.increase_at = Some(m + 1);
        }
        let mid: Vec<f64> = traj.states[m]
            .iter()
            .zip(&traj.states[m + 1])
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        predicted.push(rate(&mid)?);
    }
    let scale = predicted.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut errors = Vec::new();
    for (m, &p) in predicted.iter().enumerate() {
        if scale == 0.0 || p.abs() < tol.significance * scale {
            continue;
        }
        let dt = traj.times[m + 1] - traj.times[m];
        let quotient = (values[m + 1] - values[m]) / dt;
        let e = (quotient - p).abs() / p.abs();
        if e > stats.max_rate_err {
            stats.max_rate_err = e;
            stats.rate_err_at = Some(m);
        }
        errors.push(e);
    }
    stats.compared = errors.len();
    if !errors.is_empty() {
        errors.sort_by(f64::total_cmp);
        stats.median_rate_err = errors[errors.len() / 2];
    }
    Ok(stats)
}

fn descent_report(name: &str, traj: &Trajectory, values: &[f64], stats: &DescentStats, tol: &DescentTolerances) -> PropertyReport {
    // both criteria normalized by their tolerance
    let inc = stats.max_increase / tol.increase;
    let rate = stats.max_rate_err / tol.rate_rel;
    let mut r = PropertyReport::new(name, inc.max(rate), 1.0)
        .metric("initial", values[0])
        .metric("final", *values.last().unwrap())
        .metric("max_increase", stats.max_increase)
        .metric("max_rate_rel_error", stats.max_rate_err)
        .metric("median_rate_rel_error", stats.median_rate_err)
        .metric("intervals_compared", stats.compared as f64);
    let at = if inc >= rate { stats.increase_at } else { stats.rate_err_at };
    r.location = at.map(|m| SampleLocation {
        time: traj.times[m],
        node: None,
    });
    r.samples_checked = traj.len();
    r.notes = "worst_violation = max(increase / increase_tol, rate error / rate_tol)".into();
    r
}

/// Entropy Lyapunov function non-increasing along `traj`, with its difference
/// quotient matching `(V - Vbar)^T Psi^l (V - Vbar)`.
pub fn check_lyapunov_descent(traj: &Trajectory, v_bar: &[f64], psi_l: &DMatrix<f64>) -> Result<PropertyReport> {
    check_lyapunov_descent_with(traj, v_bar, psi_l, &DescentTolerances::default())
}

pub fn check_lyapunov_descent_with(
    traj: &Trajectory,
    v_bar: &[f64],
    psi_l: &DMatrix<f64>,
    tol: &DescentTolerances,
) -> Result<PropertyReport> {
    non_empty(traj)?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        if let Some(index) = s.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::Boundary { t: *t, index });
        }
    }
    let values = traj
        .states
        .iter()
        .map(|s| lyapunov_entropy(s, v_bar))
        .collect::<Result<Vec<_>>>()?;
    let stats = descent_stats(traj, &values, tol, |mid| lyapunov_entropy_rate(mid, v_bar, psi_l))?;
    Ok(descent_report("lyapunov_descent", traj, &values, &stats, tol))
}

/// `sum_i V_i` non-increasing along a drift-only frozen trajectory, with its
/// difference quotient matching `V^T Psi V`.
pub fn check_l1_descent_frozen(traj: &Trajectory, psi: &DMatrix<f64>) -> Result<PropertyReport> {
    let s0: f64 = traj.states.first().map_or(0.0, |s| s.iter().sum());
    let tol = DescentTolerances {
        increase: 1e-12 * s0.max(f64::MIN_POSITIVE),
        ..DescentTolerances::default()
    };
    check_l1_descent_frozen_with(traj, psi, &tol)
}

pub fn check_l1_descent_frozen_with(traj: &Trajectory, psi: &DMatrix<f64>, tol: &DescentTolerances) -> Result<PropertyReport> {
    non_empty(traj)?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        if let Some(index) = s.iter().position(|&x| x < 0.0) {
            return Err(Error::Boundary { t: *t, index });
        }
    }
    let values: Vec<f64> = traj.states.iter().map(|s| s.iter().sum()).collect();
    let stats = descent_stats(traj, &values, tol, |mid| lyapunov_l1_rate(mid, psi))?;
    Ok(descent_report("l1_descent_frozen", traj, &values, &stats, tol))
}

/// Empirical ultimate bound `R = max ||V(t)||_inf` after the transient.
///
/// The report fails when the sup-norm over the last decile of the
/// post-transient window exceeds the sup over the rest of the window by more
/// than `GROWTH_TOL * R`, i.e. the bound is still being pushed up at the end
/// of the run.
pub fn estimate_ultimate_bound(traj: &Trajectory, transient_fraction: f64) -> Result<(f64, PropertyReport)> {
    if !(transient_fraction > 0.0 && transient_fraction < 1.0) {
        return Err(Error::Invalid(format!(
            "transient fraction {transient_fraction} must lie in (0, 1)"
        )));
    }
    non_empty(traj)?;
    let t0 = traj.times[0];
    let span = traj.times[traj.len() - 1] - t0;
    let cutoff = t0 + transient_fraction * span;
    let start = traj.times.partition_point(|&t| t < cutoff);
    let post = traj.len() - start;
    if post < 10 {
        return Err(Error::TooShort(format!(
            "{post} stamps after the transient; need at least 10"
        )));
    }
    let norms: Vec<f64> = traj.states[start..]
        .iter()
        .map(|s| s.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .collect();
    let tail = post.div_ceil(10);
    let split = post - tail;
    let sup = |xs: &[f64]| xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (head_sup, tail_sup) = (sup(&norms[..split]), sup(&norms[split..]));
    let r = head_sup.max(tail_sup);
    let growth = ((tail_sup - head_sup) / r).max(0.0);
    let argmax = norms.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
    let mut report = PropertyReport::new("ultimate_bound", growth, GROWTH_TOL)
        .metric("R", r)
        .metric("head_sup", head_sup)
        .metric("tail_sup", tail_sup)
        .metric("transient_fraction", transient_fraction);
    report.location = Some(SampleLocation {
        time: traj.times[start + argmax],
        node: None,
    });
    report.samples_checked = post;
    report.notes = "worst_violation = relative growth of the sup-norm in the last decile".into();
    if !r.is_finite() {
        report = report.fail("non-finite state after the transient");
    }
    Ok((r, report))
}

/// Checks `f_H(sV) = s^2 f_H(V)` for the drift-only field on random samples.
/// The first three samples use `s = 0, 1, 2`.
pub fn check_homogeneity(net: &PowerNetwork, theta: &[f64], k: &[f64], samples: usize, seed: u64) -> Result<PropertyReport> {
    if samples == 0 {
        return Err(Error::Invalid("need at least one sample".into()));
    }
    let n = net.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0f64, 0.0f64);
    for idx in 0..samples {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0)).collect();
        let s = match idx {
            0 => 0.0,
            1 => 1.0,
            2 => 2.0,
            _ => 10.0 - rng.random_range(0.0..10.0),
        };
        let f = drift_field(net, &v, theta, k)?;
        let sv: Vec<f64> = v.iter().map(|x| s * x).collect();
        let fs = drift_field(net, &sv, theta, k)?;
        let scale = s * s * f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let diff = fs.iter().zip(&f).fold(0.0f64, |m, (a, b)| m.max((a - s * s * b).abs()));
        let rel = if diff == 0.0 { 0.0 } else { diff / scale.max(f64::MIN_POSITIVE) };
        if rel > worst.0 {
            worst = (rel, s);
        }
    }
    let mut r = PropertyReport::new("homogeneity", worst.0, HOMOGENEITY_TOL).metric("order", 2.0).metric("worst_scale", worst.1);
    r.samples_checked = samples;
    r.notes = "drift-only field is homogeneous of degree 2 under uniform dilation".into();
    Ok(r)
}

/// Finite gain and drive bounds with strictly positive gains for all time.
pub fn check_assumption1(net: &PowerNetwork) -> Result<PropertyReport> {
    let pairs: Vec<(Signal, Signal)> = net.nodes().iter().map(|n| (n.droop_gain, n.reference)).collect();
    check_assumption1_signals(&pairs)
}

pub fn check_assumption1_signals(pairs: &[(Signal, Signal)]) -> Result<PropertyReport> {
    let grid: Vec<f64> = (0..2000).map(|i| i as f64 * 0.01).collect();
    let b = signal_bounds(pairs, &grid)?;
    let violation = if b.finite() { (-b.k_lower).max(0.0) } else { f64::INFINITY };
    let mut r = PropertyReport::new("assumption1", violation, 0.0)
        .metric("c_k", b.c_k)
        .metric("c_r", b.c_r)
        .metric("k_lower", b.k_lower);
    if !b.gains_positive() {
        r = r.fail(format!("gain lower envelope {} is not positive", b.k_lower));
    }
    r.samples_checked = grid.len() * pairs.len();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{interaction_matrix_coupled, interaction_matrix_decoupled};
    use crate::network::{five_bus, NodeParams};
    use crate::sim::{integrate, integrate_frozen_drift, IntegratorSettings};
    use std::f64::consts::PI;

    fn samples(times: &[f64], states: &[&[f64]]) -> Trajectory {
        Trajectory::from_samples(times.to_vec(), states.iter().map(|s| s.to_vec()).collect()).unwrap()
    }

    #[test]
    fn positivity_examples() {
        let t = samples(&[0.0, 1.0], &[&[1.0, 0.5], &[0.3, -0.01]]);
        let r = check_positivity(&t, 0.0).unwrap();
        assert!(!r.holds);
        assert!((r.worst_violation - 0.01).abs() < 1e-15);
        assert_eq!(r.location, Some(SampleLocation { time: 1.0, node: Some(1) }));

        let z = samples(&[0.0, 1.0], &[&[0.0, 0.0], &[0.0, 0.0]]);
        let r = check_positivity(&z, 0.0).unwrap();
        assert!(r.holds);
        assert_eq!(r.get("min_component"), Some(0.0));
        assert!(matches!(check_positivity(&Trajectory::default(), 0.0), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn monotone_examples() {
        let a = samples(&[0.0, 1.0], &[&[1.0, 1.0], &[1.5, 1.2]]);
        let b = samples(&[0.0, 1.0], &[&[2.0, 1.0], &[1.6, 1.3]]);
        assert!(check_monotone_order(&a, &b, MONOTONE_TOL).unwrap().holds);
        let same = check_monotone_order(&a, &a, MONOTONE_TOL).unwrap();
        assert!(same.holds && same.worst_violation == 0.0);

        let crossed = samples(&[0.0, 1.0], &[&[2.0, 1.0], &[1.4, 1.3]]);
        let r = check_monotone_order(&a, &crossed, MONOTONE_TOL).unwrap();
        assert!(!r.holds);
        assert!((r.worst_violation - 0.1).abs() < 1e-12);

        assert!(matches!(check_monotone_order(&b, &a, MONOTONE_TOL), Err(Error::Unordered { index: 0 })));
        let other = samples(&[0.0, 2.0], &[&[2.0, 1.0], &[1.6, 1.3]]);
        assert!(matches!(check_monotone_order(&a, &other, MONOTONE_TOL), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn lyapunov_descent_on_decoupled_run() {
        let net = five_bus(5.0, 2.0, 0.0);
        let traj = integrate(&net, &[1.8, 1.6, 1.4, 1.2, 1.0], 0.0, 10.0, &IntegratorSettings::default()).unwrap();
        let psi = interaction_matrix_decoupled(&net, &[5.0; 5]).unwrap().entries;
        let r = check_lyapunov_descent(&traj, &[2.0; 5], &psi).unwrap();
        assert!(r.holds, "{r:?}");
        // sum (V - 2) - 2 ln(V / 2) at V0
        assert!((r.get("initial").unwrap() - 0.778_303_630_473_408_9).abs() < 1e-12);
        assert!(r.get("final").unwrap() < 1e-12);

        let reversed = Trajectory::from_samples(traj.times.clone(), traj.states.iter().rev().cloned().collect()).unwrap();
        assert!(!check_lyapunov_descent(&reversed, &[2.0; 5], &psi).unwrap().holds);

        let flat = samples(&[0.0, 1.0, 2.0], &[&[2.0; 5], &[2.0; 5], &[2.0; 5]]);
        let r = check_lyapunov_descent(&flat, &[2.0; 5], &psi).unwrap();
        assert!(r.holds && r.get("initial") == Some(0.0));

        let touching = samples(&[0.0, 1.0], &[&[2.0; 5], &[0.0, 2.0, 2.0, 2.0, 2.0]]);
        assert!(matches!(check_lyapunov_descent(&touching, &[2.0; 5], &psi), Err(Error::Boundary { .. })));
    }

    #[test]
    fn discrete_entropy_rate_tracks_the_quadratic_form() {
        let net = five_bus(5.0, 2.0, 0.0);
        let s = IntegratorSettings::default().with_tolerances(1e-11, 1e-13).with_stride(1e-3);
        let traj = integrate(&net, &[1.8, 1.6, 1.4, 1.2, 1.0], 0.0, 2.0, &s).unwrap();
        let psi = interaction_matrix_decoupled(&net, &[5.0; 5]).unwrap().entries;
        let r = check_lyapunov_descent(&traj, &[2.0; 5], &psi).unwrap();
        assert!(r.get("median_rate_rel_error").unwrap() < 0.01, "{r:?}");
    }

    #[test]
    fn single_node_drift_matches_closed_form() {
        // dV/dt = -(|B| + k) V^2, V(0) = c  =>  V(t) = c / (1 + (|B| + k) c t)
        let mut node = NodeParams::constant(1, 3.0, 1.0);
        node.shunt_susceptance = 0.5;
        let net = PowerNetwork::new(vec![node], vec![]).unwrap();
        let c = 2.0;
        let traj = integrate_frozen_drift(&net, 0.0, &[c], 0.0, 10.0, &IntegratorSettings::default()).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let exact = c / (1.0 + 3.5 * c * t);
            assert!((s[0] - exact).abs() < 1e-6, "t = {t}: {} vs {exact}", s[0]);
        }
        let psi = interaction_matrix_coupled(&net, &[0.0], &[3.0]).unwrap().entries;
        assert!(check_l1_descent_frozen(&traj, &psi).unwrap().holds);
    }

    #[test]
    fn l1_descent_on_frozen_five_bus() {
        let net = five_bus(5.0, 2.0, 0.5);
        let theta = [PI / 20.0, PI / 25.0, PI / 30.0, PI / 35.0, PI / 40.0];
        let mut nodes = net.nodes().to_vec();
        for (n, th) in nodes.iter_mut().zip(theta) {
            n.theta0 = th;
        }
        let net = PowerNetwork::new(nodes, net.lines().to_vec()).unwrap();
        let traj = integrate_frozen_drift(&net, 0.0, &[1.0; 5], 0.0, 10.0, &IntegratorSettings::default()).unwrap();
        let psi = interaction_matrix_coupled(&net, &theta, &[5.0; 5]).unwrap().entries;
        assert!(check_l1_descent_frozen(&traj, &psi).unwrap().holds);

        let zero = integrate_frozen_drift(&net, 0.0, &[0.0; 5], 0.0, 1.0, &IntegratorSettings::default()).unwrap();
        assert!(check_l1_descent_frozen(&zero, &psi).unwrap().holds);

        let rising = samples(&[0.0, 1.0], &[&[1.0; 5], &[1.1; 5]]);
        assert!(!check_l1_descent_frozen(&rising, &psi).unwrap().holds);
    }

    #[test]
    fn ultimate_bound_examples() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let flat = Trajectory::from_samples(times.clone(), vec![vec![2.0; 3]; 101]).unwrap();
        let (r, rep) = estimate_ultimate_bound(&flat, 0.5).unwrap();
        assert_eq!(r, 2.0);
        assert!(rep.holds);

        let growing = Trajectory::from_samples(times.clone(), times.iter().map(|t| vec![1.0 + t]).collect()).unwrap();
        let (_, rep) = estimate_ultimate_bound(&growing, 0.5).unwrap();
        assert!(!rep.holds);

        let short = Trajectory::from_samples(times[..12].to_vec(), vec![vec![1.0]; 12]).unwrap();
        assert!(matches!(estimate_ultimate_bound(&short, 0.5), Err(Error::TooShort(_))));
        assert!(estimate_ultimate_bound(&flat, 1.0).is_err());
    }

    #[test]
    fn ultimate_bound_approaches_the_reference() {
        let net = five_bus(5.0, 2.0, 0.0);
        let traj = integrate(&net, &[2.8, 2.6, 2.4, 2.2, 2.0], 0.0, 10.0, &IntegratorSettings::default()).unwrap();
        let (r, rep) = estimate_ultimate_bound(&traj, 0.9).unwrap();
        assert!(rep.holds);
        assert!((r - 2.0).abs() < 1e-6);
        let (r_early, _) = estimate_ultimate_bound(&traj, 0.01).unwrap();
        assert!(r_early > r);
    }

    #[test]
    fn homogeneity_holds_and_counts_samples() {
        let net = five_bus(5.0, 2.0, 0.5);
        let r = check_homogeneity(&net, &[0.1, 0.2, 0.3, 0.4, 0.5], &[5.0; 5], 200, 1).unwrap();
        assert!(r.holds, "{r:?}");
        assert_eq!(r.samples_checked, 200);
        assert!(check_homogeneity(&net, &[0.0; 5], &[5.0; 5], 0, 1).is_err());
    }

    #[test]
    fn assumption1_examples() {
        let r = check_assumption1(&five_bus(5.0, 2.0, 0.5)).unwrap();
        assert!(r.holds);
        assert_eq!((r.get("c_k"), r.get("c_r")), (Some(5.0), Some(10.0)));

        let r = check_assumption1_signals(&[(Signal::sinusoid(1.0, 2.0, 1.0, 0.0), Signal::constant(2.0))]).unwrap();
        assert!(!r.holds);
        assert_eq!(r.get("k_lower"), Some(-1.0));
    }

    #[test]
    fn checkers_accept_and_reject_synthetic_data() {
        // exact decoupled scalar solution: dV/dt = V(-k V + k V*) is logistic
        let (k, vs, c) = (2.0f64, 3.0f64, 0.5f64);
        let logistic = |t: f64| vs / (1.0 + (vs / c - 1.0) * (-k * vs * t).exp());
        let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.01).collect();
        let good = Trajectory::from_samples(times.clone(), times.iter().map(|&t| vec![logistic(t)]).collect()).unwrap();
        let psi = DMatrix::from_element(1, 1, -k);
        assert!(check_positivity(&good, 0.0).unwrap().holds);
        assert!(check_lyapunov_descent(&good, &[vs], &psi).unwrap().holds);
        let above = Trajectory::from_samples(times.clone(), times.iter().map(|&t| vec![logistic(t) + 0.1 * (-t).exp()]).collect()).unwrap();
        assert!(check_monotone_order(&good, &above, MONOTONE_TOL).unwrap().holds);

        let bad = Trajectory::from_samples(times.clone(), times.iter().map(|&t| vec![logistic(t) + 0.3 * (5.0 * t).sin()]).collect()).unwrap();
        assert!(!check_lyapunov_descent(&bad, &[vs], &psi).unwrap().holds);
        let below = Trajectory::from_samples(times.clone(), times.iter().map(|&t| vec![logistic(t) + 0.5 * (2.0 * t).sin()]).collect()).unwrap();
        assert!(!check_monotone_order(&below, &good, MONOTONE_TOL).unwrap().holds);
    }
}
