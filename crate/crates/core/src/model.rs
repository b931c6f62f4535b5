//! Reactive power, interaction matrices and the Lotka-Volterra vector field.

use nalgebra::{DMatrix, DVector};

use crate::network::PowerNetwork;
use crate::signals::FrozenScenario;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// `Psi(theta)`
    Coupled,
    /// Symmetric part `Psi^c`: diagonal and `|B_ij| cos theta_ij` terms.
    SymmetricPart,
    /// Skew part `Psi^s`: the `G_ij sin theta_ij` terms.
    SkewPart,
    /// `Psi^l`, the zero-angle specialization.
    Decoupled,
}

impl MatrixKind {
    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::Coupled => "coupled",
            MatrixKind::SymmetricPart => "symmetric-part",
            MatrixKind::SkewPart => "skew-part",
            MatrixKind::Decoupled => "decoupled",
        }
    }
}

/// Dense interaction matrix with the data it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    pub entries: DMatrix<f64>,
    pub kind: MatrixKind,
    /// Relative line angles, for coupled matrices and their parts.
    pub theta_used: Option<Vec<f64>>,
    pub k_used: Vec<f64>,
    parts: Option<Box<(DMatrix<f64>, DMatrix<f64>)>>,
}

impl InteractionMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

pub(crate) fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Dimension {
            what,
            got,
            expected,
        });
    }
    Ok(())
}

fn check_gains(k: &[f64]) -> Result<()> {
    match k.iter().position(|&x| !(x > 0.0)) {
        Some(index) => Err(Error::NonPositiveGain {
            index,
            value: k[index],
        }),
        None => Ok(()),
    }
}

/// Nodal reactive power injections under the AC power flow model.
pub fn reactive_power(net: &PowerNetwork, v: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    let n = net.len();
    check_len("V", v.len(), n)?;
    check_len("theta", theta.len(), n)?;
    let mut q = vec![0.0; n];
    for (i, qi) in q.iter_mut().enumerate() {
        // B_i = B_i^sh + sum_j B_ij
        let b_i = net.nodes()[i].shunt_susceptance
            - net.neighbors(i).iter().map(|&(_, l)| net.edges()[l].b_abs).sum::<f64>();
        let mut acc = -b_i * v[i] * v[i];
        for &(j, l) in net.neighbors(i) {
            let e = &net.edges()[l];
            let (b_ij, g_ij) = (-e.b_abs, e.g);
            let th = theta[i] - theta[j];
            acc += b_ij * v[i] * v[j] * th.cos() - g_ij * v[i] * v[j] * th.sin();
        }
        *qi = acc;
    }
    Ok(q)
}

/// `Psi(theta)` from nodal angles.
pub fn interaction_matrix_coupled(
    net: &PowerNetwork,
    theta: &[f64],
    k: &[f64],
) -> Result<InteractionMatrix> {
    check_len("theta", theta.len(), net.len())?;
    interaction_matrix_from_edge_angles(net, &net.edge_angles_from_nodal(theta), k)
}

/// `Psi(theta)` from relative line angles `theta_from - theta_to`, in line
/// order.
pub fn interaction_matrix_from_edge_angles(
    net: &PowerNetwork,
    edge_angles: &[f64],
    k: &[f64],
) -> Result<InteractionMatrix> {
    let n = net.len();
    check_len("edge angles", edge_angles.len(), net.edges().len())?;
    check_len("k", k.len(), n)?;
    check_gains(k)?;
    let mut sym = DMatrix::zeros(n, n);
    let mut skew = DMatrix::zeros(n, n);
    for i in 0..n {
        sym[(i, i)] = -(net.b_abs()[i] + k[i]);
    }
    for (e, &th) in net.edges().iter().zip(edge_angles) {
        let (s, c) = th.sin_cos();
        let cos_term = e.b_abs * c;
        let sin_term = e.g * s;
        sym[(e.from, e.to)] = cos_term;
        sym[(e.to, e.from)] = cos_term;
        // sin(theta_ji) = -sin(theta_ij)
        skew[(e.from, e.to)] = sin_term;
        skew[(e.to, e.from)] = -sin_term;
    }
    let entries = &skew + &sym;
    Ok(InteractionMatrix {
        entries,
        kind: MatrixKind::Coupled,
        theta_used: Some(edge_angles.to_vec()),
        k_used: k.to_vec(),
        parts: Some(Box::new((sym, skew))),
    })
}

/// `Psi(theta(sigma))` of a frozen scenario.
pub fn interaction_matrix_frozen(net: &PowerNetwork, frozen: &FrozenScenario) -> Result<InteractionMatrix> {
    interaction_matrix_from_edge_angles(net, &frozen.edge_angles, &frozen.k)
}

/// Splits a coupled matrix into `(Psi^c, Psi^s)`. The pieces add back to the
/// coupled entries exactly.
pub fn split_parts(m: &InteractionMatrix) -> Result<(InteractionMatrix, InteractionMatrix)> {
    let parts = match (&m.kind, &m.parts) {
        (MatrixKind::Coupled, Some(parts)) => parts,
        _ => {
            return Err(Error::WrongKind {
                expected: MatrixKind::Coupled.name(),
                got: m.kind.name(),
            })
        }
    };
    let piece = |entries: &DMatrix<f64>, kind| InteractionMatrix {
        entries: entries.clone(),
        kind,
        theta_used: m.theta_used.clone(),
        k_used: m.k_used.clone(),
        parts: None,
    };
    Ok((
        piece(&parts.0, MatrixKind::SymmetricPart),
        piece(&parts.1, MatrixKind::SkewPart),
    ))
}

/// `Psi^l`: diagonal `-(|B_i| + k_i)`, off-diagonal `|B_ij|`.
pub fn interaction_matrix_decoupled(net: &PowerNetwork, k: &[f64]) -> Result<InteractionMatrix> {
    let n = net.len();
    check_len("k", k.len(), n)?;
    check_gains(k)?;
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        entries[(i, i)] = -(net.b_abs()[i] + k[i]);
    }
    for e in net.edges() {
        entries[(e.from, e.to)] = e.b_abs;
        entries[(e.to, e.from)] = e.b_abs;
    }
    Ok(InteractionMatrix {
        entries,
        kind: MatrixKind::Decoupled,
        theta_used: None,
        k_used: k.to_vec(),
        parts: None,
    })
}

/// `b_i = k_i V_i*`
pub fn drive_vector(k: &[f64], v_star: &[f64]) -> Result<Vec<f64>> {
    check_len("V*", v_star.len(), k.len())?;
    Ok(k.iter().zip(v_star).map(|(k, v)| k * v).collect())
}

/// Whether the constant drive `b` enters the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Forcing {
    Full,
    /// Drift only: `diag(tau)^-1 diag(V) Psi V`.
    DriftOnly,
}

/// `dV/dt = diag(tau)^-1 diag(V) (Psi(theta) V + b)` with nodal angles.
pub fn vector_field(
    net: &PowerNetwork,
    v: &[f64],
    theta: &[f64],
    k: &[f64],
    v_star: &[f64],
) -> Result<Vec<f64>> {
    let n = net.len();
    check_len("V", v.len(), n)?;
    check_len("theta", theta.len(), n)?;
    check_len("k", k.len(), n)?;
    check_len("V*", v_star.len(), n)?;
    let frozen = FrozenScenario {
        sigma: 0.0,
        theta: theta.to_vec(),
        edge_angles: net.edge_angles_from_nodal(theta),
        k: k.to_vec(),
        v_star: v_star.to_vec(),
    };
    let mut out = vec![0.0; n];
    field_into(net, &frozen, v, &mut out, Forcing::Full);
    Ok(out)
}

/// Evaluates the field at a frozen scenario into `out`.
///
/// Works line by line; never forms the dense matrix. Component `i` is
/// exactly zero whenever `v[i] == 0`.
pub fn field_into(
    net: &PowerNetwork,
    frozen: &FrozenScenario,
    v: &[f64],
    out: &mut [f64],
    forcing: Forcing,
) {
    let n = net.len();
    debug_assert_eq!(v.len(), n);
    debug_assert_eq!(out.len(), n);
    for i in 0..n {
        out[i] = -(net.b_abs()[i] + frozen.k[i]) * v[i];
        if forcing == Forcing::Full {
            out[i] += frozen.k[i] * frozen.v_star[i];
        }
    }
    for (e, &th) in net.edges().iter().zip(&frozen.edge_angles) {
        let (s, c) = th.sin_cos();
        let c_term = e.b_abs * c;
        let s_term = e.g * s;
        out[e.from] += (s_term + c_term) * v[e.to];
        out[e.to] += (c_term - s_term) * v[e.from];
    }
    for ((o, &vi), node) in out.iter_mut().zip(v).zip(net.nodes()) {
        *o = vi * *o / node.tau;
    }
}

/// Drift-only field `f_H(V) = diag(tau)^-1 diag(V) Psi(theta) V`.
pub fn drift_field(net: &PowerNetwork, v: &[f64], theta: &[f64], k: &[f64]) -> Result<Vec<f64>> {
    let n = net.len();
    check_len("V", v.len(), n)?;
    check_len("theta", theta.len(), n)?;
    check_len("k", k.len(), n)?;
    let frozen = FrozenScenario {
        sigma: 0.0,
        theta: theta.to_vec(),
        edge_angles: net.edge_angles_from_nodal(theta),
        k: k.to_vec(),
        v_star: vec![0.0; n],
    };
    let mut out = vec![0.0; n];
    field_into(net, &frozen, v, &mut out, Forcing::DriftOnly);
    Ok(out)
}

/// Matrix route to the field: `diag(tau)^-1 diag(V) (M V + b)`.
pub fn field_from_matrix(m: &InteractionMatrix, tau: &[f64], v: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = m.dim();
    check_len("V", v.len(), n)?;
    check_len("b", b.len(), n)?;
    check_len("tau", tau.len(), n)?;
    let mv = &m.entries * DVector::from_column_slice(v);
    Ok((0..n).map(|i| v[i] * (mv[i] + b[i]) / tau[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{five_bus, LineParams, NodeParams};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pair(g: f64) -> PowerNetwork {
        PowerNetwork::new(
            vec![NodeParams::constant(1, 1.0, 1.0), NodeParams::constant(2, 1.0, 1.0)],
            vec![LineParams::new(1, 2, -1.0, g)],
        )
        .unwrap()
    }

    fn theta0() -> Vec<f64> {
        vec![PI / 20.0, PI / 25.0, PI / 30.0, PI / 35.0, PI / 40.0]
    }

    #[test]
    fn reactive_power_examples() {
        let net = pair(0.0);
        assert_eq!(reactive_power(&net, &[1.0, 1.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(reactive_power(&net, &[2.0, 1.0], &[0.0, 0.0]).unwrap(), vec![2.0, -1.0]);
        let q = reactive_power(&five_bus(5.0, 2.0, 0.5), &[0.0, 1.3, 2.0, 0.7, 1.1], &theta0()).unwrap();
        assert_eq!(q[0], 0.0);
        assert!(reactive_power(&net, &[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn field_equals_droop_minus_reactive_power() {
        // tau dV/dt = V(-k(V - V*)) - Q
        let net = five_bus(5.0, 2.0, 0.5);
        let v = [1.8, 1.6, 1.4, 1.2, 1.0];
        let th = theta0();
        let q = reactive_power(&net, &v, &th).unwrap();
        let f = vector_field(&net, &v, &th, &[5.0; 5], &[2.0; 5]).unwrap();
        for i in 0..5 {
            let expected = v[i] * (-5.0 * (v[i] - 2.0)) - q[i];
            assert!((f[i] - expected).abs() < 1e-12, "{i}: {} vs {expected}", f[i]);
        }
    }

    #[test]
    fn coupled_two_node_entries() {
        let m = interaction_matrix_coupled(&pair(0.5), &[PI / 2.0, 0.0], &[1.0, 1.0]).unwrap();
        let want = [[-2.0, 0.5], [-0.5, -2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m.entries[(i, j)] - want[i][j]).abs() < 1e-15);
            }
        }
        let (c, s) = split_parts(&m).unwrap();
        assert_eq!(c.kind, MatrixKind::SymmetricPart);
        assert!((c.entries[(0, 1)]).abs() < 1e-15 && c.entries[(0, 0)] == -2.0);
        assert_eq!(s.entries[(0, 1)], 0.5);
        assert_eq!(s.entries[(1, 0)], -0.5);
        assert_eq!(s.entries[(0, 0)], 0.0);
    }

    #[test]
    fn coupled_five_bus_diagonal() {
        let net = five_bus(5.0, 2.0, 0.5);
        let m = interaction_matrix_coupled(&net, &theta0(), &[5.0; 5]).unwrap();
        let d: Vec<f64> = (0..5).map(|i| m.entries[(i, i)]).collect();
        for (got, want) in d.iter().zip([-7.5, -7.2, -8.5, -8.0, -6.2]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn decoupled_examples() {
        let net = five_bus(5.0, 2.0, 0.5);
        let m = interaction_matrix_decoupled(&net, &[5.0; 5]).unwrap();
        let row: Vec<f64> = m.entries.row(0).iter().copied().collect();
        assert_eq!(row, vec![-7.5, 1.5, 1.0, 0.0, 0.0]);
        assert_eq!(m.entries, m.entries.transpose());
        let single = PowerNetwork::new(vec![NodeParams::constant(1, 1.0, 1.0)], vec![]).unwrap();
        let m1 = interaction_matrix_decoupled(&single, &[1.0]).unwrap();
        assert_eq!(m1.entries[(0, 0)], -1.0);
    }

    #[test]
    fn gain_and_kind_errors() {
        let net = pair(0.5);
        assert!(matches!(
            interaction_matrix_decoupled(&net, &[1.0, 0.0]),
            Err(Error::NonPositiveGain { index: 1, .. })
        ));
        assert!(matches!(
            interaction_matrix_coupled(&net, &[0.0, 0.0], &[-1.0, 1.0]),
            Err(Error::NonPositiveGain { index: 0, .. })
        ));
        let d = interaction_matrix_decoupled(&net, &[1.0, 1.0]).unwrap();
        assert!(matches!(split_parts(&d), Err(Error::WrongKind { .. })));
    }

    #[test]
    fn zero_conductance_has_zero_skew_part() {
        let net = five_bus(5.0, 2.0, 0.0);
        let m = interaction_matrix_coupled(&net, &theta0(), &[5.0; 5]).unwrap();
        let (_, s) = split_parts(&m).unwrap();
        assert!(s.entries.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn drive_vector_examples() {
        assert_eq!(drive_vector(&[5.0; 5], &[2.0; 5]).unwrap(), vec![10.0; 5]);
        assert_eq!(drive_vector(&[0.0; 3], &[2.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(drive_vector(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![3.0, 8.0]);
        assert!(drive_vector(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn vector_field_examples() {
        let f = vector_field(&pair(0.5), &[1.0, 1.0], &[PI / 2.0, 0.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((f[0] + 0.5).abs() < 1e-15 && (f[1] + 1.5).abs() < 1e-15, "{f:?}");

        let net = five_bus(5.0, 2.0, 0.5);
        let f = vector_field(&net, &[2.0; 5], &[0.3; 5], &[5.0; 5], &[2.0; 5]).unwrap();
        assert!(f.iter().all(|x| x.abs() < 1e-14), "{f:?}");

        let f = vector_field(&net, &[1.0, 0.0, 3.0, 0.5, 2.0], &theta0(), &[5.0; 5], &[2.0; 5]).unwrap();
        assert_eq!(f[1], 0.0);
    }

    fn arb_state() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(0.0f64..5.0, 5),
            prop::collection::vec(-PI..PI, 5),
            prop::collection::vec(0.1f64..10.0, 5),
            prop::collection::vec(0.1f64..4.0, 5),
        )
    }

    proptest! {
        #[test]
        fn field_matches_matrix_route((v, th, k, vs) in arb_state()) {
            let net = five_bus(5.0, 2.0, 0.5);
            let direct = vector_field(&net, &v, &th, &k, &vs).unwrap();
            let m = interaction_matrix_coupled(&net, &th, &k).unwrap();
            let b = drive_vector(&k, &vs).unwrap();
            let via = field_from_matrix(&m, &net.tau(), &v, &b).unwrap();
            for (a, b) in direct.iter().zip(&via) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
            }
        }

        #[test]
        fn split_reconstructs_exactly((_v, th, k, _vs) in arb_state()) {
            let net = five_bus(5.0, 2.0, 0.5);
            let m = interaction_matrix_coupled(&net, &th, &k).unwrap();
            let (c, s) = split_parts(&m).unwrap();
            prop_assert_eq!(&(&c.entries + &s.entries), &m.entries);
            prop_assert_eq!(&c.entries, &c.entries.transpose());
            prop_assert_eq!(&s.entries, &(-s.entries.transpose()));
        }

        #[test]
        fn uniform_angle_shift_invariance((_v, th, k, _vs) in arb_state(), shift in -10.0f64..10.0) {
            let net = five_bus(5.0, 2.0, 0.5);
            let m = interaction_matrix_coupled(&net, &th, &k).unwrap();
            for delta in [2.0 * PI, shift] {
                let shifted: Vec<f64> = th.iter().map(|t| t + delta).collect();
                let m2 = interaction_matrix_coupled(&net, &shifted, &k).unwrap();
                for (a, b) in m.entries.iter().zip(m2.entries.iter()) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn zero_angle_limit_is_decoupled(common in -PI..PI, k in prop::collection::vec(0.1f64..10.0, 5)) {
            let net = five_bus(5.0, 2.0, 0.5);
            let m = interaction_matrix_coupled(&net, &[common; 5], &k).unwrap();
            let d = interaction_matrix_decoupled(&net, &k).unwrap();
            prop_assert_eq!(&m.entries, &d.entries);
        }

        #[test]
        fn boundary_components_are_stationary((mut v, th, k, vs) in arb_state(), idx in 0usize..5) {
            let net = five_bus(5.0, 2.0, 0.5);
            v[idx] = 0.0;
            let f = vector_field(&net, &v, &th, &k, &vs).unwrap();
            prop_assert_eq!(f[idx], 0.0);
        }

        #[test]
        fn drift_is_quadratically_homogeneous((v, th, k, _vs) in arb_state(), s in 0.0f64..10.0) {
            let net = five_bus(5.0, 2.0, 0.5);
            let f = drift_field(&net, &v, &th, &k).unwrap();
            let sv: Vec<f64> = v.iter().map(|x| s * x).collect();
            let fs = drift_field(&net, &sv, &th, &k).unwrap();
            let scale = f.iter().fold(0.0f64, |m, x| m.max(x.abs())) * s * s;
            for (a, b) in fs.iter().zip(&f) {
                prop_assert!((a - s * s * b).abs() <= 1e-10 * scale.max(1e-300));
            }
        }
    }
}
