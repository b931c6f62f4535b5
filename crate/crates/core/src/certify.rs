//! Structural and stability certificates for interaction matrices.
//!
//! Matrix-level checks (`is_metzler`, `hurwitz_check`,
//! `dissipativity_check`) take any square matrix; network-level checks
//! (`gershgorin_negative_definite`, `cooperativity_check`,
//! `solve_equilibrium`) work from line data directly. Indices in witnesses
//! are 0-based.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{self, check_len};
use crate::network::PowerNetwork;
use crate::{Error, Result};

/// Off-diagonal tolerance for the Metzler check.
pub const METZLER_TOL: f64 = 1e-12;
/// Required spectral abscissa margin for the Hurwitz check.
pub const HURWITZ_TOL: f64 = 1e-9;
/// Relative residual bound for equilibrium solves.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;

const WITNESS_LIMIT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "at", rename_all = "snake_case")]
pub enum Location {
    Entry { row: usize, col: usize },
    Node { id: u32 },
    Line { from: u32, to: u32 },
    Eigenvalue { index: usize, imag: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub location: Location,
    pub value: f64,
}

/// Outcome of one check with the quantities that decided it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub kind: String,
    pub holds: bool,
    /// Smallest slack; negative when violated.
    pub margin: f64,
    pub witnesses: Vec<Witness>,
    pub notes: String,
}

impl CertificateReport {
    fn new(kind: &str, holds: bool, margin: f64, witnesses: Vec<Witness>) -> Self {
        Self {
            kind: kind.to_string(),
            holds,
            margin,
            witnesses,
            notes: String::new(),
        }
    }

    fn note(mut self, notes: impl Into<String>) -> Self {
        self.notes = notes.into();
        self
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Off-diagonal entries all `>= -tol`. Witnesses are the smallest
/// off-diagonal entries.
pub fn is_metzler(m: &DMatrix<f64>, tol: f64) -> Result<CertificateReport> {
    check_square(m)?;
    let n = m.nrows();
    let mut off: Vec<Witness> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(row, col)| Witness {
            location: Location::Entry { row, col },
            value: m[(row, col)],
        })
        .collect();
    off.sort_by(|a, b| a.value.total_cmp(&b.value));
    let margin = off.first().map_or(f64::INFINITY, |w| w.value);
    off.truncate(WITNESS_LIMIT);
    Ok(CertificateReport::new("metzler", margin >= -tol, margin, off)
        .note(format!("min off-diagonal entry; tolerance {tol:e}")))
}

/// Diagonal-dominance certificate that `Psi^c` is negative definite for
/// every angle configuration.
///
/// Uses the worst case `|cos theta_ij| = 1`, so node `i` needs
/// `|B_i| + k_i > sum_j |B_ij|`; the slack is `B_i^sh + k_i`.
pub fn gershgorin_negative_definite(net: &PowerNetwork, k: &[f64]) -> Result<CertificateReport> {
    check_len("k", k.len(), net.len())?;
    let mut rows: Vec<Witness> = (0..net.len())
        .map(|i| {
            let radius: f64 = net.neighbors(i).iter().map(|&(_, l)| net.edges()[l].b_abs).sum();
            Witness {
                location: Location::Node {
                    id: net.nodes()[i].id,
                },
                value: net.b_abs()[i] + k[i] - radius,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    let margin = rows[0].value;
    rows.truncate(WITNESS_LIMIT);
    Ok(CertificateReport::new("gershgorin", margin > 0.0, margin, rows)
        .note("min over nodes of |B_i| + k_i - sum_j |B_ij|; strict inequality required"))
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<nalgebra::Complex<f64>>> {
    check_square(m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest eigenvalue of the symmetric part `(M + M^T) / 2`.
pub fn max_symmetric_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    check_square(m)?;
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000).ok_or(Error::EigenFailure)?;
    Ok(eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Spectral abscissa below `-tol`.
pub fn hurwitz_check(m: &DMatrix<f64>, tol: f64) -> Result<CertificateReport> {
    let eig = eigenvalues(m)?;
    let (index, worst) = eig
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
        .ok_or_else(|| Error::Invalid("empty matrix".into()))?;
    let margin = -worst.re;
    Ok(CertificateReport::new(
        "hurwitz",
        margin > tol,
        margin,
        vec![Witness {
            location: Location::Eigenvalue {
                index,
                imag: worst.im,
            },
            value: worst.re,
        }],
    )
    .note(format!("margin = -max Re(lambda); tolerance {tol:e}")))
}

/// Worst-case Metzler condition for relative angles in `[-beta, beta]`:
/// every line needs `G_ij / |B_ij| < cot(beta)`.
pub fn cooperativity_check(net: &PowerNetwork, beta: f64) -> Result<CertificateReport> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&beta) {
        return Err(Error::AngleBound(beta));
    }
    let cot = if beta == 0.0 { f64::INFINITY } else { 1.0 / beta.tan() };
    let mut slack: Vec<Witness> = net
        .lines()
        .iter()
        .zip(net.edges())
        .map(|(line, e)| Witness {
            location: Location::Line {
                from: line.from,
                to: line.to,
            },
            value: cot - e.g / e.b_abs,
        })
        .collect();
    slack.sort_by(|a, b| a.value.total_cmp(&b.value));
    let margin = slack.first().map_or(f64::INFINITY, |w| w.value);
    slack.truncate(WITNESS_LIMIT);
    Ok(CertificateReport::new("cooperativity", margin > 0.0, margin, slack)
        .note(format!("min over lines of cot(beta) - G/|B| at beta = {beta}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    /// The search found no witness; absence is not proven.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipativityReport {
    pub report: CertificateReport,
    pub verdict: Verdict,
    /// Diagonal of `D` when a witness was found.
    pub diagonal: Option<Vec<f64>>,
    /// Dissipative with a strictly negative diagonal.
    pub stably: bool,
}

/// Searches for a diagonal `D > 0` with `sym(M D)` negative semidefinite.
///
/// A symmetric negative semidefinite `M` is accepted with `D = I`. A
/// positive diagonal entry rules out every `D`. Otherwise a seeded
/// coordinate descent on `log D` minimizes the top eigenvalue of
/// `sym(M D)`, with `restarts` random starts.
pub fn dissipativity_check(m: &DMatrix<f64>) -> Result<DissipativityReport> {
    dissipativity_search(m, 100, 0x5eed)
}

pub fn dissipativity_search(m: &DMatrix<f64>, restarts: usize, seed: u64) -> Result<DissipativityReport> {
    check_square(m)?;
    let n = m.nrows();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let finish = |verdict: Verdict, lambda: f64, diagonal: Option<Vec<f64>>, notes: String| {
        let holds = verdict == Verdict::Holds;
        let stably = holds && (0..n).all(|i| m[(i, i)] < 0.0);
        DissipativityReport {
            report: CertificateReport::new("dissipativity", holds, -lambda, Vec::new()).note(notes),
            verdict,
            diagonal,
            stably,
        }
    };

    if let Some(i) = (0..n).find(|&i| m[(i, i)] > 0.0) {
        let r = finish(
            Verdict::Fails,
            m[(i, i)],
            None,
            format!("diagonal entry {i} is positive, so sym(MD) has a positive diagonal for every D > 0"),
        );
        return Ok(with_witness(r, Location::Entry { row: i, col: i }, m[(i, i)]));
    }

    let objective = |log_d: &[f64]| -> Result<f64> {
        let d = DVector::from_iterator(n, log_d.iter().map(|x| x.exp()));
        let md = m * DMatrix::from_diagonal(&d);
        max_symmetric_eigenvalue(&md)
    };

    let identity = vec![0.0; n];
    let lambda = objective(&identity)?;
    let symmetric = (m - m.transpose()).amax() <= tol;
    if lambda <= tol {
        let note = if symmetric {
            "symmetric and negative semidefinite; D = I"
        } else {
            "sym(M) negative semidefinite; D = I (definiteness checked on the symmetric part)"
        };
        return Ok(finish(Verdict::Holds, lambda, Some(vec![1.0; n]), note.into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (lambda, identity);
    for restart in 0..restarts {
        let mut x: Vec<f64> = if restart == 0 {
            vec![0.0; n]
        } else {
            (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
        };
        let mut fx = objective(&x)?;
        let mut step = 1.0;
        while step > 1e-6 && fx > tol {
            let mut improved = false;
            for i in 0..n {
                for dir in [step, -step] {
                    x[i] += dir;
                    let f = objective(&x)?;
                    if f < fx {
                        fx = f;
                        improved = true;
                        break;
                    }
                    x[i] -= dir;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if fx < best.0 {
            best = (fx, x);
        }
        if best.0 <= tol {
            let d: Vec<f64> = best.1.iter().map(|x| x.exp()).collect();
            return Ok(finish(
                Verdict::Holds,
                best.0,
                Some(d),
                format!("diagonal witness found by coordinate search (restart {restart}); symmetric part checked"),
            ));
        }
    }
    Ok(finish(
        Verdict::Unknown,
        best.0,
        None,
        format!("no diagonal witness after {restarts} restarts; best max eigenvalue {:e}", best.0),
    ))
}

fn with_witness(mut r: DissipativityReport, location: Location, value: f64) -> DissipativityReport {
    r.report.witnesses.push(Witness { location, value });
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub v_bar: Vec<f64>,
    pub interior: bool,
    /// `||Psi^l v_bar + b||_inf`
    pub residual: f64,
}

impl EquilibriumResult {
    /// Residual within `EQUILIBRIUM_TOL * ||b||_inf`.
    pub fn converged(&self, b: &[f64]) -> bool {
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        self.residual <= EQUILIBRIUM_TOL * scale.max(f64::MIN_POSITIVE)
    }
}

/// Solves `Psi^l v_bar = -b` for the decoupled system.
///
/// Requires the Gershgorin certificate (invertibility) and `k_i V_i* > 0`.
/// Under those conditions `-(Psi^l)^-1` is elementwise nonnegative, so the
/// solution is interior; a non-interior result is returned with
/// `interior = false` and indicates an anomaly.
pub fn solve_equilibrium(net: &PowerNetwork, k: &[f64], v_star: &[f64]) -> Result<EquilibriumResult> {
    check_len("k", k.len(), net.len())?;
    check_len("V*", v_star.len(), net.len())?;
    let b = model::drive_vector(k, v_star)?;
    if let Some(index) = b.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::NonPositiveDrive { index, value: b[index] });
    }
    let gersh = gershgorin_negative_definite(net, k)?;
    if !gersh.holds {
        return Err(Error::Singular(format!(
            "Gershgorin certificate fails (margin {})",
            gersh.margin
        )));
    }
    let psi = model::interaction_matrix_decoupled(net, k)?;
    let rhs = -DVector::from_column_slice(&b);
    let v = psi
        .entries
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("LU factorization is singular".into()))?;
    let residual = (&psi.entries * &v - &rhs).amax();
    let v_bar: Vec<f64> = v.iter().copied().collect();
    Ok(EquilibriumResult {
        interior: v_bar.iter().all(|&x| x > 0.0),
        v_bar,
        residual,
    })
}

/// `sum_i (V_i - Vbar_i) - Vbar_i ln(V_i / Vbar_i)`
pub fn lyapunov_entropy(v: &[f64], v_bar: &[f64]) -> Result<f64> {
    check_len("V", v.len(), v_bar.len())?;
    for xs in [v, v_bar] {
        if let Some(index) = xs.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::LogDomain { index, value: xs[index] });
        }
    }
    Ok(v.iter()
        .zip(v_bar)
        .map(|(&x, &xb)| (x - xb) - xb * (x / xb).ln())
        .sum())
}

/// `(V - Vbar)^T Psi^l (V - Vbar)`, the time derivative of
/// [`lyapunov_entropy`] along the decoupled flow with unit time constants.
pub fn lyapunov_entropy_rate(v: &[f64], v_bar: &[f64], psi_l: &DMatrix<f64>) -> Result<f64> {
    check_square(psi_l)?;
    check_len("V", v.len(), psi_l.nrows())?;
    check_len("Vbar", v_bar.len(), psi_l.nrows())?;
    let d = DVector::from_iterator(v.len(), v.iter().zip(v_bar).map(|(a, b)| a - b));
    Ok(d.dot(&(psi_l * &d)))
}

/// `V^T Psi V`, the derivative of `sum_i |V_i|` along the drift-only frozen
/// flow with unit time constants.
pub fn lyapunov_l1_rate(v: &[f64], psi: &DMatrix<f64>) -> Result<f64> {
    check_square(psi)?;
    check_len("V", v.len(), psi.nrows())?;
    let x = DVector::from_column_slice(v);
    Ok(x.dot(&(psi * &x)))
}

/// `rho(x) = sum_i |x_i|^(1 / r_i)` with every `r_i` in `(0, 1)`.
pub fn homogeneous_norm(x: &[f64], r: &[f64]) -> Result<f64> {
    check_len("r", r.len(), x.len())?;
    if let Some(index) = r.iter().position(|&ri| !(ri > 0.0 && ri < 1.0)) {
        return Err(Error::Weight { index, value: r[index] });
    }
    Ok(x.iter().zip(r).map(|(xi, ri)| xi.abs().powf(1.0 / ri)).sum())
}
