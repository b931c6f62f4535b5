//! Runs the checks a scenario asks for and collects the results.
//!
//! Structural checks use the parameters frozen at `t0`, except the
//! Gershgorin certificate, which uses the lower envelope of each gain and so
//! covers every time.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::certify::{
    self, CertificateReport, DissipativityReport, EquilibriumResult, HURWITZ_TOL, METZLER_TOL,
};
use crate::config::{self, CheckName, Mode, ScenarioConfig};
use crate::model::{self, InteractionMatrix};
use crate::network::PowerNetwork;
use crate::sim::{self, IntegratorSettings, Trajectory};
use crate::verify::{self, PropertyReport, MONOTONE_TOL};
use crate::{Error, Result};

pub const TOOL_NAME: &str = "droopvolt";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_TRANSIENT_FRACTION: f64 = 0.5;
pub const DEFAULT_HOMOGENEITY_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Detail {
    Certificate(CertificateReport),
    Dissipativity(DissipativityReport),
    Equilibrium { result: EquilibriumResult, converged: bool },
    Property(PropertyReport),
}

/// One requested check and its report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: CheckName,
    pub holds: bool,
    pub detail: Detail,
}

impl CheckOutcome {
    fn new(check: CheckName, detail: Detail) -> Self {
        let holds = match &detail {
            Detail::Certificate(r) => r.holds,
            Detail::Dissipativity(r) => r.report.holds,
            Detail::Equilibrium { result, converged } => *converged && result.interior,
            Detail::Property(r) => r.holds,
        };
        Self { check, holds, detail }
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let verdict = if self.holds { "holds" } else { "FAILS" };
        let detail = match &self.detail {
            Detail::Certificate(r) => format!("margin {:.6e}", r.margin),
            Detail::Dissipativity(r) => format!("verdict {:?}, margin {:.6e}", r.verdict, r.report.margin),
            Detail::Equilibrium { result, .. } => format!("residual {:.3e}, interior {}", result.residual, result.interior),
            Detail::Property(r) => format!("worst violation {:.3e} (tolerance {:.1e})", r.worst_violation, r.tolerance),
        };
        format!("{:<18} {verdict:<6} {detail}", self.check.name())
    }

    pub fn property(&self) -> Option<&PropertyReport> {
        match &self.detail {
            Detail::Property(r) => Some(r),
            _ => None,
        }
    }

    pub fn certificate(&self) -> Option<&CertificateReport> {
        match &self.detail {
            Detail::Certificate(r) => Some(r),
            Detail::Dissipativity(r) => Some(&r.report),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub tool: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub index: usize,
    pub csv: Option<String>,
    pub initial: Vec<f64>,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub stamps: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub positivity_rejections: usize,
}

impl TrajectorySummary {
    fn of(index: usize, traj: &Trajectory) -> Self {
        Self {
            index,
            csv: None,
            initial: traj.states.first().cloned().unwrap_or_default(),
            final_time: traj.times.last().copied().unwrap_or(f64::NAN),
            final_state: traj.last_state().map(<[f64]>::to_vec).unwrap_or_default(),
            stamps: traj.len(),
            accepted_steps: traj.meta.accepted_steps,
            rejected_steps: traj.meta.rejected_steps,
            positivity_rejections: traj.meta.positivity_rejections,
        }
    }
}

/// Everything a run produced, serialized as `bundle.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunBundle {
    pub scenario: String,
    pub mode: Mode,
    pub provenance: Provenance,
    pub settings: IntegratorSettings,
    pub t0: f64,
    pub t_end: f64,
    pub warnings: Vec<String>,
    pub trajectories: Vec<TrajectorySummary>,
    pub certificates: Vec<CheckOutcome>,
    pub properties: Vec<CheckOutcome>,
}

impl RunBundle {
    pub fn all_hold(&self) -> bool {
        self.outcomes().all(|c| c.holds)
    }

    pub fn outcomes(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.certificates.iter().chain(&self.properties)
    }

    pub fn outcome(&self, check: CheckName) -> Option<&CheckOutcome> {
        self.outcomes().find(|c| c.check == check)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Invalid(format!("cannot serialize run bundle: {e}")))
    }
}

pub struct RunOutput {
    pub bundle: RunBundle,
    pub trajectories: Vec<Trajectory>,
}

/// SHA-256 of the canonical TOML form, so formatting and comments do not
/// change the hash.
pub fn config_hash(config: &ScenarioConfig) -> Result<String> {
    let canonical = config::to_toml_string(config)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

/// Parameters frozen at `t0` that the structural checks work with.
struct Context<'a> {
    config: &'a ScenarioConfig,
    net: PowerNetwork,
    theta: Vec<f64>,
    k: Vec<f64>,
    v_star: Vec<f64>,
    matrix: InteractionMatrix,
}

impl<'a> Context<'a> {
    fn new(config: &'a ScenarioConfig) -> Result<Self> {
        let net = config::build_network(config)?;
        let frozen = crate::signals::freeze(&net, config.sim.t0)?;
        let matrix = match config.mode {
            Mode::Decoupled => model::interaction_matrix_decoupled(&net, &frozen.k)?,
            Mode::Coupled => model::interaction_matrix_frozen(&net, &frozen)?,
        };
        Ok(Self {
            config,
            theta: frozen.theta,
            k: frozen.k,
            v_star: frozen.v_star,
            net,
            matrix,
        })
    }

    fn settings(&self) -> IntegratorSettings {
        self.config.sim.settings()
    }

    fn structural(&self, check: CheckName) -> Result<CheckOutcome> {
        let m = &self.matrix.entries;
        let detail = match check {
            CheckName::Metzler => Detail::Certificate(certify::is_metzler(m, METZLER_TOL)?),
            CheckName::Hurwitz => Detail::Certificate(certify::hurwitz_check(m, HURWITZ_TOL)?),
            CheckName::Gershgorin => {
                let k_lower: Vec<f64> = self.net.nodes().iter().map(|n| n.droop_gain.envelope().0).collect();
                Detail::Certificate(certify::gershgorin_negative_definite(&self.net, &k_lower)?)
            }
            CheckName::Cooperativity => {
                let beta = self.config.cooperativity_beta.unwrap_or_else(|| self.net.relative_angle_bound());
                Detail::Certificate(certify::cooperativity_check(&self.net, beta)?)
            }
            CheckName::Dissipativity => Detail::Dissipativity(certify::dissipativity_check(m)?),
            CheckName::Equilibrium => {
                let result = certify::solve_equilibrium(&self.net, &self.k, &self.v_star)?;
                let b = model::drive_vector(&self.k, &self.v_star)?;
                let converged = result.converged(&b);
                Detail::Equilibrium { result, converged }
            }
            CheckName::Homogeneity => Detail::Property(verify::check_homogeneity(
                &self.net,
                &self.theta,
                &self.k,
                self.config.homogeneity_samples.unwrap_or(DEFAULT_HOMOGENEITY_SAMPLES),
                self.config.seed,
            )?),
            CheckName::Assumption1 => Detail::Property(verify::check_assumption1(&self.net)?),
            other => return Err(Error::Invalid(format!("`{other}` needs trajectories"))),
        };
        Ok(CheckOutcome::new(check, detail))
    }

    fn on_trajectories(&self, check: CheckName, trajs: &[Trajectory]) -> Result<CheckOutcome> {
        let report = match check {
            CheckName::Positivity => combine(check, trajs.iter().map(|t| verify::check_positivity(t, 0.0)).collect())?,
            CheckName::MonotoneOrder => {
                let initial: Vec<Vec<f64>> = trajs.iter().map(|t| t.states.first().cloned().unwrap_or_default()).collect();
                let pairs = config::ordered_pairs(&initial);
                if pairs.is_empty() {
                    failed(check, "no two trajectories start componentwise ordered")
                } else {
                    combine(
                        check,
                        pairs
                            .iter()
                            .map(|&(lo, hi)| verify::check_monotone_order(&trajs[lo], &trajs[hi], MONOTONE_TOL))
                            .collect(),
                    )?
                }
            }
            CheckName::LyapunovDescent => {
                let eq = certify::solve_equilibrium(&self.net, &self.k, &self.v_star)?;
                let psi_l = model::interaction_matrix_decoupled(&self.net, &self.k)?;
                combine(
                    check,
                    trajs
                        .iter()
                        .map(|t| verify::check_lyapunov_descent(t, &eq.v_bar, &psi_l.entries))
                        .collect(),
                )?
            }
            CheckName::L1DescentFrozen => {
                let frozen = crate::signals::freeze(&self.net, self.config.sim.t0)?;
                let drift: Vec<Result<PropertyReport>> = self
                    .config
                    .initial_conditions
                    .iter()
                    .map(|v0| {
                        let t = sim::integrate_frozen_with(
                            &self.net,
                            &frozen,
                            model::Forcing::DriftOnly,
                            v0,
                            self.config.sim.t0,
                            self.config.sim.t_end,
                            &self.settings(),
                        )?;
                        verify::check_l1_descent_frozen(&t, &self.matrix.entries)
                    })
                    .collect();
                combine(check, drift)?
            }
            CheckName::UltimateBound => {
                let fraction = self.config.transient_fraction.unwrap_or(DEFAULT_TRANSIENT_FRACTION);
                let per_run: Vec<Result<PropertyReport>> = trajs
                    .iter()
                    .map(|t| verify::estimate_ultimate_bound(t, fraction).map(|(_, r)| r))
                    .collect();
                let mut r = combine(check, per_run)?;
                if let Some(bound) = r.metrics.get("max_R").copied() {
                    r.metrics.insert("R".into(), bound);
                }
                r
            }
            other => return self.structural(other),
        };
        Ok(CheckOutcome::new(check, Detail::Property(report)))
    }
}

fn failed(check: CheckName, why: impl Into<String>) -> PropertyReport {
    PropertyReport {
        property: check.name().into(),
        holds: false,
        worst_violation: f64::INFINITY,
        tolerance: 0.0,
        location: None,
        samples_checked: 0,
        metrics: Default::default(),
        notes: why.into(),
    }
}

/// Merges per-run reports into one: the worst run is kept, sample counts
/// add up and a run that could not be checked fails the whole report.
fn combine(check: CheckName, reports: Vec<Result<PropertyReport>>) -> Result<PropertyReport> {
    let mut ok = Vec::new();
    for (i, r) in reports.into_iter().enumerate() {
        match r {
            Ok(r) => ok.push(r),
            Err(e @ (Error::Boundary { .. } | Error::TooShort(_) | Error::StepUnderflow { .. } | Error::NonFinite { .. })) => {
                return Ok(failed(check, format!("run {i}: {e}")));
            }
            Err(e) => return Err(e),
        }
    }
    let runs = ok.len();
    let samples: usize = ok.iter().map(|r| r.samples_checked).sum();
    let max_r = ok.iter().filter_map(|r| r.get("R")).fold(f64::NEG_INFINITY, f64::max);
    let (worst_idx, _) = ok
        .iter()
        .enumerate()
        .max_by(|a, b| {
            (!a.1.holds, a.1.worst_violation)
                .partial_cmp(&(!b.1.holds, b.1.worst_violation))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .ok_or_else(|| Error::Invalid(format!("`{check}` has nothing to check")))?;
    let mut out = ok.swap_remove(worst_idx);
    out.holds = out.holds && ok.iter().all(|r| r.holds);
    out.samples_checked = samples;
    out.metrics.insert("runs".into(), runs as f64);
    out.metrics.insert("worst_run".into(), worst_idx as f64);
    if max_r.is_finite() {
        out.metrics.insert("max_R".into(), max_r);
    }
    Ok(out)
}

/// Integrates every initial condition of the scenario.
pub fn simulate(config: &ScenarioConfig) -> Result<Vec<Trajectory>> {
    let net = config::build_network(config)?;
    simulate_network(config, &net)
}

fn simulate_network(config: &ScenarioConfig, net: &PowerNetwork) -> Result<Vec<Trajectory>> {
    let settings = config.sim.settings();
    sim::batch_integrate(net, &config.initial_conditions, config.sim.t0, config.sim.t_end, &settings)
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map(|t| t.with_scenario(format!("{}#{i}", config.name))))
        .collect()
}

fn bundle(config: &ScenarioConfig, net: &PowerNetwork, trajs: &[Trajectory], outcomes: Vec<CheckOutcome>) -> Result<RunBundle> {
    let (certificates, properties) = outcomes.into_iter().partition(|o| o.property().is_none());
    Ok(RunBundle {
        scenario: config.name.clone(),
        mode: config.mode,
        provenance: Provenance {
            config_sha256: config_hash(config)?,
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        },
        settings: config.sim.settings(),
        t0: config.sim.t0,
        t_end: config.sim.t_end,
        warnings: net.warnings().to_vec(),
        trajectories: trajs.iter().enumerate().map(|(i, t)| TrajectorySummary::of(i, t)).collect(),
        certificates,
        properties,
    })
}

/// Runs the structural checks among `checks`; trajectory checks are skipped.
pub fn certify_scenario(config: &ScenarioConfig, checks: &[CheckName]) -> Result<RunBundle> {
    let ctx = Context::new(config)?;
    let outcomes = checks
        .iter()
        .filter(|c| c.is_structural())
        .map(|&c| ctx.structural(c))
        .collect::<Result<Vec<_>>>()?;
    bundle(config, &ctx.net, &[], outcomes)
}

/// Integrates the scenario and runs every check in `checks`.
pub fn run_scenario(config: &ScenarioConfig, checks: &[CheckName]) -> Result<RunOutput> {
    let ctx = Context::new(config)?;
    let trajectories = simulate_network(config, &ctx.net)?;
    finish(ctx, trajectories, checks)
}

/// Runs `checks` against trajectories produced elsewhere (e.g. read from
/// CSV).
pub fn check_trajectories(config: &ScenarioConfig, trajectories: Vec<Trajectory>, checks: &[CheckName]) -> Result<RunOutput> {
    let ctx = Context::new(config)?;
    if let Some(t) = trajectories.iter().find(|t| !t.is_empty() && t.dim() != ctx.net.len()) {
        return Err(Error::Dimension {
            what: "trajectory state",
            got: t.dim(),
            expected: ctx.net.len(),
        });
    }
    finish(ctx, trajectories, checks)
}

fn finish(ctx: Context<'_>, trajectories: Vec<Trajectory>, checks: &[CheckName]) -> Result<RunOutput> {
    let outcomes = checks
        .iter()
        .map(|&c| ctx.on_trajectories(c, &trajectories))
        .collect::<Result<Vec<_>>>()?;
    let bundle = bundle(ctx.config, &ctx.net, &trajectories, outcomes)?;
    Ok(RunOutput { bundle, trajectories })
}

/// Writes `trajectory_<i>.csv` for every run plus `bundle.json` into `dir`.
pub fn write_outputs(output: &mut RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (i, traj) in output.trajectories.iter().enumerate() {
        let name = format!("trajectory_{i}.csv");
        let path = dir.join(&name);
        config::write_trajectory_csv(traj, &path)?;
        if let Some(s) = output.bundle.trajectories.get_mut(i) {
            s.csv = Some(name);
        }
        written.push(path);
    }
    let path = dir.join("bundle.json");
    fs::write(&path, output.bundle.to_json()? + "\n").map_err(io(&path))?;
    written.push(path);
    Ok(written)
}
