//! Scenario files and trajectory CSV.
//!
//! Scenarios are TOML documents:
//!
//! ```toml
//! name = "two-bus"
//! mode = "decoupled"
//! seed = 7
//! checks = ["metzler", "positivity"]
//! initial_conditions = [[1.0, 1.5]]
//!
//! [sim]
//! t_end = 5.0
//!
//! [[network.nodes]]
//! id = 1
//! tau = 1.0
//! droop_gain = { form = "constant", value = 5.0 }
//! reference = { form = "constant", value = 2.0 }
//!
//! [[network.nodes]]
//! id = 2
//! tau = 1.0
//! droop_gain = { form = "constant", value = 5.0 }
//! reference = { form = "sinusoid", offset = 2.0, amplitude = 0.2, angular_frequency = 1.0 }
//!
//! [[network.lines]]
//! from = 1
//! to = 2
//! susceptance = -1.0
//! conductance = 0.0
//! ```

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::network::{LineParams, NodeParams, PowerNetwork};
use crate::signals::Signal;
use crate::sim::{IntegratorSettings, Trajectory};
use crate::{ConfigError, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Coupled,
    /// All relative angles zero.
    Decoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Metzler,
    Gershgorin,
    Hurwitz,
    Cooperativity,
    Dissipativity,
    Equilibrium,
    Homogeneity,
    Assumption1,
    Positivity,
    MonotoneOrder,
    LyapunovDescent,
    L1DescentFrozen,
    UltimateBound,
}

impl CheckName {
    pub const ALL: [CheckName; 13] = [
        CheckName::Metzler,
        CheckName::Gershgorin,
        CheckName::Hurwitz,
        CheckName::Cooperativity,
        CheckName::Dissipativity,
        CheckName::Equilibrium,
        CheckName::Homogeneity,
        CheckName::Assumption1,
        CheckName::Positivity,
        CheckName::MonotoneOrder,
        CheckName::LyapunovDescent,
        CheckName::L1DescentFrozen,
        CheckName::UltimateBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckName::Metzler => "metzler",
            CheckName::Gershgorin => "gershgorin",
            CheckName::Hurwitz => "hurwitz",
            CheckName::Cooperativity => "cooperativity",
            CheckName::Dissipativity => "dissipativity",
            CheckName::Equilibrium => "equilibrium",
            CheckName::Homogeneity => "homogeneity",
            CheckName::Assumption1 => "assumption1",
            CheckName::Positivity => "positivity",
            CheckName::MonotoneOrder => "monotone_order",
            CheckName::LyapunovDescent => "lyapunov_descent",
            CheckName::L1DescentFrozen => "l1_descent_frozen",
            CheckName::UltimateBound => "ultimate_bound",
        }
    }

    /// Checks that need no trajectory.
    pub fn is_structural(self) -> bool {
        !matches!(
            self,
            CheckName::Positivity
                | CheckName::MonotoneOrder
                | CheckName::LyapunovDescent
                | CheckName::L1DescentFrozen
                | CheckName::UltimateBound
        )
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Line as written in a scenario; angle perturbations go in
/// `edge_angle_overrides`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub from: u32,
    pub to: u32,
    pub susceptance: f64,
    #[serde(default)]
    pub conductance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub nodes: Vec<NodeParams>,
    #[serde(default)]
    pub lines: Vec<LineConfig>,
}

/// Additive relative-angle signal on the line `(from, to)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeAngleOverride {
    pub from: u32,
    pub to: u32,
    pub perturbation: Signal,
}

fn default_t_end() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "defaults::dt_init")]
    pub dt_init: f64,
    #[serde(default = "defaults::dt_min")]
    pub dt_min: f64,
    #[serde(default = "defaults::dt_max")]
    pub dt_max: f64,
    #[serde(default = "defaults::rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "defaults::abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "defaults::record_stride")]
    pub record_stride: f64,
}

mod defaults {
    use crate::sim::IntegratorSettings;

    pub fn dt_init() -> f64 {
        IntegratorSettings::default().dt_init
    }
    pub fn dt_min() -> f64 {
        IntegratorSettings::default().dt_min
    }
    pub fn dt_max() -> f64 {
        IntegratorSettings::default().dt_max
    }
    pub fn rel_tol() -> f64 {
        IntegratorSettings::default().rel_tol
    }
    pub fn abs_tol() -> f64 {
        IntegratorSettings::default().abs_tol
    }
    pub fn record_stride() -> f64 {
        IntegratorSettings::default().record_stride
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::new(0.0, default_t_end(), IntegratorSettings::default())
    }
}

impl SimConfig {
    pub fn new(t0: f64, t_end: f64, s: IntegratorSettings) -> Self {
        Self {
            t0,
            t_end,
            dt_init: s.dt_init,
            dt_min: s.dt_min,
            dt_max: s.dt_max,
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            record_stride: s.record_stride,
        }
    }

    pub fn settings(&self) -> IntegratorSettings {
        IntegratorSettings {
            dt_init: self.dt_init,
            dt_min: self.dt_min,
            dt_max: self.dt_max,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            record_stride: self.record_stride,
        }
    }
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checks: Vec<CheckName>,
    pub initial_conditions: Vec<Vec<f64>>,
    /// Fraction of the horizon discarded before estimating the ultimate bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transient_fraction: Option<f64>,
    /// Angle bound for the cooperativity check; defaults to the network's
    /// worst-case relative angle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cooperativity_beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homogeneity_samples: Option<usize>,
    #[serde(default)]
    pub sim: SimConfig,
    pub network: NetworkConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edge_angle_overrides: Vec<EdgeAngleOverride>,
}

const SCENARIOS: [(&str, &str); 3] = [
    ("fig2", include_str!("../configs/fig2.cfg")),
    ("fig3", include_str!("../configs/fig3.cfg")),
    ("fig4", include_str!("../configs/fig4.cfg")),
];

/// Names of the bundled scenarios.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}

/// Source text of a bundled scenario.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses and validates a bundled scenario.
pub fn bundled(name: &str) -> Result<ScenarioConfig> {
    let text = bundled_source(name).ok_or_else(|| Error::Invalid(format!("no bundled scenario named `{name}`")))?;
    parse_config_str(text, &format!("{name}.cfg"))
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        origin: origin.clone(),
        source,
    })?;
    parse_config_str(&text, &origin)
}

/// Parses scenario text; `origin` names the source in diagnostics.
pub fn parse_config_str(text: &str, origin: &str) -> Result<ScenarioConfig> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        origin: origin.to_string(),
        message: e.to_string().trim_end().to_string(),
    })?;
    config.validate(origin)?;
    Ok(config)
}

pub fn to_toml_string(config: &ScenarioConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Invalid(format!("cannot serialize scenario: {e}")))
}

/// Builds the validated network, attaching edge-angle overrides to their
/// lines.
pub fn build_network(config: &ScenarioConfig) -> Result<PowerNetwork> {
    let lines = config
        .network
        .lines
        .iter()
        .map(|l| LineParams {
            from: l.from,
            to: l.to,
            susceptance: l.susceptance,
            conductance: l.conductance,
            angle_perturbation: config
                .edge_angle_overrides
                .iter()
                .find(|o| o.from == l.from && o.to == l.to)
                .map(|o| o.perturbation),
        })
        .collect();
    Ok(PowerNetwork::new(config.network.nodes.clone(), lines)?)
}

impl ScenarioConfig {
    pub fn validate(&self, origin: &str) -> Result<()> {
        let invalid = |field: &str, message: String| -> Error {
            ConfigError::Invalid {
                origin: origin.to_string(),
                field: field.to_string(),
                message,
            }
            .into()
        };
        let net = build_network(self).map_err(|e| match e {
            Error::Network(source) => ConfigError::Network {
                origin: origin.to_string(),
                source,
            }
            .into(),
            other => other,
        })?;
        let n = net.len();

        for (i, o) in self.edge_angle_overrides.iter().enumerate() {
            let field = format!("edge_angle_overrides[{i}]");
            if !self.network.lines.iter().any(|l| l.from == o.from && l.to == o.to) {
                return Err(invalid(
                    &field,
                    format!("no line declared as from = {}, to = {}", o.from, o.to),
                ));
            }
            if self.edge_angle_overrides[..i].iter().any(|p| p.from == o.from && p.to == o.to) {
                return Err(invalid(&field, format!("line ({}, {}) overridden twice", o.from, o.to)));
            }
            if !o.perturbation.is_finite() {
                return Err(invalid(&field, "perturbation is not finite".into()));
            }
        }

        if self.mode == Mode::Decoupled {
            if !self.edge_angle_overrides.is_empty() {
                return Err(invalid("edge_angle_overrides", "not allowed in decoupled mode".into()));
            }
            let first = &self.network.nodes[0];
            if let Some(node) = self
                .network
                .nodes
                .iter()
                .find(|node| node.theta0 != first.theta0 || node.theta_perturbation != first.theta_perturbation)
            {
                return Err(invalid(
                    "network.nodes",
                    format!(
                        "node {}: decoupled mode requires identical angles at every node",
                        node.id
                    ),
                ));
            }
        }

        if self.initial_conditions.is_empty() {
            return Err(invalid("initial_conditions", "need at least one initial state".into()));
        }
        for (i, v0) in self.initial_conditions.iter().enumerate() {
            let field = format!("initial_conditions[{i}]");
            if v0.len() != n {
                return Err(invalid(&field, format!("has {} entries for {n} nodes", v0.len())));
            }
            if let Some(j) = v0.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(invalid(&field, format!("entry {j} = {} must be finite and nonnegative", v0[j])));
            }
        }

        if !(self.sim.t0.is_finite() && self.sim.t_end.is_finite() && self.sim.t_end > self.sim.t0) {
            return Err(invalid(
                "sim.t_end",
                format!("need finite t0 < t_end, got t0 = {}, t_end = {}", self.sim.t0, self.sim.t_end),
            ));
        }
        self.sim
            .settings()
            .validate()
            .map_err(|e| invalid("sim", e.to_string()))?;

        for (i, c) in self.checks.iter().enumerate() {
            if self.checks[..i].contains(c) {
                return Err(invalid("checks", format!("`{c}` listed twice")));
            }
        }
        if let Some(f) = self.transient_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(invalid("transient_fraction", format!("{f} must lie in (0, 1)")));
            }
        }
        if let Some(b) = self.cooperativity_beta {
            if !(0.0..std::f64::consts::FRAC_PI_2).contains(&b) {
                return Err(invalid("cooperativity_beta", format!("{b} must lie in [0, pi/2)")));
            }
        }
        if self.homogeneity_samples == Some(0) {
            return Err(invalid("homogeneity_samples", "must be positive".into()));
        }
        if self.checks.contains(&CheckName::MonotoneOrder) && ordered_pairs(&self.initial_conditions).is_empty() {
            return Err(invalid(
                "checks",
                "monotone_order needs two componentwise-ordered initial conditions".into(),
            ));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.network.nodes.len()
    }
}

/// Index pairs `(lo, hi)` with `initial[lo] <= initial[hi]` componentwise.
pub fn ordered_pairs(initial: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let le = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x <= y);
    let mut pairs = Vec::new();
    for i in 0..initial.len() {
        for j in i + 1..initial.len() {
            if le(&initial[i], &initial[j]) {
                pairs.push((i, j));
            } else if le(&initial[j], &initial[i]) {
                pairs.push((j, i));
            }
        }
    }
    pairs
}

fn csv_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Writes `t,V_1,...,V_n` followed by one row per stamp. Numbers use the
/// shortest decimal that parses back to the same double.
pub fn write_trajectory_csv(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e.to_string()))?;
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=traj.dim()).map(|i| format!("V_{i}")))
        .collect();
    w.write_record(&header).map_err(|e| csv_err(path, e.to_string()))?;
    let mut row = Vec::with_capacity(traj.dim() + 1);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        row.clear();
        row.push(t.to_string());
        row.extend(s.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| csv_err(path, e.to_string()))?;
    }
    w.flush().map_err(io)
}

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e.to_string()))?;
    let header = r.headers().map_err(|e| csv_err(path, e.to_string()))?.clone();
    let n = header.len().saturating_sub(1);
    let expected = std::iter::once("t".to_string()).chain((1..=n).map(|i| format!("V_{i}")));
    if header.is_empty() || !header.iter().map(str::to_string).eq(expected) {
        return Err(csv_err(path, format!("header must be t,V_1,...,V_n; got {:?}", header.iter().collect::<Vec<_>>())));
    }
    let (mut times, mut states) = (Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e.to_string()))?;
        let mut vals = rec.iter().enumerate().map(|(col, s)| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| csv_err(path, format!("row {}, column {}: `{s}` is not a number", line + 2, col + 1)))
        });
        times.push(vals.next().transpose()?.ok_or_else(|| csv_err(path, "empty row"))?);
        states.push(vals.collect::<Result<Vec<_>>>()?);
    }
    Trajectory::from_samples(times, states).map_err(|e| csv_err(path, e.to_string()))
}
