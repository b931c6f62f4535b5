//! Busbars, lines and their droop controllers.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::signals::{FrozenScenario, Signal};
use crate::NetworkError;

/// A power line between two busbars.
///
/// Susceptance is negative and conductance nonnegative (per unit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineParams {
    pub from: u32,
    pub to: u32,
    pub susceptance: f64,
    pub conductance: f64,
    /// Extra relative-angle signal added to `theta_from - theta_to`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_perturbation: Option<Signal>,
}

impl LineParams {
    pub fn new(from: u32, to: u32, susceptance: f64, conductance: f64) -> Self {
        Self {
            from,
            to,
            susceptance,
            conductance,
            angle_perturbation: None,
        }
    }
}

/// A busbar with its quadratic droop controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeParams {
    pub id: u32,
    pub tau: f64,
    #[serde(default)]
    pub shunt_susceptance: f64,
    pub droop_gain: Signal,
    pub reference: Signal,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default)]
    pub theta_perturbation: Signal,
}

impl NodeParams {
    /// Node with constant gain and reference, unit time constant, no shunt and
    /// zero angle.
    pub fn constant(id: u32, k: f64, v_star: f64) -> Self {
        Self {
            id,
            tau: 1.0,
            shunt_susceptance: 0.0,
            droop_gain: Signal::constant(k),
            reference: Signal::constant(v_star),
            theta0: 0.0,
            theta_perturbation: Signal::default(),
        }
    }

    /// Nodal angle at time `t`.
    pub fn theta(&self, t: f64) -> f64 {
        self.theta0 + self.theta_perturbation.eval(t)
    }
}

/// Line endpoints resolved to node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// `|B_ij|`
    pub b_abs: f64,
    /// `G_ij`
    pub g: f64,
}

/// Validated, connected network.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerNetwork {
    nodes: Vec<NodeParams>,
    lines: Vec<LineParams>,
    edges: Vec<Edge>,
    /// `|B_i| = B_i^sh + sum_j |B_ij|`
    b_abs: Vec<f64>,
    /// `(neighbor index, line index)` per node
    adjacency: Vec<Vec<(usize, usize)>>,
    warnings: Vec<String>,
}

impl PowerNetwork {
    pub fn new(nodes: Vec<NodeParams>, lines: Vec<LineParams>) -> Result<Self, NetworkError> {
        if nodes.is_empty() {
            return Err(NetworkError::Empty);
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id, i).is_some() {
                return Err(NetworkError::DuplicateNode { id: node.id });
            }
            validate_node(node)?;
        }

        let n = nodes.len();
        let mut edges = Vec::with_capacity(lines.len());
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = HashSet::with_capacity(lines.len());
        for (l, line) in lines.iter().enumerate() {
            let (from, to) = (line.from, line.to);
            let lookup = |id| {
                index
                    .get(&id)
                    .copied()
                    .ok_or(NetworkError::UnknownNode { from, to, id })
            };
            let (a, b) = (lookup(from)?, lookup(to)?);
            if a == b {
                return Err(NetworkError::SelfLoop { from, to });
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(NetworkError::DuplicateLine { from, to });
            }
            // zero susceptance is "no line"
            if !(line.susceptance < 0.0) || !line.susceptance.is_finite() {
                return Err(NetworkError::Susceptance {
                    from,
                    to,
                    value: line.susceptance,
                });
            }
            if !(line.conductance >= 0.0) || !line.conductance.is_finite() {
                return Err(NetworkError::Conductance {
                    from,
                    to,
                    value: line.conductance,
                });
            }
            if let Some(p) = &line.angle_perturbation {
                if !p.is_finite() {
                    return Err(NetworkError::NonFinite {
                        id: from,
                        field: "angle_perturbation",
                    });
                }
            }
            edges.push(Edge {
                from: a,
                to: b,
                b_abs: line.susceptance.abs(),
                g: line.conductance,
            });
            adjacency[a].push((b, l));
            adjacency[b].push((a, l));
        }

        let b_abs: Vec<f64> = (0..n)
            .map(|i| {
                nodes[i].shunt_susceptance
                    + adjacency[i].iter().map(|&(_, l)| edges[l].b_abs).sum::<f64>()
            })
            .collect();

        // B_i = B_i^sh + sum_j B_ij is nonpositive only when the shunt is
        // small next to the incident line susceptances.
        let warnings = (0..n)
            .filter_map(|i| {
                let signed = nodes[i].shunt_susceptance
                    - adjacency[i].iter().map(|&(_, l)| edges[l].b_abs).sum::<f64>();
                (signed > 0.0).then(|| {
                    format!(
                        "node {}: B_i = B_sh + sum B_ij = {signed} > 0; using |B_i| = B_sh + sum |B_ij| = {}",
                        nodes[i].id, b_abs[i]
                    )
                })
            })
            .collect();

        let net = Self {
            nodes,
            lines,
            edges,
            b_abs,
            adjacency,
            warnings,
        };
        net.check_connected()?;
        Ok(net)
    }

    fn check_connected(&self) -> Result<(), NetworkError> {
        let n = self.len();
        let mut visited = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        while let Some(i) = queue.pop_front() {
            for &(j, _) in &self.adjacency[i] {
                if !visited[j] {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
        match visited.iter().position(|v| !v) {
            Some(i) => Err(NetworkError::Disconnected {
                root: self.nodes[0].id,
                id: self.nodes[i].id,
            }),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeParams] {
        &self.nodes
    }

    pub fn lines(&self) -> &[LineParams] {
        &self.lines
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Aggregates `|B_i|`.
    pub fn b_abs(&self) -> &[f64] {
        &self.b_abs
    }

    /// `(neighbor index, line index)` pairs of node `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    /// Sign-convention disagreements found during construction.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn tau(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.tau).collect()
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Nodal angles at time `t`.
    pub fn theta_at(&self, t: f64) -> Vec<f64> {
        self.nodes.iter().map(|n| n.theta(t)).collect()
    }

    /// Relative line angles `theta_from - theta_to` induced by a nodal angle
    /// vector, without line perturbations.
    pub fn edge_angles_from_nodal(&self, theta: &[f64]) -> Vec<f64> {
        self.edges.iter().map(|e| theta[e.from] - theta[e.to]).collect()
    }

    /// Evaluates every signal at `t`. Does not check gain positivity; see
    /// [`crate::signals::freeze`].
    pub fn snapshot(&self, t: f64) -> FrozenScenario {
        let theta = self.theta_at(t);
        let edge_angles = self
            .edges
            .iter()
            .zip(&self.lines)
            .map(|(e, line)| {
                let base = theta[e.from] - theta[e.to];
                match &line.angle_perturbation {
                    Some(p) => base + p.eval(t),
                    None => base,
                }
            })
            .collect();
        FrozenScenario {
            sigma: t,
            theta,
            edge_angles,
            k: self.nodes.iter().map(|n| n.droop_gain.eval(t)).collect(),
            v_star: self.nodes.iter().map(|n| n.reference.eval(t)).collect(),
        }
    }

    /// Upper bound on `|theta_ij(t)|` over all lines and times.
    pub fn relative_angle_bound(&self) -> f64 {
        let swing = |s: &Signal| match *s {
            Signal::Constant { .. } => 0.0,
            Signal::Sinusoid { amplitude, .. } => amplitude.abs(),
        };
        let centre = |s: &Signal| match *s {
            Signal::Constant { value } => value,
            Signal::Sinusoid { offset, .. } => offset,
        };
        self.edges
            .iter()
            .zip(&self.lines)
            .map(|(e, line)| {
                let (a, b) = (&self.nodes[e.from], &self.nodes[e.to]);
                let mut mid = a.theta0 + centre(&a.theta_perturbation)
                    - b.theta0
                    - centre(&b.theta_perturbation);
                let mut amp = swing(&a.theta_perturbation) + swing(&b.theta_perturbation);
                if let Some(p) = &line.angle_perturbation {
                    mid += centre(p);
                    amp += swing(p);
                }
                mid.abs() + amp
            })
            .fold(0.0, f64::max)
    }

    /// True when every relative angle is identically zero.
    pub fn is_decoupled(&self) -> bool {
        let first = &self.nodes[0];
        self.nodes
            .iter()
            .all(|n| n.theta0 == first.theta0 && n.theta_perturbation == first.theta_perturbation)
            && self.lines.iter().all(|l| match &l.angle_perturbation {
                None => true,
                Some(p) => *p == Signal::constant(0.0),
            })
    }

    /// Copy of the network with every conductance set to zero.
    pub fn lossless(&self) -> Self {
        let mut out = self.clone();
        for line in &mut out.lines {
            line.conductance = 0.0;
        }
        for e in &mut out.edges {
            e.g = 0.0;
        }
        out
    }
}

fn validate_node(node: &NodeParams) -> Result<(), NetworkError> {
    let id = node.id;
    for (field, ok) in [
        ("tau", node.tau.is_finite()),
        ("shunt_susceptance", node.shunt_susceptance.is_finite()),
        ("theta0", node.theta0.is_finite()),
        ("droop_gain", node.droop_gain.is_finite()),
        ("reference", node.reference.is_finite()),
        ("theta_perturbation", node.theta_perturbation.is_finite()),
    ] {
        if !ok {
            return Err(NetworkError::NonFinite { id, field });
        }
    }
    if !(node.tau > 0.0) {
        return Err(NetworkError::TimeConstant { id, value: node.tau });
    }
    if !(node.shunt_susceptance >= 0.0) {
        return Err(NetworkError::Shunt {
            id,
            value: node.shunt_susceptance,
        });
    }
    for (field, signal) in [("droop_gain", &node.droop_gain), ("reference", &node.reference)] {
        let lower = signal.envelope().0;
        if !(lower > 0.0) {
            return Err(NetworkError::NonPositiveSignal { id, field, lower });
        }
    }
    Ok(())
}

/// The five-bus network used throughout the examples and tests: lines
/// (1,2), (1,3), (2,3), (3,4), (4,5) with susceptances -1.5, -1, -0.7, -1.8,
/// -1.2, conductance `ratio * |B|`, zero shunts and constant `k`, `V*`.
pub fn five_bus(k: f64, v_star: f64, g_ratio: f64) -> PowerNetwork {
    let nodes = (1..=5).map(|id| NodeParams::constant(id, k, v_star)).collect();
    let lines = [(1, 2, -1.5), (1, 3, -1.0), (2, 3, -0.7), (3, 4, -1.8), (4, 5, -1.2)]
        .into_iter()
        .map(|(a, b, s): (u32, u32, f64)| LineParams::new(a, b, s, g_ratio * s.abs()))
        .collect();
    PowerNetwork::new(nodes, lines).expect("five-bus network is valid")
}
