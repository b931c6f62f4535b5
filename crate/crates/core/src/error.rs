use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Violations of the network sign conventions and topology rules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("network has no nodes")]
    Empty,
    #[error("duplicate node id {id}")]
    DuplicateNode { id: u32 },
    #[error("line ({from}, {to}) references unknown node {id}")]
    UnknownNode { from: u32, to: u32, id: u32 },
    #[error("line ({from}, {to}) is a self-loop")]
    SelfLoop { from: u32, to: u32 },
    #[error("duplicate line between nodes {from} and {to}")]
    DuplicateLine { from: u32, to: u32 },
    #[error("line ({from}, {to}) has susceptance {value}; susceptance must be negative")]
    Susceptance { from: u32, to: u32, value: f64 },
    #[error("line ({from}, {to}) has conductance {value}; conductance must be nonnegative")]
    Conductance { from: u32, to: u32, value: f64 },
    #[error("node {id}: time constant {value} must be positive")]
    TimeConstant { id: u32, value: f64 },
    #[error("node {id}: shunt susceptance {value} must be nonnegative")]
    Shunt { id: u32, value: f64 },
    #[error("node {id}: {field} must stay positive but its lower envelope is {lower}")]
    NonPositiveSignal { id: u32, field: &'static str, lower: f64 },
    #[error("node {id}: {field} is not finite")]
    NonFinite { id: u32, field: &'static str },
    #[error("network is disconnected: node {id} is unreachable from node {root}")]
    Disconnected { root: u32, id: u32 },
}

/// Scenario-file failures. Every variant carries the file it came from.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: cannot read file: {source}")]
    Io {
        origin: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("{origin}: field `{field}`: {message}")]
    Invalid {
        origin: String,
        field: String,
        message: String,
    },
    #[error("{origin}: {source}")]
    Network {
        origin: String,
        #[source]
        source: NetworkError,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("gain k[{index}] = {value} must be positive")]
    NonPositiveGain { index: usize, value: f64 },
    #[error("expected a {expected} interaction matrix, got {got}")]
    WrongKind {
        expected: &'static str,
        got: &'static str,
    },
    #[error("eigenvalue iteration did not converge")]
    EigenFailure,
    #[error("equilibrium system is singular: {0}")]
    Singular(String),
    #[error("drive b[{index}] = {value} must be positive")]
    NonPositiveDrive { index: usize, value: f64 },
    #[error("component {index} = {value} is outside the logarithm's domain")]
    LogDomain { index: usize, value: f64 },
    #[error("homogeneity weight r[{index}] = {value} must lie in (0, 1)")]
    Weight { index: usize, value: f64 },
    #[error("angle bound beta = {0} must lie in [0, pi/2)")]
    AngleBound(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("step size {dt:e} fell below dt_min at t = {t}; state = {state:?}")]
    StepUnderflow { t: f64, dt: f64, state: Vec<f64> },
    #[error("non-finite state at t = {t}: {state:?}")]
    NonFinite { t: f64, state: Vec<f64> },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("trajectories do not share a time grid: {0}")]
    GridMismatch(String),
    #[error("initial conditions are not ordered componentwise (node index {index})")]
    Unordered { index: usize },
    #[error("trajectory too short: {0}")]
    TooShort(String),
    #[error("trajectory touches the boundary at t = {t}, node index {index}")]
    Boundary { t: f64, index: usize },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trajectory CSV {path}: {message}")]
    Csv { path: String, message: String },
}
