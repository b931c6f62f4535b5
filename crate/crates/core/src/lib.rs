//! Voltage dynamics of power networks under quadratic droop control.
//!
//! Each busbar runs a quadratic droop controller whose input is the AC
//! reactive power injected at that node. The closed loop is a Lotka-Volterra
//! system
//!
//! ```text
//! diag(tau) dV/dt = diag(V) (Psi(theta(t)) V + b(t)),   b_i = k_i V_i*
//! ```
//!
//! evolving on the nonnegative orthant. The crate builds the network and its
//! interaction matrices ([`network`], [`model`]), evaluates time-varying
//! parameters ([`signals`]), integrates trajectories ([`sim`]), issues
//! structural and stability certificates ([`certify`]) and checks
//! trajectory-level properties ([`verify`]). Scenario files, CSV export and
//! run bundles live in [`config`] and [`run`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod config;
mod error;
pub mod model;
pub mod network;
pub mod run;
pub mod signals;
pub mod sim;
pub mod verify;

pub use certify::{CertificateReport, EquilibriumResult, Location, Witness};
pub use config::{CheckName, Mode, ScenarioConfig};
pub use error::{ConfigError, Error, NetworkError, Result};
pub use model::{InteractionMatrix, MatrixKind};
pub use network::{LineParams, NodeParams, PowerNetwork};
pub use signals::{FrozenScenario, Signal};
pub use sim::{IntegratorSettings, Trajectory};
pub use verify::PropertyReport;

