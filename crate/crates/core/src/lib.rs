//! Desk-scale side-channel laboratory.
//!
//! Simulates an AES-256 engine behind a signature-attenuating power-delivery
//! network (a digitally biased cascoded current-source bank with a
//! switched-mode control loop), evaluates it with correlation and Welch-t
//! leakage analyses, reproduces the supply-drop attack that re-biases the
//! current sources into their low-impedance linear region, and models the
//! dual-ring-oscillator detector that catches that attack.
//!
//! The crate is organized around two strategy registries selected by name at
//! runtime: delivery modes ([`scenario::ScenarioRegistry`]) and attack
//! methods ([`sca::MethodRegistry`]).

// Validation deliberately writes `!(x > 0.0)` so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aes;
pub mod config;
pub mod detector;
pub mod error;
pub mod leakage;
pub mod pdn;
pub mod report;
pub mod rng;
pub mod sca;
pub mod scenario;
pub mod trace_io;

pub use config::{AttackConfig, DeviceConfig, ExperimentConfig};
pub use error::{AnalysisError, ConfigError, SimError, TraceIoError};
pub use report::RunReport;
