//! Scenario files, batch commands and report emission behind the `pinchflow` binary.

pub mod commands;
pub mod identities;
pub mod scenario;

pub use commands::{FlowRun, FlowSummary, cmd_certify, cmd_flow, cmd_identities, cmd_rescale, cmd_scan, exit_code, run_flow};
pub use identities::{IdentityReport, Kernels, run_identities};
pub use scenario::{CertifierParams, Scenario, SurfaceSpec};
