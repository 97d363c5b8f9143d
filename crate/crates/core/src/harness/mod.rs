//! Configuration, random generators and experiment drivers.

pub mod config;
pub mod experiments;
pub mod generate;
pub mod report;

pub use config::ExperimentConfig;
pub use experiments::{
    boundary_energy, doubling_sup, verify_ahlfors, verify_doubling, verify_equivalences,
    verify_extension_bound, verify_roundtrip, verify_trace_bound,
};
pub use generate::{generate, generate_boundary, Family, GenParams, Generated};
pub use report::{Check, Outcome, RatioReport, RatioSample};
