//! Run configuration: JSON schema version 1, merged with command line flags.

use std::path::PathBuf;

use pconvex::{BoundaryData, DirichletRhs, Domain, NewtonConfig, PrescribedData};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Verify,
    SolveSurface,
    SolveDirichlet,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Verify => "verify",
            Mode::SolveSurface => "solve-surface",
            Mode::SolveDirichlet => "solve-dirichlet",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    /// Optional; must match the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    // neither affects results, so both stay out of the report
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub allow_low_p: bool,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<DirichletConfig>,
}

fn default_n() -> usize {
    2
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            mode: None,
            n: default_n(),
            p: None,
            seed: 0,
            output: None,
            threads: None,
            allow_low_p: false,
            verify: VerifyConfig::default(),
            surface: None,
            dirichlet: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Cone samples for the operator suite.
    pub samples: usize,
    pub fd_samples: usize,
    pub concavity_samples: usize,
    pub directions: usize,
    /// Zero skips the near-boundary identity suite.
    pub near_boundary_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { samples: 10_000, fd_samples: 100, concavity_samples: 1000, directions: 8, near_boundary_samples: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceGrid {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for SurfaceGrid {
    fn default() -> Self {
        Self { n_theta: 32, n_phi: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomotopyConfig {
    pub steps: usize,
    /// Defaults to the largest of 0.1, 0.05, 0.01 admissible for `r2`.
    pub eps: Option<f64>,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        Self { steps: 4, eps: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    #[serde(default)]
    pub grid: SurfaceGrid,
    pub data: PrescribedData,
    #[serde(default)]
    pub homotopy: HomotopyConfig,
    #[serde(default)]
    pub newton: NewtonConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletConfig {
    #[serde(default = "default_domain")]
    pub domain: Domain,
    /// Nodes per side of the square grid.
    #[serde(default = "default_side")]
    pub grid: usize,
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryData,
    pub rhs: DirichletRhs,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub newton: NewtonConfig,
}

fn default_domain() -> Domain {
    Domain::Disk
}

fn default_side() -> usize {
    65
}

fn default_boundary() -> BoundaryData {
    BoundaryData::Constant { value: 0.0 }
}

fn default_beta() -> f64 {
    2.0
}

/// Parses a config document, rejecting unknown keys and other schema versions.
pub fn parse(text: &str) -> Result<RunConfig, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    match value.get("schema") {
        Some(serde_json::Value::Number(v)) if v.as_u64() == Some(SCHEMA_VERSION as u64) => {}
        Some(v) => return Err(format!("unsupported schema version {v}; expected {SCHEMA_VERSION}")),
        None => return Err(format!("missing key `schema`; expected \"schema\": {SCHEMA_VERSION}")),
    }
    serde_json::from_value(value).map_err(|e| format!("config: {e}"))
}
