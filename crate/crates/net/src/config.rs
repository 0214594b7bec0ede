//! TOML configuration for the challenger and worker daemons.

use std::path::Path;
use std::time::Duration;

use gputel_core::fingerprint::DeviceClassProfile;
use gputel_core::gemm::GemmParams;
use gputel_core::pow::PowParams;
use gputel_core::residency::{BandwidthModel, ProbeParams, DEFAULT_BLOCK_SIZE, DEFAULT_CHAL_BYTES};
use gputel_core::worksim::WorkerProfile;
use gputel_core::Salt;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChallengerConfig {
    /// `host:port` of the worker daemon.
    pub worker: String,
    #[serde(default = "default_session_id")]
    pub session_id: String,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub interval_ms: u64,
    /// Minimum acceptable solve rate, per second.
    pub lambda_min: f64,
    #[serde(default)]
    pub t0_ms: f64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub pow: PowParams,
    #[serde(default)]
    pub vdf: VdfConfig,
    #[serde(default)]
    pub gemm: GemmParams,
    #[serde(default)]
    pub residency: ResidencySection,
}

fn default_session_id() -> String {
    "gputel".into()
}

fn default_rounds() -> usize {
    50
}

fn default_timeout_ms() -> u64 {
    60_000
}

impl ChallengerConfig {
    pub fn t0_ns(&self) -> u64 {
        (self.t0_ms * 1e6).round() as u64
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.rounds == 0 {
            return Err(CliError::Config("rounds must be at least 1".into()));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min.is_finite()) {
            return Err(CliError::Config("lambda_min must be positive".into()));
        }
        if !(self.t0_ms >= 0.0) {
            return Err(CliError::Config("t0_ms must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VdfConfig {
    /// Modulus size when no explicit modulus is given.
    pub bits: u32,
    /// Public modulus, hex.
    pub modulus: Option<String>,
    pub instances: u32,
    pub t_min: u64,
    pub t_max: u64,
}

impl Default for VdfConfig {
    fn default() -> Self {
        Self {
            bits: 512,
            modulus: None,
            instances: 8,
            t_min: 1 << 10,
            t_max: 1 << 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidencySection {
    pub size_bytes: u64,
    pub block_size: u64,
    /// Upper bound of the uniform wait before each probe.
    pub t_max_ms: u64,
    /// Dataset seed, hex; drawn from `--seed` when absent.
    pub chal_seed: Option<Salt>,
    /// Classification threshold; defaults to the bandwidth-model midpoint.
    pub threshold_ns: Option<u64>,
    /// Dataset size the threshold is computed for, when it differs from `size_bytes`.
    pub modeled_bytes: Option<u64>,
    pub bandwidth: BandwidthModel,
    pub probe: ProbeParams,
    pub expected_class: Option<DeviceSpec>,
}

impl Default for ResidencySection {
    fn default() -> Self {
        Self {
            size_bytes: DEFAULT_CHAL_BYTES,
            block_size: DEFAULT_BLOCK_SIZE,
            t_max_ms: 100,
            chal_seed: None,
            threshold_ns: None,
            modeled_bytes: None,
            bandwidth: BandwidthModel::default(),
            probe: ProbeParams::default(),
            expected_class: None,
        }
    }
}

/// Device class as written in config files; shape fields fall back to the defaults.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub class_id: String,
    pub drift_seed: Salt,
    #[serde(default)]
    pub layer_spec: Option<Vec<(u32, u32)>>,
    #[serde(default)]
    pub reshape_schedule: Option<Vec<u32>>,
}

impl DeviceSpec {
    pub fn to_profile(&self) -> DeviceClassProfile {
        let mut p = DeviceClassProfile::new(self.class_id.clone(), self.drift_seed);
        if let Some(l) = &self.layer_spec {
            p.layer_spec = l.clone();
        }
        if let Some(r) = &self.reshape_schedule {
            p.reshape_schedule = r.clone();
        }
        p
    }
}

/// Worker profile file: `[profile]` plus an optional `[device]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerConfig {
    #[serde(default)]
    pub profile: WorkerProfile,
    #[serde(default)]
    pub device: Option<DeviceSpec>,
}
