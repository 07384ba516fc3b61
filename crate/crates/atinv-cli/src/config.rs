//! Run configuration: the JSON document every subcommand reads.

use atinv_core::engine::EngineOptions;
use atinv_core::serialize::{FamilyDef, RatioDef, WitnessDef};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

/// Documented default seed for the randomized verification suites.
pub const DEFAULT_SEED: u64 = 1789;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// l¹ budget for compound-Poisson term truncation.
    pub exp_tol: f64,
    /// Largest acceptable bracket width before the run exits with the
    /// precision code.
    pub target_width: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { exp_tol: 1e-12, target_width: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub k_max: u32,
    pub l_max: u32,
    pub d_max: u32,
}

impl Default for Limits {
    fn default() -> Self {
        let o = EngineOptions::default();
        Self { k_max: o.k_max, l_max: o.l_max, d_max: o.d_max }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDef {
    pub r_grid: Vec<RatioDef>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<FamilyDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_b: Option<FamilyDef>,
    #[serde(default)]
    pub witness: WitnessDef,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepDef>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.version != CONFIG_VERSION {
            return Err(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.limits.k_max == 0 || self.limits.l_max == 0 || self.limits.d_max == 0 {
            return Err("limits must all be positive".into());
        }
        if !(self.tolerances.exp_tol > 0.0) || !(self.tolerances.target_width > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if self.workers == 0 {
            return Err("worker count must be positive".into());
        }
        if let Some(sweep) = &self.sweep {
            if sweep.r_grid.is_empty() {
                return Err("sweep grid must be nonempty".into());
            }
        }
        Ok(())
    }

    pub fn engine_options(&self) -> EngineOptions {
        EngineOptions {
            k_max: self.limits.k_max,
            l_max: self.limits.l_max,
            d_max: self.limits.d_max,
            exp_tol: self.tolerances.exp_tol,
            ..EngineOptions::default()
        }
    }
}
