//! Scenario configuration: a versioned JSON file with exactly one
//! initial-data block. Unknown keys are rejected so a typo cannot silently
//! change a run.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use granuflow_core::jko::JkoConfig;
use granuflow_core::measures::{disintegrate_initial, KineticCloud, ProfileState};
use granuflow_core::scenarios::{self, Rho0};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    /// Seed for sampled families; kept mandatory across the board so reruns
    /// are reproducible byte for byte.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub initial: InitialData,
    pub jko: JkoSettings,
    #[serde(default)]
    pub oracles: OracleToggles,
    #[serde(default = "default_true")]
    pub plots: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// Phase-space samples from a CSV file (`x,v,weight` with header).
    Csv { path: PathBuf, label_bins: usize },
    /// The N-species family: counting labels `a_i = i/N` over a smooth
    /// initial density.
    DiscreteLabels {
        n_labels: usize,
        particles_per_label: usize,
        rho0: Rho0Kind,
    },
    /// Seeded truncated-Gaussian cloud.
    GaussianBox {
        r_x: f64,
        r_v: f64,
        samples: usize,
        label_bins: usize,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rho0Kind {
    Uniform,
    TruncatedQuadratic,
}

impl From<Rho0Kind> for Rho0 {
    fn from(k: Rho0Kind) -> Self {
        match k {
            Rho0Kind::Uniform => Rho0::Uniform,
            Rho0Kind::TruncatedQuadratic => Rho0::TruncatedQuadratic,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JkoSettings {
    pub tau: f64,
    pub horizon: f64,
    pub r_x: f64,
    pub r_v: f64,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_max_inner_iters")]
    pub max_inner_iters: usize,
}

fn default_solver_tol() -> f64 {
    1e-8
}

fn default_max_inner_iters() -> usize {
    10_000
}

impl JkoSettings {
    pub fn to_core(&self) -> JkoConfig {
        JkoConfig {
            tau: self.tau,
            horizon: self.horizon,
            r_x: self.r_x,
            r_v: self.r_v,
            solver_tol: self.solver_tol,
            max_inner_iters: self.max_inner_iters,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleToggles {
    pub characteristics: bool,
    pub second_order: bool,
    pub burgers: bool,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: ScenarioConfig = serde_json::from_str(&text)
            .map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(format!(
                "config {} has schema {}, this build supports {SCHEMA_VERSION}",
                path.display(),
                cfg.schema
            ));
        }
        if !(cfg.jko.tau > 0.0 && cfg.jko.horizon > 0.0) {
            return Err("tau and horizon must be positive".into());
        }
        Ok(cfg)
    }

    /// Builds the initial product state this scenario starts from.
    pub fn build_initial(&self) -> Result<ProfileState, String> {
        let state = match &self.initial {
            InitialData::Csv { path, label_bins } => {
                let cloud = KineticCloud::from_csv_path(path)
                    .map_err(|e| format!("loading cloud {}: {e}", path.display()))?;
                disintegrate_initial(&cloud, *label_bins).map_err(|e| e.to_string())?
            }
            InitialData::DiscreteLabels { n_labels, particles_per_label, rho0 } => {
                scenarios::discrete_labels_state(*n_labels, *particles_per_label, (*rho0).into())
                    .map_err(|e| e.to_string())?
            }
            InitialData::GaussianBox { r_x, r_v, samples, label_bins } => {
                let cloud = scenarios::gaussian_box_cloud(*r_x, *r_v, *samples, self.seed)
                    .map_err(|e| e.to_string())?;
                disintegrate_initial(&cloud, *label_bins).map_err(|e| e.to_string())?
            }
        };
        if state.realized_radius() > self.jko.r_x + 1e-9 {
            return Err(format!(
                "initial data has support radius {} but jko.r_x = {}",
                state.realized_radius(),
                self.jko.r_x
            ));
        }
        Ok(state)
    }
}
