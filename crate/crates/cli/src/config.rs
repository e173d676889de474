//! Experiment configs: TOML, or JSON with the same schema.

use std::path::{Path, PathBuf};

use brwtie::environment::EnvironmentModel;
use brwtie::pde::Domain;
use brwtie::simulate::PopulationControl;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub name: Option<String>,
    /// Inline environment; exclusive with `environment_file`.
    #[serde(default)]
    pub environment: Option<EnvironmentModel>,
    /// Path to an environment file, relative to the config file.
    #[serde(default)]
    pub environment_file: Option<PathBuf>,
    #[serde(default)]
    pub speed: SpeedParams,
    #[serde(default)]
    pub constants: ConstantsParams,
    #[serde(default)]
    pub psi: Option<PsiParams>,
    #[serde(default)]
    pub pde: Option<PdeParams>,
    #[serde(default)]
    pub simulate: Option<SimulateParams>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedParams {
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Bound on every KKT residual.
    #[serde(default = "default_kkt_tol")]
    pub tol: f64,
}

impl Default for SpeedParams {
    fn default() -> Self {
        SpeedParams { grid: default_grid(), tol: default_kkt_tol() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsParams {
    /// Bisection tolerance for λ_c and λ*.
    #[serde(default = "default_lambda_tol")]
    pub tol: f64,
    /// Shift of the killing barrier, f ≡ −μ.
    #[serde(default)]
    pub mu: f64,
}

impl Default for ConstantsParams {
    fn default() -> Self {
        ConstantsParams { tol: default_lambda_tol(), mu: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiParams {
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeParams {
    pub h: f64,
    #[serde(default = "default_domain")]
    pub domain: DomainKind,
    /// Spatial cells; chosen from h when absent.
    #[serde(default)]
    pub cells: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Halfline,
}

impl DomainKind {
    pub fn domain(self, h: f64) -> Domain {
        match self {
            DomainKind::Interval => Domain::Interval,
            DomainKind::Halfline => Domain::halfline(h),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub n: usize,
    pub trials: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    pub control: PopulationControl,
}

fn default_grid() -> usize {
    2048
}

fn default_kkt_tol() -> f64 {
    1e-6
}

fn default_lambda_tol() -> f64 {
    1e-8
}

fn default_domain() -> DomainKind {
    DomainKind::Interval
}

/// Command-line overrides, applied after loading.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub trials: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?
        };
        if let Some(file) = cfg.environment_file.take() {
            if cfg.environment.is_some() {
                return Err(ConfigError::new("give either environment or environment_file, not both"));
            }
            let file = path.parent().map_or(file.clone(), |d| d.join(&file));
            cfg.environment = Some(load_environment(&file)?);
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::new(e.to_string()))?;
        if cfg.environment_file.is_some() {
            return Err(ConfigError::new("environment_file needs a config path"));
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.schema != SCHEMA {
            return Err(ConfigError::new(format!("unsupported schema {}, expected {SCHEMA}", self.schema)));
        }
        match &self.environment {
            None => return Err(ConfigError::new("missing [environment]")),
            Some(env) => env.validate().map_err(|e| ConfigError::new(format!("environment: {e}")))?,
        }
        positive("speed.tol", self.speed.tol)?;
        positive("constants.tol", self.constants.tol)?;
        if self.speed.grid < 16 {
            return Err(ConfigError::new("speed.grid must be at least 16"));
        }
        if let Some(s) = &self.simulate {
            if s.n == 0 || s.trials == 0 {
                return Err(ConfigError::new("simulate.n and simulate.trials must be positive"));
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(g) = o.grid {
            self.speed.grid = g;
        }
        if let Some(t) = o.tol {
            positive("--tol", t)?;
            self.speed.tol = t;
            self.constants.tol = t;
        }
        if let Some(s) = self.simulate.as_mut() {
            if o.seed.is_some() {
                s.seed = o.seed;
            }
            if let Some(t) = o.trials {
                s.trials = t;
            }
        }
        self.check()
    }

    pub fn env(&self) -> &EnvironmentModel {
        self.environment.as_ref().expect("checked on load")
    }

    /// SHA-256 of the canonical JSON form, after overrides.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex(&Sha256::digest(&json))
    }
}

fn load_environment(path: &Path) -> Result<EnvironmentModel, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))
    }
}

fn positive(what: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(format!("{what} must be positive, got {v}")))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The shipped configs, compiled in.
pub fn shipped() -> Vec<(&'static str, &'static str)> {
    vec![
        ("homogeneous", include_str!("../../../configs/homogeneous.toml")),
        ("decreasing", include_str!("../../../configs/decreasing.toml")),
        ("increasing", include_str!("../../../configs/increasing.toml")),
        ("mixed", include_str!("../../../configs/mixed.toml")),
    ]
}
