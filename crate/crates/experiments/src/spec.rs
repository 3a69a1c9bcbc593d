use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use irs_wpcn::sca::ScaOptions;
use irs_wpcn::scenario::SystemConfig;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Certified value of the rank relaxation. Not achievable in general.
    UpperBound,
    UserAdaptive,
    /// Relaxation followed by Gaussian randomisation.
    UserAdaptiveSdr,
    /// Equal to the static optimum, so it is reported from that solver.
    UlAdaptive,
    Static,
    General,
    Hybrid,
    Random,
    NoIrs,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::UpperBound,
        Scheme::UserAdaptive,
        Scheme::UserAdaptiveSdr,
        Scheme::UlAdaptive,
        Scheme::Static,
        Scheme::General,
        Scheme::Hybrid,
        Scheme::Random,
        Scheme::NoIrs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::UpperBound => "upper_bound",
            Scheme::UserAdaptive => "user_adaptive",
            Scheme::UserAdaptiveSdr => "user_adaptive_sdr",
            Scheme::UlAdaptive => "ul_adaptive",
            Scheme::Static => "static",
            Scheme::General => "general",
            Scheme::Hybrid => "hybrid",
            Scheme::Random => "random",
            Scheme::NoIrs => "no_irs",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| ExperimentError::UnknownScheme(s.to_string()))
    }
}

/// Quantity varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "P_A_dbm")]
    HapPowerDbm,
    #[serde(rename = "N")]
    Elements,
    #[serde(rename = "J")]
    Vectors,
    #[serde(rename = "irs_x")]
    IrsX,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::HapPowerDbm => "P_A_dbm",
            Axis::Elements => "N",
            Axis::Vectors => "J",
            Axis::IrsX => "irs_x",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

impl Profile {
    pub fn config(self) -> SystemConfig {
        match self {
            Profile::Desk => SystemConfig::desk(),
            Profile::Paper => SystemConfig::paper(),
        }
    }
}

fn default_vectors() -> usize {
    2
}

fn default_random_trials() -> usize {
    1
}

fn default_sdr_samples() -> usize {
    irs_wpcn::sdr::DEFAULT_SAMPLES
}

fn default_sdr_tol() -> f64 {
    1e-9
}

/// One sweep: every combination of axis value, seed and scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// System config TOML. Relative paths resolve against the spec file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_config: Option<PathBuf>,
    /// Built-in config used when `base_config` is absent.
    #[serde(default)]
    pub profile: Profile,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Per-axis mean/std file. Defaults to `<output stem>_summary.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    /// `J` for the general and hybrid schemes when it is not the axis.
    #[serde(default = "default_vectors")]
    pub vectors: usize,
    #[serde(default = "default_random_trials")]
    pub random_trials: usize,
    #[serde(default = "default_sdr_samples")]
    pub sdr_samples: usize,
    #[serde(default = "default_sdr_tol")]
    pub sdr_tol: f64,
    #[serde(default)]
    pub solver: ScaOptions,
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| ExperimentError::Toml(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| ExperimentError::Toml(e.to_string()))
    }

    /// Reads a spec and resolves its relative paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        let mut spec = Self::from_toml_str(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [&mut spec.base_config, &mut spec.summary].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        if spec.output.is_relative() {
            spec.output = dir.join(&spec.output);
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.schemes.is_empty() || self.seeds.is_empty() {
            return Err(ExperimentError::Spec("values, schemes and seeds must be nonempty".into()));
        }
        if matches!(self.axis, Axis::Elements | Axis::Vectors) {
            if let Some(v) = self.values.iter().find(|v| !(v.fract() == 0.0 && **v >= 0.0)) {
                return Err(ExperimentError::Spec(format!(
                    "{} values must be nonnegative integers, got {v}",
                    self.axis.as_str()
                )));
            }
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(ExperimentError::Spec("axis values must be finite".into()));
        }
        if self.random_trials == 0 || self.sdr_samples == 0 {
            return Err(ExperimentError::Spec("random_trials and sdr_samples must be positive".into()));
        }
        self.solver.validate()?;
        Ok(())
    }

    pub fn summary_path(&self) -> PathBuf {
        self.summary.clone().unwrap_or_else(|| {
            let stem = self.output.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
            self.output.with_file_name(format!("{stem}_summary.csv"))
        })
    }

    pub fn base(&self) -> Result<SystemConfig> {
        match &self.base_config {
            Some(p) => Ok(SystemConfig::load(p)?),
            None => Ok(self.profile.config()),
        }
    }

    /// Config and `J` for one work item.
    pub fn point(&self, base: &SystemConfig, value: f64, seed: u64) -> Result<(SystemConfig, usize)> {
        let mut cfg = base.clone();
        cfg.seed = seed;
        let mut j = self.vectors;
        match self.axis {
            Axis::HapPowerDbm => cfg.hap_power_dbm = value,
            Axis::Elements => cfg.num_elements = value as usize,
            Axis::Vectors => j = value as usize,
            Axis::IrsX => cfg.irs_pos[0] = value,
        }
        cfg.validate()?;
        Ok((cfg, j))
    }
}
