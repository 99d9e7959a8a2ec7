//! Declarative run configuration. One JSON file drives data generation,
//! training, prediction, evaluation and comparison; a SHA-256 hash of the
//! canonical serialization (with the output directory blanked, so artifacts
//! can be relocated) is stamped into every artifact the run produces.

use pidmd::datagen::InitialProfile;
use pidmd::pidmd::{ParamFn, ParamMap};
use pidmd::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Synthetic data source driving the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// Random discrete system affine in the parameter features; `dt = 1`.
    Affine {
        dim: usize,
        spectral_radius: f64,
        noise_std: f64,
    },
    /// Periodic advection-diffusion solver; the parameter is the viscosity.
    Advdiff {
        grid: usize,
        length: f64,
        speed: f64,
        dt: f64,
        profile: InitialProfile,
    },
}

/// Parameter-feature declaration; funcs may be empty for a plain DMD run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub dim: usize,
    pub funcs: Vec<ParamFn>,
}

/// How raw parameters are rescaled before the feature functions see them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Normalization {
    /// Fit each coordinate of the training parameters to the default range.
    #[default]
    FitDefault,
    /// Fit each coordinate to `[lo, hi]`.
    Fit { lo: f64, hi: f64 },
    /// Use raw coordinates unchanged.
    Identity,
}

/// Truncation ranks: `tilde` for the lifted regression, `hat` for the
/// shared projection, `baseline` for both interpolation baselines and the
/// per-test direct fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ranks {
    pub tilde: usize,
    pub hat: usize,
    pub baseline: usize,
}

/// Prediction methods a run may exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact DMD fitted directly on each test trajectory (best case).
    Dmd,
    /// Parameter-affine operator regression.
    Pidmd,
    /// Pooled DMD with per-parameter mode interpolation.
    Stacked,
    /// Per-parameter reduced operators, interpolated.
    Rkoi,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dmd => "dmd",
            Method::Pidmd => "pidmd",
            Method::Stacked => "stacked",
            Method::Rkoi => "rkoi",
        }
    }

    /// Methods whose model is fitted once from the training sweep.
    pub fn is_parametric(self) -> bool {
        !matches!(self, Method::Dmd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub seed: u64,
    pub out_dir: String,
    pub data: DataSpec,
    pub param_map: MapSpec,
    #[serde(default)]
    pub normalization: Normalization,
    pub train_thetas: Vec<Vec<f64>>,
    pub test_thetas: Vec<Vec<f64>>,
    /// Transitions per training trajectory (after the transient skip).
    pub train_steps: usize,
    #[serde(default)]
    pub transient_skip: usize,
    /// Prediction transitions per test parameter.
    pub horizon: usize,
    pub ranks: Ranks,
    pub methods: Vec<Method>,
}

impl RunConfig {
    /// Parse, validate and apply command-line overrides.
    pub fn load(path: &Path, out_override: Option<&str>, seed_override: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("config parse: {e}")))?;
        if let Some(out) = out_override {
            cfg.out_dir = out.to_string();
        }
        if let Some(seed) = seed_override {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidInput("empty run name".into()));
        }
        if self.out_dir.is_empty() {
            return Err(Error::InvalidInput("empty output directory".into()));
        }
        if self.train_thetas.is_empty() {
            return Err(Error::InvalidInput("no training parameters".into()));
        }
        if self.test_thetas.is_empty() {
            return Err(Error::InvalidInput("no test parameters".into()));
        }
        let p = self.param_map.dim;
        for (which, thetas) in [("train", &self.train_thetas), ("test", &self.test_thetas)] {
            for (i, t) in thetas.iter().enumerate() {
                if t.len() != p {
                    return Err(Error::InvalidInput(format!(
                        "{which} parameter {i} has {} coordinates, map declares {p}",
                        t.len()
                    )));
                }
                if t.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "{which} parameter {i} has a non-finite coordinate"
                    )));
                }
            }
        }
        if self.train_steps == 0 {
            return Err(Error::InvalidInput("train_steps must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if self.ranks.tilde == 0 || self.ranks.hat == 0 || self.ranks.baseline == 0 {
            return Err(Error::InvalidInput("ranks must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods requested".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::InvalidInput(format!(
                    "method '{}' listed twice",
                    m.name()
                )));
            }
        }
        if matches!(self.data, DataSpec::Affine { .. }) && self.transient_skip != 0 {
            return Err(Error::InvalidInput(
                "transient_skip is only meaningful for the advection-diffusion source".into(),
            ));
        }
        if matches!(self.data, DataSpec::Advdiff { .. }) && p != 1 {
            return Err(Error::InvalidInput(format!(
                "the advection-diffusion source has a single parameter (viscosity), map declares {p}"
            )));
        }
        if let Normalization::Fit { lo, hi } = self.normalization {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidInput(format!(
                    "normalization range [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Hash of the canonical serialization with the output directory
    /// blanked: relocating artifacts does not change the run identity.
    pub fn config_hash(&self) -> String {
        let mut shadow = self.clone();
        shadow.out_dir = String::new();
        let canonical = serde_json::to_string(&shadow).expect("config serialization");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            use std::fmt::Write;
            write!(hex, "{b:02x}").unwrap();
        }
        hex
    }

    /// Parameter map with the configured normalization fitted on the
    /// training parameters.
    pub fn build_map(&self) -> Result<ParamMap> {
        let mut map = ParamMap::new(self.param_map.dim, self.param_map.funcs.clone())?;
        match self.normalization {
            Normalization::Identity => {}
            Normalization::FitDefault => map.fit_scaling_default(&self.train_thetas)?,
            Normalization::Fit { lo, hi } => map.fit_scaling(&self.train_thetas, lo, hi)?,
        }
        Ok(map)
    }

    /// Sampling interval of the configured data source.
    pub fn data_dt(&self) -> f64 {
        match &self.data {
            DataSpec::Affine { .. } => 1.0,
            DataSpec::Advdiff { dt, .. } => *dt,
        }
    }
}
