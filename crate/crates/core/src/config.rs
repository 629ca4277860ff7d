//! Experiment configuration: TOML schema, validation, and assembly of the
//! runtime pieces (environment, resolved parameters, run settings).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::AgentKind;
use crate::attackers::AttackerKind;
use crate::dataprep;
use crate::env::{ArmSet, ContextSource, Environment};
use crate::params::ModelParams;
use crate::{Error, Result};

/// Top-level config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub agent: AgentKind,
    pub attacker: AttackerConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Synthetic,
    Features,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub kind: EnvKind,
    /// Arm-draw seed (synthetic mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Feature file path (features mode), relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_file: Option<PathBuf>,
    /// 0-based target arm; defaults to the last arm (synthetic) or the
    /// feature file's recorded target (features).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_arm: Option<usize>,
    #[serde(default = "default_noise_var")]
    pub noise_var: f64,
}

fn default_noise_var() -> f64 {
    0.01
}

/// Model constants; defaults are the synthetic-experiment values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_sqrt2")]
    pub l: f64,
    #[serde(default = "default_sqrt2")]
    pub s: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_d() -> usize {
    6
}
fn default_k() -> usize {
    10
}
fn default_sqrt2() -> f64 {
    std::f64::consts::SQRT_2
}
fn default_r() -> f64 {
    0.1
}
fn default_lambda() -> f64 {
    2.0
}
fn default_delta() -> f64 {
    0.1
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: default_d(),
            k: default_k(),
            l: default_sqrt2(),
            s: default_sqrt2(),
            r: default_r(),
            lambda: default_lambda(),
            delta: default_delta(),
        }
    }
}

/// How the attacker obtains its margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaSource {
    /// Estimate from environment probes, shrunk by `probe_shrink`.
    Probe,
    /// Use the configured `alpha` verbatim.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerConfig {
    pub kind: AttackerKind,
    #[serde(default = "default_alpha_source")]
    pub alpha_source: AlphaSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Safety factor applied to the probe estimate (probes cannot certify
    /// the supremum over the whole context domain).
    #[serde(default = "default_probe_shrink")]
    pub probe_shrink: f64,
    /// Floor for the resolved margin.
    #[serde(default = "default_alpha_min")]
    pub alpha_min: f64,
}

fn default_alpha_source() -> AlphaSource {
    AlphaSource::Probe
}
fn default_probe_shrink() -> f64 {
    0.9
}
fn default_alpha_min() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: u64,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Cost/regret curve checkpoints; defaults to powers of ten plus the
    /// horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub record_rounds: bool,
    /// Probe sample size for synthetic environment validation.
    #[serde(default = "default_probes")]
    pub validation_probes: usize,
}

fn default_probes() -> usize {
    10_000
}

/// Everything needed to run the configured experiment.
#[derive(Debug)]
pub struct BuiltExperiment {
    pub env: Environment,
    pub params: ModelParams,
    pub agent: AgentKind,
    pub attacker: AttackerKind,
    pub n_trials: usize,
    pub master_seed: u64,
    pub checkpoints: Vec<u64>,
    pub out_dir: PathBuf,
    pub record_rounds: bool,
    pub dataset: String,
    pub alpha_source: String,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Structural validation: required fields per mode, ranges, referential
    /// consistency. Does not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        match self.environment.kind {
            EnvKind::Synthetic => {
                if self.environment.seed.is_none() {
                    return fail("synthetic environment requires environment.seed".into());
                }
            }
            EnvKind::Features => {
                if self.environment.feature_file.is_none() {
                    return fail("features environment requires environment.feature_file".into());
                }
            }
        }
        if !(self.environment.noise_var.is_finite() && self.environment.noise_var >= 0.0) {
            return fail(format!(
                "noise_var must be finite and >= 0, got {}",
                self.environment.noise_var
            ));
        }
        // Range-check the model constants with a placeholder margin.
        self.model_params(0.25)
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(t) = self.environment.target_arm {
            if t >= self.model.k {
                return fail(format!(
                    "target_arm {t} out of range for k = {}",
                    self.model.k
                ));
            }
        }
        match self.attacker.alpha_source {
            AlphaSource::Fixed => match self.attacker.alpha {
                None => return fail("alpha_source = \"fixed\" requires attacker.alpha".into()),
                Some(a) => {
                    if !(a > 0.0 && a < 0.5) {
                        return fail(format!("attacker.alpha must lie in (0, 1/2), got {a}"));
                    }
                }
            },
            AlphaSource::Probe => {}
        }
        if !(self.attacker.probe_shrink > 0.0 && self.attacker.probe_shrink <= 1.0) {
            return fail(format!(
                "probe_shrink must lie in (0, 1], got {}",
                self.attacker.probe_shrink
            ));
        }
        if !(self.attacker.alpha_min > 0.0 && self.attacker.alpha_min < 0.5) {
            return fail(format!(
                "alpha_min must lie in (0, 1/2), got {}",
                self.attacker.alpha_min
            ));
        }
        if self.run.n_trials == 0 {
            return fail("run.n_trials must be >= 1".into());
        }
        if self.run.horizon == 0 {
            return fail("run.horizon must be >= 1".into());
        }
        if let Some(cps) = &self.run.checkpoints {
            if let Some(&max) = cps.iter().max() {
                if max > self.run.horizon {
                    return fail(format!(
                        "checkpoint {max} exceeds horizon {}",
                        self.run.horizon
                    ));
                }
            }
        }
        Ok(())
    }

    fn model_params(&self, alpha: f64) -> Result<ModelParams> {
        ModelParams {
            d: self.model.d,
            k: self.model.k,
            l: self.model.l,
            s: self.model.s,
            r: self.model.r,
            lambda: self.model.lambda,
            delta: self.model.delta,
            alpha,
            horizon: self.run.horizon,
        }
        .validated()
    }

    /// Build the environment, resolve the attack margin, and assemble run
    /// settings. `base_dir` anchors relative feature-file paths.
    pub fn build(&self, base_dir: &Path) -> Result<BuiltExperiment> {
        self.validate()?;
        let placeholder = self.model_params(0.25)?;
        let (env, dataset) = match self.environment.kind {
            EnvKind::Synthetic => {
                let seed = self.environment.seed.expect("validated");
                let target = self.environment.target_arm.unwrap_or(self.model.k - 1);
                let env = Environment::synthetic(
                    &placeholder,
                    seed,
                    self.environment.noise_var,
                    target,
                    self.run.validation_probes,
                )?;
                (env, "synthetic".to_string())
            }
            EnvKind::Features => {
                let rel = self.environment.feature_file.as_ref().expect("validated");
                let path = if rel.is_absolute() {
                    rel.clone()
                } else {
                    base_dir.join(rel)
                };
                let ff = dataprep::load_features(&path)?;
                if ff.d != self.model.d {
                    return Err(Error::Config(format!(
                        "feature file dimension {} does not match model.d = {}",
                        ff.d, self.model.d
                    )));
                }
                if ff.items.len() != self.model.k {
                    return Err(Error::Config(format!(
                        "feature file has {} arms but model.k = {}",
                        ff.items.len(),
                        self.model.k
                    )));
                }
                let target = self.environment.target_arm.unwrap_or(ff.meta.target_arm);
                let dataset = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "features".to_string());
                let env = Environment::new(
                    ArmSet::new(ff.items),
                    ContextSource::Pool(ff.users),
                    self.environment.noise_var,
                    target,
                    &placeholder,
                    0, // pool validation sweeps the whole pool; no rng needed
                    self.run.validation_probes,
                )?;
                (env, dataset)
            }
        };
        let (alpha, alpha_source) = match self.attacker.alpha_source {
            AlphaSource::Fixed => (self.attacker.alpha.expect("validated"), "fixed"),
            AlphaSource::Probe => (
                (env.probe_alpha() * self.attacker.probe_shrink).max(self.attacker.alpha_min),
                "probe",
            ),
        };
        let params = placeholder.with_alpha(alpha).validated()?;
        let checkpoints = self
            .run
            .checkpoints
            .clone()
            .unwrap_or_else(|| crate::harness::default_checkpoints(self.run.horizon));
        Ok(BuiltExperiment {
            env,
            params,
            agent: self.agent,
            attacker: self.attacker.kind,
            n_trials: self.run.n_trials,
            master_seed: self.run.master_seed,
            checkpoints,
            out_dir: self.run.out_dir.clone(),
            record_rounds: self.run.record_rounds,
            dataset,
            alpha_source: alpha_source.to_string(),
        })
    }
}
