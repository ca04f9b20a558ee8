//! Experiment configuration file (TOML) and command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sgpuq::data::{CaseSplit, NoiseModel, DEFAULT_SIZES};
use sgpuq::inference::{ChainConfig, LikelihoodSpec};
use sgpuq::model::SgpModel;
use sgpuq::sampling::ParamBox;
use sgpuq::SgpParams;

use crate::error::CliError;

/// Every setting of a pipeline run. Missing sections take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; each subsystem draws from its own stream of it.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub model: SgpModel,
    pub prior: ParamBox,
    pub simulate: SimulateConfig,
    pub data: DataConfig,
    pub sensitivity: SensitivityConfig,
    pub inference: InferenceConfig,
    pub predict: PredictConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            model: SgpModel::default(),
            prior: ParamBox::sgp_default(),
            simulate: SimulateConfig::default(),
            data: DataConfig::default(),
            sensitivity: SensitivityConfig::default(),
            inference: InferenceConfig::default(),
            predict: PredictConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub params: SgpParams,
    /// Pillar height in nm.
    pub size: f64,
    /// Applied strain magnitude at which the εᵖ profile is written.
    pub profile_strain: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            params: SgpParams::reference(),
            size: 500.0,
            profile_strain: 0.008,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset directory to ingest. When absent, data are synthesised from
    /// `truth`.
    pub dir: Option<PathBuf>,
    pub truth: SgpParams,
    pub sizes: Vec<f64>,
    pub replicates: usize,
    pub noise: NoiseModel,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dir: None,
            truth: SgpParams {
                l_dis: 150.0,
                ..SgpParams::reference()
            },
            sizes: DEFAULT_SIZES.to_vec(),
            replicates: 5,
            noise: NoiseModel::default(),
        }
    }
}

/// Model analysed by the sensitivity command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SensitivityModel {
    Sgp,
    /// 1·x1 + 2·x2 + 3·x3 on the unit cube.
    Additive,
    Ishigami,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub model: SensitivityModel,
    /// Base sample size N of each Saltelli design.
    pub n: usize,
    pub replicates: usize,
    pub sizes: Vec<f64>,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            model: SensitivityModel::Sgp,
            n: 1000,
            replicates: 1,
            sizes: DEFAULT_SIZES.to_vec(),
        }
    }
}

/// Posterior targeted by the calibrate command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// The model likelihood of the training data.
    Sgp,
    /// Independent normals centred in the prior box with std
    /// `gaussian_std_fraction` of each range.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseName {
    #[serde(rename = "I")]
    One,
    #[serde(rename = "II")]
    Two,
}

/// A named case or an explicit split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaseChoice {
    Named(CaseName),
    Custom(CaseSplit),
}

impl CaseChoice {
    pub fn split(&self) -> CaseSplit {
        match self {
            CaseChoice::Named(CaseName::One) => CaseSplit::case_i(),
            CaseChoice::Named(CaseName::Two) => CaseSplit::case_ii(),
            CaseChoice::Custom(c) => c.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub target: Target,
    pub gaussian_std_fraction: f64,
    /// Chain settings; the seed is replaced by the root seed.
    pub chain: ChainConfig,
    pub likelihood: LikelihoodSpec,
    pub case: CaseChoice,
    /// Samples file to summarise instead of running the sampler.
    pub resume_from: Option<PathBuf>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            target: Target::Sgp,
            gaussian_std_fraction: 0.1,
            chain: ChainConfig::default(),
            likelihood: LikelihoodSpec::default(),
            case: CaseChoice::Named(CaseName::One),
            resume_from: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    /// Samples file; defaults to `<out_dir>/posterior.csv`.
    pub posterior: Option<PathBuf>,
    /// Posterior draws propagated per size.
    pub n_draws: usize,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            posterior: None,
            n_draws: 100,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serialises to TOML")
    }

    /// Structural checks that do not touch the file system.
    pub fn validate(&self) -> Result<(), CliError> {
        let core = |r: sgpuq::Result<()>| r.map_err(|e| invalid(e.to_string()));
        core(self.prior.validate())?;
        if self.prior.dim() != sgpuq::material::N_CALIBRATED {
            return Err(invalid(format!(
                "prior must have {} ranges, found {}",
                sgpuq::material::N_CALIBRATED,
                self.prior.dim()
            )));
        }
        core(self.model.program.validate())?;
        core(self.simulate.params.validate())?;
        core(self.data.truth.validate())?;
        core(self.data.noise.validate())?;
        core(self.inference.chain.validate())?;
        core(self.inference.case.split().validate())?;
        let positive = |name: &str, sizes: &[f64]| {
            if sizes.is_empty() || sizes.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                Err(invalid(format!("{name} must be a non-empty list of positive sizes")))
            } else {
                Ok(())
            }
        };
        positive("data.sizes", &self.data.sizes)?;
        positive("sensitivity.sizes", &self.sensitivity.sizes)?;
        positive("simulate.size", &[self.simulate.size])?;
        if self.data.replicates == 0 {
            return Err(invalid("data.replicates must be >= 1"));
        }
        if self.sensitivity.n < 2 || self.sensitivity.replicates == 0 {
            return Err(invalid("sensitivity.n must be >= 2 and sensitivity.replicates >= 1"));
        }
        if self.predict.n_draws == 0 {
            return Err(invalid("predict.n_draws must be >= 1"));
        }
        let f = self.inference.gaussian_std_fraction;
        if !(f > 0.0 && f.is_finite()) {
            return Err(invalid("inference.gaussian_std_fraction must be positive"));
        }
        let s = self.simulate.profile_strain;
        if !(s > 0.0 && s <= self.model.program.final_strain.abs()) {
            return Err(invalid("simulate.profile_strain must lie within the loading program"));
        }
        Ok(())
    }

    /// Path of the posterior samples file used by `predict`.
    pub fn posterior_path(&self) -> PathBuf {
        self.predict
            .posterior
            .clone()
            .unwrap_or_else(|| self.out_dir.join("posterior.csv"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn named_and_custom_cases() {
        let cfg = ExperimentConfig::parse("[inference]\ncase = \"II\"\n").unwrap();
        assert_eq!(cfg.inference.case.split(), CaseSplit::case_ii());
        let cfg = ExperimentConfig::parse(
            "[inference.case]\nlabel = \"x\"\ntraining = [300.0]\ntesting = [200.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.inference.case.split().training, vec![300.0]);
    }

    #[test]
    fn schema_errors_are_config_errors() {
        for text in [
            "sede = 3",
            "[sensitivity]\nn = 1",
            "[data]\nsizes = []",
            "[inference.chain]\nchain_length = 10",
            "[[prior]]\nname = \"a\"\nlower = 1.0\nupper = 0.0",
            "[simulate]\nprofile_strain = 0.5",
        ] {
            assert!(matches!(ExperimentConfig::parse(text), Err(CliError::Config(_))), "{text}");
        }
    }
}
