use std::path::{Path, PathBuf};

use gpwlab_core::codebook::CodeRates;
use gpwlab_core::cq::Roles;
use gpwlab_core::pinching::DEFAULT_CLUSTER_TOL;
use gpwlab_core::rates::RateAllocation;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Largest integer rate accepted by the codebook commands.
const MAX_CODE_RATE: f64 = 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Rate,
    Exponent,
    Hyptest,
    Resolve,
    Decode,
    Secrecy,
    LemmaLa,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Rate => "rate",
            Command::Exponent => "exponent",
            Command::Hyptest => "hyptest",
            Command::Resolve => "resolve",
            Command::Decode => "decode",
            Command::Secrecy => "secrecy",
            Command::LemmaLa => "lemma-la",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    pub r: f64,
}

impl RatesConfig {
    pub fn allocation(&self) -> CliResult<RateAllocation> {
        Ok(RateAllocation::explicit(self.big_r, self.r1, self.r)?)
    }

    pub fn code_rates(&self) -> CliResult<CodeRates> {
        let int = |x: f64, name: &str| -> CliResult<u32> {
            if (0.0..=MAX_CODE_RATE).contains(&x) && x.fract() == 0.0 {
                Ok(x as u32)
            } else {
                Err(CliError::schema(format!("rate {name} = {x} must be an integer in [0, {MAX_CODE_RATE}] for codebook experiments")))
            }
        };
        Ok(CodeRates::new(int(self.big_r, "R")?, int(self.r1, "R1")?, int(self.r, "r")?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ResolveMode {
    #[default]
    Bivariate,
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub p_s: f64,
    pub noise_b: f64,
    pub noise_e: f64,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    /// Setup file, relative to the config file.
    pub input: Option<PathBuf>,
    pub roles: Option<Roles>,
    pub alpha: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub rates: Option<RatesConfig>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub cluster_tol: Option<f64>,
    /// Output directory, relative to the config file.
    pub out: Option<PathBuf>,
    /// hyptest: test thresholds; default 2^{R+R1+r} and 2^{R+R1}.
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub mode: Option<ResolveMode>,
    /// resolve: target registers; default the S role (bivariate) or E role (conditional).
    pub target: Option<Vec<String>>,
    /// rate: slacks for the automatic rate allocation.
    pub epsilons: Option<[f64; 3]>,
    /// secrecy: expurgation parameter.
    pub beta: Option<f64>,
    pub family: Option<FamilyConfig>,
    pub step: Option<f64>,
}

/// A parsed config together with its raw JSON (echoed in the summary) and
/// the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub raw: Value,
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn input_path(&self) -> CliResult<PathBuf> {
        let p = self.config.input.as_ref().ok_or_else(|| CliError::schema("config needs an `input` setup file"))?;
        Ok(self.base.join(p))
    }
}

pub fn load_config(path: &Path) -> CliResult<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::schema(format!("cannot read config {}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| CliError::schema(format!("config {}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_value(raw.clone()).map_err(|e| CliError::schema(format!("config {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, raw, base })
}

fn unit_open(x: f64, what: &str) -> CliResult<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(CliError::schema(format!("{what} = {x} must lie in (0, 1)")))
    }
}

impl ExperimentConfig {
    /// Checks the fields relevant to `cmd` before anything runs.
    pub fn validate(&self, cmd: Command) -> CliResult<()> {
        if let Some(c) = self.command {
            if c != cmd {
                return Err(CliError::schema(format!("config is for `{}`, invoked as `{}`", c.name(), cmd.name())));
            }
        }
        if let Some(a) = self.alpha {
            unit_open(a, "alpha")?;
        }
        if let Some(v) = &self.alphas {
            if v.is_empty() {
                return Err(CliError::schema("`alphas` is empty"));
            }
            v.iter().try_for_each(|&a| unit_open(a, "alpha"))?;
        }
        if self.trials == Some(0) {
            return Err(CliError::schema("`trials` must be positive"));
        }
        if let Some(t) = self.cluster_tol {
            if !(t > 0.0) {
                return Err(CliError::schema("`cluster_tol` must be positive"));
            }
        }
        if let Some(s) = self.step {
            if !(s > 0.0 && s <= 1.0) {
                return Err(CliError::schema("`step` must lie in (0, 1]"));
            }
        }
        if let Some(b) = self.beta {
            if !(b > 1.0) {
                return Err(CliError::schema("`beta` must exceed 1"));
            }
        }
        let needs_input = !matches!(cmd, Command::LemmaLa);
        if needs_input && self.input.is_none() {
            return Err(CliError::schema(format!("`{}` needs an `input` setup file", cmd.name())));
        }
        match cmd {
            Command::Exponent | Command::Resolve | Command::Decode | Command::Secrecy if self.rates.is_none() => {
                Err(CliError::schema(format!("`{}` needs `rates`", cmd.name())))
            }
            Command::Resolve | Command::Decode | Command::Secrecy => self.rates.unwrap().code_rates().map(|_| ()),
            Command::Hyptest if self.rates.is_none() && (self.m1.is_none() || self.m2.is_none()) => {
                Err(CliError::schema("`hyptest` needs `rates` or both `m1` and `m2`"))
            }
            Command::LemmaLa if self.family.is_none() => Err(CliError::schema("`lemma-la` needs `family`")),
            _ => Ok(()),
        }
    }

    pub fn cluster_tol(&self) -> f64 {
        self.cluster_tol.unwrap_or(DEFAULT_CLUSTER_TOL)
    }

    /// `alphas`, else `[alpha]`, else `default`.
    pub fn alpha_list(&self, default: &[f64]) -> Vec<f64> {
        self.alphas.clone().or(self.alpha.map(|a| vec![a])).unwrap_or_else(|| default.to_vec())
    }
}
