//! Per-command JSON configuration.
//!
//! A configuration file is either a plain command config or a `manifest.json`
//! from an earlier run, in which case the embedded effective config is used.
//! Relative input paths resolve against the directory of the file they appear
//! in and are stored absolute in the effective config.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use stmado::fit::{FitOptions, Scheme};
use stmado::lattice::LagSets;
use stmado::madogram::MarginMode;
use stmado::margins::MarginOptions;
use stmado::models::{Family, ModelSpec};
use stmado::permtest::DEFAULT_REPLICATES;
use stmado::simulate::SimConfig;

use crate::failure::{CliResult, Failure};
use crate::manifest::{config_digest, Manifest};

pub trait CommandConfig: Serialize + DeserializeOwned {
    const NAME: &'static str;
    /// Stochastic commands refuse to run without a seed.
    const NEEDS_SEED: bool;

    fn seed_mut(&mut self) -> &mut Option<u64>;

    fn inputs_mut(&mut self) -> Vec<&mut PathBuf> {
        Vec::new()
    }

    fn validate(&self) -> CliResult<()> {
        Ok(())
    }
}

/// Reads, overrides, resolves and validates a command configuration.
pub fn load<C: CommandConfig>(path: &Path, seed_override: Option<u64>) -> CliResult<C> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::from(e).context(path.display()))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::from(e).context(path.display()))?;
    if is_manifest(&value) {
        let manifest: Manifest = serde_json::from_value(value)?;
        if manifest.command != C::NAME {
            return Err(Failure::config(format!(
                "manifest was written by `{}`, not `{}`",
                manifest.command,
                C::NAME
            )));
        }
        if config_digest(&manifest.config) != manifest.config_sha256 {
            return Err(Failure::config("manifest config does not match its recorded digest"));
        }
        value = manifest.config;
    }
    let mut config: C = serde_json::from_value(value).map_err(|e| Failure::from(e).context(path.display()))?;
    if seed_override.is_some() {
        *config.seed_mut() = seed_override;
    }
    if C::NEEDS_SEED && config.seed_mut().is_none() {
        return Err(Failure::config(format!(
            "`{}` is stochastic: set \"seed\" in the config or pass --seed",
            C::NAME
        )));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    for input in config.inputs_mut() {
        let resolved = if input.is_absolute() {
            input.clone()
        } else {
            base.join(&*input)
        };
        if !resolved.is_file() {
            return Err(Failure::config(format!(
                "input file {} does not exist",
                resolved.display()
            )));
        }
        *input = resolved.canonicalize()?;
    }
    config.validate()?;
    Ok(config)
}

fn is_manifest(value: &serde_json::Value) -> bool {
    ["command", "config", "config_sha256"]
        .iter()
        .all(|k| value.get(k).is_some())
}

/// The configured lag sets, or the standard sets trimmed to the series length.
pub fn lags_or_default(lags: &Option<LagSets>, t_len: usize) -> LagSets {
    lags.clone()
        .unwrap_or_else(|| LagSets::standard().with_max_temporal(t_len.saturating_sub(1) as u32))
}

fn check_geometry(n: usize, t_len: usize) -> CliResult<()> {
    if n < 2 {
        return Err(Failure::config(format!("grid side n must be at least 2, got {n}")));
    }
    if t_len == 0 {
        return Err(Failure::config("series length T must be positive"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelSpec,
    pub n: usize,
    #[serde(rename = "T")]
    pub t_len: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Sampler tuning; its own `seed` field is replaced by the run seed.
    #[serde(default)]
    pub sampler: SimConfig,
}

impl CommandConfig for SimulateConfig {
    const NAME: &'static str = "simulate";
    const NEEDS_SEED: bool = true;

    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }

    fn validate(&self) -> CliResult<()> {
        check_geometry(self.n, self.t_len)?;
        self.model.validate()?;
        self.sampler.validate()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MadogramConfig {
    pub input: PathBuf,
    #[serde(default)]
    pub lags: Option<LagSets>,
    #[serde(default)]
    pub margin_mode: MarginMode,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl CommandConfig for MadogramConfig {
    const NAME: &'static str = "madogram";
    const NEEDS_SEED: bool = false;

    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }

    fn inputs_mut(&mut self) -> Vec<&mut PathBuf> {
        vec![&mut self.input]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub input: PathBuf,
    pub family: Family,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub lags: Option<LagSets>,
    #[serde(default)]
    pub margin_mode: MarginMode,
    #[serde(default)]
    pub fit: FitOptions,
    /// Overrides the optimizer's multi-start seed when set.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl CommandConfig for FitConfig {
    const NAME: &'static str = "fit";
    const NEEDS_SEED: bool = false;

    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }

    fn inputs_mut(&mut self) -> Vec<&mut PathBuf> {
        vec![&mut self.input]
    }

    fn validate(&self) -> CliResult<()> {
        Ok(self.fit.weights.validate()?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectConfig {
    pub input: PathBuf,
    pub candidates: Vec<Family>,
    #[serde(default)]
    pub lags: Option<LagSets>,
    #[serde(default)]
    pub margin_mode: MarginMode,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl CommandConfig for SelectConfig {
    const NAME: &'static str = "select";
    const NEEDS_SEED: bool = false;

    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }

    fn inputs_mut(&mut self) -> Vec<&mut PathBuf> {
        vec![&mut self.input]
    }

    fn validate(&self) -> CliResult<()> {
        check_candidates(&self.candidates)?;
        Ok(self.fit.weights.validate()?)
    }
}

fn check_candidates(candidates: &[Family]) -> CliResult<()> {
    if candidates.is_empty() {
        return Err(Failure::config("candidate model list is empty"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub truth: ModelSpec,
    pub n: usize,
    #[serde(rename = "T")]
    pub t_len: usize,
    pub replicates: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub lags: Option<LagSets>,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub sampler: SimConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Feeds every replicate the same simulated field. Only useful as a
    /// determinism check.
    #[serde(default)]
    pub repeat_first_replicate: bool,
}

impl CommandConfig for StudyConfig {
    const NAME: &'static str = "study";
    const NEEDS_SEED: bool = true;

    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }

    fn validate(&self) -> CliResult<()> {
        check_geometry(self.n, self.t_len)?;
        if self.replicates < 2 {
            return Err(Failure::config(format!(
                "a study needs at least 2 replicates, got {}",
                self.replicates
            )));
        }
        self.truth.validate()?;
        self.sampler.validate()?;
        Ok(self.fit.weights.validate()?)
    }
}

/// Space and time block lengths for block maxima.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blocks {
    pub space: usize,
    pub time: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginsConfig {
    pub input: PathBuf,
    #[serde(default)]
    pub blocks: Option<Blocks>,
    #[serde(default)]
    pub margins: MarginOptions,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl CommandConfig for MarginsConfig {
    const NAME: &'static str = "margins";
    const NEEDS_SEED: bool = false;

    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }

    fn inputs_mut(&mut self) -> Vec<&mut PathBuf> {
        vec![&mut self.input]
    }
}

fn default_permutations() -> usize {
    DEFAULT_REPLICATES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermtestConfig {
    pub input: PathBuf,
    #[serde(default)]
    pub lags: Option<LagSets>,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    /// Fitted model whose curves are overlaid and used for dependence ranges.
    #[serde(default)]
    pub fitted: Option<ModelSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl CommandConfig for PermtestConfig {
    const NAME: &'static str = "permtest";
    const NEEDS_SEED: bool = true;

    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }

    fn inputs_mut(&mut self) -> Vec<&mut PathBuf> {
        vec![&mut self.input]
    }

    fn validate(&self) -> CliResult<()> {
        check_permutations(self.permutations)
    }
}

fn check_permutations(count: usize) -> CliResult<()> {
    if count < 2 {
        return Err(Failure::config(format!("need at least 2 permutations, got {count}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Raw long-format CSV `x,y,t,value`.
    pub input: PathBuf,
    #[serde(default)]
    pub blocks: Option<Blocks>,
    /// Marginal fitting; the output margins are always Fréchet.
    #[serde(default)]
    pub margins: MarginOptions,
    pub candidates: Vec<Family>,
    #[serde(default)]
    pub lags: Option<LagSets>,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl CommandConfig for PipelineConfig {
    const NAME: &'static str = "pipeline";
    const NEEDS_SEED: bool = true;

    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }

    fn inputs_mut(&mut self) -> Vec<&mut PathBuf> {
        vec![&mut self.input]
    }

    fn validate(&self) -> CliResult<()> {
        check_candidates(&self.candidates)?;
        check_permutations(self.permutations)?;
        Ok(self.fit.weights.validate()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn seed_is_mandatory_for_stochastic_commands() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"{"model": {"family": "A1", "params": {"phi_s": 0.4, "kappa_s": 1.5, "phi_t": 0.2, "kappa_t": 1.0}}, "n": 4, "T": 3}"#;
        let p = write(dir.path(), "sim.json", text);
        let err = load::<SimulateConfig>(&p, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message.contains("seed"));
        let cfg = load::<SimulateConfig>(&p, Some(9)).unwrap();
        assert_eq!(cfg.seed, Some(9));
    }

    #[test]
    fn relative_inputs_resolve_against_the_config() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "data.csv", "x,y,t,value\n1,1,1,1.0\n");
        let p = write(dir.path(), "m.json", r#"{"input": "data.csv"}"#);
        let cfg = load::<MadogramConfig>(&p, None).unwrap();
        assert!(cfg.input.is_absolute());
        let missing = write(dir.path(), "bad.json", r#"{"input": "nope.csv"}"#);
        let err = load::<MadogramConfig>(&missing, None).unwrap_err();
        assert!(err.message.contains("does not exist"));
    }

    #[test]
    fn unknown_fields_and_empty_candidates_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "d.csv", "x,y,t,value\n1,1,1,1.0\n");
        let p = write(dir.path(), "a.json", r#"{"input": "d.csv", "candidates": []}"#);
        assert_eq!(load::<SelectConfig>(&p, None).unwrap_err().exit_code(), 2);
        let p = write(
            dir.path(),
            "b.json",
            r#"{"input": "d.csv", "candidates": ["A1"], "colour": 1}"#,
        );
        assert_eq!(load::<SelectConfig>(&p, None).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn default_lags_fit_the_series() {
        let l = lags_or_default(&None, 5);
        assert_eq!(l.temporal(), &[1, 2, 3, 4]);
        assert_eq!(l.spatial().len(), LagSets::standard().spatial().len());
    }
}
