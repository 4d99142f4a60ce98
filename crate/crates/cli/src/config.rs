//! Pipeline configuration file, TOML or JSON by extension.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use optiscout_core::edit::prompt::RecipeKind;
use optiscout_core::edit::GenerationConfig;
use optiscout_core::embedding::IndexConfig;
use optiscout_core::eval::RetrievalConfig;
use optiscout_core::profile::PruneConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingConfig {
    /// Re-rank ANN hits by the syntactic score.
    pub enabled: bool,
    /// Scan the whole index instead of probing partitions.
    pub exact: bool,
    /// How many results `query` prints.
    pub top: usize,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            exact: false,
            top: 20,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompletionConfig {
    /// HTTP endpoint; the bearer token comes from `OPTISCOUT_API_KEY`.
    pub endpoint: Option<String>,
    /// Replay fixture file or directory; wins over `endpoint`.
    pub replay: Option<PathBuf>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecipeConfig {
    pub kind: RecipeKind,
    /// Anti-pattern database used for few-shot examples.
    pub shots: Option<PathBuf>,
    pub num_shots: usize,
    #[serde(flatten)]
    pub generation: GenerationConfig,
}

impl Default for RecipeConfig {
    fn default() -> Self {
        Self {
            kind: RecipeKind::ZeroShot,
            shots: None,
            num_shots: 2,
            generation: GenerationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommandsConfig {
    pub build: Option<String>,
    pub test: Option<String>,
    pub bench: Option<String>,
    pub timeout_secs: u64,
    pub runs: usize,
}

impl Default for CommandsConfig {
    fn default() -> Self {
        Self {
            build: None,
            test: None,
            bench: None,
            timeout_secs: optiscout_core::verify::DEFAULT_TIMEOUT.as_secs(),
            runs: optiscout_core::verify::DEFAULT_RUNS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Vec<PathBuf>,
    pub profiles: Vec<PathBuf>,
    pub prune: PruneConfig,
    pub index: IndexConfig,
    pub ranking: RankingConfig,
    pub recipe: RecipeConfig,
    pub completion: CompletionConfig,
    pub commands: CommandsConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = parse_by_extension(path, &text)?;
        cfg.validate(path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    /// Thresholds must be consistent and every referenced path must exist.
    /// Relative paths are taken relative to `base`.
    pub fn validate(&self, base: &Path) -> Result<()> {
        self.prune.validate()?;
        let referenced = self
            .corpus
            .iter()
            .chain(&self.profiles)
            .chain(&self.recipe.shots)
            .chain(&self.completion.replay);
        for p in referenced {
            let full = base.join(p);
            if !full.exists() {
                bail!("configured path {} does not exist", full.display());
            }
        }
        Ok(())
    }

    pub fn retrieval(&self) -> RetrievalConfig {
        RetrievalConfig {
            index: self.index,
            exact: self.ranking.exact,
        }
    }
}

/// `.toml` files are TOML, everything else JSON.
pub fn parse_by_extension<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(text).with_context(|| format!("parsing {}", path.display()))
    } else {
        serde_json::from_str(text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let toml_text = r#"
            [prune]
            c_min = 0.5
            [recipe]
            kind = "react"
            samples = 3
            [commands]
            build = "make"
        "#;
        let a: PipelineConfig = toml::from_str(toml_text).unwrap();
        let json_text = r#"{"prune": {"c_min": 0.5}, "recipe": {"kind": "react", "samples": 3},
                            "commands": {"build": "make"}}"#;
        let b: PipelineConfig = serde_json::from_str(json_text).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.prune.c_max, 25.0);
        assert_eq!(a.recipe.generation.samples, 3);
        assert_eq!(a.recipe.generation.parallelism, 5);
    }

    #[test]
    fn bad_thresholds_and_missing_paths_fail() {
        let mut cfg = PipelineConfig::default();
        cfg.prune.c_min = 30.0;
        assert!(cfg.validate(Path::new(".")).is_err());
        let cfg = PipelineConfig {
            profiles: vec!["no/such/profile.folded".into()],
            ..Default::default()
        };
        assert!(cfg.validate(Path::new(".")).is_err());
        assert!(PipelineConfig::default().validate(Path::new(".")).is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"prunning": {}}"#).is_err());
    }
}
