//! Experiment configuration read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::learners::{Family, HyperParams, ParamValue};
use crate::tuner::ParamGrid;

const DEFAULT_GRIDS: &str = include_str!("../../data/default_grids.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputConfig {
    pub path: PathBuf,
    pub text_column: String,
    pub rating_column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub enabled: bool,
    pub candidates: Vec<usize>,
    pub gap_limit: f64,
    pub probe: HyperParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            candidates: (1..=20).map(|i| i * 10).collect(),
            gap_limit: 0.05,
            probe: HyperParams::new(Family::DecisionTree)
                .with("criterion", "gini")
                .with("max_depth", 3i64)
                .with("max_features", 161i64)
                .with("min_samples_leaf", 1i64)
                .with("min_samples_split", 5i64),
        }
    }
}

/// Fully resolved configuration; every optional key carries its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub input: InputConfig,
    pub threshold: f64,
    pub seed: u64,
    pub val_fraction: f64,
    pub n_folds: usize,
    pub k_values: Vec<usize>,
    pub min_df: usize,
    pub variance_threshold: f64,
    pub families: Vec<Family>,
    pub sweep: SweepConfig,
    pub grids: BTreeMap<Family, ParamGrid>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    path: Option<PathBuf>,
    text_column: Option<String>,
    rating_column: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    family: String,
    #[serde(default)]
    params: BTreeMap<String, ParamValue>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    enabled: Option<bool>,
    candidates: Option<Vec<usize>>,
    gap_limit: Option<f64>,
    probe: Option<RawProbe>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    input: Option<RawInput>,
    threshold: Option<f64>,
    seed: Option<u64>,
    val_fraction: Option<f64>,
    n_folds: Option<usize>,
    k_values: Option<Vec<usize>>,
    min_df: Option<usize>,
    variance_threshold: Option<f64>,
    families: Option<Vec<String>>,
    sweep: Option<RawSweep>,
    #[serde(default)]
    grids: BTreeMap<String, BTreeMap<String, Vec<ParamValue>>>,
    output_dir: Option<PathBuf>,
}

fn parse_family(key: &str, name: &str) -> Result<Family, ConfigError> {
    Family::parse(name).ok_or_else(|| invalid(key, format!("unknown family `{name}`")))
}

fn grids_from(raw: BTreeMap<String, BTreeMap<String, Vec<ParamValue>>>) -> Result<BTreeMap<Family, ParamGrid>, ConfigError> {
    let mut out = BTreeMap::new();
    for (name, axes) in raw {
        let family = parse_family("grids", &name)?;
        let grid = ParamGrid { family, axes };
        grid.validate()
            .map_err(|e| invalid(&format!("grids.{name}"), e.to_string()))?;
        out.insert(family, grid);
    }
    Ok(out)
}

/// Grids searched when a config does not override a family.
pub fn default_grids() -> BTreeMap<Family, ParamGrid> {
    let raw: BTreeMap<String, BTreeMap<String, Vec<ParamValue>>> =
        toml::from_str(DEFAULT_GRIDS).expect("bundled grids parse");
    grids_from(raw).expect("bundled grids are valid")
}

impl ExperimentConfig {
    /// Parses a config; a relative input path is resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let input = raw.input.ok_or(ConfigError::Missing("input.path"))?;
        let mut path = input.path.ok_or(ConfigError::Missing("input.path"))?;
        if let (Some(base), true) = (base_dir, path.is_relative()) {
            path = base.join(path);
        }
        let threshold = raw.threshold.ok_or(ConfigError::Missing("threshold"))?;
        let seed = raw.seed.ok_or(ConfigError::Missing("seed"))?;

        let sweep_default = SweepConfig::default();
        let sweep = match raw.sweep {
            None => sweep_default,
            Some(s) => SweepConfig {
                enabled: s.enabled.unwrap_or(sweep_default.enabled),
                candidates: s.candidates.unwrap_or(sweep_default.candidates),
                gap_limit: s.gap_limit.unwrap_or(sweep_default.gap_limit),
                probe: match s.probe {
                    None => sweep_default.probe,
                    Some(p) => HyperParams {
                        family: parse_family("sweep.probe.family", &p.family)?,
                        values: p.params,
                    },
                },
            },
        };
        let families = match raw.families {
            None => Family::ALL.to_vec(),
            Some(names) => names
                .iter()
                .map(|n| parse_family("families", n))
                .collect::<Result<_, _>>()?,
        };
        let mut grids = default_grids();
        grids.extend(grids_from(raw.grids)?);

        let cfg = Self {
            input: InputConfig {
                path,
                text_column: input.text_column.unwrap_or_else(|| "review".into()),
                rating_column: input.rating_column.unwrap_or_else(|| "rating".into()),
            },
            threshold,
            seed,
            val_fraction: raw.val_fraction.unwrap_or(0.2),
            n_folds: raw.n_folds.unwrap_or(5),
            k_values: raw.k_values.unwrap_or_else(|| vec![10, 15, 20, 25]),
            min_df: raw.min_df.unwrap_or(1),
            variance_threshold: raw.variance_threshold.unwrap_or(0.0),
            families,
            sweep,
            grids,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, path.parent())
    }

    /// Config for `path` with every optional key at its default.
    pub fn with_defaults(path: impl Into<PathBuf>, threshold: f64, seed: u64) -> Self {
        Self {
            input: InputConfig {
                path: path.into(),
                text_column: "review".into(),
                rating_column: "rating".into(),
            },
            threshold,
            seed,
            val_fraction: 0.2,
            n_folds: 5,
            k_values: vec![10, 15, 20, 25],
            min_df: 1,
            variance_threshold: 0.0,
            families: Family::ALL.to_vec(),
            sweep: SweepConfig::default(),
            grids: default_grids(),
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.threshold.is_finite() {
            return Err(invalid("threshold", "must be a finite number"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(invalid("val_fraction", "must lie in (0, 1)"));
        }
        if self.n_folds < 2 {
            return Err(invalid("n_folds", "must be at least 2"));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(invalid("k_values", "must be a non-empty list of positive counts"));
        }
        if self.min_df == 0 {
            return Err(invalid("min_df", "must be at least 1"));
        }
        if !(self.variance_threshold.is_finite() && self.variance_threshold >= 0.0) {
            return Err(invalid("variance_threshold", "must be finite and non-negative"));
        }
        if self.families.is_empty() {
            return Err(invalid("families", "must name at least one family"));
        }
        if let Some(f) = self.families.iter().find(|f| !self.grids.contains_key(f)) {
            return Err(invalid("grids", format!("no grid for {f}")));
        }
        if self.sweep.enabled {
            let c = &self.sweep.candidates;
            if c.is_empty() || c[0] == 0 || c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid("sweep.candidates", "must be positive and strictly ascending"));
            }
            if !(self.sweep.gap_limit > 0.0 && self.sweep.gap_limit < 1.0) {
                return Err(invalid("sweep.gap_limit", "must lie in (0, 1)"));
            }
            self.sweep
                .probe
                .validate()
                .map_err(|e| invalid("sweep.probe", e.to_string()))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let mut semantic = self.clone();
        semantic.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&semantic).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
threshold = 93
[input]
path = "reviews.csv"
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_toml_str(MINIMAL, Some(Path::new("/data"))).unwrap();
        assert_eq!(c.input.path, PathBuf::from("/data/reviews.csv"));
        assert_eq!(c.k_values, vec![10, 15, 20, 25]);
        assert_eq!(c.families.len(), 6);
        assert_eq!(c.grids[&Family::DecisionTree].n_candidates(), 32);
        assert_eq!(c, {
            let mut d = ExperimentConfig::with_defaults("/data/reviews.csv", 93.0, 7);
            d.output_dir = "out".into();
            d
        });
    }

    #[test]
    fn threshold_and_seed_are_required() {
        let no_thr = MINIMAL.replace("threshold = 93", "");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&no_thr, None),
            Err(ConfigError::Missing("threshold"))
        ));
        let no_seed = MINIMAL.replace("seed = 7", "");
        assert!(matches!(ExperimentConfig::from_toml_str(&no_seed, None), Err(ConfigError::Missing("seed"))));
    }

    #[test]
    fn bad_values_are_rejected() {
        for extra in [
            "val_fraction = 1.5",
            "families = [\"naive_bayes\"]",
            "k_values = [0]",
            "bogus = 1",
            "[grids.knn]\nn_neighbors = []",
            "[grids.knn]\ndepth = [3]",
        ] {
            let text = format!("{MINIMAL}\n{extra}\n");
            let text = if extra.starts_with('[') {
                text
            } else {
                format!("{extra}\n{MINIMAL}")
            };
            assert!(ExperimentConfig::from_toml_str(&text, None).is_err(), "{extra}");
        }
    }

    #[test]
    fn grid_override_replaces_only_that_family() {
        let text = format!("{MINIMAL}\n[grids.knn]\nn_neighbors = [1, 5]\n");
        let c = ExperimentConfig::from_toml_str(&text, None).unwrap();
        assert_eq!(c.grids[&Family::Knn].n_candidates(), 2);
        assert_eq!(c.grids[&Family::Gbt], default_grids()[&Family::Gbt]);
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = ExperimentConfig::with_defaults("x.csv", 93.0, 7);
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.sweep.gap_limit = 0.04;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn default_grids_contain_reported_optima() {
        let g = default_grids();
        let has = |f: Family, name: &str, v: ParamValue| g[&f].axes[name].contains(&v);
        assert!(has(Family::DecisionTree, "max_depth", 3i64.into()));
        assert!(has(Family::DecisionTree, "max_depth", "None".into()));
        assert!(has(Family::Knn, "n_neighbors", 7i64.into()));
        assert!(has(Family::Mlp, "hidden_layer_sizes", vec![150i64].into()));
        assert!(has(Family::Gbt, "gamma", 5i64.into()));
        assert!(has(Family::Gbt, "learning_rate", 0.2.into()));
        assert!(has(Family::RandomForest, "max_features", "log2".into()));
    }
}
