//! Hyperparameter assignments and their typed, validated forms.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    DecisionTree,
    Knn,
    Mlp,
    ExtraTrees,
    RandomForest,
    Gbt,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::DecisionTree,
        Family::Knn,
        Family::Mlp,
        Family::ExtraTrees,
        Family::RandomForest,
        Family::Gbt,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Family::DecisionTree => "decision_tree",
            Family::Knn => "knn",
            Family::Mlp => "mlp",
            Family::ExtraTrees => "extra_trees",
            Family::RandomForest => "random_forest",
            Family::Gbt => "gbt",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Family::DecisionTree => "Decision Tree",
            Family::Knn => "K-Nearest Neighbors",
            Family::Mlp => "Multi-layer Perceptron",
            Family::ExtraTrees => "Extra Trees",
            Family::RandomForest => "Random Forest",
            Family::Gbt => "XGBoost",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.key() == s)
    }

    pub fn legal_params(self) -> &'static [&'static str] {
        const TREE: &[&str] = &[
            "criterion",
            "max_depth",
            "max_features",
            "min_samples_leaf",
            "min_samples_split",
            "splitter",
        ];
        const FOREST: &[&str] = &[
            "bootstrap",
            "criterion",
            "max_depth",
            "max_features",
            "min_samples_leaf",
            "min_samples_split",
            "n_estimators",
        ];
        match self {
            Family::DecisionTree => TREE,
            Family::RandomForest | Family::ExtraTrees => FOREST,
            Family::Gbt => &[
                "colsample_bytree",
                "gamma",
                "learning_rate",
                "max_depth",
                "n_estimators",
                "subsample",
            ],
            Family::Knn => &["metric", "n_neighbors", "weights"],
            Family::Mlp => &["activation", "alpha", "hidden_layer_sizes", "learning_rate", "solver"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// A single hyperparameter setting. `"None"` spells an unlimited depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<i64>),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{}", if *b { "True" } else { "False" }),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x:?}"),
            ParamValue::Str(s) => f.write_str(s),
            ParamValue::List(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                if parts.len() == 1 {
                    write!(f, "({},)", parts[0])
                } else {
                    write!(f, "({})", parts.join(", "))
                }
            }
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}
impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}
impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}
impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}
impl From<Vec<i64>> for ParamValue {
    fn from(v: Vec<i64>) -> Self {
        ParamValue::List(v)
    }
}

/// A family plus a (possibly partial) assignment; unset names take the
/// family defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub family: Family,
    pub values: BTreeMap<String, ParamValue>,
}

impl HyperParams {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<ParamValue>) -> Self {
        self.values.insert(name.to_string(), value.into());
        self
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let legal = self.family.legal_params();
        if let Some(name) = self.values.keys().find(|k| !legal.contains(&k.as_str())) {
            return Err(LearnError::UnknownParam {
                family: self.family,
                name: name.clone(),
            });
        }
        match self.family {
            Family::DecisionTree => TreeParams::from_hp(self).map(drop),
            Family::RandomForest | Family::ExtraTrees => ForestParams::from_hp(self).map(drop),
            Family::Gbt => GbtParams::from_hp(self).map(drop),
            Family::Knn => KnnParams::from_hp(self).map(drop),
            Family::Mlp => MlpParams::from_hp(self).map(drop),
        }
    }

    /// `name=value, ...` in sorted name order.
    pub fn describe(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn bad(&self, name: &str, message: impl Into<String>) -> LearnError {
        LearnError::BadParam {
            name: name.to_string(),
            message: message.into(),
        }
    }

    fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    fn str_or(&self, name: &str, default: &str) -> Result<String, LearnError> {
        match self.get(name) {
            None => Ok(default.to_string()),
            Some(ParamValue::Str(s)) => Ok(s.clone()),
            Some(other) => Err(self.bad(name, format!("expected a string, got {other}"))),
        }
    }

    fn bool_or(&self, name: &str, default: bool) -> Result<bool, LearnError> {
        match self.get(name) {
            None => Ok(default),
            Some(ParamValue::Bool(b)) => Ok(*b),
            Some(other) => Err(self.bad(name, format!("expected a boolean, got {other}"))),
        }
    }

    fn count_or(&self, name: &str, default: usize, min: usize) -> Result<usize, LearnError> {
        let v = match self.get(name) {
            None => return Ok(default),
            Some(ParamValue::Int(i)) if *i >= 0 => *i as usize,
            Some(ParamValue::Float(x)) if x.fract() == 0.0 && *x >= 0.0 => *x as usize,
            Some(other) => return Err(self.bad(name, format!("expected a non-negative integer, got {other}"))),
        };
        if v < min {
            return Err(self.bad(name, format!("must be at least {min}")));
        }
        Ok(v)
    }

    fn float_or(&self, name: &str, default: f64) -> Result<f64, LearnError> {
        let v = match self.get(name) {
            None => default,
            Some(ParamValue::Float(x)) => *x,
            Some(ParamValue::Int(i)) => *i as f64,
            Some(other) => return Err(self.bad(name, format!("expected a number, got {other}"))),
        };
        if !v.is_finite() {
            return Err(self.bad(name, "must be finite"));
        }
        Ok(v)
    }

    fn depth_or(&self, name: &str, default: Option<usize>) -> Result<Option<usize>, LearnError> {
        match self.get(name) {
            Some(ParamValue::Str(s)) if s.eq_ignore_ascii_case("none") => Ok(None),
            None => Ok(default),
            Some(_) => self.count_or(name, 0, 0).map(Some),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitter {
    /// Best midpoint threshold per candidate feature.
    Best,
    /// One uniform threshold between the node's min and max per candidate feature.
    Random,
}

/// Candidate features examined at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Log2,
    Count(usize),
}

impl MaxFeatures {
    /// `sqrt` -> ceil(sqrt V), `log2` -> ceil(log2 V), a count is capped at V.
    pub fn resolve(self, n_features: usize) -> usize {
        let v = n_features.max(1);
        let m = match self {
            MaxFeatures::All => v,
            MaxFeatures::Sqrt => (v as f64).sqrt().ceil() as usize,
            MaxFeatures::Log2 => (v as f64).log2().ceil() as usize,
            MaxFeatures::Count(c) => c.min(v),
        };
        m.clamp(1, v)
    }

    fn from_hp(hp: &HyperParams) -> Result<Self, LearnError> {
        match hp.get("max_features") {
            None => Ok(match hp.family {
                Family::DecisionTree => MaxFeatures::All,
                _ => MaxFeatures::Sqrt,
            }),
            Some(ParamValue::Str(s)) => match s.to_ascii_lowercase().as_str() {
                "sqrt" => Ok(MaxFeatures::Sqrt),
                "log2" => Ok(MaxFeatures::Log2),
                "none" | "all" => Ok(MaxFeatures::All),
                _ => Err(hp.bad("max_features", format!("unknown token `{s}`"))),
            },
            Some(ParamValue::Int(c)) if *c >= 1 => Ok(MaxFeatures::Count(*c as usize)),
            Some(other) => Err(hp.bad("max_features", format!("expected sqrt, log2, None or a positive count, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub splitter: Splitter,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gini,
            splitter: Splitter::Best,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

impl TreeParams {
    pub fn from_hp(hp: &HyperParams) -> Result<Self, LearnError> {
        let criterion = match hp.str_or("criterion", "gini")?.as_str() {
            "gini" => Criterion::Gini,
            "entropy" => Criterion::Entropy,
            other => return Err(hp.bad("criterion", format!("unknown criterion `{other}`"))),
        };
        let default_splitter = if hp.family == Family::ExtraTrees { "random" } else { "best" };
        let splitter = match hp.str_or("splitter", default_splitter)?.as_str() {
            "best" => Splitter::Best,
            "random" => Splitter::Random,
            other => return Err(hp.bad("splitter", format!("unknown splitter `{other}`"))),
        };
        Ok(Self {
            criterion,
            splitter,
            max_depth: hp.depth_or("max_depth", None)?,
            min_samples_split: hp.count_or("min_samples_split", 2, 2)?,
            min_samples_leaf: hp.count_or("min_samples_leaf", 1, 1)?,
            max_features: MaxFeatures::from_hp(hp)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub tree: TreeParams,
    pub n_estimators: usize,
    pub bootstrap: bool,
}

impl ForestParams {
    pub fn from_hp(hp: &HyperParams) -> Result<Self, LearnError> {
        Ok(Self {
            tree: TreeParams::from_hp(hp)?,
            n_estimators: hp.count_or("n_estimators", 100, 1)?,
            bootstrap: hp.bool_or("bootstrap", hp.family == Family::RandomForest)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub gamma: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            learning_rate: 0.3,
            max_depth: 6,
            gamma: 0.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            lambda: 1.0,
        }
    }
}

impl GbtParams {
    pub fn from_hp(hp: &HyperParams) -> Result<Self, LearnError> {
        let d = Self::default();
        let p = Self {
            n_estimators: hp.count_or("n_estimators", d.n_estimators, 1)?,
            learning_rate: hp.float_or("learning_rate", d.learning_rate)?,
            max_depth: hp.count_or("max_depth", d.max_depth, 0)?,
            gamma: hp.float_or("gamma", d.gamma)?,
            subsample: hp.float_or("subsample", d.subsample)?,
            colsample_bytree: hp.float_or("colsample_bytree", d.colsample_bytree)?,
            lambda: d.lambda,
        };
        if p.learning_rate <= 0.0 {
            return Err(hp.bad("learning_rate", "must be positive"));
        }
        if p.gamma < 0.0 {
            return Err(hp.bad("gamma", "must be non-negative"));
        }
        for (name, v) in [("subsample", p.subsample), ("colsample_bytree", p.colsample_bytree)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(hp.bad(name, "must lie in (0, 1]"));
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Manhattan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnParams {
    pub n_neighbors: usize,
    pub weights: Weighting,
    pub metric: Metric,
}

impl KnnParams {
    pub fn from_hp(hp: &HyperParams) -> Result<Self, LearnError> {
        let weights = match hp.str_or("weights", "uniform")?.as_str() {
            "uniform" => Weighting::Uniform,
            "distance" => Weighting::Distance,
            other => return Err(hp.bad("weights", format!("unknown weighting `{other}`"))),
        };
        let metric = match hp.str_or("metric", "euclidean")?.as_str() {
            "euclidean" => Metric::Euclidean,
            "manhattan" => Metric::Manhattan,
            other => return Err(hp.bad("metric", format!("unknown metric `{other}`"))),
        };
        Ok(Self {
            n_neighbors: hp.count_or("n_neighbors", 5, 1)?,
            weights,
            metric,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden_layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub alpha: f64,
    pub learning_rate_init: f64,
    pub batch_size: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub n_iter_no_change: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_layer_sizes: vec![100],
            activation: Activation::Relu,
            alpha: 1e-4,
            learning_rate_init: 1e-3,
            batch_size: 32,
            max_iter: 200,
            tol: 1e-4,
            n_iter_no_change: 10,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl MlpParams {
    pub fn from_hp(hp: &HyperParams) -> Result<Self, LearnError> {
        let d = Self::default();
        let hidden_layer_sizes = match hp.get("hidden_layer_sizes") {
            None => d.hidden_layer_sizes.clone(),
            Some(ParamValue::List(v)) if !v.is_empty() && v.iter().all(|&w| w >= 1) => {
                v.iter().map(|&w| w as usize).collect()
            }
            Some(ParamValue::Int(w)) if *w >= 1 => vec![*w as usize],
            Some(other) => return Err(hp.bad("hidden_layer_sizes", format!("expected a non-empty list of positive widths, got {other}"))),
        };
        let activation = match hp.str_or("activation", "relu")?.as_str() {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            other => return Err(hp.bad("activation", format!("unsupported activation `{other}`"))),
        };
        let alpha = hp.float_or("alpha", d.alpha)?;
        if alpha < 0.0 {
            return Err(hp.bad("alpha", "must be non-negative"));
        }
        let solver = hp.str_or("solver", "adam")?;
        if solver != "adam" {
            return Err(hp.bad("solver", format!("only `adam` is supported, got `{solver}`")));
        }
        let schedule = hp.str_or("learning_rate", "constant")?;
        if schedule != "constant" {
            return Err(hp.bad("learning_rate", format!("only `constant` is supported, got `{schedule}`")));
        }
        Ok(Self {
            hidden_layer_sizes,
            activation,
            alpha,
            ..d
        })
    }
}
