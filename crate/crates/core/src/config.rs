//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! data_dir = prepared/ptb
//! family = rrntn
//! hidden = 100
//! policy = f
//! k = 100
//! ```
//!
//! Unknown, duplicated or malformed keys are all reported together. Training
//! keys left out take the defaults of the regime, which itself defaults to
//! `gated` for GRU/LSTM and `simple` otherwise. Relative paths are resolved
//! against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mapping::{MappingPolicy, PolicyKind};
use crate::models::{Family, ModelSpec, DEFAULT_FACTOR};
use crate::training::{Regime, TrainConfig};

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("data_dir", "directory written by `prep` (required)"),
    ("family", "rrntn | mrnn | gru | lstm (required)"),
    ("hidden", "hidden size H (required)"),
    (
        "embed",
        "embedding size E; gated families only, defaults to H",
    ),
    ("policy", "f | fmod | identity (default f)"),
    ("k", "slice count K (default 1; identity forces K = V)"),
    ("factor", "m-RNN factor size (default 100)"),
    ("regime", "simple | gated"),
    ("t_bptt", "truncation length"),
    ("batch", "parallel lanes (gated regime)"),
    ("lr", "initial learning rate"),
    (
        "halving_ratio",
        "halve the rate when prev/cur validation PPL is below this",
    ),
    (
        "patience",
        "stop after this many consecutive sub-threshold epochs",
    ),
    ("dropout", "drop probability"),
    ("clip_norm", "global gradient norm cap, or none"),
    ("init", "gaussian(stddev) | uniform(lo,hi)"),
    ("zero_bias", "true | false"),
    ("seed", "random seed"),
    ("max_epochs", "epoch cap"),
    ("checkpoint", "output checkpoint path (default model.ckpt)"),
    ("checkpoint_precision", "f64 | f32 (default f64)"),
    ("metrics", "per-epoch CSV path (default metrics.csv)"),
    (
        "timing",
        "write wall time into the metrics CSV (default true)",
    ),
    ("k_list", "comma-separated K values for `sweep`"),
    (
        "policies",
        "comma-separated policies for `sweep` (default f,fmod)",
    ),
    ("sweep_out", "sweep CSV path (default sweep.csv)"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64,
    F32,
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f64" => Ok(Precision::F64),
            "f32" => Ok(Precision::F32),
            other => Err(Error::Config(vec![format!(
                "precision must be f64 or f32, got {other:?}"
            )])),
        }
    }
}

/// What the model section of a config describes, before the vocabulary
/// size is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelTemplate {
    pub family: Family,
    pub hidden: usize,
    pub embed: Option<usize>,
    pub policy: PolicyKind,
    pub k: usize,
    pub factor: usize,
}

impl ModelTemplate {
    pub fn build(&self, vocab: usize) -> Result<ModelSpec> {
        let policy = match self.policy {
            PolicyKind::Identity => MappingPolicy::identity(vocab),
            kind => MappingPolicy::new(kind, self.k),
        };
        let spec = ModelSpec {
            family: self.family,
            vocab,
            embed: if self.family.is_gated() {
                self.embed.unwrap_or(self.hidden)
            } else {
                self.hidden
            },
            hidden: self.hidden,
            policy,
            factor: self.factor,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// The config file as written.
    pub text: String,
    pub data_dir: PathBuf,
    pub model: ModelTemplate,
    pub train: TrainConfig,
    pub checkpoint: PathBuf,
    pub precision: Precision,
    pub metrics: PathBuf,
    pub timing: bool,
    pub k_list: Vec<usize>,
    pub policies: Vec<PolicyKind>,
    pub sweep_out: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, base)
    }

    /// Parse `text`, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut errors = Vec::new();
        let mut values: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!(
                    "line {line_no}: expected `key = value`, got {line:?}"
                ));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.iter().any(|(k, _)| *k == key) {
                errors.push(format!("line {line_no}: unknown key {key:?}"));
                continue;
            }
            if let Some((first, _)) = values.insert(key, (line_no, value)) {
                errors.push(format!(
                    "line {line_no}: duplicate key {key:?} (first set on line {first})"
                ));
            }
        }

        let mut p = Fields {
            values: &values,
            errors: &mut errors,
        };
        let data_dir = p.required::<String>("data_dir");
        let family = p.required::<Family>("family");
        let hidden = p.required::<usize>("hidden");
        let embed = p.optional::<usize>("embed");
        let policy = p
            .optional::<PolicyKind>("policy")
            .unwrap_or(PolicyKind::RankMin);
        let k = p.optional::<usize>("k").unwrap_or(1);
        let factor = p.optional::<usize>("factor").unwrap_or(DEFAULT_FACTOR);

        let regime = p
            .optional::<Regime>("regime")
            .unwrap_or_else(|| family.map_or(Regime::Simple, Regime::for_family));
        let mut train = TrainConfig::for_regime(regime);
        if let Some(v) = p.optional("t_bptt") {
            train.t_bptt = v;
        }
        if let Some(v) = p.optional("batch") {
            train.batch = v;
        }
        if let Some(v) = p.optional("lr") {
            train.lr0 = v;
        }
        if let Some(v) = p.optional("halving_ratio") {
            train.halving_ratio = v;
        }
        if let Some(v) = p.optional("patience") {
            train.patience = v;
        }
        if let Some(v) = p.optional("dropout") {
            train.p_drop = v;
        }
        if let Some(v) = p.optional::<String>("clip_norm") {
            match v.as_str() {
                "none" => train.clip_norm = None,
                s => match s.parse::<f64>() {
                    Ok(c) => train.clip_norm = Some(c),
                    Err(_) => p
                        .errors
                        .push(format!("clip_norm: expected a number or none, got {s:?}")),
                },
            }
        }
        if let Some(v) = p.optional("init") {
            train.init = v;
        }
        if let Some(v) = p.optional("zero_bias") {
            train.zero_bias = v;
        }
        if let Some(v) = p.optional("seed") {
            train.seed = v;
        }
        if let Some(v) = p.optional("max_epochs") {
            train.max_epochs = v;
        }
        errors.extend(train.problems());

        let mut p = Fields {
            values: &values,
            errors: &mut errors,
        };
        let checkpoint = p
            .optional::<String>("checkpoint")
            .unwrap_or_else(|| "model.ckpt".into());
        let precision = p.optional("checkpoint_precision").unwrap_or(Precision::F64);
        let metrics = p
            .optional::<String>("metrics")
            .unwrap_or_else(|| "metrics.csv".into());
        let timing = p.optional("timing").unwrap_or(true);
        let k_list = p.list::<usize>("k_list").unwrap_or_default();
        let policies = p
            .list::<PolicyKind>("policies")
            .unwrap_or_else(|| vec![PolicyKind::RankMin, PolicyKind::RankMod]);
        let sweep_out = p
            .optional::<String>("sweep_out")
            .unwrap_or_else(|| "sweep.csv".into());

        if let Some(h) = hidden {
            if h == 0 {
                errors.push("hidden must be positive".into());
            }
        }
        if k == 0 {
            errors.push("k must be at least 1".into());
        }
        if let (Some(f), Some(e), Some(h)) = (family, embed, hidden) {
            if !f.is_gated() && e != h {
                errors.push(format!("embed ({e}) must equal hidden ({h}) for {f}"));
            }
        }

        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        let resolve = |s: String| {
            let p = PathBuf::from(s);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        Ok(RunConfig {
            text: text.to_string(),
            data_dir: resolve(data_dir.expect("checked")),
            model: ModelTemplate {
                family: family.expect("checked"),
                hidden: hidden.expect("checked"),
                embed,
                policy,
                k,
                factor,
            },
            train,
            checkpoint: resolve(checkpoint),
            precision,
            metrics: resolve(metrics),
            timing,
            k_list,
            policies,
            sweep_out: resolve(sweep_out),
        })
    }
}

struct Fields<'a, 'b> {
    values: &'a BTreeMap<&'a str, (usize, &'a str)>,
    errors: &'b mut Vec<String>,
}

impl Fields<'_, '_> {
    fn optional<T: FromStr>(&mut self, key: &str) -> Option<T> {
        let &(line, raw) = self.values.get(key)?;
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors
                    .push(format!("line {line}: bad value {raw:?} for {key}"));
                None
            }
        }
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Option<T> {
        if !self.values.contains_key(key) {
            self.errors.push(format!("missing required key {key:?}"));
            return None;
        }
        self.optional(key)
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Option<Vec<T>> {
        let &(line, raw) = self.values.get(key)?;
        let parsed: std::result::Result<Vec<T>, _> = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect();
        match parsed {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors
                    .push(format!("line {line}: bad list {raw:?} for {key}"));
                None
            }
        }
    }
}

/// Parse a comma-separated list of K values.
pub fn parse_k_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Config(vec![format!("bad K value {t:?}")]))
        })
        .collect()
}
