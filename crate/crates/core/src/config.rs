//! Run configuration: one TOML file with per-module sections, plus
//! `section.key=value` overrides. Unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//! runs = 5
//!
//! [graph]
//! window = "90d"
//! cap = 10
//!
//! [sampler]
//! fanouts = [10, 10]
//!
//! [model]
//! variant = "homogeneous"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::GraphConfig;
use crate::harness::{SplitSpec, TrainConfig};
use crate::models::ModelConfig;
use crate::sampler::{derive_seed, SamplerConfig};
use crate::synth::GeneratorConfig;

/// Parses `90d`, `6h`, `30m`, `45s`, `2w`, compounds like `1d12h`, or a bare
/// number of seconds.
pub fn parse_duration(text: &str) -> Result<i64> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Config("empty duration".into()));
    }
    let bad = || Error::Config(format!("invalid duration {text:?}"));
    if s.bytes().all(|b| b.is_ascii_digit()) {
        return s.parse().map_err(|_| bad());
    }
    let mut total: i64 = 0;
    let mut digits = String::new();
    for c in s.chars() {
        if c.is_ascii_digit() {
            digits.push(c);
            continue;
        }
        let unit = match c {
            's' => 1,
            'm' => 60,
            'h' => 3_600,
            'd' => 86_400,
            'w' => 604_800,
            _ => return Err(bad()),
        };
        let n: i64 = digits.parse().map_err(|_| bad())?;
        digits.clear();
        total = n
            .checked_mul(unit)
            .and_then(|v| total.checked_add(v))
            .ok_or_else(bad)?;
    }
    if !digits.is_empty() {
        return Err(bad());
    }
    Ok(total)
}

/// Serde helpers for fields holding seconds that also accept duration strings.
pub mod duration {
    use serde::de::{self, Deserializer};
    use serde::Deserialize;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Secs(i64),
        Text(String),
    }

    fn resolve<E: de::Error>(r: Repr) -> Result<i64, E> {
        match r {
            Repr::Secs(v) => Ok(v),
            Repr::Text(s) => super::parse_duration(&s).map_err(E::custom),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<i64, D::Error> {
        resolve(Repr::deserialize(d)?)
    }

    pub fn deserialize_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<i64>, D::Error> {
        Vec::<Repr>::deserialize(d)?.into_iter().map(resolve).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSection {
    #[serde(deserialize_with = "duration::deserialize")]
    pub window: i64,
    pub cap: usize,
}

impl Default for GraphSection {
    fn default() -> Self {
        GraphSection {
            window: 90 * 86_400,
            cap: 10,
        }
    }
}

impl GraphSection {
    pub fn config(&self) -> Result<GraphConfig> {
        GraphConfig::new(self.window, self.cap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub fanouts: Vec<usize>,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection { fanouts: vec![10, 10] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root seed for initialization, shuffling and sampling.
    pub seed: u64,
    /// Independent repetitions in experiments and ablations.
    pub runs: usize,
    pub generator: GeneratorConfig,
    pub graph: GraphSection,
    pub split: SplitSpec,
    pub sampler: SamplerSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            runs: 5,
            generator: GeneratorConfig::default(),
            graph: GraphSection::default(),
            split: SplitSpec::default(),
            sampler: SamplerSection::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            output: OutputSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Parses `text`, applies `section.key=value` overrides, validates.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_with(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        self.generator.validate()?;
        self.graph.config().map_err(|e| Error::Config(e.to_string()))?;
        self.split.validate()?;
        SamplerConfig::new(self.sampler.fanouts.clone(), 0)?;
        self.model.validate()?;
        if self.sampler.fanouts.len() < self.model.layers {
            return Err(Error::Config(format!(
                "{} fanouts for a {}-layer model",
                self.sampler.fanouts.len(),
                self.model.layers
            )));
        }
        self.train.validate()
    }

    /// Generator settings for repetition `run`.
    pub fn generator_for_run(&self, run: usize) -> GeneratorConfig {
        GeneratorConfig {
            seed: derive_seed(self.generator.seed, run as u64),
            ..self.generator.clone()
        }
    }

    /// Root seed for training repetition `run`.
    pub fn train_seed(&self, run: usize) -> u64 {
        derive_seed(self.seed, run as u64)
    }

    /// Stable JSON rendering of the resolved configuration.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Hex SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().to_string().as_bytes()))
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override key {path:?} is malformed")));
    }
    let raw = raw.trim();
    // anything that is not a TOML literal is taken as a bare string
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Config(format!("override {path:?}: {k} is not a section"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
