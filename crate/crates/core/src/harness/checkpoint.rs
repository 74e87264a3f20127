//! Self-contained model bundle: everything needed to score new sessions.
//!
//! Layout: magic `RGMODEL\0`, `u32` version, `u32` metadata length, the
//! metadata as JSON, then the parameter blob.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::graph::GraphConfig;
use crate::labelprop::LABEL_FEATURES;
use crate::models::{Model, ModelConfig};
use crate::sampler::SamplerConfig;
use crate::tensor::ParamSet;

use super::experiment::Arm;
use super::split::Standardizer;
use super::train::Predictor;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"RGMODEL\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub arm: Arm,
    /// Raw session feature dimension.
    pub feature_dim: usize,
    pub graph: GraphConfig,
    pub standardizer: Standardizer,
    pub model: Option<ModelConfig>,
    pub sampler: Option<SamplerConfig>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn new(
        arm: Arm,
        feature_dim: usize,
        graph: GraphConfig,
        standardizer: Standardizer,
        predictor: &Predictor,
    ) -> Self {
        let (model, sampler) = match predictor {
            Predictor::Graph { model, sampler } => (Some(model.config.clone()), Some(sampler.clone())),
            Predictor::Logistic { .. } => (None, None),
        };
        Checkpoint {
            meta: CheckpointMeta {
                arm,
                feature_dim,
                graph,
                standardizer,
                model,
                sampler,
            },
            params: predictor.params().clone(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.meta.feature_dim + if self.meta.arm.with_labels() { LABEL_FEATURES } else { 0 }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.meta).expect("metadata serializes");
        let mut w = Writer::new();
        w.bytes(&CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u32(meta.len() as u32);
        w.bytes(&meta);
        self.params.encode(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ck = decode(bytes).map_err(Error::Checkpoint)?;
        ck.predictor()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Rebuilds the predictor, checking that every parameter has the shape
    /// the stored configuration implies.
    pub fn predictor(&self) -> Result<Predictor> {
        let bad = |m: String| Error::Checkpoint(m);
        let meta = &self.meta;
        let dim = self.input_dim();
        if meta.standardizer.dim() != dim || meta.standardizer.std.len() != dim {
            return Err(bad(format!("standardizer has {} columns, inputs have {dim}", meta.standardizer.dim())));
        }
        if meta.standardizer.std.iter().any(|s| !(*s > 0.0 && s.is_finite()))
            || meta.standardizer.mean.iter().any(|m| !m.is_finite())
        {
            return Err(bad("standardizer holds invalid statistics".into()));
        }
        meta.graph.validate().map_err(|e| bad(e.to_string()))?;
        let expected = match (meta.arm.is_graph(), &meta.model, &meta.sampler) {
            (true, Some(cfg), Some(sampler)) => {
                sampler.validate().map_err(|e| bad(e.to_string()))?;
                if sampler.layers() < cfg.layers {
                    return Err(bad("sampler has fewer hops than model layers".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let template = Model::new(cfg.clone(), dim, &mut rng).map_err(|e| bad(e.to_string()))?;
                Predictor::Graph {
                    model: template,
                    sampler: sampler.clone(),
                }
            }
            (false, None, None) => Predictor::logistic(dim, &mut ChaCha8Rng::seed_from_u64(0)),
            _ => return Err(bad(format!("metadata does not match arm {}", meta.arm.as_str()))),
        };
        let want = expected.params();
        if want.names() != self.params.names()
            || want
                .values()
                .iter()
                .zip(self.params.values())
                .any(|(a, b)| a.shape() != b.shape())
        {
            return Err(bad("parameter names or shapes do not match the configuration".into()));
        }
        let mut p = expected;
        *p.params_mut() = self.params.clone();
        Ok(p)
    }
}

fn decode(bytes: &[u8]) -> std::result::Result<Checkpoint, String> {
    let mut r = Reader::new(bytes);
    if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
        return Err("not a model checkpoint".into());
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let len = r.u32()? as usize;
    let meta: CheckpointMeta =
        serde_json::from_slice(r.take(len)?).map_err(|e| format!("checkpoint metadata: {e}"))?;
    let params = ParamSet::decode(&mut r)?;
    r.expect_end()?;
    Ok(Checkpoint { meta, params })
}
