//! GraphSAGE encoders over ego-batches, plus the logistic scoring head.
//!
//! All three variants share the update
//! `h_v <- ReLU(W [h_v ; m_v] + b)` (optionally L2-normalized, then dropout)
//! and differ only in how the message `m_v` is formed:
//!
//! * homogeneous: mean over the (deduplicated) typed union of sampled in-neighbors;
//! * relational: per-type mean, mapped through a per-type linear transform, summed;
//! * attention: softmax-weighted sum of projected neighbor states, with logits
//!   `a . [Wq h_v ; Wk h_u ; e_uv]` and `e_uv` built from a binned time gap and
//!   the edge type.
//!
//! A node with no sampled in-neighbors receives a zero message.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{BatchEdge, EgoBatch};
use crate::session::EdgeType;
use crate::tensor::{Matrix, ParamSet, Segments, Tape, Var};

const HOUR: i64 = 3600;
const DAY: i64 = 24 * HOUR;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Homogeneous,
    Relational,
    Attention,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Homogeneous, Variant::Relational, Variant::Attention];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub layers: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub l2_norm: bool,
    /// Upper bin edges for `dt` in seconds; a final open bin catches the rest.
    #[serde(deserialize_with = "crate::config::duration::deserialize_vec")]
    pub dt_bin_edges: Vec<i64>,
    pub edge_type_embed_dim: usize,
    pub dt_embed_dim: usize,
    pub heads: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Homogeneous,
            layers: 2,
            hidden_dim: 64,
            dropout: 0.1,
            l2_norm: false,
            dt_bin_edges: vec![HOUR, 6 * HOUR, DAY, 3 * DAY, 7 * DAY, 30 * DAY, 90 * DAY],
            edge_type_embed_dim: 4,
            dt_embed_dim: 8,
            heads: 1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.layers == 0 {
            return fail("model needs at least one layer".into());
        }
        if self.hidden_dim == 0 {
            return fail("hidden_dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.heads != 1 {
            return fail(format!(
                "multi-head attention is not supported (heads = {}); use heads = 1",
                self.heads
            ));
        }
        if self.dt_bin_edges.windows(2).any(|w| w[0] >= w[1]) {
            return fail("dt_bin_edges must be strictly ascending".into());
        }
        if self.variant == Variant::Attention && self.edge_type_embed_dim + self.dt_embed_dim == 0 {
            return fail("attention needs a non-empty edge embedding".into());
        }
        Ok(())
    }

    pub fn dt_bins(&self) -> usize {
        self.dt_bin_edges.len() + 1
    }

    /// Bin index of a time gap; gaps past the last edge land in the open bin.
    pub fn dt_bin(&self, dt: i64) -> usize {
        self.dt_bin_edges.partition_point(|&e| e < dt)
    }
}

/// Encoder parameters together with the configuration that shapes them.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub input_dim: usize,
    pub params: ParamSet,
}

/// Tape handles produced by a forward pass.
pub struct Forward {
    /// Seed logits, `num_seeds x 1`.
    pub logits: Var,
    /// One handle per entry of [`Model::params`], same order.
    pub params: Vec<Var>,
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    uniform(rows, cols, a, rng)
}

fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, a: f64, rng: &mut R) -> Matrix {
    let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| dist.sample(rng)).collect())
}

fn kind_name(kind: EdgeType) -> &'static str {
    kind.as_str()
}

impl Model {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, input_dim: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let hidden = config.hidden_dim;
        let mut p = ParamSet::new();
        if config.variant == Variant::Attention {
            p.add("dt_embed", uniform(config.dt_bins(), config.dt_embed_dim, 0.05, rng));
            p.add("type_embed", uniform(EdgeType::COUNT, config.edge_type_embed_dim, 0.05, rng));
        }
        let mut din = input_dim;
        for k in 1..=config.layers {
            let msg_dim = match config.variant {
                Variant::Homogeneous | Variant::Relational => din,
                Variant::Attention => hidden,
            };
            match config.variant {
                Variant::Homogeneous => {}
                Variant::Relational => {
                    for kind in EdgeType::ALL {
                        p.add(format!("layer{k}.phi.{}", kind_name(kind)), glorot(din, din, rng));
                    }
                }
                Variant::Attention => {
                    let e = config.dt_embed_dim + config.edge_type_embed_dim;
                    p.add(format!("layer{k}.query"), glorot(din, hidden, rng));
                    p.add(format!("layer{k}.key"), glorot(din, hidden, rng));
                    p.add(format!("layer{k}.value"), glorot(din, hidden, rng));
                    p.add(format!("layer{k}.attn"), glorot(2 * hidden + e, 1, rng));
                }
            }
            p.add(format!("layer{k}.weight"), glorot(din + msg_dim, hidden, rng));
            p.add(format!("layer{k}.bias"), Matrix::zeros(1, hidden));
            din = hidden;
        }
        p.add("head.weight", glorot(hidden, 1, rng));
        p.add("head.bias", Matrix::zeros(1, 1));
        Ok(Model {
            config,
            input_dim,
            params: p,
        })
    }

    fn slot(&self, name: &str) -> usize {
        self.params
            .index_of(name)
            .unwrap_or_else(|| panic!("parameter {name} missing"))
    }

    /// Records the forward pass on `tape`. Parameters are registered as
    /// trainable leaves when `track_grads` is set, as constants otherwise.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        batch: &EgoBatch,
        training: bool,
        track_grads: bool,
        rng: &mut R,
    ) -> Result<Forward> {
        let layers = self.config.layers;
        if batch.depth() < layers {
            return Err(Error::Config(format!(
                "batch sampled {} hops, model needs {layers}",
                batch.depth()
            )));
        }
        if batch.input_rows.cols() != self.input_dim {
            return Err(Error::Shape {
                op: "forward",
                detail: format!("inputs have {} columns, model expects {}", batch.input_rows.cols(), self.input_dim),
            });
        }
        let params: Vec<Var> = self
            .params
            .values()
            .iter()
            .map(|m| {
                if track_grads {
                    tape.param(m.clone())
                } else {
                    tape.constant(m.clone())
                }
            })
            .collect::<Result<_>>()?;
        let pv = |name: &str| params[self.slot(name)];

        let mut h = tape.constant(batch.input_rows.clone())?;
        for k in 1..=layers {
            let targets = batch.layer_targets(k, layers);
            let edges = batch.layer_messages(k, layers);
            let own = tape.head_rows(h, targets)?;
            let msg = match self.config.variant {
                Variant::Homogeneous => mean_message(tape, h, edges, targets)?,
                Variant::Relational => {
                    let mut total: Option<Var> = None;
                    for kind in EdgeType::ALL {
                        let typed: Vec<BatchEdge> =
                            edges.iter().filter(|e| e.kind == kind).copied().collect();
                        let mean = segment_mean_over(tape, h, &typed, targets)?;
                        let phi = pv(&format!("layer{k}.phi.{}", kind_name(kind)));
                        let mapped = tape.matmul(mean, phi)?;
                        total = Some(match total {
                            Some(t) => tape.add(t, mapped)?,
                            None => mapped,
                        });
                    }
                    total.expect("three edge types")
                }
                Variant::Attention => {
                    let names = AttentionParams {
                        query: pv(&format!("layer{k}.query")),
                        key: pv(&format!("layer{k}.key")),
                        value: pv(&format!("layer{k}.value")),
                        attn: pv(&format!("layer{k}.attn")),
                        dt_embed: pv("dt_embed"),
                        type_embed: pv("type_embed"),
                    };
                    self.attention_message(tape, h, edges, targets, &names)?
                }
            };
            let z = tape.concat_cols(own, msg)?;
            let z = tape.matmul(z, pv(&format!("layer{k}.weight")))?;
            let z = tape.add_bias(z, pv(&format!("layer{k}.bias")))?;
            let mut next = tape.relu(z)?;
            if self.config.l2_norm {
                next = tape.l2_normalize_rows(next)?;
            }
            h = tape.dropout(next, self.config.dropout, training, rng)?;
        }
        let logits = score_logits(tape, h, pv("head.weight"), pv("head.bias"))?;
        Ok(Forward { logits, params })
    }

    fn attention_message(
        &self,
        tape: &mut Tape,
        h: Var,
        edges: &[BatchEdge],
        targets: usize,
        p: &AttentionParams,
    ) -> Result<Var> {
        let srcs: Vec<usize> = edges.iter().map(|e| e.src).collect();
        let dsts: Vec<usize> = edges.iter().map(|e| e.dst).collect();
        let bins: Vec<usize> = edges.iter().map(|e| self.config.dt_bin(e.dt)).collect();
        let kinds: Vec<usize> = edges.iter().map(|e| e.kind.index()).collect();

        let h_dst = tape.gather_rows(h, &dsts)?;
        let h_src = tape.gather_rows(h, &srcs)?;
        let q = tape.matmul(h_dst, p.query)?;
        let kx = tape.matmul(h_src, p.key)?;
        let v = tape.matmul(h_src, p.value)?;
        let e_dt = tape.gather_rows(p.dt_embed, &bins)?;
        let e_ty = tape.gather_rows(p.type_embed, &kinds)?;
        let e = tape.concat_cols(e_dt, e_ty)?;
        let qk = tape.concat_cols(q, kx)?;
        let feat = tape.concat_cols(qk, e)?;
        let logit = tape.matmul(feat, p.attn)?;
        let alpha = tape.segment_softmax(logit, Segments::new(dsts.clone(), targets)?)?;
        let weighted = tape.scale_rows(v, alpha)?;
        tape.segment_sum(weighted, Segments::new(dsts, targets)?)
    }

    /// Probabilities for the batch seeds, inference mode.
    pub fn predict(&self, batch: &EgoBatch) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        // dropout is inactive outside training, so the RNG is never drawn from
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let fwd = self.forward(&mut tape, batch, false, false, &mut rng)?;
        let probs = tape.sigmoid(fwd.logits)?;
        Ok(tape.value(probs).data().to_vec())
    }
}

struct AttentionParams {
    query: Var,
    key: Var,
    value: Var,
    attn: Var,
    dt_embed: Var,
    type_embed: Var,
}

fn segment_mean_over(tape: &mut Tape, h: Var, edges: &[BatchEdge], targets: usize) -> Result<Var> {
    let srcs: Vec<usize> = edges.iter().map(|e| e.src).collect();
    let dsts: Vec<usize> = edges.iter().map(|e| e.dst).collect();
    let rows = tape.gather_rows(h, &srcs)?;
    tape.segment_mean(rows, Segments::new(dsts, targets)?)
}

/// Mean over the typed union with each `(src, dst)` pair counted once.
fn mean_message(tape: &mut Tape, h: Var, edges: &[BatchEdge], targets: usize) -> Result<Var> {
    let mut unique: Vec<BatchEdge> = Vec::with_capacity(edges.len());
    let mut run_start = 0;
    for e in edges {
        // a node's in-edges are contiguous in the batch
        if unique.last().is_some_and(|l| l.dst != e.dst) {
            run_start = unique.len();
        }
        if !unique[run_start..].iter().any(|u| u.src == e.src) {
            unique.push(*e);
        }
    }
    segment_mean_over(tape, h, &unique, targets)
}

/// `w^T h + b` per row.
pub fn score_logits(tape: &mut Tape, h: Var, weight: Var, bias: Var) -> Result<Var> {
    let z = tape.matmul(h, weight)?;
    tape.add_bias(z, bias)
}

/// Logistic head: `sigmoid(w^T h + b)` per row of `h`.
pub fn score_head(h: &Matrix, weight: &Matrix, bias: f64) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone())?;
    let w = tape.constant(weight.clone())?;
    let b = tape.constant(Matrix::scalar(bias))?;
    let z = score_logits(&mut tape, hv, w, b)?;
    let s = tape.sigmoid(z)?;
    Ok(tape.value(s).data().to_vec())
}
