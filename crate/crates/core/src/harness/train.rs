use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TemporalGraph;
use crate::models::{score_logits, Forward, Model};
use crate::sampler::{derive_seed, sample_ego_batch, SamplerConfig};
use crate::session::NodeId;
use crate::tensor::{Adam, AdamConfig, Matrix, ParamSet, Tape, Var};

use super::metrics::{calibrate_threshold, flag_rate, recall_at_threshold, roc_auc, Metrics};
use super::split::Splits;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Evaluations without validation-AUC improvement before stopping.
    pub patience: usize,
    pub adam: AdamConfig,
    /// Positive-class weight; `negatives / positives` on train when unset.
    pub pos_weight: Option<f64>,
    pub seed: u64,
    /// Target flag rate for threshold calibration.
    pub flag_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 512,
            max_epochs: 30,
            patience: 5,
            adam: AdamConfig::default(),
            pos_weight: None,
            seed: 0,
            flag_rate: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("batch_size, max_epochs and patience must be positive".into()));
        }
        if let Some(w) = self.pos_weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("pos_weight {w} must be positive")));
            }
        }
        if !(self.flag_rate > 0.0 && self.flag_rate < 1.0) {
            return Err(Error::Config(format!("flag_rate {} outside (0, 1)", self.flag_rate)));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(Error::Config(format!("invalid Adam settings {a:?}")));
        }
        Ok(())
    }
}

/// Something that maps a set of seed nodes to logits.
#[derive(Clone, Debug, PartialEq)]
pub enum Predictor {
    /// Graph encoder fed through sampled ego-batches.
    Graph { model: Model, sampler: SamplerConfig },
    /// Per-row logistic regression on the node's own inputs.
    Logistic { params: ParamSet },
}

impl Predictor {
    pub fn logistic<R: Rng + ?Sized>(input_dim: usize, rng: &mut R) -> Self {
        let a = (6.0 / (input_dim + 1) as f64).sqrt();
        let w = (0..input_dim).map(|_| rng.random_range(-a..=a)).collect();
        let mut params = ParamSet::new();
        params.add("weight", Matrix::column(w));
        params.add("bias", Matrix::zeros(1, 1));
        Predictor::Logistic { params }
    }

    pub fn params(&self) -> &ParamSet {
        match self {
            Predictor::Graph { model, .. } => &model.params,
            Predictor::Logistic { params } => params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        match self {
            Predictor::Graph { model, .. } => &mut model.params,
            Predictor::Logistic { params } => params,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Predictor::Graph { model, .. } => model.input_dim,
            Predictor::Logistic { params } => params.values()[0].rows(),
        }
    }

    /// Records logits for `seeds`; `stream` selects the sampling RNG stream.
    #[allow(clippy::too_many_arguments)]
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        g: &TemporalGraph,
        inputs: &Matrix,
        seeds: &[NodeId],
        stream: u64,
        training: bool,
        track_grads: bool,
        rng: &mut R,
    ) -> Result<Forward> {
        match self {
            Predictor::Graph { model, sampler } => {
                let batch = sample_ego_batch(g, seeds, &sampler.for_batch(stream), inputs)?;
                model.forward(tape, &batch, training, track_grads, rng)
            }
            Predictor::Logistic { params } => {
                let idx: Vec<usize> = seeds.iter().map(|v| v.index()).collect();
                if idx.iter().any(|&i| i >= inputs.rows()) {
                    return Err(Error::Shape {
                        op: "logistic",
                        detail: "seed outside input matrix".into(),
                    });
                }
                let x = tape.constant(inputs.gather_rows(&idx))?;
                let vars: Vec<Var> = params
                    .values()
                    .iter()
                    .map(|m| if track_grads { tape.param(m.clone()) } else { tape.constant(m.clone()) })
                    .collect::<Result<_>>()?;
                let logits = score_logits(tape, x, vars[0], vars[1])?;
                Ok(Forward { logits, params: vars })
            }
        }
    }

    /// Fraud probabilities for `nodes`, scored in consecutive chunks.
    pub fn predict(&self, g: &TemporalGraph, inputs: &Matrix, nodes: &[NodeId], batch_size: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(nodes.len());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (i, chunk) in nodes.chunks(batch_size.max(1)).enumerate() {
            let mut tape = Tape::new();
            let stream = derive_seed(EVAL_STREAM, i as u64);
            let fwd = self.forward(&mut tape, g, inputs, chunk, stream, false, false, &mut rng)?;
            let p = tape.sigmoid(fwd.logits)?;
            out.extend_from_slice(tape.value(p).data());
        }
        Ok(out)
    }

    /// Probability for a single node, sampled from a stream tied to its id so
    /// the result does not depend on what else is being scored.
    pub fn score_node(&self, g: &TemporalGraph, inputs: &Matrix, v: NodeId) -> Result<f64> {
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stream = derive_seed(SCORE_STREAM, v.index() as u64);
        let fwd = self.forward(&mut tape, g, inputs, &[v], stream, false, false, &mut rng)?;
        let p = tape.sigmoid(fwd.logits)?;
        Ok(tape.value(p).item())
    }
}

const EVAL_STREAM: u64 = 0xE7A1;
const SCORE_STREAM: u64 = 0x5C0E;

/// One row of the training history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
}

pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation AUC.
    pub predictor: Predictor,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub pos_weight: f64,
}

pub fn nodes(range: std::ops::Range<usize>) -> Vec<NodeId> {
    range.map(NodeId::from).collect()
}

pub fn labels_of(g: &TemporalGraph, nodes: &[NodeId]) -> Vec<u8> {
    nodes.iter().map(|&v| g.session(v).y).collect()
}

/// `negatives / positives` over the training range.
pub fn balanced_pos_weight(g: &TemporalGraph, train: std::ops::Range<usize>) -> Result<f64> {
    let n = train.len();
    let pos = train.filter(|&i| g.sessions()[i].y != 0).count();
    if pos == 0 || pos == n {
        return Err(Error::Split("training split needs both classes".into()));
    }
    Ok((n - pos) as f64 / pos as f64)
}

fn divergence(epoch: usize, step: usize, loss: f64) -> Error {
    Error::Divergence { epoch, step, loss }
}

/// Mini-batch Adam on train seeds with early stopping on validation AUC.
pub fn train(
    mut predictor: Predictor,
    g: &TemporalGraph,
    inputs: &Matrix,
    splits: &Splits,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let pos_weight = match cfg.pos_weight {
        Some(w) => w,
        None => balanced_pos_weight(g, splits.train.clone())?,
    };
    let mut order = nodes(splits.train.clone());
    let val_nodes = nodes(splits.val.clone());
    let val_labels = labels_of(g, &val_nodes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam, predictor.params().values());

    let mut best: Option<(f64, usize, ParamSet)> = None;
    let mut history = Vec::new();
    let mut stale = 0;
    let mut step = 0usize;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let stream = derive_seed(cfg.seed, step as u64);
            let labels: Vec<f64> = chunk.iter().map(|&v| f64::from(g.session(v).y)).collect();
            let recorded = predictor
                .forward(&mut tape, g, inputs, chunk, stream, true, true, &mut rng)
                .and_then(|fwd| {
                    let loss = tape.weighted_bce_with_logits(fwd.logits, &labels, None, pos_weight)?;
                    Ok((fwd.params, loss))
                });
            let (params, loss) = match recorded {
                Ok(r) => r,
                Err(Error::NonFinite(_)) => return Err(divergence(epoch, step, f64::NAN)),
                Err(e) => return Err(e),
            };
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(divergence(epoch, step, value));
            }
            let mut grads = tape.backward(loss)?;
            let grads: Vec<Matrix> = params.iter().map(|&p| grads.take_or_zeros(p, tape.shape(p))).collect();
            adam.step(predictor.params_mut().values_mut(), &grads);
            if !predictor.params().values().iter().all(Matrix::is_finite) {
                return Err(divergence(epoch, step, value));
            }
            loss_sum += value;
            batches += 1;
            step += 1;
        }
        let scores = predictor.predict(g, inputs, &val_nodes, cfg.batch_size)?;
        let val_auc = roc_auc(&scores, &val_labels)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches.max(1) as f64,
            val_auc,
        });
        if best.as_ref().is_none_or(|(b, _, _)| val_auc > *b) {
            best = Some((val_auc, epoch, predictor.params().clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    *predictor.params_mut() = params;
    Ok(TrainOutcome {
        predictor,
        history,
        best_epoch,
        pos_weight,
    })
}

/// Mean (unweighted) log loss of probabilities.
pub fn log_loss(probs: &[f64], labels: &[u8]) -> f64 {
    let eps = 1e-15;
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(eps, 1.0 - eps);
            if y != 0 { -p.ln() } else { -(1.0 - p).ln() }
        })
        .sum();
    total / probs.len().max(1) as f64
}

/// Metrics for `scores` using a threshold calibrated elsewhere.
pub fn summarize(scores: &[f64], labels: &[u8], q: f64, threshold: f64) -> Result<Metrics> {
    Ok(Metrics {
        n: scores.len(),
        positives: labels.iter().filter(|&&y| y != 0).count(),
        loss: log_loss(scores, labels),
        roc_auc: roc_auc(scores, labels)?,
        q,
        threshold,
        flag_rate: flag_rate(scores, threshold),
        recall: recall_at_threshold(scores, labels, threshold),
    })
}

/// Validation and test metrics; the threshold is calibrated on validation.
pub fn evaluate_splits(
    predictor: &Predictor,
    g: &TemporalGraph,
    inputs: &Matrix,
    splits: &Splits,
    q: f64,
    batch_size: usize,
) -> Result<(Metrics, Metrics)> {
    let val = nodes(splits.val.clone());
    let test = nodes(splits.test.clone());
    let vs = predictor.predict(g, inputs, &val, batch_size)?;
    let ts = predictor.predict(g, inputs, &test, batch_size)?;
    let threshold = calibrate_threshold(&vs, q)?;
    Ok((
        summarize(&vs, &labels_of(g, &val), q, threshold)?,
        summarize(&ts, &labels_of(g, &test), q, threshold)?,
    ))
}
