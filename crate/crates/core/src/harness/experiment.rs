use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::{build_graph, GraphConfig, TemporalGraph};
use crate::labelprop::build_inputs;
use crate::models::Model;
use crate::sampler::{derive_seed, SamplerConfig};
use crate::session::Session;
use crate::synth::generate;
use crate::tensor::Matrix;

use super::metrics::Metrics;
use super::split::{chronological_split, Splits, Standardizer};
use super::train::{evaluate_splits, train, Predictor, TrainConfig, TrainOutcome};

const INIT_STREAM: u64 = 1;
const SAMPLER_STREAM: u64 = 2;
const SHUFFLE_STREAM: u64 = 3;

/// A model family compared in experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Per-row logistic regression on session features.
    Logistic,
    /// Per-row logistic regression on features plus label features.
    LogisticLp,
    /// Graph encoder on session features.
    Gnn,
    /// Graph encoder on session features plus label features.
    GnnLp,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Logistic, Arm::LogisticLp, Arm::Gnn, Arm::GnnLp];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Logistic => "logistic",
            Arm::LogisticLp => "logistic_lp",
            Arm::Gnn => "gnn",
            Arm::GnnLp => "gnn_lp",
        }
    }

    pub fn with_labels(self) -> bool {
        matches!(self, Arm::LogisticLp | Arm::GnnLp)
    }

    pub fn is_graph(self) -> bool {
        matches!(self, Arm::Gnn | Arm::GnnLp)
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown arm {s:?}; expected one of logistic, logistic_lp, gnn, gnn_lp")))
    }
}

/// Standardized model inputs; statistics come from the training rows only.
pub fn prepare_inputs(g: &TemporalGraph, splits: &Splits, with_labels: bool) -> Result<(Matrix, Standardizer)> {
    let raw = build_inputs(g, with_labels);
    let st = Standardizer::fit(&raw, splits.train.clone())?;
    Ok((st.apply(&raw)?, st))
}

pub struct ArmResult {
    pub arm: Arm,
    pub run: usize,
    pub outcome: TrainOutcome,
    pub standardizer: Standardizer,
    pub val: Metrics,
    pub test: Metrics,
}

/// Trains and evaluates one arm on a prepared graph.
pub fn fit_arm(g: &TemporalGraph, splits: &Splits, arm: Arm, cfg: &RunConfig, seed: u64) -> Result<ArmResult> {
    let (inputs, standardizer) = prepare_inputs(g, splits, arm.with_labels())?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, INIT_STREAM));
    let predictor = if arm.is_graph() {
        Predictor::Graph {
            model: Model::new(cfg.model.clone(), inputs.cols(), &mut rng)?,
            sampler: SamplerConfig::new(cfg.sampler.fanouts.clone(), derive_seed(seed, SAMPLER_STREAM))?,
        }
    } else {
        Predictor::logistic(inputs.cols(), &mut rng)
    };
    let train_cfg = TrainConfig {
        seed: derive_seed(seed, SHUFFLE_STREAM),
        ..cfg.train.clone()
    };
    let outcome = train(predictor, g, &inputs, splits, &train_cfg)?;
    let (val, test) = evaluate_splits(
        &outcome.predictor,
        g,
        &inputs,
        splits,
        cfg.train.flag_rate,
        cfg.train.batch_size,
    )?;
    Ok(ArmResult {
        arm,
        run: 0,
        outcome,
        standardizer,
        val,
        test,
    })
}

/// Builds the graph for one repetition's data.
pub fn graph_for_run(cfg: &RunConfig, run: usize, graph: GraphConfig) -> Result<(TemporalGraph, Splits)> {
    let sessions = generate(&cfg.generator_for_run(run))?;
    graph_from_sessions(sessions, graph, cfg)
}

pub fn graph_from_sessions(sessions: Vec<Session>, graph: GraphConfig, cfg: &RunConfig) -> Result<(TemporalGraph, Splits)> {
    let g = build_graph(sessions, graph)?;
    let splits = chronological_split(g.sessions(), &cfg.split)?;
    Ok((g, splits))
}

/// Every arm on `cfg.runs` independently generated datasets.
pub fn run_experiment(cfg: &RunConfig, arms: &[Arm]) -> Result<Vec<ArmResult>> {
    let mut out = Vec::new();
    for run in 0..cfg.runs {
        let (g, splits) = graph_for_run(cfg, run, cfg.graph.config()?)?;
        for &arm in arms {
            let mut r = fit_arm(&g, &splits, arm, cfg, cfg.train_seed(run))?;
            r.run = run;
            out.push(r);
        }
    }
    Ok(out)
}

pub const METRICS_HEADER: &str = "arm,run,split,n,positives,loss,auc,q,threshold,flag_rate,recall,best_epoch";

/// Writes validation and test rows for each result. Contains no timings, so
/// identical seeds give identical bytes.
pub fn write_metrics_csv<W: Write>(mut w: W, results: &[ArmResult]) -> Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for r in results {
        for (split, m) in [("val", &r.val), ("test", &r.test)] {
            writeln!(
                w,
                "{},{},{split},{},{},{:.6},{:.6},{},{:.6},{:.6},{:.6},{}",
                r.arm, r.run, m.n, m.positives, m.loss, m.roc_auc, m.q, m.threshold, m.flag_rate, m.recall, r.outcome.best_epoch
            )?;
        }
    }
    Ok(())
}

/// Mean test AUC per arm, in first-seen order.
pub fn mean_test_auc(results: &[ArmResult]) -> Vec<(Arm, f64)> {
    let mut arms: Vec<Arm> = Vec::new();
    for r in results {
        if !arms.contains(&r.arm) {
            arms.push(r.arm);
        }
    }
    arms.into_iter()
        .map(|a| {
            let v: Vec<f64> = results.iter().filter(|r| r.arm == a).map(|r| r.test.roc_auc).collect();
            (a, v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationParam {
    /// Recency cap.
    K,
    /// Time window, in seconds.
    T,
}

impl AblationParam {
    pub fn as_str(self) -> &'static str {
        match self {
            AblationParam::K => "K",
            AblationParam::T => "T",
        }
    }

    /// Default sweep: caps 1..10, windows 1..120 days.
    pub fn default_grid(self) -> Vec<i64> {
        match self {
            AblationParam::K => vec![1, 2, 3, 5, 10],
            AblationParam::T => [1, 7, 30, 60, 120].iter().map(|d| d * 86_400).collect(),
        }
    }

    fn apply(self, base: GraphConfig, value: i64) -> Result<GraphConfig> {
        match self {
            AblationParam::K => {
                let cap = usize::try_from(value).map_err(|_| Error::Config(format!("cap {value} out of range")))?;
                GraphConfig::new(base.window, cap)
            }
            AblationParam::T => GraphConfig::new(value, base.cap),
        }
    }

    /// Value as printed in the ablation table (windows in days).
    pub fn display_value(self, value: i64) -> String {
        match self {
            AblationParam::K => value.to_string(),
            AblationParam::T => format!("{}", value as f64 / 86_400.0),
        }
    }
}

impl FromStr for AblationParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(AblationParam::K),
            "T" | "t" => Ok(AblationParam::T),
            _ => Err(Error::Config(format!("unknown ablation parameter {s:?}; expected K or T"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub param: AblationParam,
    pub value: i64,
    /// Test AUC per repetition.
    pub aucs: Vec<f64>,
    pub auc: f64,
}

/// Rebuilds the graph for each value, retrains `arm` on every repetition and
/// records test AUC. Cells run on up to `jobs` threads; results do not depend
/// on `jobs`.
pub fn ablate(cfg: &RunConfig, param: AblationParam, values: &[i64], arm: Arm, jobs: usize) -> Result<Vec<AblationRow>> {
    if values.is_empty() {
        return Err(Error::Config("ablation needs at least one value".into()));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("ablation values must be strictly ascending".into()));
    }
    let base = cfg.graph.config()?;
    let configs: Vec<GraphConfig> = values.iter().map(|&v| param.apply(base, v)).collect::<Result<_>>()?;
    let data: Vec<Vec<Session>> = (0..cfg.runs)
        .map(|run| generate(&cfg.generator_for_run(run)))
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|v| (0..cfg.runs).map(move |r| (v, r)))
        .collect();
    let results: Mutex<Vec<Option<Result<f64>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(&(v, run)) = cells.get(i) else { break };
        let auc = graph_from_sessions(data[run].clone(), configs[v], cfg)
            .and_then(|(g, splits)| fit_arm(&g, &splits, arm, cfg, cfg.train_seed(run)))
            .map(|r| r.test.roc_auc);
        results.lock().expect("poisoned")[i] = Some(auc);
    };
    std::thread::scope(|s| {
        for _ in 1..jobs.max(1) {
            s.spawn(work);
        }
        work();
    });

    let mut aucs = vec![Vec::with_capacity(cfg.runs); values.len()];
    for (i, r) in results.into_inner().expect("poisoned").into_iter().enumerate() {
        aucs[cells[i].0].push(r.expect("every cell ran")?);
    }
    Ok(values
        .iter()
        .zip(aucs)
        .map(|(&value, aucs)| AblationRow {
            param,
            value,
            auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
            aucs,
        })
        .collect())
}

pub fn write_ablation_csv<W: Write>(mut w: W, rows: &[AblationRow]) -> Result<()> {
    writeln!(w, "param,value,auc")?;
    for r in rows {
        writeln!(w, "{},{},{:.6}", r.param.as_str(), r.param.display_value(r.value), r.auc)?;
    }
    Ok(())
}

/// Run metadata written next to result tables.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub generator_seed: u64,
    pub runs: usize,
    pub wall_time_secs: f64,
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn new(command: impl Into<String>, cfg: &RunConfig, wall_time_secs: f64) -> Self {
        Manifest {
            version: format!("riskgraph {}", env!("CARGO_PKG_VERSION")),
            command: command.into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            generator_seed: cfg.generator.seed,
            runs: cfg.runs,
            wall_time_secs,
            config: cfg.to_json(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}
