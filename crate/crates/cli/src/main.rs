//! `riskgraph` command-line pipeline.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use riskgraph::config::{parse_duration, RunConfig};
use riskgraph::harness::{
    ablate, chronological_split, evaluate_splits, fit_arm, graph_from_sessions, labels_of, nodes, run_experiment,
    summarize, write_ablation_csv, write_metrics_csv, AblationParam, Arm, Checkpoint, Manifest, Splits,
    METRICS_HEADER,
};
use riskgraph::io::{load_sessions, save_sessions};
use riskgraph::labelprop::{build_inputs, write_label_features_csv};
use riskgraph::synth::generate;
use riskgraph::{build_graph, GraphConfig, NodeId, TemporalGraph};

#[derive(Parser)]
#[command(name = "riskgraph", version, about = "Fraud scoring on a time-respecting session graph")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set graph.cap=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Root seed for data generation and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled session stream.
    Generate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a graph snapshot from a session file.
    BuildGraph {
        #[arg(long)]
        sessions: PathBuf,
        /// Time window, e.g. `90d`; defaults to the config value.
        #[arg(long)]
        window: Option<String>,
        /// Recency cap; defaults to the config value.
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write per-session label features as CSV.
    Features {
        #[command(flatten)]
        graph: GraphInput,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and write checkpoint, metrics and manifest.
    Train {
        #[command(flatten)]
        graph: GraphInput,
        #[arg(long, default_value = "gnn_lp")]
        arm: String,
        /// Output directory; defaults to `output.dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Score a split with a trained checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        graph: GraphInput,
        /// One of train, val, test.
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare arms over `runs` generated datasets.
    Experiment {
        #[arg(long, value_delimiter = ',', default_value = "logistic,gnn,gnn_lp")]
        arms: Vec<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Sweep the recency cap (K) or time window (T).
    Ablate {
        /// `K` or `T`.
        param: String,
        /// Ascending values; windows accept durations such as `7d`.
        #[arg(value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, default_value = "gnn_lp")]
        arm: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output CSV; defaults to `<output.dir>/ablation_<param>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score stored sessions or append new ones and score them.
    Score {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Graph snapshot holding the history.
        #[arg(long)]
        graph: PathBuf,
        /// Comma-separated node ids to score.
        #[arg(long, value_delimiter = ',', conflicts_with = "sessions")]
        nodes: Vec<u32>,
        /// New sessions (JSONL or CSV), inserted in order and scored on arrival.
        #[arg(long)]
        sessions: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GraphInput {
    /// Graph snapshot.
    #[arg(long, conflicts_with = "sessions", required_unless_present = "sessions")]
    graph: Option<PathBuf>,
    /// Session file; the graph is built with the configured window and cap.
    #[arg(long)]
    sessions: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Data(anyhow::Error),
    Divergence(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Divergence(_) => 4,
        }
    }

    fn message(&self) -> String {
        let e = match self {
            Failure::Config(e) | Failure::Data(e) | Failure::Divergence(e) => e,
        };
        format!("{e:#}")
    }
}

fn classify(e: anyhow::Error) -> Failure {
    match e.chain().find_map(|c| c.downcast_ref::<riskgraph::Error>()) {
        Some(riskgraph::Error::Divergence { .. }) => Failure::Divergence(e),
        Some(inner) if inner.is_data_error() => Failure::Data(e),
        Some(_) => Failure::Config(e),
        None if e.chain().any(|c| c.is::<io::Error>()) => Failure::Data(e),
        None => Failure::Config(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("riskgraph: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(cli.command, cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let f = classify(e);
            eprintln!("riskgraph: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
        overrides.push(format!("generator.seed={seed}"));
    }
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path, &overrides)?,
        None => RunConfig::from_toml_with("", &overrides)?,
    };
    Ok(cfg)
}

fn run(command: Command, cfg: RunConfig) -> anyhow::Result<()> {
    match command {
        Command::Generate { out } => {
            let sessions = generate(&cfg.generator_for_run(0))?;
            save_sessions(&out, &sessions).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::BuildGraph {
            sessions,
            window,
            cap,
            out,
        } => {
            let window = match window {
                Some(w) => parse_duration(&w)?,
                None => cfg.graph.window,
            };
            let config = GraphConfig::new(window, cap.unwrap_or(cfg.graph.cap))?;
            let g = build_graph(read_sessions(&sessions)?, config)?;
            g.save(&out).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Features { graph, out } => {
            let g = load_graph(&graph, &cfg)?;
            write_label_features_csv(BufWriter::new(create(&out)?), &g)?;
        }
        Command::Train { graph, arm, out_dir } => {
            let start = Instant::now();
            let arm: Arm = arm.parse()?;
            let g = load_graph(&graph, &cfg)?;
            let dir = output_dir(out_dir, &cfg)?;
            let splits = chronological_split(g.sessions(), &cfg.split)?;
            let result = fit_arm(&g, &splits, arm, &cfg, cfg.train_seed(0))?;
            let ck = Checkpoint::new(arm, g.dim(), g.config(), result.standardizer.clone(), &result.outcome.predictor);
            ck.save(dir.join("model.ckpt"))?;
            write_metrics_csv(BufWriter::new(create(&dir.join("metrics.csv"))?), &[result])?;
            Manifest::new("train", &cfg, start.elapsed().as_secs_f64()).save(dir.join("manifest.json"))?;
        }
        Command::Evaluate {
            checkpoint,
            graph,
            split,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint).with_context(|| format!("reading {}", checkpoint.display()))?;
            let predictor = ck.predictor()?;
            let g = load_graph(&graph, &cfg)?.rebuild(ck.meta.graph)?;
            check_dim(&g, &ck)?;
            let inputs = ck.meta.standardizer.apply(&build_inputs(&g, ck.meta.arm.with_labels()))?;
            let splits = chronological_split(g.sessions(), &cfg.split)?;
            let (val, test) =
                evaluate_splits(&predictor, &g, &inputs, &splits, cfg.train.flag_rate, cfg.train.batch_size)?;
            let chosen = match split.as_str() {
                "val" => val,
                "test" => test,
                "train" => {
                    let ids = nodes(splits.train.clone());
                    let scores = predictor.predict(&g, &inputs, &ids, cfg.train.batch_size)?;
                    summarize(&scores, &labels_of(&g, &ids), val.q, val.threshold)?
                }
                other => bail!(riskgraph::Error::Config(format!("unknown split {other:?}"))),
            };
            let mut w = BufWriter::new(create(&out)?);
            writeln!(w, "{METRICS_HEADER}")?;
            writeln!(
                w,
                "{},0,{split},{},{},{:.6},{:.6},{},{:.6},{:.6},{:.6},",
                ck.meta.arm,
                chosen.n,
                chosen.positives,
                chosen.loss,
                chosen.roc_auc,
                chosen.q,
                chosen.threshold,
                chosen.flag_rate,
                chosen.recall
            )?;
            w.flush()?;
        }
        Command::Experiment { arms, out_dir } => {
            let start = Instant::now();
            let arms: Vec<Arm> = arms.iter().map(|a| a.parse()).collect::<Result<_, _>>()?;
            let dir = output_dir(out_dir, &cfg)?;
            let results = run_experiment(&cfg, &arms)?;
            write_metrics_csv(BufWriter::new(create(&dir.join("metrics.csv"))?), &results)?;
            Manifest::new("experiment", &cfg, start.elapsed().as_secs_f64()).save(dir.join("manifest.json"))?;
        }
        Command::Ablate {
            param,
            values,
            arm,
            jobs,
            out,
        } => {
            let start = Instant::now();
            let param: AblationParam = param.parse()?;
            let arm: Arm = arm.parse()?;
            let values = if values.is_empty() {
                param.default_grid()
            } else {
                values
                    .iter()
                    .map(|v| parse_ablation_value(param, v))
                    .collect::<anyhow::Result<_>>()?
            };
            let rows = ablate(&cfg, param, &values, arm, jobs)?;
            let out = match out {
                Some(p) => p,
                None => output_dir(None, &cfg)?.join(format!("ablation_{}.csv", param.as_str())),
            };
            write_ablation_csv(BufWriter::new(create(&out)?), &rows)?;
            let manifest = out.with_extension("manifest.json");
            Manifest::new(format!("ablate {}", param.as_str()), &cfg, start.elapsed().as_secs_f64())
                .save(manifest)?;
        }
        Command::Score {
            checkpoint,
            graph,
            nodes,
            sessions,
        } => {
            let ck = Checkpoint::load(&checkpoint).with_context(|| format!("reading {}", checkpoint.display()))?;
            let predictor = ck.predictor()?;
            let mut g = TemporalGraph::load(&graph).with_context(|| format!("reading {}", graph.display()))?;
            if g.config() != ck.meta.graph {
                g = g.rebuild(ck.meta.graph)?;
            }
            check_dim(&g, &ck)?;
            let targets: Vec<NodeId> = match sessions {
                Some(path) => read_sessions(&path)?
                    .into_iter()
                    .map(|s| g.insert_session(s))
                    .collect::<Result<_, _>>()?,
                None if nodes.is_empty() => bail!(riskgraph::Error::Config("nothing to score: pass --nodes or --sessions".into())),
                None => nodes.into_iter().map(NodeId).collect(),
            };
            for &v in &targets {
                g.check_node(v)?;
            }
            // label features and standardized rows only depend on the past, so
            // one pass over the final graph equals scoring each arrival in turn
            let inputs = ck.meta.standardizer.apply(&build_inputs(&g, ck.meta.arm.with_labels()))?;
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            writeln!(w, "node_id,score")?;
            for v in targets {
                writeln!(w, "{v},{:.9}", predictor.score_node(&g, &inputs, v)?)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn parse_ablation_value(param: AblationParam, v: &str) -> anyhow::Result<i64> {
    Ok(match param {
        AblationParam::K => v
            .trim()
            .parse()
            .map_err(|_| riskgraph::Error::Config(format!("invalid cap {v:?}")))?,
        AblationParam::T => parse_duration(v)?,
    })
}

fn create(path: &Path) -> anyhow::Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn output_dir(explicit: Option<PathBuf>, cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let dir = explicit.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn read_sessions(path: &Path) -> anyhow::Result<Vec<riskgraph::Session>> {
    load_sessions(path).with_context(|| format!("reading {}", path.display()))
}

fn load_graph(input: &GraphInput, cfg: &RunConfig) -> anyhow::Result<TemporalGraph> {
    match (&input.graph, &input.sessions) {
        (Some(path), _) => TemporalGraph::load(path).with_context(|| format!("reading {}", path.display())),
        (None, Some(path)) => {
            let (g, _): (TemporalGraph, Splits) = graph_from_sessions(read_sessions(path)?, cfg.graph.config()?, cfg)?;
            Ok(g)
        }
        (None, None) => bail!(riskgraph::Error::Config("pass --graph or --sessions".into())),
    }
}

fn check_dim(g: &TemporalGraph, ck: &Checkpoint) -> anyhow::Result<()> {
    if g.dim() != ck.meta.feature_dim {
        bail!(riskgraph::Error::FeatureDim {
            index: 0,
            expected: ck.meta.feature_dim,
            found: g.dim(),
        });
    }
    Ok(())
}
