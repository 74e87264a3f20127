//! Layered, time-respecting neighbor sampling around a batch of seed nodes.
//!
//! Hop `j` expands every node first discovered at hop `j - 1`, drawing at most
//! `f_j` of its stored in-neighbors per edge type uniformly without
//! replacement. Because only stored edges are followed, every sampled path
//! runs strictly backwards in time and respects the window and cap.
//!
//! Nodes are numbered locally in discovery order (seeds first), so the
//! targets of each model layer form a prefix of the node list and the edges
//! it consumes form a prefix of the edge list.

use std::collections::HashMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TemporalGraph;
use crate::session::{EdgeType, NodeId};
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Per-hop, per-edge-type fanouts `(f_1, ..., f_L)`.
    pub fanouts: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(fanouts: Vec<usize>, seed: u64) -> Result<Self> {
        let cfg = SamplerConfig { fanouts, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fanouts.is_empty() {
            return Err(Error::Config("sampler needs at least one fanout".into()));
        }
        if self.fanouts.contains(&0) {
            return Err(Error::Config("fanouts must be positive".into()));
        }
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.fanouts.len()
    }

    /// Same fanouts, RNG stream for batch `index`.
    pub fn for_batch(&self, index: u64) -> SamplerConfig {
        SamplerConfig {
            fanouts: self.fanouts.clone(),
            seed: derive_seed(self.seed, index),
        }
    }
}

/// SplitMix64 mix of a root seed and a stream index.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut z = root ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A message edge in local batch indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeType,
    /// `t_dst - t_src`, seconds (always positive).
    pub dt: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EgoBatch {
    /// Global ids of every batch node, in discovery order.
    pub nodes: Vec<NodeId>,
    /// `nodes[hop_offsets[j]..hop_offsets[j + 1]]` were first reached at hop `j`.
    pub hop_offsets: Vec<usize>,
    pub edges: Vec<BatchEdge>,
    /// `edges[edge_offsets[j]..edge_offsets[j + 1]]` were sampled at hop `j + 1`.
    pub edge_offsets: Vec<usize>,
    /// Input feature rows aligned with `nodes`.
    pub input_rows: Matrix,
}

impl EgoBatch {
    pub fn num_seeds(&self) -> usize {
        self.hop_offsets[1]
    }

    pub fn seeds(&self) -> &[NodeId] {
        &self.nodes[..self.num_seeds()]
    }

    /// Sampled depth.
    pub fn depth(&self) -> usize {
        self.edge_offsets.len() - 1
    }

    pub fn layer_nodes(&self, hop: usize) -> &[NodeId] {
        &self.nodes[self.hop_offsets[hop]..self.hop_offsets[hop + 1]]
    }

    pub fn layer_edges(&self, hop: usize) -> &[BatchEdge] {
        &self.edges[self.edge_offsets[hop - 1]..self.edge_offsets[hop]]
    }

    /// Nodes whose state model layer `k` (1-based, of `layers`) must produce.
    pub fn layer_targets(&self, k: usize, layers: usize) -> usize {
        self.hop_offsets[layers - k + 1]
    }

    /// Edges consumed by model layer `k` (a prefix of `edges`).
    pub fn layer_messages(&self, k: usize, layers: usize) -> &[BatchEdge] {
        &self.edges[..self.edge_offsets[layers - k + 1]]
    }
}

/// Samples an ego-batch with the configured fanouts; deterministic in `cfg.seed`.
pub fn sample_ego_batch(
    g: &TemporalGraph,
    seeds: &[NodeId],
    cfg: &SamplerConfig,
    inputs: &Matrix,
) -> Result<EgoBatch> {
    cfg.validate()?;
    let fanouts: Vec<Option<usize>> = cfg.fanouts.iter().map(|&f| Some(f)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    expand(g, seeds, &fanouts, &mut rng, inputs)
}

/// Every stored in-neighbor at every hop.
pub fn full_neighborhood_batch(
    g: &TemporalGraph,
    seeds: &[NodeId],
    layers: usize,
    inputs: &Matrix,
) -> Result<EgoBatch> {
    if layers == 0 {
        return Err(Error::Config("at least one layer required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    expand(g, seeds, &vec![None; layers], &mut rng, inputs)
}

fn expand(
    g: &TemporalGraph,
    seeds: &[NodeId],
    fanouts: &[Option<usize>],
    rng: &mut ChaCha8Rng,
    inputs: &Matrix,
) -> Result<EgoBatch> {
    if inputs.rows() != g.len() {
        return Err(Error::Shape {
            op: "sample_ego_batch",
            detail: format!("{} input rows for {} nodes", inputs.rows(), g.len()),
        });
    }
    let mut local: HashMap<NodeId, usize> = HashMap::with_capacity(seeds.len() * 8);
    let mut nodes: Vec<NodeId> = Vec::with_capacity(seeds.len() * 8);
    for &s in seeds {
        g.check_node(s)?;
        if local.insert(s, nodes.len()).is_some() {
            return Err(Error::Config(format!("duplicate seed {s}")));
        }
        nodes.push(s);
    }

    let mut hop_offsets = vec![0, nodes.len()];
    let mut edges = Vec::new();
    let mut edge_offsets = vec![0];
    let mut picked: Vec<usize> = Vec::new();
    for &fanout in fanouts {
        let frontier = hop_offsets[hop_offsets.len() - 2]..nodes.len();
        for dst in frontier {
            let v = nodes[dst];
            let t_v = g.session(v).t;
            for kind in EdgeType::ALL {
                let preds = g.preds(v, kind);
                picked.clear();
                match fanout {
                    Some(f) if f < preds.len() => {
                        picked.extend(index::sample(rng, preds.len(), f));
                        // keep stored (recency) order
                        picked.sort_unstable();
                    }
                    _ => picked.extend(0..preds.len()),
                }
                for &p in &picked {
                    let u = preds[p];
                    let src = *local.entry(u).or_insert_with(|| {
                        nodes.push(u);
                        nodes.len() - 1
                    });
                    edges.push(BatchEdge {
                        src,
                        dst,
                        kind,
                        dt: t_v - g.session(u).t,
                    });
                }
            }
        }
        hop_offsets.push(nodes.len());
        edge_offsets.push(edges.len());
    }

    let idx: Vec<usize> = nodes.iter().map(|n| n.index()).collect();
    Ok(EgoBatch {
        input_rows: inputs.gather_rows(&idx),
        nodes,
        hop_offsets,
        edges,
        edge_offsets,
    })
}
