//! Serve-time label features.
//!
//! For a target session `v`, the candidate set is the union over edge types
//! of its stored (windowed, recency-capped) predecessors. Only predecessors
//! whose label was adjudicated by `t_v` contribute, so every feature is
//! computable at the moment `v` is scored.

use std::io::Write;

use crate::error::Result;
use crate::graph::TemporalGraph;
use crate::io::csv_io;
use crate::session::{EdgeType, NodeId};
use crate::tensor::Matrix;

/// Number of label-feature columns appended to each input row.
pub const LABEL_FEATURES: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LabelFeatures {
    /// Predecessors whose label is known at serve time.
    pub n_lab: u32,
    /// Of those, how many are fraud.
    pub n_fraud: u32,
    /// `n_fraud / max(1, n_lab)`.
    pub rate: f64,
    /// 1 if any known predecessor is fraud.
    pub any: u8,
}

impl LabelFeatures {
    pub fn from_counts(n_lab: u32, n_fraud: u32) -> Self {
        LabelFeatures {
            n_lab,
            n_fraud,
            rate: f64::from(n_fraud) / f64::from(n_lab.max(1)),
            any: u8::from(n_fraud >= 1),
        }
    }

    pub fn to_array(self) -> [f64; LABEL_FEATURES] {
        [
            f64::from(self.n_lab),
            f64::from(self.n_fraud),
            self.rate,
            f64::from(self.any),
        ]
    }
}

/// Union of the stored typed predecessors of `v`, deduplicated, ascending.
pub fn recent_set(g: &TemporalGraph, v: NodeId) -> Result<Vec<NodeId>> {
    g.check_node(v)?;
    let mut out: Vec<NodeId> = EdgeType::ALL
        .iter()
        .flat_map(|&k| g.preds(v, k).iter().copied())
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Predecessors of `v` whose label is known at `t_v` (`tau_u <= t_v`).
pub fn available_set(g: &TemporalGraph, v: NodeId) -> Result<Vec<NodeId>> {
    let t_v = g.session(v).t;
    let mut set = recent_set(g, v)?;
    set.retain(|&u| g.session(u).label_known_at(t_v));
    Ok(set)
}

pub fn label_features(g: &TemporalGraph, v: NodeId) -> Result<LabelFeatures> {
    let avail = available_set(g, v)?;
    let n_fraud = avail.iter().filter(|&&u| g.session(u).is_fraud()).count();
    Ok(LabelFeatures::from_counts(avail.len() as u32, n_fraud as u32))
}

/// Label features for every node, row-aligned with node ids.
pub fn all_label_features(g: &TemporalGraph) -> Vec<LabelFeatures> {
    (0..g.len())
        .map(|v| label_features(g, NodeId::from(v)).expect("valid node id"))
        .collect()
}

/// Encoder input rows `[x_v ; l_v]`, shape `(|V|, d + 4)`.
pub fn augment_inputs(g: &TemporalGraph) -> Matrix {
    build_inputs(g, true)
}

/// Input rows with or without the label-feature columns.
pub fn build_inputs(g: &TemporalGraph, with_labels: bool) -> Matrix {
    let d = g.dim();
    let cols = d + if with_labels { LABEL_FEATURES } else { 0 };
    let mut data = Vec::with_capacity(g.len() * cols);
    for (v, s) in g.sessions().iter().enumerate() {
        data.extend_from_slice(&s.x);
        if with_labels {
            let lf = label_features(g, NodeId::from(v)).expect("valid node id");
            data.extend_from_slice(&lf.to_array());
        }
    }
    Matrix::from_vec(g.len(), cols, data)
}

/// Debug export: `node_id,n_lab,n_fraud,r,a`.
pub fn write_label_features_csv<W: Write>(w: W, g: &TemporalGraph) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["node_id", "n_lab", "n_fraud", "r", "a"]).map_err(csv_io)?;
    for (v, lf) in all_label_features(g).iter().enumerate() {
        wtr.write_record([
            v.to_string(),
            lf.n_lab.to_string(),
            lf.n_fraud.to_string(),
            format!("{:.4}", lf.rate),
            lf.any.to_string(),
        ])
        .map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}
