//! Time-respecting typed session graph.
//!
//! Every edge points from an earlier session to a strictly later one that
//! shares the edge's identifier, within the time window `T`. For each
//! `(node, type)` only the `K` most recent such predecessors are kept, most
//! recent first. Ordering nodes by timestamp makes every edge go from a
//! smaller to a larger node id, so the graph is acyclic by construction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{EdgeType, NodeId, Session};

/// Connectivity regulation: time window and per-type recency cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Maximum age `t_v - t_u` of a linked predecessor, in seconds.
    pub window: i64,
    /// Maximum number of predecessors kept per node and edge type.
    pub cap: usize,
}

impl GraphConfig {
    pub fn new(window: i64, cap: usize) -> Result<Self> {
        let cfg = GraphConfig { window, cap };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window <= 0 {
            return Err(Error::GraphConfig(format!(
                "time window must be positive, got {}",
                self.window
            )));
        }
        if self.cap == 0 {
            return Err(Error::GraphConfig("recency cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Compressed in-adjacency for one edge type.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
}

impl Csr {
    fn new() -> Self {
        Csr {
            offsets: vec![0],
            targets: Vec::new(),
        }
    }

    pub(crate) fn from_parts(offsets: Vec<usize>, targets: Vec<NodeId>) -> Self {
        Csr { offsets, targets }
    }

    fn push(&mut self, preds: &[NodeId]) {
        self.targets.extend_from_slice(preds);
        self.offsets.push(self.targets.len());
    }

    #[inline]
    pub fn row(&self, v: usize) -> &[NodeId] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[NodeId] {
        &self.targets
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }
}

/// A directed typed edge `src -> dst`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeType,
}

#[derive(Clone, Debug)]
pub struct TemporalGraph {
    sessions: Vec<Session>,
    dim: usize,
    config: GraphConfig,
    in_adj: [Csr; EdgeType::COUNT],
    // identifier value -> every node carrying it, ascending node id
    postings: [HashMap<String, Vec<NodeId>>; EdgeType::COUNT],
}

impl PartialEq for TemporalGraph {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.config == other.config
            && self.sessions == other.sessions
            && self.in_adj == other.in_adj
    }
}

/// Builds the graph over `sessions`.
///
/// Sessions are ordered by timestamp with ties kept in input order; the
/// resulting position is the node id.
pub fn build_graph(sessions: Vec<Session>, config: GraphConfig) -> Result<TemporalGraph> {
    let first = sessions.first().ok_or(Error::Empty)?;
    let dim = first.x.len();
    let mut graph = TemporalGraph::empty(dim, config)?;
    let mut sessions = sessions;
    for (i, s) in sessions.iter_mut().enumerate() {
        s.normalize();
        s.validate(i, dim)?;
    }
    // stable: equal timestamps keep ingestion order
    sessions.sort_by_key(|s| s.t);
    graph.sessions.reserve(sessions.len());
    for s in sessions {
        graph.push_unchecked(s);
    }
    Ok(graph)
}

impl TemporalGraph {
    /// An empty graph for streaming ingestion.
    pub fn empty(dim: usize, config: GraphConfig) -> Result<Self> {
        config.validate()?;
        Ok(TemporalGraph {
            sessions: Vec::new(),
            dim,
            config,
            in_adj: [Csr::new(), Csr::new(), Csr::new()],
            postings: Default::default(),
        })
    }

    /// Reassembles a graph from stored parts, re-deriving the adjacency and
    /// checking that it matches `in_adj` exactly.
    pub(crate) fn from_parts(
        sessions: Vec<Session>,
        dim: usize,
        config: GraphConfig,
        in_adj: [Csr; EdgeType::COUNT],
    ) -> Result<Self> {
        let mut graph = TemporalGraph::empty(dim, config)
            .map_err(|e| Error::Snapshot(e.to_string()))?;
        let mut last = i64::MIN;
        for (i, mut s) in sessions.into_iter().enumerate() {
            s.normalize();
            s.validate(i, dim).map_err(|e| Error::Snapshot(e.to_string()))?;
            if s.t < last {
                return Err(Error::Snapshot(format!("session {i} out of timestamp order")));
            }
            last = s.t;
            graph.push_unchecked(s);
        }
        if graph.in_adj != in_adj {
            return Err(Error::Snapshot(
                "stored adjacency does not match the session block".into(),
            ));
        }
        Ok(graph)
    }

    /// Appends one session, linking it to its capped in-window predecessors.
    ///
    /// The result is identical to rebuilding from the extended session list.
    pub fn insert_session(&mut self, mut session: Session) -> Result<NodeId> {
        session.normalize();
        session.validate(self.sessions.len(), self.dim)?;
        if let Some(last) = self.sessions.last() {
            if session.t < last.t {
                return Err(Error::OutOfOrder {
                    t: session.t,
                    latest: last.t,
                });
            }
        }
        Ok(self.push_unchecked(session))
    }

    fn push_unchecked(&mut self, session: Session) -> NodeId {
        let v = NodeId::from(self.sessions.len());
        let mut preds = Vec::with_capacity(self.config.cap);
        for kind in EdgeType::ALL {
            preds.clear();
            let key = session.identifier(kind);
            if key.is_empty() {
                self.in_adj[kind.index()].push(&preds);
                continue;
            }
            let list = self.postings[kind.index()].entry(key.to_owned()).or_default();
            let mut i = list.len();
            // equal timestamps are never linked
            while i > 0 && self.sessions[list[i - 1].index()].t == session.t {
                i -= 1;
            }
            while i > 0 && preds.len() < self.config.cap {
                let u = list[i - 1];
                if session.t - self.sessions[u.index()].t > self.config.window {
                    break;
                }
                preds.push(u);
                i -= 1;
            }
            list.push(v);
            self.in_adj[kind.index()].push(&preds);
        }
        self.sessions.push(session);
        v
    }

    /// Same sessions, different connectivity regulation.
    pub fn rebuild(&self, config: GraphConfig) -> Result<TemporalGraph> {
        let mut graph = TemporalGraph::empty(self.dim, config)?;
        graph.sessions.reserve(self.sessions.len());
        for s in &self.sessions {
            graph.push_unchecked(s.clone());
        }
        Ok(graph)
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> GraphConfig {
        self.config
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn into_sessions(self) -> Vec<Session> {
        self.sessions
    }

    #[inline]
    pub fn session(&self, v: NodeId) -> &Session {
        &self.sessions[v.index()]
    }

    pub fn check_node(&self, v: NodeId) -> Result<()> {
        if v.index() < self.sessions.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(v.index()))
        }
    }

    /// Stored predecessors of `v` linked on `kind`, most recent first.
    pub fn in_neighbors(&self, v: NodeId, kind: EdgeType) -> Result<&[NodeId]> {
        self.check_node(v)?;
        Ok(self.in_adj[kind.index()].row(v.index()))
    }

    /// Unchecked variant for hot loops over known-valid ids.
    #[inline]
    pub(crate) fn preds(&self, v: NodeId, kind: EdgeType) -> &[NodeId] {
        self.in_adj[kind.index()].row(v.index())
    }

    pub fn adjacency(&self, kind: EdgeType) -> &Csr {
        &self.in_adj[kind.index()]
    }

    pub fn num_edges(&self) -> usize {
        self.in_adj.iter().map(Csr::num_edges).sum()
    }

    pub fn max_in_degree(&self) -> usize {
        (0..self.len())
            .flat_map(|v| self.in_adj.iter().map(move |c| c.row(v).len()))
            .max()
            .unwrap_or(0)
    }

    /// All stored edges, grouped by destination then type.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.len()).flat_map(move |v| {
            EdgeType::ALL.into_iter().flat_map(move |kind| {
                self.in_adj[kind.index()].row(v).iter().map(move |&src| Edge {
                    src,
                    dst: NodeId::from(v),
                    kind,
                })
            })
        })
    }

    /// First node id whose timestamp is `>= t`.
    pub fn lower_bound(&self, t: i64) -> usize {
        self.sessions.partition_point(|s| s.t < t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(acct: &str, dev: &str, ip: &str, t: i64) -> Session {
        Session {
            account_id: acct.into(),
            device_id: dev.into(),
            ip_address: ip.into(),
            t,
            x: vec![0.0],
            y: 0,
            tau: t,
        }
    }

    fn cfg(window: i64, cap: usize) -> GraphConfig {
        GraphConfig::new(window, cap).unwrap()
    }

    #[test]
    fn shared_device_gives_one_device_edge() {
        let g = build_graph(vec![s("a", "d", "i1", 100), s("b", "d", "i2", 200)], cfg(1000, 5))
            .unwrap();
        let v = NodeId(1);
        assert_eq!(g.in_neighbors(v, EdgeType::Device).unwrap(), &[NodeId(0)]);
        assert!(g.in_neighbors(v, EdgeType::Account).unwrap().is_empty());
        assert!(g.in_neighbors(v, EdgeType::Ip).unwrap().is_empty());
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn window_boundary_is_inclusive() {
        let g = build_graph(vec![s("a", "d", "i", 0), s("b", "d", "j", 1000)], cfg(1000, 5))
            .unwrap();
        assert_eq!(g.num_edges(), 1);
        let g = build_graph(vec![s("a", "d", "i", 0), s("b", "d", "j", 1001)], cfg(1000, 5))
            .unwrap();
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn recency_cap_keeps_most_recent_first() {
        let mut sessions: Vec<_> = [10, 20, 30, 40, 50]
            .iter()
            .enumerate()
            .map(|(i, &t)| s("acct", &format!("d{i}"), &format!("i{i}"), t))
            .collect();
        sessions.push(s("acct", "dx", "ix", 60));
        let g = build_graph(sessions, cfg(1000, 3)).unwrap();
        let preds = g.in_neighbors(NodeId(5), EdgeType::Account).unwrap();
        let times: Vec<i64> = preds.iter().map(|&u| g.session(u).t).collect();
        assert_eq!(times, vec![50, 40, 30]);
    }

    #[test]
    fn equal_timestamps_are_not_linked_and_ties_prefer_later_ingestion() {
        let g = build_graph(
            vec![
                s("a", "d", "i", 5),
                s("a", "d", "i", 5),
                s("a", "d", "i", 9),
            ],
            cfg(100, 1),
        )
        .unwrap();
        assert!(g.in_neighbors(NodeId(1), EdgeType::Account).unwrap().is_empty());
        assert_eq!(g.in_neighbors(NodeId(2), EdgeType::Account).unwrap(), &[NodeId(1)]);
    }

    #[test]
    fn input_order_is_sorted_by_time() {
        let g = build_graph(vec![s("a", "d", "i", 50), s("a", "d", "i", 10)], cfg(100, 2)).unwrap();
        assert_eq!(g.session(NodeId(0)).t, 10);
        assert_eq!(g.in_neighbors(NodeId(1), EdgeType::Ip).unwrap(), &[NodeId(0)]);
    }

    #[test]
    fn pair_sharing_two_identifiers_gets_two_typed_edges() {
        let g = build_graph(vec![s("a", "d", "i1", 1), s("a", "d", "i2", 2)], cfg(10, 2)).unwrap();
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn blank_identifiers_never_link() {
        let g = build_graph(vec![s(" ", "d1", "i1", 1), s("", "d2", "i2", 2)], cfg(10, 2)).unwrap();
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn insert_into_empty_and_out_of_order() {
        let mut g = TemporalGraph::empty(1, cfg(100, 2)).unwrap();
        let v = g.insert_session(s("a", "d", "ip", 10)).unwrap();
        assert_eq!(v, NodeId(0));
        assert_eq!(g.num_edges(), 0);
        let w = g.insert_session(s("b", "e", "ip", 20)).unwrap();
        assert_eq!(g.in_neighbors(w, EdgeType::Ip).unwrap(), &[v]);
        assert_eq!(g.num_edges(), 1);
        assert!(matches!(
            g.insert_session(s("c", "f", "ip", 15)),
            Err(Error::OutOfOrder { t: 15, latest: 20 })
        ));
    }

    #[test]
    fn build_rejects_bad_input() {
        assert!(matches!(build_graph(vec![], cfg(1, 1)), Err(Error::Empty)));
        let mut bad = s("a", "d", "i", 2);
        bad.x = vec![1.0, 2.0];
        assert!(matches!(
            build_graph(vec![s("a", "d", "i", 1), bad], cfg(1, 1)),
            Err(Error::FeatureDim { index: 1, .. })
        ));
        assert!(GraphConfig::new(0, 1).is_err());
        assert!(GraphConfig::new(1, 0).is_err());
    }

    #[test]
    fn unknown_node_is_an_error() {
        let g = build_graph(vec![s("a", "d", "i", 1)], cfg(1, 1)).unwrap();
        assert!(matches!(g.in_neighbors(NodeId(7), EdgeType::Ip), Err(Error::UnknownNode(7))));
    }
}
