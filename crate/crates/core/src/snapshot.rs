//! Versioned binary graph snapshot.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! header    magic "RGTGRAPH" | version u32 | dim u32 | window i64 | cap u64 | nodes u64
//! strings   3 x (count u64, count x (len u32, utf8 bytes))   account, device, ip
//! sessions  nodes x (t i64, tau i64, y u8, account u32, device u32, ip u32)
//! features  nodes x dim x f64
//! csr       3 x (offsets (nodes + 1) x u64, targets offsets[nodes] x u32)
//! ```
//!
//! Decoding re-derives the adjacency from the session block and rejects the
//! snapshot if it differs from the stored CSR blocks, so a decoded graph
//! always satisfies the window, cap and ordering invariants.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::graph::{Csr, GraphConfig, TemporalGraph};
use crate::session::{EdgeType, NodeId, Session};

pub const MAGIC: [u8; 8] = *b"RGTGRAPH";
pub const VERSION: u32 = 1;

const SESSION_RECORD: usize = 8 + 8 + 1 + 4 * 3;

impl TemporalGraph {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        let n = self.len();
        w.bytes(&MAGIC);
        w.u32(VERSION);
        w.u32(self.dim() as u32);
        w.i64(self.config().window);
        w.u64(self.config().cap as u64);
        w.u64(n as u64);

        // dictionaries in first-appearance order
        let mut codes = vec![[0u32; 3]; n];
        for kind in EdgeType::ALL {
            let mut dict: HashMap<&str, u32> = HashMap::new();
            let mut order: Vec<&str> = Vec::new();
            for (i, s) in self.sessions().iter().enumerate() {
                let id = s.identifier(kind);
                let next = order.len() as u32;
                let code = *dict.entry(id).or_insert_with(|| {
                    order.push(id);
                    next
                });
                codes[i][kind.index()] = code;
            }
            w.u64(order.len() as u64);
            for s in order {
                w.u32(s.len() as u32);
                w.bytes(s.as_bytes());
            }
        }

        for (s, c) in self.sessions().iter().zip(&codes) {
            w.i64(s.t);
            w.i64(s.tau);
            w.u8(s.y);
            for code in c {
                w.u32(*code);
            }
        }
        for s in self.sessions() {
            for &v in &s.x {
                w.f64(v);
            }
        }
        for kind in EdgeType::ALL {
            let csr = self.adjacency(kind);
            for &o in csr.offsets() {
                w.u64(o as u64);
            }
            for t in csr.targets() {
                w.u32(t.0);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<TemporalGraph> {
        decode(bytes).map_err(Error::Snapshot)?
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TemporalGraph> {
        Self::from_bytes(&fs::read(path)?)
    }
}

// Outer error: framing problems; inner: semantic validation from `from_parts`.
fn decode(bytes: &[u8]) -> std::result::Result<Result<TemporalGraph>, String> {
    let mut r = Reader::new(bytes);
    if r.take(MAGIC.len())? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let dim = r.u32()? as usize;
    let window = r.i64()?;
    let cap = usize::try_from(r.u64()?).map_err(|_| "cap overflows".to_string())?;
    let config = GraphConfig::new(window, cap).map_err(|e| e.to_string())?;
    let n = r.count(SESSION_RECORD)?;
    if n == 0 {
        return Err("snapshot holds no sessions".into());
    }

    let mut dicts: Vec<Vec<String>> = Vec::with_capacity(3);
    for _ in EdgeType::ALL {
        let count = r.count(4)?;
        let mut dict = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let raw = r.take(len)?;
            let s = std::str::from_utf8(raw).map_err(|e| format!("identifier not utf-8: {e}"))?;
            dict.push(s.to_owned());
        }
        dicts.push(dict);
    }

    if n.saturating_mul(SESSION_RECORD) > r.remaining() {
        return Err("session block truncated".into());
    }
    let mut sessions = Vec::with_capacity(n);
    for i in 0..n {
        let t = r.i64()?;
        let tau = r.i64()?;
        let y = r.u8()?;
        let mut ids: [String; 3] = Default::default();
        for (k, dict) in dicts.iter().enumerate() {
            let code = r.u32()? as usize;
            ids[k] = dict
                .get(code)
                .ok_or_else(|| format!("session {i}: identifier code {code} out of range"))?
                .clone();
        }
        let [account_id, device_id, ip_address] = ids;
        sessions.push(Session {
            account_id,
            device_id,
            ip_address,
            t,
            x: Vec::new(),
            y,
            tau,
        });
    }
    if n.saturating_mul(dim).saturating_mul(8) > r.remaining() {
        return Err("feature block truncated".into());
    }
    for s in &mut sessions {
        s.x = (0..dim).map(|_| r.f64()).collect::<std::result::Result<_, _>>()?;
    }

    let mut blocks: Vec<Csr> = Vec::with_capacity(3);
    for kind in EdgeType::ALL {
        if (n + 1).saturating_mul(8) > r.remaining() {
            return Err(format!("{kind} offsets truncated"));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            let o = r.u64()?;
            offsets.push(usize::try_from(o).map_err(|_| "offset overflows".to_string())?);
        }
        if offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(format!("{kind} offsets not monotone from zero"));
        }
        let m = offsets[n];
        if m.saturating_mul(4) > r.remaining() {
            return Err(format!("{kind} targets truncated"));
        }
        let mut targets = Vec::with_capacity(m);
        for _ in 0..m {
            targets.push(NodeId(r.u32()?));
        }
        blocks.push(Csr::from_parts(offsets, targets));
    }
    r.expect_end()?;
    let in_adj: [Csr; 3] = blocks.try_into().expect("three blocks");
    Ok(TemporalGraph::from_parts(sessions, dim, config, in_adj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn graph() -> TemporalGraph {
        let sessions = (0..20)
            .map(|i| Session {
                account_id: format!("a{}", i % 3),
                device_id: format!("d{}", i % 4),
                ip_address: format!("ip{}", i % 5),
                t: i as i64 * 10,
                x: vec![i as f64, -0.5],
                y: (i % 2) as u8,
                tau: if i % 7 == 0 { crate::session::NEVER } else { i as i64 * 10 + 5 },
            })
            .collect();
        build_graph(sessions, GraphConfig::new(60, 2).unwrap()).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let g = graph();
        let bytes = g.to_bytes();
        let back = TemporalGraph::from_bytes(&bytes).unwrap();
        assert_eq!(g, back);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_inputs_are_errors() {
        let bytes = graph().to_bytes();
        let mut bad = bytes.clone();
        bad[0] ^= 0xff;
        assert!(matches!(TemporalGraph::from_bytes(&bad), Err(Error::Snapshot(_))));

        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(TemporalGraph::from_bytes(&bad).is_err());

        for cut in [0, 7, 20, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(TemporalGraph::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(TemporalGraph::from_bytes(&long).is_err());
    }

    #[test]
    fn tampered_adjacency_is_rejected() {
        let bytes = graph().to_bytes();
        // last target of the ip block
        let mut bad = bytes.clone();
        let k = bad.len() - 4;
        bad[k] = bad[k].wrapping_add(1);
        assert!(matches!(TemporalGraph::from_bytes(&bad), Err(Error::Snapshot(_))));
    }
}
