//! Session records: the nodes of the temporal graph.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adjudication sentinel for a label that never becomes known.
pub const NEVER: i64 = i64::MAX;

/// Dense node index, assigned in timestamp order (ties by ingestion order).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(u32::try_from(i).expect("node index exceeds u32"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The identifier a directed edge was linked on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeType {
    Account,
    Device,
    Ip,
}

impl EdgeType {
    pub const ALL: [EdgeType; 3] = [EdgeType::Account, EdgeType::Device, EdgeType::Ip];
    pub const COUNT: usize = 3;

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::Account => "account",
            EdgeType::Device => "device",
            EdgeType::Ip => "ip",
        }
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One high-risk session.
///
/// `t` and `tau` are integer seconds. `tau` is when the label `y` becomes
/// known; [`NEVER`] marks a label that is never adjudicated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub account_id: String,
    pub device_id: String,
    pub ip_address: String,
    pub t: i64,
    pub x: Vec<f64>,
    pub y: u8,
    #[serde(with = "tau_repr")]
    pub tau: i64,
}

impl Session {
    pub fn identifier(&self, kind: EdgeType) -> &str {
        match kind {
            EdgeType::Account => &self.account_id,
            EdgeType::Device => &self.device_id,
            EdgeType::Ip => &self.ip_address,
        }
    }

    #[inline]
    pub fn is_fraud(&self) -> bool {
        self.y == 1
    }

    /// Label known at time `at`?
    #[inline]
    pub fn label_known_at(&self, at: i64) -> bool {
        self.tau <= at
    }

    /// Trims identifier whitespace in place; matching is exact on the trimmed value.
    pub fn normalize(&mut self) {
        for s in [&mut self.account_id, &mut self.device_id, &mut self.ip_address] {
            let trimmed = s.trim();
            if trimmed.len() != s.len() {
                *s = trimmed.to_owned();
            }
        }
    }

    /// Checks the per-session invariants; `index` is only used for the error.
    pub fn validate(&self, index: usize, dim: usize) -> Result<()> {
        if self.x.len() != dim {
            return Err(Error::FeatureDim {
                index,
                expected: dim,
                found: self.x.len(),
            });
        }
        if let Some(j) = self.x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSession {
                index,
                reason: format!("non-finite feature at column {j}"),
            });
        }
        if self.y > 1 {
            return Err(Error::InvalidSession {
                index,
                reason: format!("label must be 0 or 1, got {}", self.y),
            });
        }
        if self.tau < self.t {
            return Err(Error::InvalidSession {
                index,
                reason: format!("tau {} precedes t {}", self.tau, self.t),
            });
        }
        Ok(())
    }
}

/// `tau` is written as `null` when it equals [`NEVER`].
mod tau_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::NEVER;

    pub fn serialize<S: Serializer>(tau: &i64, s: S) -> Result<S::Ok, S::Error> {
        if *tau == NEVER {
            s.serialize_none()
        } else {
            s.serialize_i64(*tau)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<i64, D::Error> {
        Ok(Option::<i64>::deserialize(d)?.unwrap_or(NEVER))
    }
}
