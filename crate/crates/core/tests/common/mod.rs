//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskgraph::labelprop::LabelFeatures;
use riskgraph::{EdgeType, NodeId, Session, TemporalGraph};

/// Random sessions over small identifier pools so that collisions are common.
pub fn random_sessions(n: usize, dim: usize, pools: [usize; 3], horizon: i64, seed: u64) -> Vec<Session> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = rng.random_range(0..horizon);
            let tau = if rng.random_bool(0.1) {
                riskgraph::NEVER
            } else {
                t + rng.random_range(0..horizon / 4 + 1)
            };
            Session {
                account_id: format!("a{}", rng.random_range(0..pools[0])),
                device_id: format!("d{}", rng.random_range(0..pools[1])),
                ip_address: format!("i{}", rng.random_range(0..pools[2])),
                t,
                x: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                y: u8::from(rng.random_bool(0.3)),
                tau,
            }
        })
        .collect()
}

/// Stable time sort, matching node-id assignment.
pub fn time_sorted(mut sessions: Vec<Session>) -> Vec<Session> {
    sessions.sort_by_key(|s| s.t);
    sessions
}

/// O(n^2) typed in-adjacency straight from the definition: for each node
/// and type, every strictly earlier same-identifier session within the
/// window, most recent first (ties: larger node id first), truncated to `cap`.
pub fn brute_force_adjacency(sorted: &[Session], window: i64, cap: usize) -> [Vec<Vec<NodeId>>; 3] {
    let mut out: [Vec<Vec<NodeId>>; 3] = Default::default();
    for kind in EdgeType::ALL {
        for sv in sorted {
            let key = sv.identifier(kind);
            let mut cands: Vec<usize> = (0..sorted.len())
                .filter(|&u| {
                    let su = &sorted[u];
                    !key.is_empty()
                        && su.identifier(kind) == key
                        && su.t < sv.t
                        && sv.t - su.t <= window
                })
                .collect();
            cands.sort_by(|&a, &b| sorted[b].t.cmp(&sorted[a].t).then(b.cmp(&a)));
            cands.truncate(cap);
            out[kind.index()].push(cands.into_iter().map(NodeId::from).collect());
        }
    }
    out
}

/// The library's typed in-adjacency, in stored order.
pub fn adjacency_of(g: &TemporalGraph) -> [Vec<Vec<NodeId>>; 3] {
    let mut out: [Vec<Vec<NodeId>>; 3] = Default::default();
    for kind in EdgeType::ALL {
        for v in 0..g.len() {
            out[kind.index()].push(g.in_neighbors(NodeId::from(v), kind).unwrap().to_vec());
        }
    }
    out
}

/// Label features from a brute-force adjacency.
pub fn brute_force_label_features(sorted: &[Session], adj: &[Vec<Vec<NodeId>>; 3], v: usize) -> LabelFeatures {
    let mut r: Vec<NodeId> = adj.iter().flat_map(|a| a[v].iter().copied()).collect();
    r.sort();
    r.dedup();
    let t_v = sorted[v].t;
    let avail: Vec<&Session> = r
        .iter()
        .map(|u| &sorted[u.index()])
        .filter(|s| s.tau <= t_v)
        .collect();
    let n_lab = avail.len() as u32;
    let n_fraud = avail.iter().filter(|s| s.y == 1).count() as u32;
    LabelFeatures {
        n_lab,
        n_fraud,
        rate: f64::from(n_fraud) / f64::from(n_lab.max(1)),
        any: u8::from(n_fraud > 0),
    }
}

/// All-pairs AUC: `(2 * wins + ties) / (2 * P * N)`.
pub fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut twice, mut p, mut n) = (0u128, 0u128, 0u128);
    for (i, &yi) in labels.iter().enumerate() {
        if yi == 0 {
            n += 1;
            continue;
        }
        p += 1;
        for (j, &yj) in labels.iter().enumerate() {
            if yj == 0 {
                if scores[i] > scores[j] {
                    twice += 2;
                } else if scores[i] == scores[j] {
                    twice += 1;
                }
            }
        }
    }
    twice as f64 / (2 * p * n) as f64
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// `||a - b|| / max(||a||, ||b||)`; zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
pub mod grad;
