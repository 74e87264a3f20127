mod common;

use std::collections::HashSet;

use common::random_sessions;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riskgraph::labelprop::augment_inputs;
use riskgraph::models::{Model, ModelConfig, Variant};
use riskgraph::{build_graph, full_neighborhood_batch, sample_ego_batch, GraphConfig, NodeId, SamplerConfig, TemporalGraph};

fn graph(n: usize, pool: usize, cap: usize, seed: u64) -> TemporalGraph {
    build_graph(
        random_sessions(n, 3, [pool, pool + 1, pool + 3], 1_000, seed),
        GraphConfig::new(400, cap).unwrap(),
    )
    .unwrap()
}

fn seeds_of(g: &TemporalGraph, count: usize, stride: usize) -> Vec<NodeId> {
    (0..g.len()).rev().step_by(stride.max(1)).take(count).map(NodeId::from).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_edges_are_stored_edges(
        n in 5usize..200, pool in 1usize..6, cap in 1usize..8,
        f1 in 1usize..6, f2 in 1usize..6, seed in any::<u64>(),
    ) {
        let g = graph(n, pool, cap, seed);
        let inputs = augment_inputs(&g);
        let seeds = seeds_of(&g, 7, 3);
        let cfg = SamplerConfig::new(vec![f1, f2], seed).unwrap();
        let b = sample_ego_batch(&g, &seeds, &cfg, &inputs).unwrap();
        let full = full_neighborhood_batch(&g, &seeds, 2, &inputs).unwrap();
        let full_edges: HashSet<(NodeId, NodeId, u8)> = full
            .edges
            .iter()
            .map(|e| (full.nodes[e.src], full.nodes[e.dst], e.kind.index() as u8))
            .collect();

        prop_assert_eq!(b.seeds(), &seeds[..]);
        for hop in 1..=2 {
            let fanout = [f1, f2][hop - 1];
            let mut per: std::collections::HashMap<(usize, usize), usize> = Default::default();
            for e in b.layer_edges(hop) {
                let (u, v) = (b.nodes[e.src], b.nodes[e.dst]);
                prop_assert!(g.in_neighbors(v, e.kind).unwrap().contains(&u));
                prop_assert!(g.session(u).t < g.session(v).t);
                prop_assert_eq!(e.dt, g.session(v).t - g.session(u).t);
                prop_assert!(full_edges.contains(&(u, v, e.kind.index() as u8)));
                // destinations of hop `j` edges were first reached at hop `j - 1`
                prop_assert!(b.hop_offsets[hop - 1] <= e.dst && e.dst < b.hop_offsets[hop]);
                *per.entry((e.dst, e.kind.index())).or_default() += 1;
            }
            for (&(dst, kind), &count) in &per {
                let stored = g.in_neighbors(b.nodes[dst], riskgraph::EdgeType::from_index(kind).unwrap()).unwrap().len();
                prop_assert_eq!(count, stored.min(fanout));
            }
        }
        // input rows line up with node ids; nodes are unique
        let uniq: HashSet<NodeId> = b.nodes.iter().copied().collect();
        prop_assert_eq!(uniq.len(), b.nodes.len());
        for (i, v) in b.nodes.iter().enumerate() {
            prop_assert_eq!(b.input_rows.row(i), inputs.row(v.index()));
        }
        // determinism
        prop_assert_eq!(&b, &sample_ego_batch(&g, &seeds, &cfg, &inputs).unwrap());
    }

    #[test]
    fn large_fanout_equals_full_neighborhood(n in 5usize..200, pool in 1usize..6, cap in 1usize..8, seed in any::<u64>()) {
        let g = graph(n, pool, cap, seed);
        let inputs = augment_inputs(&g);
        let seeds = seeds_of(&g, 9, 2);
        let cfg = SamplerConfig::new(vec![cap, cap], seed).unwrap();
        prop_assert_eq!(
            sample_ego_batch(&g, &seeds, &cfg, &inputs).unwrap(),
            full_neighborhood_batch(&g, &seeds, 2, &inputs).unwrap()
        );
    }
}

#[test]
fn different_seeds_vary_on_high_degree_nodes() {
    let g = graph(600, 1, 12, 4);
    let inputs = augment_inputs(&g);
    let v = NodeId::from(g.len() - 1);
    let base = sample_ego_batch(&g, &[v], &SamplerConfig::new(vec![3], 0).unwrap(), &inputs).unwrap();
    let differing = (1..=100)
        .filter(|&s| sample_ego_batch(&g, &[v], &SamplerConfig::new(vec![3], s).unwrap(), &inputs).unwrap() != base)
        .count();
    assert!(differing > 80, "{differing}/100 differ");
}

#[test]
fn sampled_scores_match_exact_scores_for_all_variants() {
    let g = graph(400, 4, 6, 9);
    let inputs = augment_inputs(&g);
    let seeds = seeds_of(&g, 25, 5);
    for variant in Variant::ALL {
        let cfg = ModelConfig {
            variant,
            hidden_dim: 8,
            l2_norm: true,
            ..ModelConfig::default()
        };
        let model = Model::new(cfg, inputs.cols(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let sampled = sample_ego_batch(&g, &seeds, &SamplerConfig::new(vec![6, 6], 77).unwrap(), &inputs).unwrap();
        let full = full_neighborhood_batch(&g, &seeds, 2, &inputs).unwrap();
        let a = model.predict(&sampled).unwrap();
        let b = model.predict(&full).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()), "{variant:?}");
    }
}

#[test]
fn invalid_seeds_are_errors() {
    let g = graph(20, 2, 3, 1);
    let inputs = augment_inputs(&g);
    let cfg = SamplerConfig::new(vec![2], 0).unwrap();
    assert!(sample_ego_batch(&g, &[NodeId(20)], &cfg, &inputs).is_err());
    assert!(sample_ego_batch(&g, &[NodeId(1), NodeId(1)], &cfg, &inputs).is_err());
    assert!(SamplerConfig::new(vec![], 0).is_err());
    assert!(SamplerConfig::new(vec![2, 0], 0).is_err());
}
