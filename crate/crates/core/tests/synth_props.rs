use riskgraph::config::RunConfig;
use riskgraph::harness::{fit_arm, graph_for_run, Arm};
use riskgraph::io::{read_jsonl, write_jsonl};
use riskgraph::labelprop::all_label_features;
use riskgraph::synth::{generate, GeneratorConfig};
use riskgraph::{build_graph, GraphConfig};

fn mid_scale(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n_sessions: 50_000,
        n_accounts: 5_000,
        n_devices: 6_000,
        n_ips: 3_000,
        ring_count: 10,
        seed,
        ..GeneratorConfig::default()
    }
}

#[test]
fn prevalence_near_configured_rate() {
    for seed in 0..3 {
        let s = generate(&mid_scale(seed)).unwrap();
        let rate = s.iter().filter(|x| x.y == 1).count() as f64 / s.len() as f64;
        assert!((rate / 0.02 - 1.0).abs() < 0.2, "seed {seed}: {rate}");
        assert!(s.iter().all(|x| x.tau >= x.t));
    }
}

#[test]
fn ring_sessions_share_identifiers_within_the_burst() {
    let cfg = mid_scale(4);
    let burst = (cfg.ring_burst_hours * 3_600.0) as i64;
    let s = generate(&cfg).unwrap();
    let ring: Vec<_> = s.iter().filter(|x| x.device_id.starts_with("ring")).collect();
    assert!(!ring.is_empty());
    for r in &ring {
        let partner = ring.iter().any(|o| {
            !std::ptr::eq(*o, *r)
                && (o.device_id == r.device_id || o.ip_address == r.ip_address)
                && (o.t - r.t).abs() <= burst
        });
        assert!(partner, "isolated ring session at t={}", r.t);
    }
}

#[test]
fn jsonl_round_trip_is_lossless() {
    let cfg = GeneratorConfig {
        n_sessions: 500,
        n_accounts: 100,
        n_devices: 100,
        n_ips: 50,
        ring_count: 2,
        ..GeneratorConfig::default()
    };
    let s = generate(&cfg).unwrap();
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &s).unwrap();
    assert_eq!(read_jsonl(&buf[..]).unwrap(), s);
}

#[test]
fn known_fraud_upstream_is_more_common_for_ring_sessions() {
    let s = generate(&mid_scale(7)).unwrap();
    let g = build_graph(s, GraphConfig::new(90 * 86_400, 10).unwrap()).unwrap();
    let lf = all_label_features(&g);
    let rate = |pred: &dyn Fn(usize) -> bool| {
        let idx: Vec<usize> = (0..g.len()).filter(|&i| pred(i)).collect();
        idx.iter().filter(|&&i| lf[i].any == 1).count() as f64 / idx.len() as f64
    };
    let ring = rate(&|i| g.sessions()[i].device_id.starts_with("ring"));
    let benign = rate(&|i| g.sessions()[i].y == 0);
    assert!(ring > 5.0 * benign.max(0.01), "ring {ring}, benign {benign}");
}

/// With fully informative features and no rings, a per-row model is enough.
#[test]
fn informative_features_make_the_baseline_strong() {
    let cfg = RunConfig::from_toml_with(
        "runs = 1",
        &[
            "generator.n_sessions=50000".into(),
            "generator.ring_count=0".into(),
            "generator.feature_signal_strength=1.0".into(),
        ],
    )
    .unwrap();
    let (g, splits) = graph_for_run(&cfg, 0, cfg.graph.config().unwrap()).unwrap();
    let r = fit_arm(&g, &splits, Arm::Logistic, &cfg, 0).unwrap();
    assert!(r.test.roc_auc > 0.95, "{}", r.test.roc_auc);
}
