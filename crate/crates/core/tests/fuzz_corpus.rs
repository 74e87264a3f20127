//! Replays the checked-in fuzz corpus through the decoders with the same
//! round-trip checks the fuzz targets make.

use std::fs;
use std::path::PathBuf;

use riskgraph::config::{parse_duration, RunConfig};
use riskgraph::harness::Checkpoint;
use riskgraph::io::{parse_jsonl, read_csv, write_csv, write_jsonl};
use riskgraph::TemporalGraph;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read(&path).unwrap())
        })
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus for {target}");
    files
}

/// Runs `decode` over a target's corpus and checks which seeds are accepted.
fn replay(target: &str, rejected: &[&str], decode: impl Fn(&[u8]) -> bool) {
    for (name, bytes) in corpus(target) {
        let ok = decode(&bytes);
        assert_eq!(ok, !rejected.contains(&name.as_str()), "{target}/{name}");
    }
}

#[test]
fn snapshot_seeds() {
    replay("snapshot_decode", &[], |data| match TemporalGraph::from_bytes(data) {
        Ok(g) => {
            let bytes = g.to_bytes();
            assert_eq!(TemporalGraph::from_bytes(&bytes).unwrap().to_bytes(), bytes);
            assert_eq!(bytes, data);
            true
        }
        Err(_) => false,
    });
}

#[test]
fn jsonl_seeds() {
    replay("session_jsonl", &["invalid_label.jsonl"], |data| {
        match parse_jsonl(std::str::from_utf8(data).unwrap()) {
            Ok(sessions) => {
                let mut out = Vec::new();
                write_jsonl(&mut out, &sessions).unwrap();
                assert_eq!(parse_jsonl(std::str::from_utf8(&out).unwrap()).unwrap(), sessions);
                true
            }
            Err(_) => false,
        }
    });
}

#[test]
fn csv_seeds() {
    replay("session_csv", &["header_only.csv"], |data| match read_csv(data) {
        Ok(sessions) => {
            let mut out = Vec::new();
            write_csv(&mut out, &sessions).unwrap();
            assert_eq!(read_csv(&out[..]).unwrap(), sessions);
            true
        }
        Err(_) => false,
    });
}

#[test]
fn checkpoint_seeds() {
    replay("checkpoint_decode", &[], |data| match Checkpoint::from_bytes(data) {
        Ok(ck) => {
            assert_eq!(Checkpoint::from_bytes(&ck.to_bytes()).unwrap(), ck);
            ck.predictor().unwrap();
            true
        }
        Err(_) => false,
    });
}

#[test]
fn config_seeds() {
    replay("run_config", &["invalid_cap.toml", "multi_head.toml"], |data| {
        RunConfig::from_toml(std::str::from_utf8(data).unwrap()).is_ok()
    });
}

#[test]
fn duration_seeds() {
    replay("duration_parse", &["negative", "overflow"], |data| {
        match parse_duration(std::str::from_utf8(data).unwrap()) {
            Ok(secs) => {
                assert_eq!(parse_duration(&format!("{secs}s")).unwrap(), secs);
                true
            }
            Err(_) => false,
        }
    });
}
