#![no_main]

use libfuzzer_sys::fuzz_target;
use riskgraph::io::{parse_jsonl, write_jsonl};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(sessions) = parse_jsonl(text) {
        let mut out = Vec::new();
        write_jsonl(&mut out, &sessions).unwrap();
        let back = parse_jsonl(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(back, sessions);
    }
});
