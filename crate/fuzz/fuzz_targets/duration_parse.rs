#![no_main]

use libfuzzer_sys::fuzz_target;
use riskgraph::config::parse_duration;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(secs) = parse_duration(text) {
        assert!(secs >= 0);
        // the canonical seconds form parses back to itself
        assert_eq!(parse_duration(&format!("{secs}s")).unwrap(), secs);
    }
});
