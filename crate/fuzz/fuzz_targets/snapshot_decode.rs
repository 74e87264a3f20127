#![no_main]

use libfuzzer_sys::fuzz_target;
use riskgraph::TemporalGraph;

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = TemporalGraph::from_bytes(data) {
        // anything accepted must re-encode to a fixed point
        let bytes = g.to_bytes();
        let again = TemporalGraph::from_bytes(&bytes).expect("re-encoded snapshot decodes");
        assert_eq!(again.to_bytes(), bytes);
    }
});
