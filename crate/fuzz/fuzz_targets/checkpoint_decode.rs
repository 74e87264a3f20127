#![no_main]

use libfuzzer_sys::fuzz_target;
use riskgraph::harness::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = Checkpoint::from_bytes(data) {
        assert_eq!(Checkpoint::from_bytes(&ck.to_bytes()).unwrap(), ck);
        let _ = ck.predictor();
    }
});
