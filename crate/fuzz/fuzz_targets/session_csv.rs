#![no_main]

use libfuzzer_sys::fuzz_target;
use riskgraph::io::{read_csv, write_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(sessions) = read_csv(data) {
        let mut out = Vec::new();
        write_csv(&mut out, &sessions).unwrap();
        assert_eq!(read_csv(&out[..]).unwrap(), sessions);
    }
});
