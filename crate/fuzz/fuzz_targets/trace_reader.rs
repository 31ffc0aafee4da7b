#![no_main]

use delta_core::workload::TraceReader;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(reader) = TraceReader::new(data) else { return };
    let mut last = 0;
    for event in reader {
        let Ok(event) = event else { break };
        assert!(event.time() >= last);
        last = event.time();
    }
});
