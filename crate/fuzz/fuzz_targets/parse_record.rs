#![no_main]

use delta_core::workload::{parse_record, Record};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(record) = parse_record(text, 1) {
        if let Record::Query { objects, .. } = &record {
            assert!(!objects.is_empty());
            assert!(objects.windows(2).all(|w| w[0] < w[1]));
        }
    }
});
