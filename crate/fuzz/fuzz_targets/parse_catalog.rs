#![no_main]

use delta_core::workload::{parse_catalog, write_catalog};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(catalog) = parse_catalog(data) {
        let mut out = Vec::new();
        write_catalog(&catalog, &mut out).unwrap();
        assert_eq!(parse_catalog(&out).unwrap(), catalog);
    }
});
