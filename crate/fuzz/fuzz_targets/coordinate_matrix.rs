#![no_main]

use libfuzzer_sys::fuzz_target;
use mecat_core::io::{parse_coordinates, write_coordinates};

fuzz_target!(|data: &str| {
    if let Ok(m) = parse_coordinates(data) {
        let mut out = Vec::new();
        write_coordinates(&mut out, m.rows, m.cols, &m.entries).unwrap();
        let back = parse_coordinates(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(back, m);
        if m.rows.saturating_mul(m.cols) <= 1 << 16 {
            let _ = m.to_dense();
        }
    }
});
