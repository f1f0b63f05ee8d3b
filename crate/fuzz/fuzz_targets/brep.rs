//! The representation-dump reader must reject arbitrary bytes with an
//! error, never a panic; accepted grids are shape-consistent and finite-size.

#![no_main]

use libfuzzer_sys::fuzz_target;
use mambapupil_core::rep::read_brep_bytes;

fuzz_target!(|data: &[u8]| {
    if let Ok((_bits, grid)) = read_brep_bytes(data) {
        assert_eq!(
            grid.data.len(),
            grid.channels * grid.height * grid.width,
            "payload length matches the declared shape"
        );
    }
});
