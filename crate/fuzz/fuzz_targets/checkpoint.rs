//! Checkpoint decoding must survive arbitrary bytes: both the raw entry
//! reader and the full model restore reject corruption with errors, never
//! panics or runaway allocations.

#![no_main]

use libfuzzer_sys::fuzz_target;
use mambapupil_core::autograd::checkpoint::load_from_bytes;
use mambapupil_core::model::Model;

fuzz_target!(|data: &[u8]| {
    let _ = load_from_bytes(data);
    let _ = Model::<f32>::from_checkpoint_bytes(data);
});
