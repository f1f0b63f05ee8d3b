//! The event CSV parser must reject arbitrary input with an error, never a
//! panic, out-of-bounds event, or unsorted stream.

#![no_main]

use libfuzzer_sys::fuzz_target;
use mambapupil_core::events::parse_events_str;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let resolution = (64u16, 48u16);
    if let Ok(stream) = parse_events_str(text, resolution) {
        let mut last_t = i64::MIN;
        for e in &stream.events {
            assert!(e.x < resolution.0 && e.y < resolution.1, "event in bounds");
            assert!(e.p == 1 || e.p == -1, "polarity is a sign");
            assert!(e.t >= last_t, "timestamps ascend");
            last_t = e.t;
        }
    }
});
