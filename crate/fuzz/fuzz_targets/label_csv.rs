//! The label CSV parser must reject arbitrary input with an error, never a
//! panic; accepted tracks hold normalized, finite, time-ordered samples.

#![no_main]

use libfuzzer_sys::fuzz_target;
use mambapupil_core::events::parse_labels_str;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(track) = parse_labels_str(text, (64, 48), 100) {
        let mut last_t = -1i64;
        for s in &track.samples {
            assert!(s.t >= 0 && s.t >= last_t, "timestamps non-negative and ordered");
            assert!(s.cx.is_finite() && s.cy.is_finite(), "finite centers");
            assert!((0.0..=1.0).contains(&s.cx), "cx normalized");
            assert!((0.0..=1.0).contains(&s.cy), "cy normalized");
            last_t = s.t;
        }
    }
});
