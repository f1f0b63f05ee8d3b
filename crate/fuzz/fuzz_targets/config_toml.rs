//! Run-configuration parsing must reject arbitrary TOML with an error,
//! never a panic; accepted configurations re-validate cleanly.

#![no_main]

use libfuzzer_sys::fuzz_target;
use mambapupil_core::config::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config(text) {
        // parse_config validates before returning; a second pass must agree.
        cfg.validate().expect("accepted configs stay valid");
    }
});
