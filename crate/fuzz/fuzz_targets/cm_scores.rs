#![no_main]

use libfuzzer_sys::fuzz_target;
use sasv_core::data::parse_cm_scores;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_cm_scores(text);
    }
});
