#![no_main]

use libfuzzer_sys::fuzz_target;
use sasv_core::data::{parse_enrollment_map, parse_trial_list};

// Input is an enrollment map and a trial list separated by a NUL byte.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let (enrollment, trials) = text.split_once('\0').unwrap_or((text, ""));
    if let Ok(map) = parse_enrollment_map(enrollment) {
        let _ = parse_trial_list(trials, &map);
    }
});
