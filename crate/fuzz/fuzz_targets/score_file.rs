#![no_main]

use libfuzzer_sys::fuzz_target;
use sasv_core::data::{format_score_file, parse_score_file};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(lines) = parse_score_file(text) {
        let out = format_score_file(lines.iter().map(|l| {
            (
                l.enroll_speaker_id.as_str(),
                l.test_utterance_id.as_str(),
                l.score,
            )
        }));
        assert_eq!(
            parse_score_file(&out).expect("formatted scores parse"),
            lines
        );
    }
});
