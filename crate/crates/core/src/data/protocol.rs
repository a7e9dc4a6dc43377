use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use super::{SpoofKey, TrialLabel, TrialRecord, UtteranceRecord};
use crate::{Error, Result};

/// Speaker id to enrollment utterance ids.
pub type EnrollmentMap = BTreeMap<String, Vec<String>>;

/// Non-blank lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, cols)| !cols.is_empty())
}

/// Parses a countermeasure protocol: `speaker utterance - system key` per line.
///
/// `key == "bonafide"` marks bonafide speech, anything else is spoofed. A
/// system id of `-` is read as absent.
pub fn parse_cm_protocol(text: &str) -> Result<Vec<UtteranceRecord>> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (line, cols) in content_lines(text) {
        if cols.len() != 5 {
            return Err(Error::parse(
                line,
                format!("expected 5 columns, found {}", cols.len()),
            ));
        }
        if !seen.insert(cols[1]) {
            return Err(Error::parse(
                line,
                format!("duplicate utterance id {:?}", cols[1]),
            ));
        }
        records.push(UtteranceRecord {
            speaker_id: cols[0].to_string(),
            utterance_id: cols[1].to_string(),
            system_id: (cols[3] != "-").then(|| cols[3].to_string()),
            spoof_key: if cols[4] == "bonafide" {
                SpoofKey::Bonafide
            } else {
                SpoofKey::Spoof
            },
        });
    }
    Ok(records)
}

pub fn format_cm_protocol(records: &[UtteranceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let key = match r.spoof_key {
            SpoofKey::Bonafide => "bonafide",
            SpoofKey::Spoof => "spoof",
        };
        let system = r.system_id.as_deref().unwrap_or("-");
        let _ = writeln!(
            out,
            "{} {} - {} {}",
            r.speaker_id, r.utterance_id, system, key
        );
    }
    out
}

/// Parses `speaker utt1,utt2,...` lines.
pub fn parse_enrollment_map(text: &str) -> Result<EnrollmentMap> {
    let mut map = EnrollmentMap::new();
    for (line, cols) in content_lines(text) {
        if cols.len() != 2 {
            return Err(Error::parse(
                line,
                format!("expected 2 columns, found {}", cols.len()),
            ));
        }
        let utts: Vec<String> = cols[1].split(',').map(str::to_string).collect();
        if utts.iter().any(|u| u.is_empty()) {
            return Err(Error::parse(line, "empty enrollment utterance id"));
        }
        if map.insert(cols[0].to_string(), utts).is_some() {
            return Err(Error::parse(
                line,
                format!("duplicate speaker {:?}", cols[0]),
            ));
        }
    }
    Ok(map)
}

pub fn format_enrollment_map(map: &EnrollmentMap) -> String {
    let mut out = String::new();
    for (speaker, utts) in map {
        let _ = writeln!(out, "{} {}", speaker, utts.join(","));
    }
    out
}

/// Parses `enroll_speaker test_utterance label` lines and resolves each
/// speaker's enrollment utterances through `enrollment`.
pub fn parse_trial_list(text: &str, enrollment: &EnrollmentMap) -> Result<Vec<TrialRecord>> {
    let mut trials = Vec::new();
    for (line, cols) in content_lines(text) {
        if cols.len() != 3 {
            return Err(Error::parse(
                line,
                format!("expected 3 columns, found {}", cols.len()),
            ));
        }
        let label: TrialLabel = cols[2]
            .parse()
            .map_err(|_| Error::parse(line, format!("unknown trial label {:?}", cols[2])))?;
        let utts = enrollment.get(cols[0]).ok_or_else(|| {
            Error::parse(
                line,
                format!("speaker {:?} is missing from the enrollment map", cols[0]),
            )
        })?;
        trials.push(TrialRecord {
            enroll_speaker_id: cols[0].to_string(),
            enroll_utterance_ids: utts.clone(),
            test_utterance_id: cols[1].to_string(),
            label,
        });
    }
    Ok(trials)
}

pub fn format_trial_list(trials: &[TrialRecord]) -> String {
    let mut out = String::new();
    for t in trials {
        let _ = writeln!(
            out,
            "{} {} {}",
            t.enroll_speaker_id, t.test_utterance_id, t.label
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cm_protocol_lines() {
        let recs = parse_cm_protocol(
            "LA_0079 LA_T_1138215 - - bonafide\nLA_0079 LA_T_0000001 - A01 spoof\n",
        )
        .unwrap();
        assert_eq!(
            recs[0],
            UtteranceRecord {
                utterance_id: "LA_T_1138215".into(),
                speaker_id: "LA_0079".into(),
                spoof_key: SpoofKey::Bonafide,
                system_id: None,
            }
        );
        assert_eq!(recs[1].spoof_key, SpoofKey::Spoof);
        assert_eq!(recs[1].system_id.as_deref(), Some("A01"));
        assert!(parse_cm_protocol("").unwrap().is_empty());
        assert!(parse_cm_protocol("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn cm_protocol_errors_carry_line_numbers() {
        let err =
            parse_cm_protocol("LA_1 LA_T_1 - - bonafide\n\nLA_1 LA_T_2 - bonafide\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_cm_protocol("a u - - bonafide\na u - - spoof\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn protocol_round_trip() {
        let text = "LA_0079 LA_T_1138215 - - bonafide\nLA_0079 LA_T_0000001 - A01 spoof\n";
        assert_eq!(format_cm_protocol(&parse_cm_protocol(text).unwrap()), text);
    }

    fn enrollment() -> EnrollmentMap {
        parse_enrollment_map("LA_0015 LA_E_1,LA_E_2\nLA_0016 LA_E_3\n").unwrap()
    }

    #[test]
    fn trial_list_lines() {
        let trials = parse_trial_list(
            "LA_0015 LA_E_1103494 target\nLA_0015 LA_E_9999999 spoof\n",
            &enrollment(),
        )
        .unwrap();
        assert_eq!(trials[0].label, TrialLabel::Target);
        assert_eq!(trials[0].enroll_utterance_ids, vec!["LA_E_1", "LA_E_2"]);
        assert_eq!(trials[1].label, TrialLabel::Spoof);
        assert_eq!(trials[1].test_utterance_id, "LA_E_9999999");
    }

    #[test]
    fn trial_list_rejects_bonafide_label_and_unknown_speaker() {
        let err = parse_trial_list("LA_0015 LA_E_1103494 bonafide\n", &enrollment()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_trial_list("\nLA_9999 LA_E_1 target\n", &enrollment()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn enrollment_map_errors() {
        assert!(parse_enrollment_map("spk a,,b\n").is_err());
        assert!(parse_enrollment_map("spk a\nspk b\n").is_err());
        assert!(parse_enrollment_map("spk\n").is_err());
        let map = enrollment();
        assert_eq!(
            parse_enrollment_map(&format_enrollment_map(&map)).unwrap(),
            map
        );
    }
}
