use std::collections::HashMap;
use std::fmt::Write as _;

use crate::{Error, Result};

/// One line of a trial score file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreLine {
    pub enroll_speaker_id: String,
    pub test_utterance_id: String,
    pub score: f64,
}

fn parse_score(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid score {token:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, "score is not finite"));
    }
    Ok(v)
}

/// Parses `enroll_speaker test_utterance score` lines.
pub fn parse_score_file(text: &str) -> Result<Vec<ScoreLine>> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let cols: Vec<&str> = l.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        if cols.len() != 3 {
            return Err(Error::parse(
                i + 1,
                format!("expected 3 columns, found {}", cols.len()),
            ));
        }
        out.push(ScoreLine {
            enroll_speaker_id: cols[0].to_string(),
            test_utterance_id: cols[1].to_string(),
            score: parse_score(cols[2], i + 1)?,
        });
    }
    Ok(out)
}

/// Scores are written in shortest round-trip form, so re-reading is exact.
pub fn format_score_file<'a, I>(lines: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a str, f64)>,
{
    let mut out = String::new();
    for (spk, utt, score) in lines {
        let _ = writeln!(out, "{spk} {utt} {score:?}");
    }
    out
}

/// Per-utterance countermeasure scores (higher = more bonafide-like), as
/// produced by a countermeasure front-end.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CmScores {
    scores: HashMap<String, f64>,
}

impl CmScores {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, utterance_id: impl Into<String>, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::NonFinite("countermeasure score"));
        }
        let id = utterance_id.into();
        if self.scores.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.scores.insert(id, score);
        Ok(())
    }

    pub fn get(&self, utterance_id: &str) -> Option<f64> {
        self.scores.get(utterance_id).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Parses `utterance score` lines.
pub fn parse_cm_scores(text: &str) -> Result<CmScores> {
    let mut scores = CmScores::new();
    for (i, l) in text.lines().enumerate() {
        let cols: Vec<&str> = l.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        if cols.len() != 2 {
            return Err(Error::parse(
                i + 1,
                format!("expected 2 columns, found {}", cols.len()),
            ));
        }
        let v = parse_score(cols[1], i + 1)?;
        scores
            .insert(cols[0], v)
            .map_err(|e| Error::parse(i + 1, e.to_string()))?;
    }
    Ok(scores)
}

/// Sorted by utterance id for stable output.
pub fn format_cm_scores(scores: &CmScores) -> String {
    let mut entries: Vec<_> = scores.scores.iter().collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    let mut out = String::new();
    for (id, s) in entries {
        let _ = writeln!(out, "{id} {s:?}");
    }
    out
}
