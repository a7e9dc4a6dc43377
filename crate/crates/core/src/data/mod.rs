//! Dataset model: utterance inventories, trials, enrollment, embeddings and
//! score files.

mod protocol;
mod scores;
mod store;

use std::fmt;
use std::str::FromStr;

pub use protocol::{
    format_cm_protocol, format_enrollment_map, format_trial_list, parse_cm_protocol,
    parse_enrollment_map, parse_trial_list, EnrollmentMap,
};
pub use scores::{
    format_cm_scores, format_score_file, parse_cm_scores, parse_score_file, CmScores, ScoreLine,
};
pub use store::{EmbeddingStore, StoreFormat, StoreKind, BINARY_MAGIC};

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpoofKey {
    Bonafide,
    Spoof,
}

/// One line of a countermeasure protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    /// For spoofed utterances, the speaker being imitated.
    pub speaker_id: String,
    pub spoof_key: SpoofKey,
    pub system_id: Option<String>,
}

impl UtteranceRecord {
    pub fn is_bonafide(&self) -> bool {
        self.spoof_key == SpoofKey::Bonafide
    }
}

/// Three-way trial key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrialLabel {
    /// Bonafide speech from the enrolled speaker.
    Target,
    /// Bonafide speech from another speaker.
    Nontarget,
    /// Spoofed speech.
    Spoof,
}

impl TrialLabel {
    pub const ALL: [TrialLabel; 3] = [TrialLabel::Target, TrialLabel::Nontarget, TrialLabel::Spoof];

    pub fn as_str(self) -> &'static str {
        match self {
            TrialLabel::Target => "target",
            TrialLabel::Nontarget => "nontarget",
            TrialLabel::Spoof => "spoof",
        }
    }
}

impl fmt::Display for TrialLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrialLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "target" => Ok(TrialLabel::Target),
            "nontarget" => Ok(TrialLabel::Nontarget),
            "spoof" => Ok(TrialLabel::Spoof),
            other => Err(Error::format(
                "trial label",
                format!("unknown label {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub enroll_speaker_id: String,
    pub enroll_utterance_ids: Vec<String>,
    pub test_utterance_id: String,
    pub label: TrialLabel,
}
