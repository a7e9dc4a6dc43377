//! Supervision sampling (training pairs, triplets) and synthetic datasets.

mod pairs;
mod synthetic;
mod triplets;

use std::collections::BTreeMap;

pub use pairs::{
    apportion, sample_training_pairs, PairLabel, Scenario, SpeakerRelation, TrainingPair,
    SCENARIO_WEIGHTS,
};
pub use synthetic::{generate_synthetic, Partition, SyntheticConfig, SyntheticDataset};
pub use triplets::{sample_triplets, NegativeKind, Triplet};

use crate::data::UtteranceRecord;

/// Bonafide and spoofed utterance ids grouped by speaker, in a stable order.
#[derive(Debug, Clone, Default)]
pub(crate) struct SpeakerIndex<'a> {
    pub bonafide: BTreeMap<&'a str, Vec<&'a str>>,
    pub spoof: BTreeMap<&'a str, Vec<&'a str>>,
}

impl<'a> SpeakerIndex<'a> {
    pub fn new(records: &'a [UtteranceRecord]) -> Self {
        let mut idx = Self::default();
        for r in records {
            let map = if r.is_bonafide() {
                &mut idx.bonafide
            } else {
                &mut idx.spoof
            };
            map.entry(r.speaker_id.as_str())
                .or_default()
                .push(r.utterance_id.as_str());
        }
        idx
    }
}

/// A flat list of utterances grouped by speaker, supporting uniform draws
/// that exclude one speaker's block.
pub(crate) struct Pool<'a> {
    items: Vec<&'a str>,
    ranges: BTreeMap<&'a str, (usize, usize)>,
}

impl<'a> Pool<'a> {
    pub fn new(groups: &BTreeMap<&'a str, Vec<&'a str>>) -> Self {
        let mut items = Vec::new();
        let mut ranges = BTreeMap::new();
        for (spk, utts) in groups {
            let start = items.len();
            items.extend(utts.iter().copied());
            ranges.insert(*spk, (start, items.len()));
        }
        Self { items, ranges }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn count_of(&self, speaker: &str) -> usize {
        self.ranges.get(speaker).map_or(0, |(s, e)| e - s)
    }

    pub fn count_excluding(&self, speaker: &str) -> usize {
        self.len() - self.count_of(speaker)
    }

    /// Uniform over items whose speaker differs from `speaker`.
    /// Caller guarantees `count_excluding(speaker) > 0`.
    pub fn draw_excluding<R: rand::Rng + ?Sized>(&self, speaker: &str, rng: &mut R) -> &'a str {
        let (start, end) = self.ranges.get(speaker).copied().unwrap_or((0, 0));
        let mut k = rng.random_range(0..self.len() - (end - start));
        if k >= start {
            k += end - start;
        }
        self.items[k]
    }
}
