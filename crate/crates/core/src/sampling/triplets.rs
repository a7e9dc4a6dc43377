use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;

use super::{Pool, SpeakerIndex};
use crate::data::UtteranceRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NegativeKind {
    /// A spoof imitating the anchor's speaker.
    SameSpeakerSpoof,
    /// Bonafide speech of a different speaker.
    OtherSpeakerBonafide,
}

/// Anchor and positive: distinct bonafide utterances of one speaker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triplet {
    pub anchor_id: String,
    pub positive_id: String,
    pub negative_id: String,
    pub negative_kind: NegativeKind,
}

/// Samples `c` triplets. Anchor/positive pairs are uniform over ordered pairs
/// of distinct same-speaker bonafide utterances; the negative kind is a fair
/// coin when both kinds exist for the anchor's speaker, and the negative is
/// uniform within its kind.
pub fn sample_triplets<R: Rng + ?Sized>(
    records: &[UtteranceRecord],
    c: usize,
    rng: &mut R,
) -> Result<Vec<Triplet>> {
    let idx = SpeakerIndex::new(records);
    let bona = Pool::new(&idx.bonafide);
    let speakers: Vec<&str> = idx.bonafide.keys().copied().collect();
    let has_spoof = |s: &str| idx.spoof.get(s).is_some_and(|v| !v.is_empty());
    let weights: Vec<u64> = speakers
        .iter()
        .map(|s| {
            let b = bona.count_of(s) as u64;
            let has_negative = has_spoof(s) || bona.count_excluding(s) > 0;
            if has_negative {
                b * b.saturating_sub(1)
            } else {
                0
            }
        })
        .collect();
    let dist = WeightedIndex::new(&weights).map_err(|_| {
        Error::Unsatisfiable(
            "triplet (no speaker with two bonafide utterances and a negative)".into(),
        )
    })?;

    let mut out = Vec::with_capacity(c);
    for _ in 0..c {
        let spk = speakers[dist.sample(rng)];
        let own = &idx.bonafide[spk];
        let two = index::sample(rng, own.len(), 2);
        let spoof_ok = has_spoof(spk);
        let other_ok = bona.count_excluding(spk) > 0;
        let kind = match (spoof_ok, other_ok) {
            (true, true) if rng.random_bool(0.5) => NegativeKind::SameSpeakerSpoof,
            (true, true) => NegativeKind::OtherSpeakerBonafide,
            (true, false) => NegativeKind::SameSpeakerSpoof,
            _ => NegativeKind::OtherSpeakerBonafide,
        };
        let negative = match kind {
            NegativeKind::SameSpeakerSpoof => {
                let spoofs = &idx.spoof[spk];
                spoofs[rng.random_range(0..spoofs.len())]
            }
            NegativeKind::OtherSpeakerBonafide => bona.draw_excluding(spk, rng),
        };
        out.push(Triplet {
            anchor_id: own[two.index(0)].to_string(),
            positive_id: own[two.index(1)].to_string(),
            negative_id: negative.to_string(),
            negative_kind: kind,
        });
    }
    Ok(out)
}
