use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::{Pool, SpeakerIndex};
use crate::data::UtteranceRecord;
use crate::{Error, Result};

/// The four pair scenarios: test side bonafide or spoofed, from the enrolled
/// speaker or another one. The enrollment side is always bonafide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    BonafideSame,
    BonafideDiff,
    SpoofSame,
    SpoofDiff,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::BonafideSame,
        Scenario::BonafideDiff,
        Scenario::SpoofSame,
        Scenario::SpoofDiff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::BonafideSame => "bonafide-same",
            Scenario::BonafideDiff => "bonafide-diff",
            Scenario::SpoofSame => "spoof-same",
            Scenario::SpoofDiff => "spoof-diff",
        }
    }

    /// Only a bonafide utterance of the enrolled speaker is a target.
    pub fn sasv_label(self) -> PairLabel {
        match self {
            Scenario::BonafideSame => PairLabel::Target,
            _ => PairLabel::Nontarget,
        }
    }

    pub fn sv_label(self) -> SpeakerRelation {
        match self {
            Scenario::BonafideSame | Scenario::SpoofSame => SpeakerRelation::Same,
            Scenario::BonafideDiff | Scenario::SpoofDiff => SpeakerRelation::Different,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    Nontarget,
    Target,
}

impl PairLabel {
    /// Output node index: 0 non-target, 1 target.
    pub fn class_index(self) -> usize {
        match self {
            PairLabel::Nontarget => 0,
            PairLabel::Target => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeakerRelation {
    Different,
    Same,
}

impl SpeakerRelation {
    /// Output node index: 0 different speaker, 1 same speaker.
    pub fn class_index(self) -> usize {
        match self {
            SpeakerRelation::Different => 0,
            SpeakerRelation::Same => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub enroll_utterance_id: String,
    pub test_utterance_id: String,
    pub sasv_label: PairLabel,
    pub sv_label: SpeakerRelation,
    pub scenario: Scenario,
}

/// Scenario weights 3 : 1.66 : 1 : 1 in hundredths, so apportionment is exact
/// integer arithmetic.
pub const SCENARIO_WEIGHTS: [u64; 4] = [300, 166, 100, 100];

/// Largest-remainder apportionment of `count` over `weights`. Ties in the
/// remainder go to the earlier entry. The result always sums to `count`.
pub fn apportion(count: usize, weights: &[u64]) -> Vec<usize> {
    let total: u64 = weights.iter().sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    let count = count as u128;
    let mut shares: Vec<usize> = Vec::with_capacity(weights.len());
    let mut remainders: Vec<(u128, usize)> = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        let num = count * w as u128;
        shares.push((num / total as u128) as usize);
        remainders.push((num % total as u128, i));
    }
    let left = count as usize - shares.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(left) {
        shares[i] += 1;
    }
    shares
}

/// Samples `count` pairs with scenario counts given by [`apportion`] over
/// [`SCENARIO_WEIGHTS`]. Within a scenario every admissible ordered
/// (enrollment, test) pair is equally likely. The result is shuffled.
pub fn sample_training_pairs<R: Rng + ?Sized>(
    records: &[UtteranceRecord],
    count: usize,
    rng: &mut R,
) -> Result<Vec<TrainingPair>> {
    let idx = SpeakerIndex::new(records);
    let bona = Pool::new(&idx.bonafide);
    let spoof = Pool::new(&idx.spoof);
    let speakers: Vec<&str> = idx.bonafide.keys().copied().collect();
    let counts = apportion(count, &SCENARIO_WEIGHTS);

    let mut pairs = Vec::with_capacity(count);
    for (scenario, n) in Scenario::ALL.into_iter().zip(counts) {
        if n == 0 {
            continue;
        }
        // Per enrollment speaker: number of admissible pairs.
        let weights: Vec<u64> = speakers
            .iter()
            .map(|s| {
                let b = bona.count_of(s) as u64;
                match scenario {
                    Scenario::BonafideSame => b * b.saturating_sub(1),
                    Scenario::BonafideDiff => b * bona.count_excluding(s) as u64,
                    Scenario::SpoofSame => b * spoof.count_of(s) as u64,
                    Scenario::SpoofDiff => b * spoof.count_excluding(s) as u64,
                }
            })
            .collect();
        let dist =
            WeightedIndex::new(&weights).map_err(|_| Error::Unsatisfiable(scenario.to_string()))?;
        for _ in 0..n {
            let spk = speakers[dist.sample(rng)];
            let own = &idx.bonafide[spk];
            let (enroll, test) = match scenario {
                Scenario::BonafideSame => {
                    let two = index::sample(rng, own.len(), 2);
                    (own[two.index(0)], own[two.index(1)])
                }
                Scenario::BonafideDiff => (pick(own, rng), bona.draw_excluding(spk, rng)),
                Scenario::SpoofSame => (pick(own, rng), pick(&idx.spoof[spk], rng)),
                Scenario::SpoofDiff => (pick(own, rng), spoof.draw_excluding(spk, rng)),
            };
            pairs.push(TrainingPair {
                enroll_utterance_id: enroll.to_string(),
                test_utterance_id: test.to_string(),
                sasv_label: scenario.sasv_label(),
                sv_label: scenario.sv_label(),
                scenario,
            });
        }
    }
    pairs.shuffle(rng);
    Ok(pairs)
}

fn pick<'a, R: Rng + ?Sized>(items: &[&'a str], rng: &mut R) -> &'a str {
    items[rng.random_range(0..items.len())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SpoofKey;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn rec(spk: &str, utt: &str, bona: bool) -> UtteranceRecord {
        UtteranceRecord {
            utterance_id: utt.into(),
            speaker_id: spk.into(),
            spoof_key: if bona {
                SpoofKey::Bonafide
            } else {
                SpoofKey::Spoof
            },
            system_id: None,
        }
    }

    fn small_dataset() -> Vec<UtteranceRecord> {
        let mut r = Vec::new();
        for s in 0..4 {
            for u in 0..5 {
                r.push(rec(&format!("S{s}"), &format!("S{s}_b{u}"), true));
            }
            for u in 0..3 {
                r.push(rec(&format!("S{s}"), &format!("S{s}_s{u}"), false));
            }
        }
        r
    }

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(2000, &SCENARIO_WEIGHTS), vec![901, 499, 300, 300]);
        assert_eq!(apportion(666, &SCENARIO_WEIGHTS), vec![300, 166, 100, 100]);
        assert_eq!(apportion(0, &SCENARIO_WEIGHTS), vec![0, 0, 0, 0]);
        assert_eq!(apportion(1, &SCENARIO_WEIGHTS), vec![1, 0, 0, 0]);
        assert_eq!(apportion(3, &[1, 1, 1, 1]), vec![1, 1, 1, 0]);
    }

    #[test]
    fn pair_scenarios_and_labels() {
        let recs = small_dataset();
        let by_id: HashMap<&str, &UtteranceRecord> =
            recs.iter().map(|r| (r.utterance_id.as_str(), r)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pairs = sample_training_pairs(&recs, 2000, &mut rng).unwrap();
        let mut counts = [0usize; 4];
        for p in &pairs {
            counts[p.scenario as usize] += 1;
            let e = by_id[p.enroll_utterance_id.as_str()];
            let t = by_id[p.test_utterance_id.as_str()];
            assert!(e.is_bonafide());
            let same = e.speaker_id == t.speaker_id;
            let expected = match (t.is_bonafide(), same) {
                (true, true) => Scenario::BonafideSame,
                (true, false) => Scenario::BonafideDiff,
                (false, true) => Scenario::SpoofSame,
                (false, false) => Scenario::SpoofDiff,
            };
            assert_eq!(p.scenario, expected);
            assert_eq!(
                p.sasv_label == PairLabel::Target,
                expected == Scenario::BonafideSame
            );
            assert_eq!(p.sv_label == SpeakerRelation::Same, same);
            assert_ne!(p.enroll_utterance_id, p.test_utterance_id);
        }
        assert_eq!(counts, [901, 499, 300, 300]);
    }

    #[test]
    fn unsatisfiable_scenario_is_named() {
        // one speaker: no different-speaker pairs
        let recs = vec![
            rec("A", "a1", true),
            rec("A", "a2", true),
            rec("A", "s1", false),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match sample_training_pairs(&recs, 10, &mut rng) {
            Err(Error::Unsatisfiable(s)) => assert_eq!(s, "bonafide-diff"),
            other => panic!("unexpected {other:?}"),
        }
        let recs = vec![
            rec("A", "a1", true),
            rec("A", "a2", true),
            rec("B", "b1", true),
        ];
        match sample_training_pairs(&recs, 10, &mut rng) {
            Err(Error::Unsatisfiable(s)) => assert_eq!(s, "spoof-same"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn seeds_control_the_sequence() {
        let recs = small_dataset();
        let a = sample_training_pairs(&recs, 100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = sample_training_pairs(&recs, 100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let c = sample_training_pairs(&recs, 100, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn bonafide_same_is_uniform_over_pairs() {
        // Speaker A has 3 bonafide (6 ordered pairs), B has 2 (2 ordered pairs).
        let recs = vec![
            rec("A", "a1", true),
            rec("A", "a2", true),
            rec("A", "a3", true),
            rec("B", "b1", true),
            rec("B", "b2", true),
            rec("A", "sa", false),
            rec("B", "sb", false),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pairs = sample_training_pairs(&recs, 20000, &mut rng).unwrap();
        let same: Vec<_> = pairs
            .iter()
            .filter(|p| p.scenario == Scenario::BonafideSame)
            .collect();
        let from_a = same
            .iter()
            .filter(|p| p.enroll_utterance_id.starts_with('a'))
            .count();
        let frac = from_a as f64 / same.len() as f64;
        assert!((frac - 0.75).abs() < 0.02, "{frac}");
    }

    proptest::proptest! {
        #[test]
        fn apportion_sums_to_count(count in 0usize..100_000, w in proptest::collection::vec(0u64..1000, 1..6)) {
            let shares = apportion(count, &w);
            if w.iter().sum::<u64>() > 0 {
                proptest::prop_assert_eq!(shares.iter().sum::<usize>(), count);
            }
        }
    }
}
