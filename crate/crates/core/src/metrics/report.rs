use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use super::eer::{compute_eer, Eer};
use crate::data::{TrialLabel, TrialRecord};
use crate::{Error, Result};

pub const DEFAULT_HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTrial {
    pub trial: TrialRecord,
    /// Higher is more target-like.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    /// Target vs non-target; spoof trials excluded.
    Sv,
    /// Target vs spoof; non-target trials excluded.
    Spf,
    /// Target vs everything else.
    Sasv,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Sv, Metric::Spf, Metric::Sasv];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Sv => "sv",
            Metric::Spf => "spf",
            Metric::Sasv => "sasv",
        }
    }

    /// `Some(true)` positive, `Some(false)` negative, `None` excluded.
    pub fn side(self, label: TrialLabel) -> Option<bool> {
        match (self, label) {
            (_, TrialLabel::Target) => Some(true),
            (Metric::Sv, TrialLabel::Spoof) | (Metric::Spf, TrialLabel::Nontarget) => None,
            _ => Some(false),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Positive and negative score lists for `metric`.
pub fn subset_trials(trials: &[ScoredTrial], metric: Metric) -> (Vec<f64>, Vec<f64>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for t in trials {
        match metric.side(t.trial.label) {
            Some(true) => pos.push(t.score),
            Some(false) => neg.push(t.score),
            None => {}
        }
    }
    (pos, neg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub metric: Metric,
    pub n_pos: usize,
    pub n_neg: usize,
    /// `None` when either side has no trials.
    pub eer: Option<Eer>,
}

impl MetricResult {
    pub fn eer_percent(&self) -> Option<f64> {
        self.eer.map(|e| 100.0 * e.eer)
    }
}

/// Per-label counts over equal-width bins spanning the observed scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges; bin `k` is `[edges[k], edges[k+1])`, the last bin closed.
    pub edges: Vec<f64>,
    pub counts: BTreeMap<TrialLabel, Vec<usize>>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    /// `label,bin_low,bin_high,count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,bin_low,bin_high,count\n");
        for (label, counts) in &self.counts {
            for (k, c) in counts.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{:?},{:?},{}",
                    label,
                    self.edges[k],
                    self.edges[k + 1],
                    c
                );
            }
        }
        out
    }
}

pub fn score_histogram(trials: &[ScoredTrial], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let (lo, hi) = trials
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
            (lo.min(t.score), hi.max(t.score))
        });
    let (lo, hi) = if trials.is_empty() {
        (0.0, 0.0)
    } else {
        (lo, hi)
    };
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|k| lo + width * k as f64).collect();
    edges.push(hi);
    let mut counts: BTreeMap<TrialLabel, Vec<usize>> = TrialLabel::ALL
        .iter()
        .map(|&l| (l, vec![0; bins]))
        .collect();
    for t in trials {
        let k = if width > 0.0 {
            (((t.score - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts.get_mut(&t.trial.label).expect("all labels present")[k] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metrics: Vec<MetricResult>,
    pub counts: BTreeMap<TrialLabel, usize>,
    pub histogram: Histogram,
}

impl EvalReport {
    pub fn get(&self, metric: Metric) -> &MetricResult {
        self.metrics
            .iter()
            .find(|m| m.metric == metric)
            .expect("every metric is reported")
    }

    /// `metric,eer_percent,threshold,n_pos,n_neg` rows; absent metrics print `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,eer_percent,threshold,n_pos,n_neg\n");
        for m in &self.metrics {
            let (eer, thr) = match m.eer {
                Some(e) => (
                    format!("{:.2}", 100.0 * e.eer),
                    format!("{:?}", e.threshold),
                ),
                None => ("NA".to_string(), "NA".to_string()),
            };
            let _ = writeln!(out, "{},{},{},{},{}", m.metric, eer, thr, m.n_pos, m.n_neg);
        }
        out
    }

    /// `key = value` lines. EERs appear both as exact fractions and as
    /// percentages rounded to two decimals.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (label, n) in &self.counts {
            let _ = writeln!(out, "trials_{label} = {n}");
        }
        for m in &self.metrics {
            let name = m.metric;
            match m.eer {
                Some(e) => {
                    let _ = writeln!(out, "{name}_eer = {:?}", e.eer);
                    let _ = writeln!(out, "{name}_eer_percent = {:.2}", 100.0 * e.eer);
                    let _ = writeln!(out, "{name}_threshold = {:?}", e.threshold);
                }
                None => {
                    let _ = writeln!(out, "{name}_eer = NA");
                    let _ = writeln!(out, "{name}_eer_percent = NA");
                    let _ = writeln!(out, "{name}_threshold = NA");
                }
            }
            let _ = writeln!(out, "{name}_n_pos = {}", m.n_pos);
            let _ = writeln!(out, "{name}_n_neg = {}", m.n_neg);
        }
        out
    }
}

/// All three EERs plus label counts and a histogram with `bins` bins.
pub fn evaluate_system(trials: &[ScoredTrial], bins: usize) -> Result<EvalReport> {
    if let Some(t) = trials.iter().find(|t| !t.score.is_finite()) {
        return Err(Error::format(
            "scored trial",
            format!("non-finite score for {}", t.trial.test_utterance_id),
        ));
    }
    let metrics = Metric::ALL
        .iter()
        .map(|&metric| {
            let (pos, neg) = subset_trials(trials, metric);
            let eer = if pos.is_empty() || neg.is_empty() {
                None
            } else {
                Some(compute_eer(&pos, &neg)?)
            };
            Ok(MetricResult {
                metric,
                n_pos: pos.len(),
                n_neg: neg.len(),
                eer,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts: BTreeMap<TrialLabel, usize> = TrialLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for t in trials {
        *counts.get_mut(&t.trial.label).expect("all labels present") += 1;
    }
    Ok(EvalReport {
        metrics,
        counts,
        histogram: score_histogram(trials, bins)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scored(label: TrialLabel, score: f64) -> ScoredTrial {
        ScoredTrial {
            trial: TrialRecord {
                enroll_speaker_id: "spk".into(),
                enroll_utterance_ids: vec!["e".into()],
                test_utterance_id: "t".into(),
                label,
            },
            score,
        }
    }

    fn fixture() -> Vec<ScoredTrial> {
        let mut v = Vec::new();
        for i in 0..10 {
            v.push(scored(TrialLabel::Target, 0.9 + i as f64 * 1e-3));
            v.push(scored(TrialLabel::Nontarget, 0.1 + i as f64 * 1e-3));
            v.push(scored(TrialLabel::Spoof, 0.5 + i as f64 * 1e-3));
        }
        v
    }

    #[test]
    fn table_subsets() {
        let trials = fixture();
        let (p, n) = subset_trials(&trials, Metric::Sv);
        assert_eq!((p.len(), n.len()), (10, 10));
        assert!(n.iter().all(|&s| s < 0.2));
        let (p, n) = subset_trials(&trials, Metric::Spf);
        assert_eq!((p.len(), n.len()), (10, 10));
        assert!(n.iter().all(|&s| (0.5..0.6).contains(&s)));
        let (p, n) = subset_trials(&trials, Metric::Sasv);
        assert_eq!(p.len() + n.len(), 30);
    }

    #[test]
    fn separated_system_scores_zero() {
        let r = evaluate_system(&fixture(), 10).unwrap();
        for m in &r.metrics {
            assert_eq!(m.eer.unwrap().eer, 0.0);
        }
        assert_eq!(r.counts[&TrialLabel::Spoof], 10);
    }

    #[test]
    fn missing_side_is_absent_not_zero() {
        let trials: Vec<_> = fixture()
            .into_iter()
            .filter(|t| t.trial.label != TrialLabel::Spoof)
            .collect();
        let r = evaluate_system(&trials, 4).unwrap();
        assert!(r.get(Metric::Spf).eer.is_none());
        assert!(r.get(Metric::Sv).eer.is_some());
        assert!(r.to_csv().contains("spf,NA,NA,10,0"));
        assert!(r.to_key_value().contains("spf_eer_percent = NA"));
    }

    #[test]
    fn random_scores_give_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials: Vec<_> = (0..10_000)
            .map(|i| scored(TrialLabel::ALL[i % 3], rng.random::<f64>()))
            .collect();
        let r = evaluate_system(&trials, 10).unwrap();
        for m in &r.metrics {
            let e = m.eer_percent().unwrap();
            assert!((e - 50.0).abs() < 2.0, "{} {e}", m.metric);
        }
    }

    #[test]
    fn constant_scores_report_fifty_percent() {
        let trials: Vec<_> = fixture()
            .into_iter()
            .map(|t| ScoredTrial { score: 0.0, ..t })
            .collect();
        let r = evaluate_system(&trials, 5).unwrap();
        for m in &r.metrics {
            assert!((m.eer_percent().unwrap() - 50.0).abs() < 1e-9);
        }
        assert_eq!(r.histogram.counts[&TrialLabel::Target][0], 10);
    }

    #[test]
    fn histogram_conservation_and_uniformity() {
        let one = score_histogram(&[scored(TrialLabel::Target, 0.3)], 7).unwrap();
        assert_eq!(
            one.counts[&TrialLabel::Target]
                .iter()
                .filter(|&&c| c > 0)
                .count(),
            1
        );

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials: Vec<_> = (0..10_000)
            .map(|_| scored(TrialLabel::Target, rng.random::<f64>()))
            .collect();
        let h = score_histogram(&trials, 10).unwrap();
        assert_eq!(h.edges.len(), 11);
        let counts = &h.counts[&TrialLabel::Target];
        assert_eq!(counts.iter().sum::<usize>(), 10_000);
        for &c in counts {
            assert!((c as i64 - 1000).abs() <= 150, "{c}");
        }
        assert!(score_histogram(&trials, 0).is_err());
        assert_eq!(h.to_csv().lines().count(), 1 + 3 * 10);
    }
}
