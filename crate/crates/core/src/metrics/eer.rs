use crate::{Error, Result};

/// Equal error rate as a fraction, with the threshold at the crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eer {
    pub eer: f64,
    pub threshold: f64,
}

/// EER of a detector that accepts iff `score >= threshold`.
///
/// Operating points sit at every distinct score plus "accept nothing". Along
/// increasing thresholds the false-rejection rate rises and the
/// false-acceptance rate falls; the EER is where the segment joining the last
/// point with `FRR < FAR` to the first with `FRR >= FAR` crosses `FRR = FAR`.
/// The threshold is interpolated the same way; past the largest score it stays
/// at the largest score.
pub fn compute_eer(positives: &[f64], negatives: &[f64]) -> Result<Eer> {
    if positives.is_empty() {
        return Err(Error::Empty("positive score list"));
    }
    if negatives.is_empty() {
        return Err(Error::Empty("negative score list"));
    }
    if !crate::vector::all_finite(positives) || !crate::vector::all_finite(negatives) {
        return Err(Error::NonFinite("scores"));
    }
    // (score, is_positive), ascending
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (np, nn) = (positives.len() as f64, negatives.len() as f64);
    // counts strictly below the current threshold
    let (mut pos_below, mut neg_below) = (0usize, 0usize);
    let mut prev: Option<(f64, f64, f64)> = None; // (threshold, frr, far)
    let mut i = 0;
    loop {
        let (threshold, at_end) = match all.get(i) {
            Some(&(s, _)) => (s, false),
            None => (all[all.len() - 1].0, true),
        };
        let frr = pos_below as f64 / np;
        let far = if at_end {
            0.0
        } else {
            (nn - neg_below as f64) / nn
        };
        if frr >= far {
            return Ok(match prev {
                Some((t0, frr0, far0)) if frr > far => {
                    let d0 = frr0 - far0;
                    let d1 = frr - far;
                    let alpha = -d0 / (d1 - d0);
                    Eer {
                        eer: frr0 + alpha * (frr - frr0),
                        threshold: t0 + alpha * (threshold - t0),
                    }
                }
                _ => Eer {
                    eer: frr,
                    threshold,
                },
            });
        }
        prev = Some((threshold, frr, far));
        // advance past every score equal to this threshold
        while let Some(&(s, is_pos)) = all.get(i) {
            if s != threshold {
                break;
            }
            if is_pos {
                pos_below += 1;
            } else {
                neg_below += 1;
            }
            i += 1;
        }
        debug_assert!(!at_end, "accept-nothing point always satisfies frr >= far");
    }
}
