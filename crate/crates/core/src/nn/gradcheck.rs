use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Parameters;

/// Options for [`grad_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    /// Central difference step.
    pub epsilon: f64,
    /// Denominator floor for the relative error, so coordinates whose true
    /// gradient is (numerically) zero are compared absolutely.
    pub floor: f64,
    /// Check at most this many coordinates per tensor, chosen at random.
    /// `None` checks every parameter.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            floor: 1e-6,
            max_per_tensor: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(tensor index, coordinate)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
}

/// Compares `analytic` against central finite differences of `loss` taken
/// around `params`.
///
/// Relative error per coordinate is `|a - n| / max(|a|, |n|, floor)`.
pub fn grad_check<P, G, F>(
    params: &P,
    analytic: &G,
    mut loss: F,
    opts: GradCheck,
) -> GradCheckReport
where
    P: Parameters + Clone,
    G: Parameters + ?Sized,
    F: FnMut(&P) -> f64,
{
    let analytic = analytic.tensors();
    let lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    assert_eq!(analytic.len(), lens.len(), "gradient tensor count mismatch");

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (k, &len) in lens.iter().enumerate() {
        assert_eq!(
            analytic[k].len(),
            len,
            "gradient tensor {k} length mismatch"
        );
        let coords: Vec<usize> = match opts.max_per_tensor {
            Some(n) if n < len => index::sample(&mut rng, len, n).into_vec(),
            _ => (0..len).collect(),
        };
        for i in coords {
            let original = work.tensors()[k][i];
            work.tensors_mut()[k][i] = original + opts.epsilon;
            let plus = loss(&work);
            work.tensors_mut()[k][i] = original - opts.epsilon;
            let minus = loss(&work);
            work.tensors_mut()[k][i] = original;

            let numeric = (plus - minus) / (2.0 * opts.epsilon);
            let a = analytic[k][i];
            let denom = a.abs().max(numeric.abs()).max(opts.floor);
            let err = (a - numeric).abs() / denom;
            report.checked += 1;
            if err > report.max_rel_error || err.is_nan() {
                report.max_rel_error = err;
                report.worst = Some((k, i));
            }
        }
    }
    report
}
