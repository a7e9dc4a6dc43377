use crate::{Error, Result};

/// Numerically stable softmax (shifted by the max logit).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Empty("softmax input"));
    }
    if !crate::vector::all_finite(logits) {
        return Err(Error::NonFinite("softmax input"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

fn one_hot_index(target: &[f64]) -> Result<usize> {
    let mut hot = None;
    for (i, &t) in target.iter().enumerate() {
        if t == 1.0 {
            if hot.is_some() {
                return Err(Error::NotOneHot);
            }
            hot = Some(i);
        } else if t != 0.0 {
            return Err(Error::NotOneHot);
        }
    }
    hot.ok_or(Error::NotOneHot)
}

/// Categorical cross entropy `-Σ t_i log softmax(logits)_i`.
pub fn cce_loss(logits: &[f64], target: &[f64]) -> Result<f64> {
    if logits.len() != target.len() {
        return Err(Error::shape(target.len(), logits.len()));
    }
    let k = one_hot_index(target)?;
    if !crate::vector::all_finite(logits) {
        return Err(Error::NonFinite("cce logits"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    Ok((lse - logits[k]).max(0.0))
}

/// Gradient of [`cce_loss`] with respect to the logits: `softmax(logits) - target`.
pub fn cce_grad(logits: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    if logits.len() != target.len() {
        return Err(Error::shape(target.len(), logits.len()));
    }
    one_hot_index(target)?;
    let p = softmax(logits)?;
    Ok(p.iter().zip(target).map(|(pi, ti)| pi - ti).collect())
}
