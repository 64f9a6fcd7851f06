use rand::Rng;

use super::{Mode, NnError};

/// Output of [`softmax_xent`].
#[derive(Debug, Clone, PartialEq)]
pub struct Xent {
    pub loss: f64,
    pub prob: Vec<f64>,
    /// Gradient of the loss with respect to the logits: `prob - onehot(gold)`.
    pub dlogits: Vec<f64>,
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>, NnError> {
    if logits.is_empty() || logits.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("logits"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

pub fn softmax_xent(logits: &[f64], gold: usize) -> Result<Xent, NnError> {
    if gold >= logits.len() {
        return Err(NnError::ClassOutOfRange {
            gold,
            classes: logits.len(),
        });
    }
    let prob = softmax(logits)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let loss = -(logits[gold] - max - log_sum);
    let mut dlogits = prob.clone();
    dlogits[gold] -= 1.0;
    Ok(Xent {
        loss,
        prob,
        dlogits,
    })
}

/// Inverted dropout. Returns the output and, in training, the per-entry scale
/// (`0` or `1 / (1 - ratio)`) needed by [`dropout_backward`].
pub fn dropout(x: &[f64], ratio: f64, mode: &mut Mode<'_>) -> Result<(Vec<f64>, Option<Vec<f64>>), NnError> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(NnError::DropoutRatio(ratio));
    }
    match mode {
        Mode::Train(rng) if ratio > 0.0 => {
            let keep = 1.0 / (1.0 - ratio);
            let mask: Vec<f64> = x
                .iter()
                .map(|_| if rng.gen::<f64>() < ratio { 0.0 } else { keep })
                .collect();
            let y = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
            Ok((y, Some(mask)))
        }
        _ => Ok((x.to_vec(), None)),
    }
}

pub fn dropout_backward(dy: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
    match mask {
        Some(m) => dy.iter().zip(m).map(|(d, s)| d * s).collect(),
        None => dy.to_vec(),
    }
}
