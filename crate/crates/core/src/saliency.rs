//! First-order gradient saliency over input embeddings, rendered as CSV or
//! self-contained HTML heatmaps.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TemporalStatus;
use crate::harness::{Example, TrainedModel};
use crate::models::{Classifier, ModelError, ModelInput};
use crate::nncore::{softmax_xent, Mode};

#[derive(Debug, Error)]
pub enum SaliencyError {
    #[error("empty saliency map")]
    EmptyMap,
    #[error("{tokens} tokens for {vectors} input vectors")]
    Misaligned { tokens: usize, vectors: usize },
    #[error("loss scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("saliency csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub tokens: Vec<String>,
    /// Mean of `raw[t]`, one per token.
    pub scores: Vec<f64>,
    /// `|∂loss / ∂emb[t][d]|`.
    pub raw: Vec<Vec<f64>>,
    pub predicted: TemporalStatus,
    pub gold: Option<TemporalStatus>,
}

impl SaliencyMap {
    /// Position of the highest score; ties go to the earliest token.
    pub fn top_position(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, s) in self.scores.iter().enumerate() {
            if best.is_none_or(|b| *s > self.scores[b]) {
                best = Some(i);
            }
        }
        best
    }
}

/// Saliency of the cross-entropy loss at `gold`, or at the model's own
/// prediction when `gold` is `None`. Dropout is off.
pub fn compute_saliency(
    model: &Classifier,
    input: &ModelInput,
    tokens: &[String],
    gold: Option<TemporalStatus>,
) -> Result<SaliencyMap, SaliencyError> {
    compute_saliency_scaled(model, input, tokens, gold, 1.0)
}

/// As [`compute_saliency`] with the loss multiplied by `scale`.
pub fn compute_saliency_scaled(
    model: &Classifier,
    input: &ModelInput,
    tokens: &[String],
    gold: Option<TemporalStatus>,
    scale: f64,
) -> Result<SaliencyMap, SaliencyError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(SaliencyError::BadScale(scale));
    }
    let vectors = input.embeddings().len();
    if tokens.len() != vectors {
        return Err(SaliencyError::Misaligned {
            tokens: tokens.len(),
            vectors,
        });
    }
    let (predicted, _) = model.classify(input)?;
    let label = gold.unwrap_or(predicted);
    let mut probe = model.clone();
    let out = probe.backprop_with(input, &mut Mode::Eval, |logits| {
        let x = softmax_xent(logits, label.index())?;
        let d = x.dlogits.iter().map(|v| v * scale).collect();
        Ok((x.loss * scale, d))
    })?;
    let raw: Vec<Vec<f64>> = out
        .dinput
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).collect())
        .collect();
    let scores = raw
        .iter()
        .map(|row| {
            if row.is_empty() {
                0.0
            } else {
                row.iter().sum::<f64>() / row.len() as f64
            }
        })
        .collect();
    Ok(SaliencyMap {
        tokens: tokens.to_vec(),
        scores,
        raw,
        predicted,
        gold,
    })
}

/// Saliency of a prepared example under a trained model, at its gold label if any.
pub fn explain(model: &TrainedModel, example: &Example) -> Result<SaliencyMap, SaliencyError> {
    compute_saliency(
        &model.classifier,
        &example.input(&model.embeddings),
        &example.forms,
        example.label,
    )
}

/// `<doc>_<sent>_<token>.<ext>`, with path separators replaced.
pub fn heatmap_file_name(doc_id: &str, sent_id: &str, token_id: usize, ext: &str) -> String {
    let clean = |s: &str| s.replace(['/', '\\'], "_");
    format!("{}_{}_{}.{}", clean(doc_id), clean(sent_id), token_id, ext)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    /// 1-based position within the representation.
    pub position: usize,
    pub token: String,
    pub score: f64,
}

/// `position,token,score` with scores at 6 decimals.
pub fn to_csv(map: &SaliencyMap) -> Result<String, SaliencyError> {
    if map.tokens.is_empty() {
        return Err(SaliencyError::EmptyMap);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| SaliencyError::Csv(e.to_string());
    w.write_record(["position", "token", "score"]).map_err(err)?;
    for (i, (tok, s)) in map.tokens.iter().zip(&map.scores).enumerate() {
        w.write_record([(i + 1).to_string(), tok.clone(), format!("{s:.6}")])
            .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| SaliencyError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| SaliencyError::Csv(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, SaliencyError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows = r
        .deserialize()
        .collect::<Result<Vec<CsvRow>, _>>()
        .map_err(|e| SaliencyError::Csv(e.to_string()))?;
    if rows.is_empty() {
        return Err(SaliencyError::EmptyMap);
    }
    Ok(rows)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Shading intensities in `[0, 1]`: `score / max(score)`, all zero for an all-zero map.
pub fn intensities(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(0.0, f64::max);
    scores
        .iter()
        .map(|s| if max > 0.0 { s / max } else { 0.0 })
        .collect()
}

/// Renders token/score pairs as a standalone HTML page.
pub fn render_html(
    tokens: &[String],
    scores: &[f64],
    predicted: TemporalStatus,
    gold: Option<TemporalStatus>,
) -> Result<String, SaliencyError> {
    if tokens.is_empty() {
        return Err(SaliencyError::EmptyMap);
    }
    if tokens.len() != scores.len() {
        return Err(SaliencyError::Misaligned {
            tokens: tokens.len(),
            vectors: scores.len(),
        });
    }
    let mut out = String::from(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>saliency</title>\n\
         <style>span.tok{padding:2px 4px;margin:1px;font-family:sans-serif}</style>\n</head>\n<body>\n<p>\n",
    );
    for (tok, (score, intensity)) in tokens.iter().zip(scores.iter().zip(intensities(scores))) {
        // White at 0, deep red at 1.
        let fade = (255.0 * (1.0 - intensity)).round() as u8;
        let _ = writeln!(
            out,
            "<span class=\"tok\" data-score=\"{score:.6}\" data-intensity=\"{intensity:.6}\" \
             style=\"background-color:rgb(255,{fade},{fade})\">{}</span>",
            escape(tok)
        );
    }
    let gold = gold.map_or("-", TemporalStatus::code);
    let _ = write!(
        out,
        "</p>\n<p class=\"caption\">predicted: {} gold: {}</p>\n</body>\n</html>\n",
        predicted.code(),
        gold
    );
    Ok(out)
}

pub fn to_html(map: &SaliencyMap) -> Result<String, SaliencyError> {
    render_html(&map.tokens, &map.scores, map.predicted, map.gold)
}
