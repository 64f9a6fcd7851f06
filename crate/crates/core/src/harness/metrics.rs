//! Confusion-matrix metrics and the Recall/Precision/F1 table format.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::TemporalStatus;
use crate::models::NUM_CLASSES;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl ClassScores {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        ClassScores {
            recall,
            precision,
            f1: f1(precision, recall),
        }
    }

    /// One table cell: `R/P/F1` in percent, F1 with one decimal.
    pub fn cell(&self) -> String {
        format!(
            "{:.0}/{:.0}/{:.1}",
            self.recall * 100.0,
            self.precision * 100.0,
            self.f1 * 100.0
        )
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Scores derived from a 3×3 confusion matrix (rows gold, columns predicted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    /// Indexed PA, OG, FU.
    pub per_class: [ClassScores; NUM_CLASSES],
    #[serde(rename = "macro")]
    pub macro_avg: ClassScores,
    pub micro: ClassScores,
}

impl Metrics {
    pub fn from_confusion(confusion: [[usize; NUM_CLASSES]; NUM_CLASSES]) -> Result<Self, HarnessError> {
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(HarnessError::EmptyEvaluation);
        }
        let mut per_class = [ClassScores::default(); NUM_CLASSES];
        let (mut tp_sum, mut fp_sum, mut fn_sum) = (0, 0, 0);
        for c in 0..NUM_CLASSES {
            let tp = confusion[c][c];
            let fn_: usize = confusion[c].iter().sum::<usize>() - tp;
            let fp: usize = (0..NUM_CLASSES).map(|g| confusion[g][c]).sum::<usize>() - tp;
            per_class[c] = ClassScores::from_counts(tp, fp, fn_);
            tp_sum += tp;
            fp_sum += fp;
            fn_sum += fn_;
        }
        let mean = |f: fn(&ClassScores) -> f64| per_class.iter().map(f).sum::<f64>() / NUM_CLASSES as f64;
        let macro_avg = ClassScores {
            recall: mean(|s| s.recall),
            precision: mean(|s| s.precision),
            f1: mean(|s| s.f1),
        };
        Ok(Metrics {
            confusion,
            per_class,
            macro_avg,
            micro: ClassScores::from_counts(tp_sum, fp_sum, fn_sum),
        })
    }

    /// Metrics over `(gold, predicted)` pairs.
    pub fn from_pairs<I>(pairs: I) -> Result<Self, HarnessError>
    where
        I: IntoIterator<Item = (TemporalStatus, TemporalStatus)>,
    {
        let mut confusion = [[0; NUM_CLASSES]; NUM_CLASSES];
        for (gold, pred) in pairs {
            confusion[gold.index()][pred.index()] += 1;
        }
        Self::from_confusion(confusion)
    }

    /// Elementwise sum of confusion matrices, rescored.
    pub fn pooled<'a, I>(parts: I) -> Result<Self, HarnessError>
    where
        I: IntoIterator<Item = &'a Metrics>,
    {
        let mut confusion = [[0; NUM_CLASSES]; NUM_CLASSES];
        for m in parts {
            for (row, add) in confusion.iter_mut().zip(&m.confusion) {
                for (c, a) in row.iter_mut().zip(add) {
                    *c += a;
                }
            }
        }
        Self::from_confusion(confusion)
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: usize = (0..NUM_CLASSES).map(|c| self.confusion[c][c]).sum();
        correct as f64 / self.total() as f64
    }

    pub fn class(&self, status: TemporalStatus) -> &ClassScores {
        &self.per_class[status.index()]
    }
}

/// Renders rows as `name | PA | OG | FU | Macro | Micro`, each cell `R/P/F1`.
pub fn render_table<'a, I>(rows: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a Metrics)>,
{
    let rows: Vec<(&str, &Metrics)> = rows.into_iter().collect();
    let name_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let header = ["PA", "OG", "FU", "Macro", "Micro"];
    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "Model");
    for h in header {
        let _ = write!(out, " | {h:>14}");
    }
    out.push('\n');
    for (name, m) in rows {
        let _ = write!(out, "{name:<name_w$}");
        let cells = m.per_class.iter().chain([&m.macro_avg, &m.micro]);
        for s in cells {
            let _ = write!(out, " | {:>14}", s.cell());
        }
        out.push('\n');
    }
    out
}
