//! k-fold cross-validation with folds trained in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, kfold, train_examples, Example, FoldPlan, HarnessError, Metrics, TrainConfig, TrainedModel};
use crate::corpus::TemporalStatus;
use crate::nncore::EmbeddingTable;

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub fold: usize,
    /// Positions in the example list held out for this fold.
    pub test_indices: Vec<usize>,
    pub predictions: Vec<TemporalStatus>,
    pub metrics: Metrics,
    pub history: Vec<f64>,
    pub model: TrainedModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub plan: FoldPlan,
    /// Ordered by fold index.
    pub folds: Vec<FoldOutcome>,
    /// Scores of the summed confusion matrices.
    pub pooled: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub size: usize,
    pub final_loss: Option<f64>,
    pub metrics: Metrics,
}

/// Serializable summary of a cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub config: TrainConfig,
    pub k: usize,
    pub fold_sizes: Vec<usize>,
    pub folds: Vec<FoldReport>,
    pub pooled: Metrics,
}

impl CvOutcome {
    pub fn report(&self, cfg: &TrainConfig) -> CvReport {
        CvReport {
            config: cfg.clone(),
            k: self.folds.len(),
            fold_sizes: self.plan.sizes(),
            folds: self
                .folds
                .iter()
                .map(|f| FoldReport {
                    fold: f.fold,
                    size: f.test_indices.len(),
                    final_loss: f.history.last().copied(),
                    metrics: f.metrics.clone(),
                })
                .collect(),
            pooled: self.pooled.clone(),
        }
    }
}

fn run_fold(
    cfg: &TrainConfig,
    examples: &[Example],
    embeddings: &EmbeddingTable,
    plan: &FoldPlan,
    fold: usize,
) -> Result<FoldOutcome, HarnessError> {
    let pick = |idx: &[usize]| idx.iter().map(|&i| examples[i].clone()).collect::<Vec<_>>();
    let train_set = pick(&plan.training_indices(fold));
    let test_indices = plan.folds[fold].clone();
    let test_set = pick(&test_indices);
    let outcome = train_examples(cfg, &train_set, embeddings)?;
    let (metrics, predictions) = evaluate(&outcome.model, &test_set)?;
    Ok(FoldOutcome {
        fold,
        test_indices,
        predictions,
        metrics,
        history: outcome.history,
        model: outcome.model,
    })
}

/// Trains on k−1 folds and scores the held-out fold, for every fold.
///
/// Folds run on up to `jobs` threads; results do not depend on `jobs`.
pub fn cross_validate(
    cfg: &TrainConfig,
    examples: &[Example],
    embeddings: &EmbeddingTable,
    k: usize,
    jobs: usize,
) -> Result<CvOutcome, HarnessError> {
    cfg.validate()?;
    let plan = kfold(examples.len(), k, cfg.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<FoldOutcome, HarnessError>> = pool.install(|| {
        (0..k)
            .into_par_iter()
            .map(|fold| {
                run_fold(cfg, examples, embeddings, &plan, fold).map_err(|e| HarnessError::Fold {
                    fold,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    let folds = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let pooled = Metrics::pooled(folds.iter().map(|f| &f.metrics))?;
    Ok(CvOutcome { plan, folds, pooled })
}
