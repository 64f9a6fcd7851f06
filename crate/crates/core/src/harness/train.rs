//! Mini-batch RMSProp training and eval-mode scoring.

use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::{prepare_examples, Example, HarnessError, Metrics, TrainConfig, TrainedModel};
use crate::corpus::{DepSentence, EventMention, TemporalStatus};
use crate::models::{Classifier, ModelError};
use crate::nncore::{EmbeddingTable, Mode, NnError, ParamSet, RmsProp, SeededRng, Tensor};

const EMBEDDING_PARAM: &str = "embeddings";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    /// Mean training loss of each epoch.
    pub history: Vec<f64>,
}

/// Trains a fresh classifier on the labeled `mentions`.
pub fn train(
    cfg: &TrainConfig,
    corpus: &[DepSentence],
    mentions: &[EventMention],
    embeddings: &EmbeddingTable,
) -> Result<TrainOutcome, HarnessError> {
    cfg.validate()?;
    let examples = prepare_examples(cfg, corpus, mentions, embeddings)?;
    train_examples(cfg, &examples, embeddings)
}

/// Embedding rows as a trainable parameter, for fine-tuning.
struct EmbeddingTrainer {
    params: ParamSet,
    opt: RmsProp,
    dim: usize,
}

impl EmbeddingTrainer {
    fn new(cfg: &TrainConfig, table: &EmbeddingTable) -> Result<Self, NnError> {
        let mut params = ParamSet::new();
        let matrix = Tensor::from_vec(&[table.n_rows(), table.dim()], table.matrix().to_vec())?;
        params.insert(EMBEDDING_PARAM, matrix)?;
        let opt = RmsProp::new(&params, cfg.learning_rate, cfg.rms_decay, cfg.rms_epsilon)?;
        Ok(EmbeddingTrainer {
            params,
            opt,
            dim: table.dim(),
        })
    }

    fn accumulate(&mut self, rows: &[usize], dinput: &[Vec<f64>]) {
        let g = self.params.grad_mut(EMBEDDING_PARAM).expect("embedding grad").data_mut();
        for (&r, d) in rows.iter().zip(dinput) {
            for (acc, v) in g[r * self.dim..(r + 1) * self.dim].iter_mut().zip(d) {
                *acc += v;
            }
        }
    }

    fn step(&mut self, scale: f64, table: &mut EmbeddingTable) -> Result<(), NnError> {
        self.params.scale_grads(scale);
        self.opt.step(&mut self.params)?;
        self.params.zero_grads();
        table
            .matrix_mut()
            .copy_from_slice(self.params.value(EMBEDDING_PARAM)?.data());
        Ok(())
    }
}

/// Trains on prepared examples. Deterministic given `cfg`.
pub fn train_examples(
    cfg: &TrainConfig,
    examples: &[Example],
    embeddings: &EmbeddingTable,
) -> Result<TrainOutcome, HarnessError> {
    cfg.validate()?;
    let golds = examples.iter().map(Example::gold).collect::<Result<Vec<_>, _>>()?;
    let mut rng = SeededRng::seed_from_u64(cfg.seed);
    let mut classifier = Classifier::new(cfg.model_spec(embeddings.dim()), &mut rng)?;
    let mut opt = RmsProp::new(classifier.params(), cfg.learning_rate, cfg.rms_decay, cfg.rms_epsilon)?;
    let mut table = embeddings.clone();
    let mut emb_trainer = if cfg.finetune_embeddings {
        Some(EmbeddingTrainer::new(cfg, &table)?)
    } else {
        None
    };

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..cfg.epochs {
        if examples.is_empty() {
            return Err(HarnessError::TooFewExamples { needed: 1, found: 0 });
        }
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            classifier.params_mut().zero_grads();
            for &i in chunk {
                let input = examples[i].input(&table);
                let non_finite = |loss| HarnessError::NonFiniteLoss { epoch, batch, loss };
                let out = match classifier.loss_and_grad(&input, golds[i], &mut Mode::Train(&mut rng)) {
                    Ok(out) => out,
                    Err(ModelError::Nn(NnError::NonFinite(_))) => return Err(non_finite(f64::NAN)),
                    Err(e) => return Err(e.into()),
                };
                if !out.loss.is_finite() {
                    return Err(non_finite(out.loss));
                }
                epoch_loss += out.loss;
                if let Some(t) = emb_trainer.as_mut() {
                    t.accumulate(&examples[i].rows, &out.dinput);
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            classifier.params_mut().scale_grads(scale);
            opt.step(classifier.params_mut())?;
            if let Some(t) = emb_trainer.as_mut() {
                t.step(scale, &mut table)?;
            }
        }
        history.push(epoch_loss / examples.len() as f64);
    }

    Ok(TrainOutcome {
        model: TrainedModel {
            config: cfg.clone(),
            classifier,
            embeddings: table,
        },
        history,
    })
}

/// Eval-mode predictions with their class distributions.
pub fn predict(
    model: &TrainedModel,
    examples: &[Example],
) -> Result<Vec<(TemporalStatus, Vec<f64>)>, HarnessError> {
    examples
        .iter()
        .map(|ex| Ok(model.classifier.classify(&ex.input(&model.embeddings))?))
        .collect()
}

/// Scores `model` against the gold labels of `examples`.
pub fn evaluate(model: &TrainedModel, examples: &[Example]) -> Result<(Metrics, Vec<TemporalStatus>), HarnessError> {
    if examples.is_empty() {
        return Err(HarnessError::EmptyEvaluation);
    }
    let golds = examples.iter().map(Example::gold).collect::<Result<Vec<_>, _>>()?;
    let predicted: Vec<TemporalStatus> = predict(model, examples)?.into_iter().map(|(s, _)| s).collect();
    let metrics = Metrics::from_pairs(golds.into_iter().zip(predicted.iter().copied()))?;
    Ok((metrics, predicted))
}

#[cfg(test)]
mod tests {
    use super::super::tests::{small_config, small_corpus};
    use super::super::*;
    use crate::models::ModelKind;
    use crate::nncore::{write_checkpoint, SeededRng};
    use rand::SeedableRng;

    fn setup(n: usize, cfg: &TrainConfig) -> (Vec<Example>, EmbeddingTable) {
        let (corpus, mentions) = small_corpus(n);
        let emb = resolve_embeddings(&cfg.embeddings, &corpus, cfg.seed).unwrap();
        (prepare_examples(cfg, &corpus, &mentions, &emb).unwrap(), emb)
    }

    #[test]
    fn zero_epochs_returns_the_initialization() {
        let cfg = TrainConfig {
            epochs: 0,
            ..small_config()
        };
        let (examples, emb) = setup(10, &cfg);
        let out = train_examples(&cfg, &examples, &emb).unwrap();
        assert!(out.history.is_empty());
        let mut rng = SeededRng::seed_from_u64(cfg.seed);
        let init = Classifier::new(cfg.model_spec(emb.dim()), &mut rng).unwrap();
        assert_eq!(out.model.classifier, init);
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let cfg = TrainConfig {
            epochs: 6,
            learning_rate: 0.01,
            ..small_config()
        };
        let (examples, emb) = setup(40, &cfg);
        let a = train_examples(&cfg, &examples, &emb).unwrap();
        let b = train_examples(&cfg, &examples, &emb).unwrap();
        assert_eq!(
            write_checkpoint(&a.model.to_checkpoint()),
            write_checkpoint(&b.model.to_checkpoint())
        );
        assert_eq!(a.history.len(), 6);
        assert!(a.history[5] < a.history[0], "{:?}", a.history);
    }

    #[test]
    fn all_families_train() {
        for (model, representation) in [
            (ModelKind::Cnn, ReprKind::Window),
            (ModelKind::TreeLstm, ReprKind::Tree),
        ] {
            let cfg = TrainConfig {
                model,
                representation,
                ..small_config()
            };
            let (examples, emb) = setup(12, &cfg);
            let out = train_examples(&cfg, &examples, &emb).unwrap();
            assert!(out.history.iter().all(|l| l.is_finite()));
            let (metrics, preds) = evaluate(&out.model, &examples).unwrap();
            assert_eq!(metrics.total(), 12);
            assert_eq!(preds.len(), 12);
        }
    }

    #[test]
    fn finetuning_moves_only_used_rows() {
        let cfg = TrainConfig {
            finetune_embeddings: true,
            ..small_config()
        };
        let (corpus, mentions) = small_corpus(8);
        let mut emb = resolve_embeddings(&cfg.embeddings, &corpus, 0).unwrap();
        let extra = EmbeddingTable::random(
            emb.words().iter().map(String::as_str).chain(["zebra"]),
            emb.dim(),
            0,
        );
        emb = extra;
        let examples = prepare_examples(&cfg, &corpus, &mentions, &emb).unwrap();
        let out = train_examples(&cfg, &examples, &emb).unwrap();
        let zebra = emb.row_of("zebra");
        assert_eq!(out.model.embeddings.row(zebra), emb.row(zebra));
        let used = examples[0].rows[0];
        assert_ne!(out.model.embeddings.row(used), emb.row(used));
    }

    #[test]
    fn unlabeled_and_empty_inputs_fail() {
        let cfg = small_config();
        let (mut examples, emb) = setup(3, &cfg);
        let model = train_examples(&cfg, &examples, &emb).unwrap().model;
        assert!(matches!(evaluate(&model, &[]), Err(HarnessError::EmptyEvaluation)));
        examples[1].label = None;
        assert!(matches!(
            train_examples(&cfg, &examples, &emb),
            Err(HarnessError::Unlabeled { index: 1, .. })
        ));
    }

    #[test]
    fn non_finite_inputs_report_position() {
        let cfg = small_config();
        let (examples, mut emb) = setup(20, &cfg);
        emb.matrix_mut().iter_mut().for_each(|v| *v = f64::NAN);
        match train_examples(&cfg, &examples, &emb) {
            Err(HarnessError::NonFiniteLoss { epoch: 0, batch: 0, .. }) => {}
            other => panic!("expected a non-finite loss, got {other:?}"),
        }
    }
}
