//! Training, evaluation and cross-validation over event mentions.

mod cv;
mod metrics;
mod split;
mod train;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cv::{cross_validate, CvOutcome, CvReport, FoldOutcome, FoldReport};
pub use metrics::{f1, render_table, ClassScores, Metrics};
pub use split::{kfold, split_tuning_test, FoldPlan};
pub use train::{evaluate, predict, train, train_examples, TrainOutcome};

use crate::chain::{select_ids, ChainError, ReprKind};
use crate::corpus::{DepSentence, EventMention, SentenceIndex, TemporalStatus};
use crate::models::{Activation, Classifier, ModelError, ModelInput, ModelKind, ModelSpec, TreeInput};
use crate::nncore::{
    load_embeddings, Checkpoint, CheckpointHeader, EmbeddingTable, NnError, FORMAT_VERSION, RMSPROP_DECAY,
    RMSPROP_EPSILON,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("need at least {needed} examples, found {found}")]
    TooFewExamples { needed: usize, found: usize },
    #[error("mention {index} ({doc_id}/{sent_id}/{token_id}) has no gold label")]
    Unlabeled {
        index: usize,
        doc_id: String,
        sent_id: String,
        token_id: usize,
    },
    #[error("empty evaluation set")]
    EmptyEvaluation,
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<HarnessError>,
    },
    #[error("reading embeddings {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Which node's state feeds the tree-LSTM output layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeReadout {
    #[default]
    Root,
    Target,
}

/// Where input vectors come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbeddingSource {
    /// Seeded uniform vectors over the corpus vocabulary.
    Random { dim: usize },
    /// A whitespace-separated text table.
    File { path: PathBuf },
}

impl Default for EmbeddingSource {
    fn default() -> Self {
        EmbeddingSource::Random { dim: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub representation: ReprKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout: f64,
    pub hidden: usize,
    pub half_width: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub embeddings: EmbeddingSource,
    pub activation: Activation,
    pub readout: TreeReadout,
    /// Update embedding rows with the optimizer as well.
    pub finetune_embeddings: bool,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelKind::Lstm,
            representation: ReprKind::Chain,
            learning_rate: 0.001,
            epochs: 50,
            dropout: 0.5,
            hidden: 300,
            half_width: 7,
            batch_size: 16,
            seed: 0,
            embeddings: EmbeddingSource::default(),
            activation: Activation::Relu,
            readout: TreeReadout::Root,
            finetune_embeddings: false,
            rms_decay: RMSPROP_DECAY,
            rms_epsilon: RMSPROP_EPSILON,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.hidden == 0 {
            return fail("hidden must be positive".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if let EmbeddingSource::Random { dim: 0 } = self.embeddings {
            return fail("embedding dim must be positive".into());
        }
        let tree_model = self.model == ModelKind::TreeLstm;
        let tree_repr = self.representation == ReprKind::Tree;
        if tree_model != tree_repr {
            return fail(format!(
                "representation {} is incompatible with model {} (tree requires treelstm and vice versa)",
                self.representation, self.model
            ));
        }
        Ok(())
    }

    pub fn model_spec(&self, input_dim: usize) -> ModelSpec {
        ModelSpec {
            kind: self.model,
            input_dim,
            hidden: self.hidden,
            dropout: self.dropout,
            activation: self.activation,
        }
    }
}

/// Builds the embedding table named by `source`; random tables cover the corpus forms.
pub fn resolve_embeddings(
    source: &EmbeddingSource,
    corpus: &[DepSentence],
    seed: u64,
) -> Result<EmbeddingTable, HarnessError> {
    match source {
        EmbeddingSource::Random { dim } => {
            let forms = corpus.iter().flat_map(|s| s.forms());
            Ok(EmbeddingTable::random(forms, *dim, seed))
        }
        EmbeddingSource::File { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
                path: path.clone(),
                message: e.to_string(),
            })?;
            Ok(load_embeddings(&text, seed)?)
        }
    }
}

/// One mention resolved to the token selection its model consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// Position in the mention list the example was built from.
    pub mention: usize,
    pub doc_id: String,
    pub sent_id: String,
    pub token_id: usize,
    pub label: Option<TemporalStatus>,
    pub token_ids: Vec<usize>,
    pub forms: Vec<String>,
    /// Embedding rows, aligned with `token_ids`.
    pub rows: Vec<usize>,
    /// Tree shape (embeddings left empty) for tree inputs.
    tree: Option<TreeInput>,
}

impl Example {
    pub fn input(&self, embeddings: &EmbeddingTable) -> ModelInput {
        let vectors: Vec<Vec<f64>> = self.rows.iter().map(|&r| embeddings.row(r).to_vec()).collect();
        match &self.tree {
            Some(t) => ModelInput::Tree(TreeInput {
                embeddings: vectors,
                ..t.clone()
            }),
            None => ModelInput::Sequence(vectors),
        }
    }

    pub fn gold(&self) -> Result<TemporalStatus, HarnessError> {
        self.label.ok_or_else(|| HarnessError::Unlabeled {
            index: self.mention,
            doc_id: self.doc_id.clone(),
            sent_id: self.sent_id.clone(),
            token_id: self.token_id,
        })
    }
}

/// Resolves every mention to its representation under `cfg`.
pub fn prepare_examples(
    cfg: &TrainConfig,
    corpus: &[DepSentence],
    mentions: &[EventMention],
    embeddings: &EmbeddingTable,
) -> Result<Vec<Example>, HarnessError> {
    let index = SentenceIndex::new(corpus);
    mentions
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let sent = index
                .position(&m.doc_id, &m.sent_id)
                .map(|p| &corpus[p])
                .ok_or_else(|| ChainError::Unresolved {
                    doc_id: m.doc_id.clone(),
                    sent_id: m.sent_id.clone(),
                    token_id: m.token_id,
                })?;
            let token_ids = select_ids(sent, m.token_id, cfg.representation, cfg.half_width)?;
            let forms: Vec<String> = token_ids
                .iter()
                .map(|&id| sent.tokens()[id - 1].form.clone())
                .collect();
            let rows = forms.iter().map(|f| embeddings.row_of(f)).collect();
            let tree = (cfg.representation == ReprKind::Tree).then(|| {
                let readout = match cfg.readout {
                    TreeReadout::Root => sent.root_id(),
                    TreeReadout::Target => m.token_id,
                };
                TreeInput::from_sentence(sent, Vec::new(), readout)
            });
            Ok(Example {
                mention: i,
                doc_id: m.doc_id.clone(),
                sent_id: m.sent_id.clone(),
                token_id: m.token_id,
                label: m.label,
                token_ids,
                forms,
                rows,
                tree,
            })
        })
        .collect()
}

/// A classifier together with the configuration and embeddings it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub classifier: Classifier,
    pub embeddings: EmbeddingTable,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    config: TrainConfig,
    spec: ModelSpec,
}

impl TrainedModel {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let params = self.classifier.params().values().clone();
        let meta = CheckpointMeta {
            config: self.config.clone(),
            spec: *self.classifier.spec(),
        };
        Checkpoint {
            header: CheckpointHeader {
                format_version: FORMAT_VERSION,
                model_type: self.classifier.kind().as_str().to_string(),
                shapes: params.iter().map(|(k, t)| (k.clone(), t.shape().to_vec())).collect(),
                meta: serde_json::to_value(meta).expect("meta serializes"),
            },
            params,
            embeddings: self.embeddings.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self, HarnessError> {
        let meta: CheckpointMeta = serde_json::from_value(ckpt.header.meta)
            .map_err(|e| NnError::Checkpoint(format!("meta: {e}")))?;
        if meta.spec.kind.as_str() != ckpt.header.model_type {
            return Err(NnError::Checkpoint(format!(
                "model_type {:?} disagrees with spec {}",
                ckpt.header.model_type, meta.spec.kind
            ))
            .into());
        }
        if meta.spec.input_dim != ckpt.embeddings.dim() {
            return Err(NnError::Checkpoint("embedding dim disagrees with model input dim".into()).into());
        }
        let classifier = Classifier::from_values(meta.spec, &ckpt.params)?;
        Ok(TrainedModel {
            config: meta.config,
            classifier,
            embeddings: ckpt.embeddings,
        })
    }
}
