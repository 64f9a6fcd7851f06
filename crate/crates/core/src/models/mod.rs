//! Three-class event temporal status classifiers with hand-written backward passes.
//!
//! All three families share a dropout + linear softmax head over a single
//! vector: the final LSTM hidden state, the max-pooled CNN features, or the
//! hidden state of one tree-LSTM node.

mod cnn;
mod lstm;
mod probe;
mod treelstm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use probe::{probe_gradients, random_probe, random_tree};

use crate::corpus::{DepSentence, TemporalStatus};
use crate::nncore::{
    dropout, dropout_backward, grad_check, linalg, softmax, softmax_xent, GradCheckConfig, Mode, NnError,
    ParamSet, SeededRng, Tensor,
};

pub const NUM_CLASSES: usize = 3;
pub const CNN_FILTER_WIDTH: usize = 5;
pub const INIT_SCALE: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("empty input sequence")]
    EmptySequence,
    #[error("{model} cannot consume {input} input")]
    IncompatibleInput {
        model: ModelKind,
        input: &'static str,
    },
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("input vector {position} has dimension {found}, expected {expected}")]
    DimMismatch {
        position: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lstm,
    Cnn,
    #[serde(rename = "treelstm")]
    TreeLstm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Cnn => "cnn",
            ModelKind::TreeLstm => "treelstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lstm" => Ok(ModelKind::Lstm),
            "cnn" => Ok(ModelKind::Cnn),
            "treelstm" | "tree-lstm" => Ok(ModelKind::TreeLstm),
            other => Err(format!("unknown model type {other:?}")),
        }
    }
}

/// CNN feature nonlinearity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation and the output.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Shape and regularization settings of a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    /// LSTM / tree-LSTM hidden units, or CNN filter count.
    pub hidden: usize,
    pub dropout: f64,
    #[serde(default)]
    pub activation: Activation,
}

/// A tree over input vectors. Nodes are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeInput {
    pub embeddings: Vec<Vec<f64>>,
    pub children: Vec<Vec<usize>>,
    pub root: usize,
    /// Node whose hidden state feeds the output layer.
    pub readout: usize,
}

impl TreeInput {
    /// Mirrors the dependency structure of `sent`; `embeddings[i]` belongs to token `i + 1`.
    pub fn from_sentence(sent: &DepSentence, embeddings: Vec<Vec<f64>>, readout_token: usize) -> Self {
        let children = sent.children()[1..]
            .iter()
            .map(|c| c.iter().map(|id| id - 1).collect())
            .collect();
        TreeInput {
            embeddings,
            children,
            root: sent.root_id() - 1,
            readout: readout_token.saturating_sub(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelInput {
    Sequence(Vec<Vec<f64>>),
    Tree(TreeInput),
}

impl ModelInput {
    fn kind_name(&self) -> &'static str {
        match self {
            ModelInput::Sequence(_) => "sequence",
            ModelInput::Tree(_) => "tree",
        }
    }

    pub fn embeddings(&self) -> &[Vec<f64>] {
        match self {
            ModelInput::Sequence(s) => s,
            ModelInput::Tree(t) => &t.embeddings,
        }
    }

    pub fn embeddings_mut(&mut self) -> &mut [Vec<f64>] {
        match self {
            ModelInput::Sequence(s) => s,
            ModelInput::Tree(t) => &mut t.embeddings,
        }
    }
}

/// Loss, class distribution and input-vector gradients of one example.
#[derive(Debug, Clone, PartialEq)]
pub struct Backprop {
    pub loss: f64,
    pub prob: Vec<f64>,
    /// `∂loss / ∂input[t][d]`, aligned with the input vectors.
    pub dinput: Vec<Vec<f64>>,
}

pub(crate) struct HeadCache {
    input: Vec<f64>,
    mask: Option<Vec<f64>>,
}

pub(crate) fn head_forward(
    params: &ParamSet,
    h: &[f64],
    ratio: f64,
    mode: &mut Mode<'_>,
) -> Result<(Vec<f64>, HeadCache), NnError> {
    let (input, mask) = dropout(h, ratio, mode)?;
    let mut logits = params.value("out.b")?.data().to_vec();
    linalg::vec_mat_acc(&input, params.value("out.w")?.data(), NUM_CLASSES, &mut logits);
    Ok((logits, HeadCache { input, mask }))
}

/// Returns the gradient with respect to the head's (pre-dropout) input.
pub(crate) fn head_backward(params: &mut ParamSet, cache: &HeadCache, dlogits: &[f64]) -> Vec<f64> {
    let (values, grads) = params.split_mut();
    linalg::outer_acc(&cache.input, dlogits, grads.get_mut("out.w").expect("out.w").data_mut());
    linalg::add_assign(grads.get_mut("out.b").expect("out.b").data_mut(), dlogits);
    let mut dh = vec![0.0; cache.input.len()];
    linalg::mat_vec_acc(values["out.w"].data(), NUM_CLASSES, dlogits, &mut dh);
    dropout_backward(&dh, cache.mask.as_deref())
}

enum Cache {
    Lstm(lstm::LstmCache),
    Cnn(cnn::CnnCache),
    Tree(treelstm::TreeCache),
}

/// A classifier of any family: its spec plus named parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    spec: ModelSpec,
    params: ParamSet,
}

fn param_shapes(spec: &ModelSpec) -> Vec<(String, Vec<usize>)> {
    let mut shapes = match spec.kind {
        ModelKind::Lstm => lstm::shapes(spec),
        ModelKind::Cnn => cnn::shapes(spec),
        ModelKind::TreeLstm => treelstm::shapes(spec),
    };
    shapes.push(("out.w".into(), vec![spec.hidden, NUM_CLASSES]));
    shapes.push(("out.b".into(), vec![NUM_CLASSES]));
    shapes
}

impl Classifier {
    fn build(spec: ModelSpec, mut init: impl FnMut(&[usize]) -> Tensor) -> Result<Self, ModelError> {
        if spec.input_dim == 0 || spec.hidden == 0 {
            return Err(ModelError::Nn(NnError::DataLength {
                shape: vec![spec.input_dim, spec.hidden],
                len: 0,
            }));
        }
        if !(0.0..1.0).contains(&spec.dropout) {
            return Err(NnError::DropoutRatio(spec.dropout).into());
        }
        let mut params = ParamSet::new();
        for (name, shape) in param_shapes(&spec) {
            params.insert(&name, init(&shape))?;
        }
        Ok(Classifier { spec, params })
    }

    /// Uniform(-0.05, 0.05) initialization; the LSTM forget-gate bias starts at 1.
    pub fn new(spec: ModelSpec, rng: &mut SeededRng) -> Result<Self, ModelError> {
        Self::with_scale(spec, INIT_SCALE, rng)
    }

    /// Uniform(-scale, scale) initialization; the LSTM forget-gate bias starts at 1.
    pub fn with_scale(spec: ModelSpec, scale: f64, rng: &mut SeededRng) -> Result<Self, ModelError> {
        let mut c = Self::build(spec, |shape| Tensor::uniform(shape, scale, rng))?;
        if spec.kind == ModelKind::Lstm {
            c.params.value_mut(lstm::FORGET_BIAS)?.fill(1.0);
        }
        Ok(c)
    }

    /// Every parameter zero.
    pub fn zeroed(spec: ModelSpec) -> Result<Self, ModelError> {
        Self::build(spec, Tensor::zeros)
    }

    /// Rebuilds a classifier from stored parameter values.
    pub fn from_values(
        spec: ModelSpec,
        values: &std::collections::BTreeMap<String, Tensor>,
    ) -> Result<Self, ModelError> {
        let mut c = Self::zeroed(spec)?;
        c.params.load_values(values)?;
        Ok(c)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn check_input(&self, input: &ModelInput) -> Result<(), ModelError> {
        let compatible = matches!(
            (self.spec.kind, input),
            (ModelKind::Lstm | ModelKind::Cnn, ModelInput::Sequence(_))
                | (ModelKind::TreeLstm, ModelInput::Tree(_))
        );
        if !compatible {
            return Err(ModelError::IncompatibleInput {
                model: self.spec.kind,
                input: input.kind_name(),
            });
        }
        let embeddings = input.embeddings();
        if embeddings.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        for (position, e) in embeddings.iter().enumerate() {
            if e.len() != self.spec.input_dim {
                return Err(ModelError::DimMismatch {
                    position,
                    expected: self.spec.input_dim,
                    found: e.len(),
                });
            }
        }
        Ok(())
    }

    fn forward_cached(&self, input: &ModelInput, mode: &mut Mode<'_>) -> Result<(Vec<f64>, Cache), ModelError> {
        self.check_input(input)?;
        match input {
            ModelInput::Sequence(seq) if self.spec.kind == ModelKind::Lstm => {
                let (logits, c) = lstm::forward(&self.spec, &self.params, seq, mode)?;
                Ok((logits, Cache::Lstm(c)))
            }
            ModelInput::Sequence(seq) => {
                let (logits, c) = cnn::forward(&self.spec, &self.params, seq, mode)?;
                Ok((logits, Cache::Cnn(c)))
            }
            ModelInput::Tree(tree) => {
                let (logits, c) = treelstm::forward(&self.spec, &self.params, tree, mode)?;
                Ok((logits, Cache::Tree(c)))
            }
        }
    }

    pub fn logits(&self, input: &ModelInput, mode: &mut Mode<'_>) -> Result<Vec<f64>, ModelError> {
        Ok(self.forward_cached(input, mode)?.0)
    }

    /// Per-step LSTM hidden states in eval mode.
    pub fn lstm_hidden_states(&self, seq: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ModelError> {
        let input = ModelInput::Sequence(seq.to_vec());
        match self.forward_cached(&input, &mut Mode::Eval)? {
            (_, Cache::Lstm(c)) => Ok(c.hidden_states()),
            _ => Err(ModelError::IncompatibleInput {
                model: self.spec.kind,
                input: "sequence (hidden states need an LSTM)",
            }),
        }
    }

    /// Forward pass, then backpropagation of `loss_fn(logits) = (loss, dlogits)`.
    ///
    /// Parameter gradients are added to the gradient buffers.
    pub fn backprop_with<F>(
        &mut self,
        input: &ModelInput,
        mode: &mut Mode<'_>,
        loss_fn: F,
    ) -> Result<Backprop, ModelError>
    where
        F: FnOnce(&[f64]) -> Result<(f64, Vec<f64>), NnError>,
    {
        let (logits, cache) = self.forward_cached(input, mode)?;
        let prob = softmax(&logits)?;
        let (loss, dlogits) = loss_fn(&logits)?;
        let dinput = match (&cache, input) {
            (Cache::Lstm(c), _) => lstm::backward(&self.spec, &mut self.params, c, &dlogits),
            (Cache::Cnn(c), _) => cnn::backward(&self.spec, &mut self.params, c, &dlogits),
            (Cache::Tree(c), ModelInput::Tree(t)) => {
                treelstm::backward(&self.spec, &mut self.params, c, t, &dlogits)
            }
            (Cache::Tree(_), ModelInput::Sequence(_)) => unreachable!("checked by check_input"),
        };
        Ok(Backprop { loss, prob, dinput })
    }

    /// Cross-entropy against `gold`, with gradients accumulated.
    pub fn loss_and_grad(
        &mut self,
        input: &ModelInput,
        gold: TemporalStatus,
        mode: &mut Mode<'_>,
    ) -> Result<Backprop, ModelError> {
        self.backprop_with(input, mode, |logits| {
            let x = softmax_xent(logits, gold.index())?;
            Ok((x.loss, x.dlogits))
        })
    }

    /// Eval-mode prediction.
    pub fn classify(&self, input: &ModelInput) -> Result<(TemporalStatus, Vec<f64>), ModelError> {
        let logits = self.logits(input, &mut Mode::Eval)?;
        Ok(classify_logits(&logits)?)
    }
}

/// Finite-difference check of every parameter gradient of `model` on one
/// eval-mode example. Returns the maximum relative error.
pub fn check_gradients(
    model: &mut Classifier,
    input: &ModelInput,
    gold: TemporalStatus,
    cfg: &GradCheckConfig,
) -> Result<f64, ModelError> {
    model.check_input(input)?;
    let spec = model.spec;
    let err = grad_check(
        &mut model.params,
        |p| {
            let mut probe = Classifier {
                spec,
                params: std::mem::take(p),
            };
            let out = probe.loss_and_grad(input, gold, &mut Mode::Eval);
            *p = probe.params;
            match out {
                Ok(b) => Ok(b.loss),
                Err(ModelError::Nn(e)) => Err(e),
                Err(_) => Err(NnError::NonFinite("loss")),
            }
        },
        cfg,
    )?;
    Ok(err)
}

/// Argmax of the softmax; ties go to the lowest class index.
pub fn classify_logits(logits: &[f64]) -> Result<(TemporalStatus, Vec<f64>), NnError> {
    let prob = softmax(logits)?;
    let mut best = 0;
    for (i, p) in prob.iter().enumerate() {
        if *p > prob[best] {
            best = i;
        }
    }
    let status = TemporalStatus::from_index(best).ok_or(NnError::ClassOutOfRange {
        gold: best,
        classes: NUM_CLASSES,
    })?;
    Ok((status, prob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    pub(crate) fn spec(kind: ModelKind, d: usize, h: usize) -> ModelSpec {
        ModelSpec {
            kind,
            input_dim: d,
            hidden: h,
            dropout: 0.5,
            activation: Activation::Relu,
        }
    }

    pub(crate) fn random_seq(rng: &mut SeededRng, len: usize, d: usize) -> Vec<Vec<f64>> {
        (0..len)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn classify_examples() {
        let (s, p) = classify_logits(&[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(s, TemporalStatus::Past);
        assert!((p[0] - 0.786_986_042_161_598_5).abs() < 1e-12);
        assert_eq!(classify_logits(&[0.3, 0.3, 0.3]).unwrap().0, TemporalStatus::Past);
        assert_eq!(classify_logits(&[0.0, 1.0, 1.0]).unwrap().0, TemporalStatus::Ongoing);
    }

    #[test]
    fn zero_models_predict_from_output_bias() {
        let mut rng = SeededRng::seed_from_u64(0);
        for kind in [ModelKind::Lstm, ModelKind::Cnn] {
            let mut m = Classifier::zeroed(spec(kind, 4, 6)).unwrap();
            m.params_mut().value_mut("out.b").unwrap().data_mut().copy_from_slice(&[0.0, 0.0, 2.0]);
            let input = ModelInput::Sequence(random_seq(&mut rng, 7, 4));
            let (s, _) = m.classify(&input).unwrap();
            assert_eq!(s, TemporalStatus::Future);
        }
    }

    #[test]
    fn incompatible_inputs() {
        let mut rng = SeededRng::seed_from_u64(0);
        let lstm = Classifier::new(spec(ModelKind::Lstm, 3, 4), &mut rng).unwrap();
        let tree = TreeInput {
            embeddings: vec![vec![0.0; 3]],
            children: vec![vec![]],
            root: 0,
            readout: 0,
        };
        assert!(matches!(
            lstm.classify(&ModelInput::Tree(tree)),
            Err(ModelError::IncompatibleInput { .. })
        ));
        let tl = Classifier::new(spec(ModelKind::TreeLstm, 3, 4), &mut rng).unwrap();
        assert!(matches!(
            tl.classify(&ModelInput::Sequence(vec![vec![0.0; 3]])),
            Err(ModelError::IncompatibleInput { .. })
        ));
        assert!(matches!(
            lstm.classify(&ModelInput::Sequence(vec![])),
            Err(ModelError::EmptySequence)
        ));
        assert!(matches!(
            lstm.classify(&ModelInput::Sequence(vec![vec![0.0; 2]])),
            Err(ModelError::DimMismatch { .. })
        ));
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = SeededRng::seed_from_u64(0);
        let m = Classifier::new(spec(ModelKind::Lstm, 3, 4), &mut rng).unwrap();
        assert!(m.params().value("lstm.b_f").unwrap().data().iter().all(|v| *v == 1.0));
        let other = m.params().value("lstm.b_i").unwrap().data();
        assert!(other.iter().all(|v| v.abs() < INIT_SCALE));
    }

    #[test]
    fn eval_is_deterministic_and_train_uses_dropout() {
        let mut rng = SeededRng::seed_from_u64(2);
        let m = Classifier::new(spec(ModelKind::Lstm, 3, 16), &mut rng).unwrap();
        let input = ModelInput::Sequence(random_seq(&mut rng, 4, 3));
        let a = m.logits(&input, &mut Mode::Eval).unwrap();
        let b = m.logits(&input, &mut Mode::Eval).unwrap();
        assert_eq!(a, b);
        let mut r1 = SeededRng::seed_from_u64(1);
        let t = m.logits(&input, &mut Mode::Train(&mut r1)).unwrap();
        assert_ne!(a, t);
    }
}
