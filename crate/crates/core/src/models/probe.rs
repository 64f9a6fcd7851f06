//! Random models and inputs for checking gradients end to end.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use super::{check_gradients, Activation, Classifier, ModelError, ModelInput, ModelKind, ModelSpec, TreeInput};
use crate::corpus::TemporalStatus;
use crate::nncore::{GradCheckConfig, SeededRng};

const PROBE_DIM: usize = 6;
const PROBE_HIDDEN: usize = 8;
/// Large enough that gradients sit well above finite-difference noise.
const PROBE_SCALE: f64 = 0.5;

fn random_seq(rng: &mut SeededRng, len: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|_| (0..PROBE_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// A random rooted tree over `n` nodes with shuffled node numbering.
pub fn random_tree(rng: &mut SeededRng, n: usize) -> TreeInput {
    let mut label: Vec<usize> = (0..n).collect();
    label.shuffle(rng);
    let mut children = vec![Vec::new(); n];
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        children[label[parent]].push(label[i]);
    }
    let readout = label[rng.gen_range(0..n)];
    TreeInput {
        embeddings: random_seq(rng, n),
        children,
        root: label[0],
        readout,
    }
}

/// A small random classifier of `kind`, an input it accepts and a gold label, all from `seed`.
pub fn random_probe(kind: ModelKind, seed: u64) -> Result<(Classifier, ModelInput, TemporalStatus), ModelError> {
    let mut rng = SeededRng::seed_from_u64(seed);
    let activation = if seed.is_multiple_of(2) { Activation::Relu } else { Activation::Tanh };
    let spec = ModelSpec {
        kind,
        input_dim: PROBE_DIM,
        hidden: PROBE_HIDDEN,
        dropout: 0.5,
        activation,
    };
    let model = Classifier::with_scale(spec, PROBE_SCALE, &mut rng)?;
    let input = match kind {
        ModelKind::TreeLstm => {
            let n = rng.gen_range(1..9);
            ModelInput::Tree(random_tree(&mut rng, n))
        }
        _ => {
            let len = rng.gen_range(2..10);
            ModelInput::Sequence(random_seq(&mut rng, len))
        }
    };
    let gold = TemporalStatus::ALL[rng.gen_range(0..3)];
    Ok((model, input, gold))
}

/// Max relative error of every parameter gradient on [`random_probe`]`(kind, seed)`.
pub fn probe_gradients(kind: ModelKind, seed: u64, eps: f64) -> Result<f64, ModelError> {
    let (mut model, input, gold) = random_probe(kind, seed)?;
    let cfg = GradCheckConfig {
        eps,
        coords_per_param: None,
        seed,
    };
    check_gradients(&mut model, &input, gold, &cfg)
}
