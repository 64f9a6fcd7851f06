//! Width-5 convolution with max-over-time pooling.
//!
//! Inputs shorter than the filter are right-padded with zero vectors; padding
//! receives no gradient in the returned input gradients.

use super::{head_backward, head_forward, Activation, HeadCache, ModelSpec, CNN_FILTER_WIDTH};
use crate::nncore::{linalg, Mode, NnError, ParamSet};

const W: &str = "cnn.w";
const B: &str = "cnn.b";

pub(super) fn shapes(spec: &ModelSpec) -> Vec<(String, Vec<usize>)> {
    vec![
        (W.into(), vec![CNN_FILTER_WIDTH * spec.input_dim, spec.hidden]),
        (B.into(), vec![spec.hidden]),
    ]
}

pub(crate) struct CnnCache {
    /// Number of real (unpadded) tokens.
    len: usize,
    /// Concatenated windows, one per convolution position.
    windows: Vec<Vec<f64>>,
    /// Position that won the max for each filter.
    argmax: Vec<usize>,
    pre: Vec<f64>,
    pooled: Vec<f64>,
    activation: Activation,
    head: HeadCache,
}

pub(super) fn forward(
    spec: &ModelSpec,
    params: &ParamSet,
    seq: &[Vec<f64>],
    mode: &mut Mode<'_>,
) -> Result<(Vec<f64>, CnnCache), NnError> {
    let d = spec.input_dim;
    let f = spec.hidden;
    let w = params.value(W)?.data();
    let b = params.value(B)?.data();
    let padded_len = seq.len().max(CNN_FILTER_WIDTH);
    let positions = padded_len - CNN_FILTER_WIDTH + 1;

    let mut windows = Vec::with_capacity(positions);
    let mut pooled = vec![f64::NEG_INFINITY; f];
    let mut pre = vec![0.0; f];
    let mut argmax = vec![0; f];
    for p in 0..positions {
        let mut window = vec![0.0; CNN_FILTER_WIDTH * d];
        for k in 0..CNN_FILTER_WIDTH {
            if let Some(x) = seq.get(p + k) {
                window[k * d..(k + 1) * d].copy_from_slice(x);
            }
        }
        let mut z = b.to_vec();
        linalg::vec_mat_acc(&window, w, f, &mut z);
        for j in 0..f {
            let a = spec.activation.apply(z[j]);
            if a > pooled[j] {
                pooled[j] = a;
                pre[j] = z[j];
                argmax[j] = p;
            }
        }
        windows.push(window);
    }

    let (logits, head) = head_forward(params, &pooled, spec.dropout, mode)?;
    Ok((
        logits,
        CnnCache {
            len: seq.len(),
            windows,
            argmax,
            pre,
            pooled,
            activation: spec.activation,
            head,
        },
    ))
}

pub(super) fn backward(
    spec: &ModelSpec,
    params: &mut ParamSet,
    cache: &CnnCache,
    dlogits: &[f64],
) -> Vec<Vec<f64>> {
    let d = spec.input_dim;
    let f = spec.hidden;
    let dpooled = head_backward(params, &cache.head, dlogits);
    let (values, grads) = params.split_mut();
    let w = values[W].data();
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; f];
    let mut dwindows = vec![vec![0.0; CNN_FILTER_WIDTH * d]; cache.windows.len()];

    for j in 0..f {
        let dz = dpooled[j] * cache.activation.derivative(cache.pre[j], cache.pooled[j]);
        if dz == 0.0 {
            continue;
        }
        let p = cache.argmax[j];
        db[j] += dz;
        let window = &cache.windows[p];
        for (r, x) in window.iter().enumerate() {
            dw[r * f + j] += x * dz;
            dwindows[p][r] += w[r * f + j] * dz;
        }
    }

    let mut dinput = vec![vec![0.0; d]; cache.len];
    for (p, dwin) in dwindows.iter().enumerate() {
        for k in 0..CNN_FILTER_WIDTH {
            if let Some(dx) = dinput.get_mut(p + k) {
                linalg::add_assign(dx, &dwin[k * d..(k + 1) * d]);
            }
        }
    }
    linalg::add_assign(grads.get_mut(W).expect("cnn.w").data_mut(), &dw);
    linalg::add_assign(grads.get_mut(B).expect("cnn.b").data_mut(), &db);
    dinput
}

#[cfg(test)]
mod tests {
    use super::super::tests::{random_seq, spec};
    use super::super::*;
    use crate::nncore::{GradCheckConfig, SeededRng};
    use rand::SeedableRng;

    #[test]
    fn zero_filters_pool_the_activated_bias() {
        let mut m = Classifier::zeroed(spec(ModelKind::Cnn, 4, 3)).unwrap();
        m.params_mut()
            .value_mut("cnn.b")
            .unwrap()
            .data_mut()
            .copy_from_slice(&[0.5, -0.5, 2.0]);
        // out.w = identity on the pooled features
        let ow = m.params_mut().value_mut("out.w").unwrap().data_mut();
        ow.copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let mut rng = SeededRng::seed_from_u64(1);
        for len in [1, 5, 9] {
            let input = ModelInput::Sequence(random_seq(&mut rng, len, 4));
            let logits = m.logits(&input, &mut Mode::Eval).unwrap();
            assert_eq!(logits, vec![0.5, 0.0, 2.0]);
        }
    }

    #[test]
    fn length_five_has_one_position() {
        let mut rng = SeededRng::seed_from_u64(3);
        let m = Classifier::with_scale(spec(ModelKind::Cnn, 2, 4), 0.5, &mut rng).unwrap();
        let seq = random_seq(&mut rng, 5, 2);
        let (_, cache) = super::forward(m.spec(), m.params(), &seq, &mut Mode::Eval).unwrap();
        assert_eq!(cache.windows.len(), 1);
        assert!(cache.argmax.iter().all(|p| *p == 0));
    }

    #[test]
    fn padding_gets_no_gradient_and_short_inputs_work() {
        let mut rng = SeededRng::seed_from_u64(5);
        let mut m = Classifier::with_scale(spec(ModelKind::Cnn, 3, 6), 0.5, &mut rng).unwrap();
        let input = ModelInput::Sequence(random_seq(&mut rng, 2, 3));
        let out = m
            .loss_and_grad(&input, TemporalStatus::Past, &mut Mode::Eval)
            .unwrap();
        assert_eq!(out.dinput.len(), 2);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = GradCheckConfig {
            coords_per_param: None,
            ..Default::default()
        };
        for activation in [Activation::Relu, Activation::Tanh] {
            let mut rng = SeededRng::seed_from_u64(21);
            let mut s = spec(ModelKind::Cnn, 6, 8);
            s.activation = activation;
            let mut m = Classifier::with_scale(s, 0.5, &mut rng).unwrap();
            let input = ModelInput::Sequence(random_seq(&mut rng, 9, 6));
            let err = check_gradients(&mut m, &input, TemporalStatus::Future, &cfg).unwrap();
            assert!(err < 1e-4, "{activation:?}: {err}");
        }
    }
}
