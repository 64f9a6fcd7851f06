use rand::seq::index::sample;
use rand::SeedableRng;

use super::{NnError, ParamSet, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub eps: f64,
    /// Coordinates probed per parameter tensor; `None` probes all of them.
    pub coords_per_param: Option<usize>,
    /// Selects which coordinates are probed.
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-5,
            coords_per_param: Some(16),
            seed: 0,
        }
    }
}

/// Compares analytic gradients with central differences.
///
/// `loss_and_grad` must return the loss and add its gradient into the
/// gradient buffers of the parameter set it receives; it is called with
/// zeroed gradients. Returns the largest `|a - n| / max(|a|, |n|, 1e-8)` over
/// the probed coordinates. Parameter values are restored bitwise and the
/// gradient buffers are left holding the analytic gradient.
pub fn grad_check<F>(
    params: &mut ParamSet,
    mut loss_and_grad: F,
    cfg: &GradCheckConfig,
) -> Result<f64, NnError>
where
    F: FnMut(&mut ParamSet) -> Result<f64, NnError>,
{
    params.zero_grads();
    let base = loss_and_grad(params)?;
    if !base.is_finite() {
        return Err(NnError::NonFinite("loss"));
    }
    let analytic = params.clone();
    let mut rng = SeededRng::seed_from_u64(cfg.seed);
    let names: Vec<String> = params.names().map(str::to_string).collect();
    let mut worst = 0.0f64;

    for name in &names {
        let len = params.value(name)?.len();
        let coords: Vec<usize> = match cfg.coords_per_param {
            Some(k) if k < len => sample(&mut rng, len, k).into_vec(),
            _ => (0..len).collect(),
        };
        for c in coords {
            let original = params.value(name)?.data()[c];
            params.value_mut(name)?.data_mut()[c] = original + cfg.eps;
            params.zero_grads();
            let plus = loss_and_grad(params)?;
            params.value_mut(name)?.data_mut()[c] = original - cfg.eps;
            params.zero_grads();
            let minus = loss_and_grad(params)?;
            params.value_mut(name)?.data_mut()[c] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(NnError::NonFinite("loss"));
            }
            let numeric = (plus - minus) / (2.0 * cfg.eps);
            let a = analytic.grad(name)?.data()[c];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }

    params.zero_grads();
    for (name, _, grad) in params.pairs_mut() {
        grad.data_mut()
            .copy_from_slice(analytic.grad(name).expect("same names").data());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{linalg, softmax_xent, Tensor};
    use rand::Rng;

    /// logits = x · W + b over 3 classes.
    fn linear_softmax(params: &mut ParamSet, x: &[f64], gold: usize) -> Result<f64, NnError> {
        let (values, grads) = params.split_mut();
        let w = values["w"].data();
        let mut logits = values["b"].data().to_vec();
        linalg::vec_mat_acc(x, w, 3, &mut logits);
        let out = softmax_xent(&logits, gold)?;
        linalg::outer_acc(x, &out.dlogits, grads.get_mut("w").unwrap().data_mut());
        linalg::add_assign(grads.get_mut("b").unwrap().data_mut(), &out.dlogits);
        Ok(out.loss)
    }

    #[test]
    fn linear_softmax_matches_differences() {
        let mut rng = SeededRng::seed_from_u64(1);
        let mut p = ParamSet::new();
        p.insert("w", Tensor::uniform(&[5, 3], 0.5, &mut rng)).unwrap();
        p.insert("b", Tensor::uniform(&[3], 0.5, &mut rng)).unwrap();
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let before = p.values().clone();
        let cfg = GradCheckConfig {
            coords_per_param: None,
            ..Default::default()
        };
        let err = grad_check(&mut p, |ps| linear_softmax(ps, &x, 1), &cfg).unwrap();
        assert!(err < 1e-6, "{err}");
        assert_eq!(p.values(), &before);
    }

    #[test]
    fn flat_direction_has_zero_error() {
        // With a zero input every weight is a flat direction: both gradients are exactly 0.
        let mut p = ParamSet::new();
        p.insert("w", Tensor::zeros(&[4, 3])).unwrap();
        let x = vec![0.0; 4];
        let loss = |ps: &mut ParamSet| -> Result<f64, NnError> {
            let (values, grads) = ps.split_mut();
            let mut logits = vec![0.0; 3];
            linalg::vec_mat_acc(&x, values["w"].data(), 3, &mut logits);
            let out = softmax_xent(&logits, 0)?;
            linalg::outer_acc(&x, &out.dlogits, grads.get_mut("w").unwrap().data_mut());
            Ok(out.loss)
        };
        let cfg = GradCheckConfig {
            coords_per_param: None,
            ..Default::default()
        };
        assert_eq!(grad_check(&mut p, loss, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::zeros(&[1])).unwrap();
        let r = grad_check(&mut p, |_| Ok(f64::NAN), &GradCheckConfig::default());
        assert!(matches!(r, Err(NnError::NonFinite(_))));
    }
}
