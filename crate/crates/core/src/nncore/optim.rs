use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{NnError, ParamSet, Tensor};

pub const RMSPROP_DECAY: f64 = 0.9;
pub const RMSPROP_EPSILON: f64 = 1e-8;

/// RMSProp with one squared-gradient accumulator per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    accumulators: BTreeMap<String, Tensor>,
}

impl RmsProp {
    pub fn new(params: &ParamSet, learning_rate: f64, decay: f64, epsilon: f64) -> Result<Self, NnError> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(NnError::Optimizer(format!("decay must be in (0, 1), got {decay}")));
        }
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(NnError::Optimizer(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(NnError::Optimizer(format!("epsilon must be positive, got {epsilon}")));
        }
        let accumulators = params
            .values()
            .iter()
            .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
            .collect();
        Ok(RmsProp {
            learning_rate,
            decay,
            epsilon,
            accumulators,
        })
    }

    pub fn with_defaults(params: &ParamSet, learning_rate: f64) -> Result<Self, NnError> {
        Self::new(params, learning_rate, RMSPROP_DECAY, RMSPROP_EPSILON)
    }

    pub fn accumulator(&self, name: &str) -> Option<&Tensor> {
        self.accumulators.get(name)
    }

    /// One update from the gradients held in `params`, which are zeroed afterwards.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<(), NnError> {
        for (name, grad) in params.grads() {
            let acc = self
                .accumulators
                .get(name)
                .ok_or_else(|| NnError::UnknownParam(name.clone()))?;
            if acc.shape() != grad.shape() {
                return Err(NnError::ShapeMismatch {
                    name: name.clone(),
                    expected: acc.shape().to_vec(),
                    found: grad.shape().to_vec(),
                });
            }
        }
        let (lr, rho, eps) = (self.learning_rate, self.decay, self.epsilon);
        for (name, value, grad) in params.pairs_mut() {
            let acc = self.accumulators.get_mut(name).expect("checked above");
            for ((a, g), theta) in acc
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(value.data_mut())
            {
                *a = rho * *a + (1.0 - rho) * g * g;
                *theta -= lr * g / (a.sqrt() + eps);
            }
            grad.fill(0.0);
        }
        Ok(())
    }
}
