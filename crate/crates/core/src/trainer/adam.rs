//! Adam with bias correction over flat parameter vectors.

use crate::params::{ParamGrads, PARAM_COUNT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl AdamMoments {
    pub fn new(len: usize) -> Self {
        AdamMoments {
            first: vec![0.0; len],
            second: vec![0.0; len],
        }
    }

    pub fn for_params() -> Self {
        Self::new(PARAM_COUNT)
    }
}

/// One Adam update. `step` is the 1-based iteration index used for bias correction.
pub fn adam_step(
    params: &mut [f64],
    grad: &[f64],
    moments: &mut AdamMoments,
    config: &AdamConfig,
    step: u64,
) {
    assert!(step >= 1, "Adam steps are 1-based");
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), moments.first.len());
    let t = step as i32;
    let correction1 = 1.0 - config.beta1.powi(t);
    let correction2 = 1.0 - config.beta2.powi(t);
    for (((w, &g), m), v) in params
        .iter_mut()
        .zip(grad)
        .zip(moments.first.iter_mut())
        .zip(moments.second.iter_mut())
    {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *w -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
}

/// Adam over network weights; the diagonal taps are re-clamped afterwards.
pub fn adam_step_params(
    params: &mut ParamGrads,
    grad: &ParamGrads,
    moments: &mut AdamMoments,
    config: &AdamConfig,
    step: u64,
) {
    let mut flat = params.to_flat();
    adam_step(&mut flat, &grad.to_flat(), moments, config, step);
    *params = ParamGrads::from_flat(&flat).expect("flat length is preserved");
    params.zero_corners();
}
