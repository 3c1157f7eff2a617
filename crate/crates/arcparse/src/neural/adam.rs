//! Adam with the default settings (alpha 0.001, beta1 0.9, beta2 0.999,
//! epsilon 1e-8) and bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use super::scalar::{c, Real};
use super::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            alpha: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state: first and second moment buffers shaped like the
/// parameters, plus the step counter.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub config: AdamConfig,
    pub(crate) m: ModelParams<F>,
    pub(crate) v: ModelParams<F>,
    pub t: u64,
}

impl<F: Real> Adam<F> {
    pub fn new(like: &ModelParams<F>) -> Self {
        Self::with_config(like, AdamConfig::default())
    }

    pub fn with_config(like: &ModelParams<F>, config: AdamConfig) -> Self {
        Adam {
            config,
            m: like.zeros_like(),
            v: like.zeros_like(),
            t: 0,
        }
    }

    pub(crate) fn from_parts(
        m: ModelParams<F>,
        v: ModelParams<F>,
        t: u64,
        config: AdamConfig,
    ) -> Self {
        Adam { config, m, v, t }
    }

    pub fn step(&mut self, params: &mut ModelParams<F>, grads: &ModelParams<F>) {
        self.t += 1;
        let b1 = c::<F>(self.config.beta1);
        let b2 = c::<F>(self.config.beta2);
        let one = F::one();
        let alpha = c::<F>(self.config.alpha);
        let eps = c::<F>(self.config.eps);
        let bc1 = one - c::<F>(self.config.beta1.powi(self.t as i32));
        let bc2 = one - c::<F>(self.config.beta2.powi(self.t as i32));
        let mut p_blocks = params.blocks_mut();
        let mut m_blocks = self.m.blocks_mut();
        let mut v_blocks = self.v.blocks_mut();
        let g_blocks = grads.blocks();
        for i in 0..p_blocks.len() {
            let p = p_blocks[i].1.as_slice_mut();
            let m = m_blocks[i].1.as_slice_mut();
            let v = v_blocks[i].1.as_slice_mut();
            let g = g_blocks[i].1.as_slice();
            for j in 0..p.len() {
                m[j] = b1 * m[j] + (one - b1) * g[j];
                v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= alpha * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::ModelDims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gradients_leave_parameters_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = ModelParams::<f64>::init(4, 3, 3, ModelDims::micro(), &mut rng);
        let before = params.clone();
        let zero_grads = params.zeros_like();
        let mut adam = Adam::new(&params);
        for _ in 0..5 {
            adam.step(&mut params, &zero_grads);
        }
        assert_eq!(params, before);
        // Moments stay zero for zero gradients.
        assert!(adam
            .m
            .blocks()
            .iter()
            .all(|(_, b)| b.as_slice().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn single_step_moves_against_the_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = ModelParams::<f64>::init(4, 3, 3, ModelDims::micro(), &mut rng);
        let mut grads = params.zeros_like();
        grads.trans_out.bias[0] = 2.5;
        grads.trans_out.bias[1] = -0.5;
        let before = params.trans_out.bias.clone();
        let mut adam = Adam::new(&params);
        adam.step(&mut params, &grads);
        // First step is ~alpha in the direction opposing the gradient sign.
        assert!(params.trans_out.bias[0] < before[0]);
        assert!(params.trans_out.bias[1] > before[1]);
        assert!((params.trans_out.bias[0] - (before[0] - 0.001)).abs() < 1e-6);
    }
}
