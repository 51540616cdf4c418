use serde::{Deserialize, Serialize};

use super::weights::{Gradients, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Step count plus first and second moment estimates, shaped like the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Gradients,
    pub v: Gradients,
}

impl AdamState {
    pub fn new(w: &Weights) -> Self {
        Self { step: 0, m: w.zeros_like(), v: w.zeros_like() }
    }
}

/// Bias-corrected Adam update, in place.
pub fn adam_update(w: &mut Weights, g: &Gradients, state: &mut AdamState, cfg: &AdamConfig) {
    state.step += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.step as i32);
    let params = w.named_mut();
    let grads = g.named();
    let ms = state.m.named_mut();
    let vs = state.v.named_mut();
    for (((p, gr), m), v) in params.into_iter().zip(grads).zip(ms).zip(vs) {
        debug_assert_eq!(p.0, gr.0);
        for i in 0..p.1.data.len() {
            let gi = gr.1.data[i];
            let mi = cfg.beta1 * m.1.data[i] + (1.0 - cfg.beta1) * gi;
            let vi = cfg.beta2 * v.1.data[i] + (1.0 - cfg.beta2) * gi * gi;
            m.1.data[i] = mi;
            v.1.data[i] = vi;
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            p.1.data[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

/// Value-returning form of [`adam_update`].
pub fn adam_step(
    w: &Weights,
    g: &Gradients,
    state: &AdamState,
    cfg: &AdamConfig,
) -> (Weights, AdamState) {
    let mut w = w.clone();
    let mut state = state.clone();
    adam_update(&mut w, g, &mut state, cfg);
    (w, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_weights, ModelConfig};

    fn filled_grads(w: &Weights) -> Gradients {
        let mut g = w.zeros_like();
        for (k, (_, t)) in g.named_mut().into_iter().enumerate() {
            for (i, v) in t.data.iter_mut().enumerate() {
                let sign = if (i + k) % 3 == 0 { -1.0 } else { 1.0 };
                *v = sign * (0.01 + ((i * 7 + k) % 13) as f64);
            }
        }
        g
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let w = init_weights(&ModelConfig::default(), 1).unwrap();
        let g = filled_grads(&w);
        let cfg = AdamConfig::default();
        let (w1, st) = adam_step(&w, &g, &AdamState::new(&w), &cfg);
        assert_eq!(st.step, 1);
        for ((a, b), gr) in w.named().iter().zip(w1.named()).zip(g.named()) {
            for i in 0..a.1.data.len() {
                let delta = b.1.data[i] - a.1.data[i];
                let expected = -cfg.lr * gr.1.data[i].signum();
                assert!((delta - expected).abs() < 1e-6 * cfg.lr.max(1.0));
            }
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let w = init_weights(&ModelConfig::default(), 2).unwrap();
        let (w1, _) = adam_step(&w, &w.zeros_like(), &AdamState::new(&w), &AdamConfig::default());
        assert_eq!(w1, w);
    }

    #[test]
    fn deterministic() {
        let w = init_weights(&ModelConfig::default(), 3).unwrap();
        let g = filled_grads(&w);
        let s = AdamState::new(&w);
        let cfg = AdamConfig::default();
        assert_eq!(adam_step(&w, &g, &s, &cfg), adam_step(&w, &g, &s, &cfg));
    }
}
