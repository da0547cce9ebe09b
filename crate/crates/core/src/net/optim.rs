use super::{Gradients, NetworkParams, TrainConfig};
use crate::{Error, Result};

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Gradients,
    pub v: Gradients,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> AdamState {
        AdamState { step: 0, m: Gradients::zeros_like(params), v: Gradients::zeros_like(params) }
    }
}

/// Bias-corrected Adam on one buffer at step `t` (1-based).
#[allow(clippy::too_many_arguments)]
pub fn adam_update(w: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &TrainConfig) {
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..w.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        w[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

pub fn adam_step(
    params: &mut NetworkParams,
    grads: &Gradients,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    let layers = params.layers_mut();
    let shapes_match = layers.len() == grads.layers.len()
        && layers.len() == state.m.layers.len()
        && layers.iter().zip(&grads.layers).zip(&state.m.layers).all(|((l, g), m)| {
            l.weights.len() == g.0.len()
                && l.bias.len() == g.1.len()
                && m.0.len() == g.0.len()
                && m.1.len() == g.1.len()
        });
    if !shapes_match {
        return Err(Error::invalid("gradient or optimizer state shape does not match parameters"));
    }
    state.step += 1;
    let t = state.step;
    for (i, l) in layers.iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[i];
        let (mw, mb) = &mut state.m.layers[i];
        let (vw, vb) = &mut state.v.layers[i];
        adam_update(&mut l.weights, gw, mw, vw, t, cfg);
        adam_update(&mut l.bias, gb, mb, vb, t, cfg);
    }
    Ok(())
}
