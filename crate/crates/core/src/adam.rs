//! Bias-corrected Adam over the two embedding tables.

use crate::encoder::EmbeddingState;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m_users: Matrix,
    pub v_users: Matrix,
    pub m_items: Matrix,
    pub v_items: Matrix,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(state: &EmbeddingState) -> Self {
        let (m, n, d) = (state.user_count(), state.item_count(), state.dim());
        OptimizerState {
            m_users: Matrix::zeros(m, d),
            v_users: Matrix::zeros(m, d),
            m_items: Matrix::zeros(n, d),
            v_items: Matrix::zeros(n, d),
            step: 0,
        }
    }
}

fn update(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, cfg: &AdamConfig, step: u64) {
    let c1 = 1.0 - cfg.beta1.powi(step as i32);
    let c2 = 1.0 - cfg.beta2.powi(step as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// One Adam step on both tables.
pub fn adam_step(
    state: &mut EmbeddingState,
    grad_users: &Matrix,
    grad_items: &Matrix,
    opt: &mut OptimizerState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    if grad_users.shape() != state.users.shape() || grad_items.shape() != state.items.shape() {
        return Err(Error::Shape("gradient shapes do not match the embedding tables".into()));
    }
    if opt.m_users.shape() != state.users.shape() || opt.m_items.shape() != state.items.shape() {
        return Err(Error::Shape("optimizer moments do not match the embedding tables".into()));
    }
    opt.step += 1;
    update(
        state.users.as_mut_slice(),
        grad_users.as_slice(),
        opt.m_users.as_mut_slice(),
        opt.v_users.as_mut_slice(),
        lr,
        cfg,
        opt.step,
    );
    update(
        state.items.as_mut_slice(),
        grad_items.as_slice(),
        opt.m_items.as_mut_slice(),
        opt.v_items.as_mut_slice(),
        lr,
        cfg,
        opt.step,
    );
    Ok(())
}
