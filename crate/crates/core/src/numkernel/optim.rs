//! Adam optimizer over flat parameter slices, plus the cosine-annealing
//! learning-rate schedule used by every training stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam moment estimates for one parameter group. Moments start at zero and
/// `step_count` counts completed updates for bias correction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    /// Standard defaults: beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    pub fn new(len: usize) -> Self {
        Self::with_constants(len, 0.9, 0.999, 1e-8)
    }

    pub fn with_constants(len: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// One Adam update with bias correction. A non-finite gradient rejects
    /// the step: parameters and moments are left untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam_step: {} params, {} grads, state of {}",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
            log::warn!(
                "adam_step rejected: non-finite gradient at index {bad} (step {})",
                self.step_count
            );
            return Err(Error::NonFinite("adam_step gradient"));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            let m = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Cosine annealing: `base_lr * (1 + cos(pi * epoch / total_epochs)) / 2`.
pub fn cosine_annealing_lr(base_lr: f64, epoch: usize, total_epochs: usize) -> Result<f64> {
    if total_epochs == 0 {
        return Err(Error::InvalidArgument(
            "cosine_annealing_lr: total_epochs = 0".into(),
        ));
    }
    if epoch > total_epochs {
        return Err(Error::InvalidArgument(format!(
            "cosine_annealing_lr: epoch {epoch} > total {total_epochs}"
        )));
    }
    let phase = std::f64::consts::PI * epoch as f64 / total_epochs as f64;
    Ok(base_lr * (1.0 + phase.cos()) / 2.0)
}
