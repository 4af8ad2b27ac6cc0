use crate::error::TensorError;

/// Adam hyperparameters. β/ε defaults follow common practice; the
/// learning rate must be set explicitly.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter first/second moment estimates plus a step counter.
pub struct AdamState {
    cfg: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    /// `sizes` lists the element count of each parameter tensor, in the
    /// fixed order used by every subsequent `step` call.
    pub fn new(cfg: AdamConfig, sizes: &[usize]) -> Result<Self, TensorError> {
        if !(cfg.lr >= 0.0) {
            return Err(TensorError::Config(format!(
                "learning rate must be non-negative, got {}",
                cfg.lr
            )));
        }
        Ok(AdamState {
            cfg,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            step: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update. `params[i]` and `grads[i]` must have the size
    /// declared at construction; a missing gradient means "zero".
    pub fn step(
        &mut self,
        params: &mut [&mut [f64]],
        grads: &[Option<&[f64]>],
    ) -> Result<(), TensorError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TensorError::Config(format!(
                "optimizer built for {} parameters, got {}/{}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            if p.len() != self.m[i].len() {
                return Err(TensorError::Dimension {
                    op: "adam_step",
                    detail: format!(
                        "parameter {i} has {} elements, optimizer expects {}",
                        p.len(),
                        self.m[i].len()
                    ),
                });
            }
            let Some(g) = grads[i] else { continue };
            for j in 0..p.len() {
                let gj = g[j];
                self.m[i][j] = self.cfg.beta1 * self.m[i][j] + (1.0 - self.cfg.beta1) * gj;
                self.v[i][j] = self.cfg.beta2 * self.v[i][j] + (1.0 - self.cfg.beta2) * gj * gj;
                let mhat = self.m[i][j] / bc1;
                let vhat = self.v[i][j] / bc2;
                p[j] -= self.cfg.lr * mhat / (vhat.sqrt() + self.cfg.eps);
            }
        }
        Ok(())
    }
}
