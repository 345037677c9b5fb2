//! AMSGrad with bias correction on the first moment only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmsGradConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AmsGradConfig {
    fn default() -> Self {
        AmsGradConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AmsGradConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps >= 0.0
            && self.eps.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("bad AMSGrad hyperparameters {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    v_hat: Vec<f64>,
}

/// Optimizer state for a fixed list of parameter blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct AmsGradState {
    pub config: AmsGradConfig,
    pub step_count: u64,
    blocks: Vec<Moments>,
}

impl AmsGradState {
    pub fn new(config: AmsGradConfig, block_sizes: &[usize]) -> Self {
        AmsGradState {
            config,
            step_count: 0,
            blocks: block_sizes
                .iter()
                .map(|&n| Moments {
                    m: vec![0.0; n],
                    v: vec![0.0; n],
                    v_hat: vec![0.0; n],
                })
                .collect(),
        }
    }

    pub fn v_hat(&self, block: usize) -> &[f64] {
        &self.blocks[block].v_hat
    }

    pub fn v(&self, block: usize) -> &[f64] {
        &self.blocks[block].v
    }

    /// One update. Gradients are checked before anything changes, so a
    /// rejected step leaves parameters and state untouched.
    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = (&'static str, &'a mut [f64])>,
        grads: &[(&'static str, &[f64])],
    ) -> Result<()> {
        if grads.len() != self.blocks.len() {
            return Err(Error::Dimension {
                expected: self.blocks.len(),
                got: grads.len(),
            });
        }
        for ((name, g), st) in grads.iter().zip(&self.blocks) {
            if g.len() != st.m.len() {
                return Err(Error::Dimension {
                    expected: st.m.len(),
                    got: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { block: name });
            }
        }
        let params: Vec<(&'static str, &'a mut [f64])> = params.into_iter().collect();
        if params.len() != self.blocks.len() || params.iter().zip(&self.blocks).any(|(p, s)| p.1.len() != s.m.len()) {
            return Err(Error::InvalidInput("parameter blocks do not match optimizer state".into()));
        }

        self.step_count += 1;
        let AmsGradConfig { lr, beta1, beta2, eps } = self.config;
        let correction = 1.0 - beta1.powi(self.step_count.min(i32::MAX as u64) as i32);
        for ((_, theta), ((_, g), st)) in params.into_iter().zip(grads.iter().zip(&mut self.blocks)) {
            for i in 0..theta.len() {
                st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * g[i];
                st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * g[i] * g[i];
                st.v_hat[i] = st.v_hat[i].max(st.v[i]);
                let m_hat = st.m[i] / correction;
                if m_hat != 0.0 {
                    theta[i] -= lr * m_hat / (st.v_hat[i].sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
