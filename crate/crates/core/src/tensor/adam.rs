use serde::{Deserialize, Serialize};

use super::{Result, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for every tracked parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    state: AdamState,
}

impl Adam {
    /// Optimizer for parameters shaped like `params`, in the same order.
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Result<Self> {
        let valid = config.lr > 0.0
            && (0.0..1.0).contains(&config.beta1)
            && (0.0..1.0).contains(&config.beta2)
            && config.eps > 0.0;
        if !valid {
            return Err(TensorError::Parameter {
                op: "adam",
                detail: format!("{config:?}"),
            });
        }
        Ok(Self {
            config,
            state: AdamState {
                step: 0,
                m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
                v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            },
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }

    /// Applies one update to every trainable parameter. Frozen parameters
    /// (`requires_grad == false`) are skipped.
    pub fn step(&mut self, params: &mut [Tensor]) -> Result<()> {
        if params.len() != self.state.m.len() {
            return Err(TensorError::Contract(format!(
                "optimizer tracks {} parameters, got {}",
                self.state.m.len(),
                params.len()
            )));
        }
        for (i, p) in params.iter().enumerate() {
            if p.len() != self.state.m[i].len() {
                return Err(TensorError::Contract(format!(
                    "parameter {i} has {} values, optimizer expects {}",
                    p.len(),
                    self.state.m[i].len()
                )));
            }
            if p.requires_grad() && p.grad().is_none() {
                return Err(TensorError::Contract(format!(
                    "parameter {i} has no gradient; call zero_grad before backward"
                )));
            }
        }
        self.state.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.state.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            if !p.requires_grad() {
                continue;
            }
            let g = p.grad.take().expect("checked above");
            let (m, v) = (&mut self.state.m[i], &mut self.state.v[i]);
            for (j, w) in p.data.iter_mut().enumerate() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.grad = Some(g);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(v: &[f64]) -> Tensor {
        let mut t = Tensor::vector(v.to_vec()).with_requires_grad(true);
        t.zero_grad();
        t
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut ps = vec![param(&[1.0, -2.0])];
        let mut opt = Adam::new(AdamConfig::default(), &ps).unwrap();
        opt.step(&mut ps).unwrap();
        assert_eq!(ps[0].data(), &[1.0, -2.0]);
        assert_eq!(opt.state().step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut ps = vec![param(&[0.0])];
        ps[0].accumulate_grad(&[1.0]).unwrap();
        let mut opt = Adam::new(AdamConfig::default(), &ps).unwrap();
        opt.step(&mut ps).unwrap();
        // m̂ = v̂ = 1 at t = 1, so Δ = -lr / (1 + eps).
        let expected = -5e-4 / (1.0 + 1e-8);
        assert!((ps[0].data()[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut ps = vec![param(&[0.0])];
        let cfg = AdamConfig {
            lr: 0.05,
            ..AdamConfig::default()
        };
        let mut opt = Adam::new(cfg, &ps).unwrap();
        for _ in 0..200 {
            let w = ps[0].data()[0];
            ps[0].zero_grad();
            ps[0].accumulate_grad(&[2.0 * (w - 3.0)]).unwrap();
            opt.step(&mut ps).unwrap();
        }
        assert!((ps[0].data()[0] - 3.0).abs() < 0.5);
        assert_eq!(opt.state().step, 200);
    }

    #[test]
    fn missing_gradient_is_a_contract_error() {
        let mut ps = vec![Tensor::vector(vec![1.0]).with_requires_grad(true)];
        let mut opt = Adam::new(AdamConfig::default(), &ps).unwrap();
        assert!(matches!(opt.step(&mut ps), Err(TensorError::Contract(_))));
        assert_eq!(opt.state().step, 0);
    }

    #[test]
    fn frozen_parameters_are_skipped() {
        let mut ps = vec![param(&[1.0]), Tensor::vector(vec![5.0])];
        ps[0].accumulate_grad(&[1.0]).unwrap();
        let mut opt = Adam::new(AdamConfig::default(), &ps).unwrap();
        opt.step(&mut ps).unwrap();
        assert_eq!(ps[1].data(), &[5.0]);
        assert!(ps[0].data()[0] < 1.0);
    }
}
