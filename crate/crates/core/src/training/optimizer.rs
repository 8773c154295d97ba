use serde::{Deserialize, Serialize};

use crate::tensor::{ParamSet, Tensor, TensorError};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-5, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam moments for one [`ParamSet`], in slot order.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let zeros = || params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        OptimizerState { config, t: 0, m: zeros(), v: zeros() }
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.v
    }

    /// One bias-corrected Adam update; `t` is incremented first.
    pub fn adam_step(&mut self, params: &mut ParamSet, grads: &[Tensor]) -> Result<(), TensorError> {
        check_shapes("adam_step", params, grads)?;
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, epsilon } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .tensors_mut()
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((theta, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *theta -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// Plain gradient descent, `θ ← θ − lr·g`.
pub fn sgd_step(params: &mut ParamSet, grads: &[Tensor], lr: f64) -> Result<(), TensorError> {
    check_shapes("sgd_step", params, grads)?;
    for (p, g) in params.tensors_mut().iter_mut().zip(grads) {
        for (theta, gi) in p.data_mut().iter_mut().zip(g.data()) {
            *theta -= lr * gi;
        }
    }
    Ok(())
}

fn check_shapes(op: &'static str, params: &ParamSet, grads: &[Tensor]) -> Result<(), TensorError> {
    if grads.len() != params.len() {
        return Err(TensorError::ShapeMismatch {
            op,
            got: vec![grads.len()],
            expected: format!("{} gradient tensors", params.len()),
        });
    }
    for (p, g) in params.tensors().iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(TensorError::ShapeMismatch {
                op,
                got: g.shape().to_vec(),
                expected: format!("{:?}", p.shape()),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params(values: &[f64]) -> ParamSet {
        let mut p = ParamSet::new();
        for (i, &v) in values.iter().enumerate() {
            p.insert(format!("p{i}"), Tensor::scalar(v));
        }
        p
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = scalar_params(&[1.0]);
        let mut opt = OptimizerState::new(AdamConfig::default(), &p);
        opt.adam_step(&mut p, &[Tensor::scalar(0.5)]).unwrap();
        let update = 1.0 - p.tensors()[0].item();
        let expected = 1e-5 * 0.5 / (0.5 + 1e-8);
        assert!((update - expected).abs() <= 1e-7);
        assert!((p.tensors()[0].item() - 0.99999).abs() < 1e-9);
        assert_eq!(opt.t, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = scalar_params(&[1.0, -2.0]);
        let mut opt = OptimizerState::new(AdamConfig::default(), &p);
        for _ in 0..3 {
            opt.adam_step(&mut p, &[Tensor::scalar(0.0), Tensor::scalar(0.0)]).unwrap();
        }
        assert_eq!(p.tensors()[0].item(), 1.0);
        assert_eq!(p.tensors()[1].item(), -2.0);
    }

    #[test]
    fn equal_gradients_equal_updates() {
        let mut p = scalar_params(&[3.0, -1.0]);
        let mut opt = OptimizerState::new(AdamConfig { lr: 1e-2, ..AdamConfig::default() }, &p);
        opt.adam_step(&mut p, &[Tensor::scalar(0.7), Tensor::scalar(0.7)]).unwrap();
        assert_eq!(3.0 - p.tensors()[0].item(), -1.0 - p.tensors()[1].item());
    }

    #[test]
    fn doubling_gradients_barely_changes_first_step() {
        for g in [0.05, 0.5, 40.0] {
            let run = |g: f64| {
                let mut p = scalar_params(&[0.0]);
                let mut opt = OptimizerState::new(AdamConfig::default(), &p);
                opt.adam_step(&mut p, &[Tensor::scalar(g)]).unwrap();
                p.tensors()[0].item()
            };
            let (a, b) = (run(g), run(2.0 * g));
            assert!(((a - b) / a).abs() < 1e-6, "g={g}: {a} vs {b}");
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = scalar_params(&[1.0]);
        let mut opt = OptimizerState::new(AdamConfig::default(), &p);
        assert!(opt.adam_step(&mut p, &[Tensor::zeros(&[2])]).is_err());
        assert!(opt.adam_step(&mut p, &[]).is_err());
        assert_eq!(opt.t, 0);
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut p = scalar_params(&[1.0]);
        sgd_step(&mut p, &[Tensor::scalar(2.0)], 0.1).unwrap();
        assert!((p.tensors()[0].item() - 0.8).abs() < 1e-15);
    }
}
