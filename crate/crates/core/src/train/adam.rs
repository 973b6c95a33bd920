use crate::operator::OperatorModel;

use super::Gradients;

/// First/second moment estimates for Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }

    pub fn for_model(model: &OperatorModel) -> Self {
        Self::new(model.num_params())
    }

    /// One elementwise update of `params` in place.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed under the optimizer");
        assert_eq!(grads.len(), self.m.len(), "gradient does not match optimizer state");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

pub fn adam_step(model: &mut OperatorModel, grads: &Gradients, state: &mut AdamState, lr: f64) {
    state.update(model.params_mut(), &grads.values, lr);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0, -2.0, 3.5];
        let mut s = AdamState::new(3);
        for _ in 0..5 {
            s.update(&mut p, &[0.0; 3], 0.1);
        }
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [0.3, -4.0, 1e-3] {
            let mut p = vec![0.0];
            AdamState::new(1).update(&mut p, &[g], 0.01);
            let expect = -0.01 * g.signum() / (1.0 + 1e-8 / g.abs());
            assert!((p[0] - expect).abs() < 1e-15, "{} vs {expect}", p[0]);
        }
    }

    #[test]
    fn minimizes_scalar_quadratic() {
        let mut theta = vec![0.0];
        let mut s = AdamState::new(1);
        for _ in 0..100 {
            let g = theta[0] - 3.0;
            s.update(&mut theta, &[g], 0.1);
        }
        assert!((theta[0] - 3.0).abs() < 0.1, "theta = {}", theta[0]);
    }
}
