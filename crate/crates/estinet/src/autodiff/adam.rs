use super::params::ParamSet;
use super::scalar::Scalar;
use super::AdError;

/// Per-parameter Adam accumulators plus the shared hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new<F: Scalar>(params: &ParamSet<F>, learning_rate: f64) -> Self {
        AdamState {
            first_moment: params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect(),
            second_moment: params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect(),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update from the gradients currently held by `params`.
    /// Moments are kept in f64 so the update is insensitive to the training
    /// precision. Errors out on non-finite gradients (divergence).
    pub fn step<F: Scalar>(&mut self, params: &mut ParamSet<F>) -> Result<(), AdError> {
        if params.frozen() {
            return Ok(());
        }
        if params.len() != self.first_moment.len() {
            return Err(AdError::BadShape(
                "optimizer state does not match parameter set".into(),
            ));
        }
        self.step += 1;
        let t = self.step as f64;
        let bias1 = 1.0 - self.beta1.powf(t);
        let bias2 = 1.0 - self.beta2.powf(t);
        for i in 0..params.len() {
            let tensor = params.tensor_mut(i);
            let Some(grad) = tensor.grad.as_ref() else {
                continue;
            };
            if grad.len() != self.first_moment[i].len() {
                return Err(AdError::BadShape(format!(
                    "gradient shape for parameter {i} changed"
                )));
            }
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            for (j, val) in tensor.values.iter_mut().enumerate() {
                let g = grad[j].to_f64();
                if !g.is_finite() {
                    return Err(AdError::NonFinite(format!("gradient of parameter {i}")));
                }
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                let delta = self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                *val = F::from_f64(val.to_f64() - delta);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::tensor::Tensor;

    fn single_param(v: f64) -> ParamSet<f64> {
        let mut ps = ParamSet::new();
        ps.register("w", Tensor::new(vec![1], vec![v]).unwrap());
        ps
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut ps = single_param(1.5);
        ps.tensor_mut(0).zero_grad();
        let mut adam = AdamState::new(&ps, 0.001);
        adam.step(&mut ps).unwrap();
        assert_eq!(ps.tensor(0).values[0], 1.5);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_lr() {
        // m = 0.1, v = 0.001, m_hat = 1, v_hat = 1 -> delta = lr / (1 + eps).
        let mut ps = single_param(0.0);
        ps.tensor_mut(0).zero_grad();
        ps.tensor_mut(0).grad.as_mut().unwrap()[0] = 1.0;
        let mut adam = AdamState::new(&ps, 0.001);
        adam.step(&mut ps).unwrap();
        let delta = ps.tensor(0).values[0];
        assert!((delta + 0.001).abs() < 1e-9, "delta = {delta}");
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let mut ps = single_param(0.0);
        ps.tensor_mut(0).zero_grad();
        ps.tensor_mut(0).grad.as_mut().unwrap()[0] = f64::NAN;
        let mut adam = AdamState::new(&ps, 0.001);
        assert!(adam.step(&mut ps).is_err());
    }

    #[test]
    fn step_counter_strictly_increases() {
        let mut ps = single_param(0.0);
        ps.tensor_mut(0).zero_grad();
        let mut adam = AdamState::new(&ps, 0.001);
        for expected in 1..=5 {
            adam.step(&mut ps).unwrap();
            assert_eq!(adam.step_count(), expected);
        }
    }
}
