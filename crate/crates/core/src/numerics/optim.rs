use super::{NumericsError, Tensor};

/// Adagrad with per-coordinate accumulated squared gradients.
///
/// Accumulators are monotonically non-decreasing, so per-coordinate step
/// sizes never grow for a constant gradient.
#[derive(Debug, Clone)]
pub struct AdagradState {
    learning_rate: f64,
    epsilon: f64,
    accumulators: Vec<Tensor>,
}

impl AdagradState {
    pub const DEFAULT_EPSILON: f64 = 1e-10;

    pub fn new(learning_rate: f64, epsilon: f64, param_shapes: &[Vec<usize>]) -> Self {
        assert!(learning_rate > 0.0, "learning rate must be positive");
        assert!(epsilon >= 0.0, "epsilon must be non-negative");
        AdagradState {
            learning_rate,
            epsilon,
            accumulators: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    pub fn for_params(learning_rate: f64, params: &[&Tensor]) -> Self {
        let shapes: Vec<Vec<usize>> = params.iter().map(|t| t.shape().to_vec()).collect();
        Self::new(learning_rate, Self::DEFAULT_EPSILON, &shapes)
    }

    pub fn accumulators(&self) -> &[Tensor] {
        &self.accumulators
    }

    /// One update: accumulator += g²; param −= lr · g / (√accumulator + ε).
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[Tensor],
    ) -> Result<(), NumericsError> {
        if params.len() != self.accumulators.len() || grads.len() != params.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "adagrad_step",
                lhs: vec![params.len()],
                rhs: vec![grads.len()],
            });
        }
        for ((param, grad), acc) in params.iter_mut().zip(grads).zip(&mut self.accumulators) {
            if param.shape() != grad.shape() || param.shape() != acc.shape() {
                return Err(NumericsError::ShapeMismatch {
                    op: "adagrad_step",
                    lhs: param.shape().to_vec(),
                    rhs: grad.shape().to_vec(),
                });
            }
            for ((p, g), a) in param
                .values_mut()
                .iter_mut()
                .zip(grad.values())
                .zip(acc.values_mut())
            {
                *a += g * g;
                *p -= self.learning_rate * g / (a.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
