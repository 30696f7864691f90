use crate::error::{invalid, Result};
use crate::numerics::{DenseMatrix, RngStream};

use super::{LossModel, ModelConstants};

/// Pure-noise model: `∇l(θ, u) = u` with `u ~ Unif(-1, 1)^p`, so `∇g ≡ 0`
/// and `σ² = I/3`. Used for the CLT experiments.
#[derive(Clone, Debug)]
pub struct UniformCltModel {
    p: usize,
}

pub fn make_uniform_clt_model(p: usize) -> Result<UniformCltModel> {
    if p == 0 {
        return Err(invalid("p", "dimension must be positive"));
    }
    Ok(UniformCltModel { p })
}

impl LossModel for UniformCltModel {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn dim(&self) -> usize {
        self.p
    }

    fn noise_dim(&self) -> usize {
        self.p
    }

    fn datum_len(&self) -> usize {
        self.p
    }

    // l(θ, u) = θ·u, whose mean over Q is identically zero
    fn objective(&self, _theta: &[f64]) -> f64 {
        0.0
    }

    fn grad_objective(&self, _theta: &[f64]) -> Vec<f64> {
        vec![0.0; self.p]
    }

    fn fill_datum(&self, stream: &mut RngStream, out: &mut [f64]) {
        for u in out {
            *u = 2.0 * stream.uniform() - 1.0;
        }
    }

    fn add_grad_loss(&self, _theta: &[f64], datum: &[f64], scale: f64, out: &mut [f64]) {
        for (o, u) in out.iter_mut().zip(datum) {
            *o += scale * u;
        }
    }

    fn noise_factor(&self, _theta: &[f64]) -> DenseMatrix {
        DenseMatrix::scaled_identity(self.p, (1.0f64 / 3.0).sqrt())
    }

    fn constants(&self) -> ModelConstants {
        ModelConstants {
            lipschitz: 0.0,
            noise_lipschitz: 0.0,
            strong_convexity: None,
            h1_sq_mean: Some(0.0),
        }
    }
}
