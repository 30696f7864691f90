//! Loss models: an objective `g`, the per-datum gradient `∇l`, a sampler for
//! the data law `Q`, and a noise factor `σ(θ)` with `σσᵀ = Var ∇l(θ, u)`.

mod logistic;
mod quadratic;
mod uniform;

pub use logistic::{generate_reference_logistic_dataset, make_logistic_model, LogisticDataset, LogisticModel};
pub use quadratic::{make_quadratic_model, QuadraticModel};
pub use uniform::{make_uniform_clt_model, UniformCltModel};

use serde::Serialize;

use crate::numerics::{DenseMatrix, RngStream};

/// Known regularity constants of a model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelConstants {
    /// Lipschitz constant of `∇g`.
    pub lipschitz: f64,
    /// Lipschitz constant of `σ` in spectral norm.
    pub noise_lipschitz: f64,
    /// Strong-convexity modulus of `g`, if any.
    pub strong_convexity: Option<f64>,
    /// `E[h₁(u)²]` for the per-datum gradient Lipschitz modulus `h₁`.
    pub h1_sq_mean: Option<f64>,
}

/// One draw from the data law, in the model's own layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Datum(pub Vec<f64>);

pub trait LossModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// Parameter dimension `p`.
    fn dim(&self) -> usize;

    /// Column count `q` of the noise factor.
    fn noise_dim(&self) -> usize;

    /// Length of a datum payload.
    fn datum_len(&self) -> usize;

    fn objective(&self, theta: &[f64]) -> f64;

    fn grad_objective(&self, theta: &[f64]) -> Vec<f64>;

    fn fill_datum(&self, stream: &mut RngStream, out: &mut [f64]);

    /// `out += scale * ∇l(θ, datum)`.
    fn add_grad_loss(&self, theta: &[f64], datum: &[f64], scale: f64, out: &mut [f64]);

    /// `σ(θ)`, a `p × q` matrix.
    fn noise_factor(&self, theta: &[f64]) -> DenseMatrix;

    fn constants(&self) -> ModelConstants;

    /// Closed-form minimiser of `g`, when known.
    fn minimizer(&self) -> Option<Vec<f64>> {
        None
    }

    /// `out += scale * σ(θ) ξ`. Models with structured `σ` override this.
    fn add_noise(&self, theta: &[f64], xi: &[f64], scale: f64, out: &mut [f64]) {
        self.noise_factor(theta).mul_vec_add(xi, scale, out);
    }

    fn sample_datum(&self, stream: &mut RngStream) -> Datum {
        let mut payload = vec![0.0; self.datum_len()];
        self.fill_datum(stream, &mut payload);
        Datum(payload)
    }

    fn grad_loss(&self, theta: &[f64], datum: &Datum) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.add_grad_loss(theta, &datum.0, 1.0, &mut g);
        g
    }

    /// `σ²(θ) = σ(θ) σ(θ)ᵀ`.
    fn noise_covariance(&self, theta: &[f64]) -> DenseMatrix {
        self.noise_factor(theta).gram()
    }
}
