use crate::error::{invalid, Result};
use crate::numerics::{dist_sq, DenseMatrix, RngStream};

use super::{LossModel, ModelConstants};

/// `l(θ, u) = ½|θ - u|²` with `u ~ N(θ*, s² I)`.
///
/// `g(θ) = ½|θ - θ*|² + p s²/2`, `σ = s I`, `L = λ = 1`, `L₁ = 0`.
#[derive(Clone, Debug)]
pub struct QuadraticModel {
    theta_star: Vec<f64>,
    s: f64,
}

/// `s = 0` is accepted and gives a noiseless model.
pub fn make_quadratic_model(p: usize, theta_star: Vec<f64>, s: f64) -> Result<QuadraticModel> {
    if p == 0 {
        return Err(invalid("p", "dimension must be positive"));
    }
    if theta_star.len() != p {
        return Err(invalid("theta_star", format!("expected length {p}, got {}", theta_star.len())));
    }
    if !(s >= 0.0) || !s.is_finite() {
        return Err(invalid("s", format!("noise scale must be finite and nonnegative, got {s}")));
    }
    Ok(QuadraticModel { theta_star, s })
}

impl QuadraticModel {
    pub fn noise_scale(&self) -> f64 {
        self.s
    }
}

impl LossModel for QuadraticModel {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.theta_star.len()
    }

    fn noise_dim(&self) -> usize {
        self.theta_star.len()
    }

    fn datum_len(&self) -> usize {
        self.theta_star.len()
    }

    fn objective(&self, theta: &[f64]) -> f64 {
        0.5 * dist_sq(theta, &self.theta_star) + 0.5 * self.dim() as f64 * self.s * self.s
    }

    fn grad_objective(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.theta_star).map(|(t, s)| t - s).collect()
    }

    fn fill_datum(&self, stream: &mut RngStream, out: &mut [f64]) {
        for (u, c) in out.iter_mut().zip(&self.theta_star) {
            *u = c + self.s * stream.std_normal();
        }
    }

    fn add_grad_loss(&self, theta: &[f64], datum: &[f64], scale: f64, out: &mut [f64]) {
        for ((o, t), u) in out.iter_mut().zip(theta).zip(datum) {
            *o += scale * (t - u);
        }
    }

    fn noise_factor(&self, _theta: &[f64]) -> DenseMatrix {
        DenseMatrix::scaled_identity(self.dim(), self.s)
    }

    fn add_noise(&self, _theta: &[f64], xi: &[f64], scale: f64, out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(xi) {
            *o += scale * self.s * x;
        }
    }

    fn constants(&self) -> ModelConstants {
        ModelConstants {
            lipschitz: 1.0,
            noise_lipschitz: 0.0,
            strong_convexity: Some(1.0),
            h1_sq_mean: Some(1.0),
        }
    }

    fn minimizer(&self) -> Option<Vec<f64>> {
        Some(self.theta_star.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_vanishes_at_minimizer() {
        let m = make_quadratic_model(3, vec![1.0, -2.0, 0.5], 1.0).unwrap();
        assert_eq!(m.grad_objective(&[1.0, -2.0, 0.5]), vec![0.0; 3]);
    }

    #[test]
    fn trace_of_noise_is_p_s_squared() {
        let m = make_quadratic_model(4, vec![0.0; 4], 1.5).unwrap();
        for theta in [[0.0; 4], [1.0, 2.0, 3.0, 4.0]] {
            assert!((m.noise_covariance(&theta).trace() - 4.0 * 2.25).abs() < 1e-12);
        }
    }

    #[test]
    fn grad_loss_mean_is_minus_e1() {
        let m = make_quadratic_model(2, vec![1.0, 0.0], 1.0).unwrap();
        let mut s = RngStream::root(1);
        let mut acc = vec![0.0; 2];
        let mut u = vec![0.0; 2];
        let reps = 100_000;
        for _ in 0..reps {
            m.fill_datum(&mut s, &mut u);
            m.add_grad_loss(&[0.0, 0.0], &u, 1.0 / reps as f64, &mut acc);
        }
        assert!((acc[0] + 1.0).abs() < 0.02 && acc[1].abs() < 0.02, "{acc:?}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_quadratic_model(2, vec![0.0], 1.0).is_err());
        assert!(make_quadratic_model(1, vec![0.0], -1.0).is_err());
        assert!(make_quadratic_model(0, vec![], 1.0).is_err());
    }
}
