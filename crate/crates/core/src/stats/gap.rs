use serde::Serialize;

use crate::error::{invalid, Result};
use crate::exec::{try_replicate, Execution};
use crate::models::LossModel;
use crate::numerics::{norm_sq, RngStream};
use crate::weights::{Estimate, WeightScheme};

/// Monte Carlo and closed-form values of
/// `E|sqrt(m)(Σ w_i ∇l_i - ∇g) - sqrt(n)(n⁻¹ Σ ∇l_i - ∇g)|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapEstimate {
    pub estimate: f64,
    pub se: f64,
    /// `2 (1 - sqrt(m/n)) Tr σ²(θ)`.
    pub analytic: f64,
}

impl GapEstimate {
    pub fn z(&self) -> f64 {
        if self.se == 0.0 {
            if self.estimate == self.analytic { 0.0 } else { f64::INFINITY }
        } else {
            (self.estimate - self.analytic).abs() / self.se
        }
    }
}

/// The gap between the scaled M-SGD error and the scaled full-sample error.
///
/// Writing `e_i = ∇l_i - ∇g`, the difference is `Σ_i (sqrt(m) w_i - n^{-1/2}) e_i`.
/// For any weights with the minibatch mean and covariance its second moment
/// is exactly `2 (1 - sqrt(m/n)) Tr σ²(θ)` at every finite `n`.
pub fn thm1_gap(
    model: &dyn LossModel,
    scheme: &WeightScheme,
    theta: &[f64],
    reps: usize,
    stream: &RngStream,
    exec: Execution,
) -> Result<GapEstimate> {
    if reps < 1000 {
        return Err(invalid("reps", format!("need at least 1000 replications, got {reps}")));
    }
    if theta.len() != model.dim() {
        return Err(invalid("theta", "dimension does not match the model"));
    }
    let (n, m) = (scheme.n(), scheme.m());
    let p = model.dim();
    let grad_g = model.grad_objective(theta);
    let sqrt_m = (m as f64).sqrt();
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let values = try_replicate(exec, reps, |r| -> Result<f64> {
        let rep = stream.derive(r);
        let mut data = rep.derive("data");
        let mut weights = rep.derive("weights");
        let mut w = vec![0.0; n];
        scheme.sample_into(&mut weights, &mut w)?;
        let mut u = vec![0.0; model.datum_len()];
        let mut g = vec![0.0; p];
        let mut acc = vec![0.0; p];
        for &wi in &w {
            model.fill_datum(&mut data, &mut u);
            g.iter_mut().for_each(|x| *x = 0.0);
            model.add_grad_loss(theta, &u, 1.0, &mut g);
            let c = sqrt_m * wi - inv_sqrt_n;
            for ((a, gi), gg) in acc.iter_mut().zip(&g).zip(&grad_g) {
                *a += c * (gi - gg);
            }
        }
        Ok(norm_sq(&acc))
    })?;
    let est = Estimate::from_sample(&values);
    let trace = model.noise_covariance(theta).trace();
    Ok(GapEstimate {
        estimate: est.value,
        se: est.se,
        analytic: 2.0 * (1.0 - (m as f64 / n as f64).sqrt()) * trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::make_quadratic_model;
    use crate::weights::BaseDistribution;

    #[test]
    fn full_batch_gaussian_gap_is_zero_draw_by_draw() {
        let model = make_quadratic_model(2, vec![0.0, 0.0], 1.0).unwrap();
        let scheme = WeightScheme::gaussian(64, 64, BaseDistribution::StandardNormal).unwrap();
        let g = thm1_gap(&model, &scheme, &[0.1, 0.2], 1000, &RngStream::root(1), Execution::Parallel).unwrap();
        assert_eq!(g.analytic, 0.0);
        assert!(g.estimate < 1e-25, "{}", g.estimate);
    }

    #[test]
    fn small_case_within_three_se() {
        let model = make_quadratic_model(2, vec![0.0, 0.0], 1.0).unwrap();
        let scheme = WeightScheme::minibatch(400, 100).unwrap();
        let g = thm1_gap(&model, &scheme, &[0.0, 0.0], 4000, &RngStream::root(2), Execution::Parallel).unwrap();
        assert!((g.analytic - 2.0).abs() < 1e-15);
        assert!(g.z() <= 3.0, "{g:?}");
    }
}
