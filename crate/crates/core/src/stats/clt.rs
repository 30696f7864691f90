use serde::Serialize;

use crate::error::{invalid, Result};
use crate::exec::{try_replicate, Execution};
use crate::models::LossModel;
use crate::numerics::{DenseMatrix, RngStream};
use crate::weights::{Estimate, WeightScheme};

/// `reps × p` draws of `sqrt(m) Σ_i w_i (∇l(θ, u_i) - ∇g(θ))`.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorSampleSet {
    pub samples: DenseMatrix,
    pub theta: Vec<f64>,
    pub scheme: WeightScheme,
}

impl ErrorSampleSet {
    pub fn reps(&self) -> usize {
        self.samples.rows()
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        (0..self.samples.rows()).map(|r| self.samples.get(r, j)).collect()
    }

    pub fn coordinate_mean(&self, j: usize) -> Estimate {
        Estimate::from_sample(&self.coordinate(j))
    }
}

/// Each row uses fresh data (`stream.derive(r).derive("data")`) and a fresh
/// weight vector (`stream.derive(r).derive("weights")`).
pub fn clt_error_samples(
    model: &dyn LossModel,
    scheme: &WeightScheme,
    theta: &[f64],
    reps: usize,
    stream: &RngStream,
    exec: Execution,
) -> Result<ErrorSampleSet> {
    if reps < 100 {
        return Err(invalid("reps", format!("need at least 100 samples, got {reps}")));
    }
    if theta.len() != model.dim() {
        return Err(invalid("theta", "dimension does not match the model"));
    }
    let p = model.dim();
    let grad_g = model.grad_objective(theta);
    let sqrt_m = (scheme.m() as f64).sqrt();
    let rows = try_replicate(exec, reps, |r| -> Result<Vec<f64>> {
        let rep = stream.derive(r);
        let mut data = rep.derive("data");
        let mut weights = rep.derive("weights");
        let mut w = vec![0.0; scheme.n()];
        scheme.sample_into(&mut weights, &mut w)?;
        let mut u = vec![0.0; model.datum_len()];
        let mut g = vec![0.0; p];
        let mut acc = vec![0.0; p];
        for &wi in &w {
            model.fill_datum(&mut data, &mut u);
            if wi == 0.0 {
                continue;
            }
            g.iter_mut().for_each(|x| *x = 0.0);
            model.add_grad_loss(theta, &u, 1.0, &mut g);
            for ((a, gi), gg) in acc.iter_mut().zip(&g).zip(&grad_g) {
                *a += wi * (gi - gg);
            }
        }
        Ok(acc.into_iter().map(|a| sqrt_m * a).collect())
    })?;
    let entries: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(ErrorSampleSet {
        samples: DenseMatrix::from_row_major(reps, p, entries)?,
        theta: theta.to_vec(),
        scheme: *scheme,
    })
}

/// Unbiased sample covariance of the rows together with entrywise standard
/// errors, `sd((x_a - x̄_a)(x_b - x̄_b)) / sqrt(N)`.
pub fn sample_covariance(rows: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (n, p) = (rows.rows(), rows.cols());
    let nf = n as f64;
    let means: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|r| rows.get(r, j)).sum::<f64>() / nf)
        .collect();
    let mut cov = DenseMatrix::zeros(p, p);
    let mut se = DenseMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..=a {
            let prods: Vec<f64> = (0..n)
                .map(|r| (rows.get(r, a) - means[a]) * (rows.get(r, b) - means[b]))
                .collect();
            let est = Estimate::from_sample(&prods);
            let c = est.value * nf / (nf - 1.0);
            cov.set(a, b, c);
            cov.set(b, a, c);
            se.set(a, b, est.se);
            se.set(b, a, est.se);
        }
    }
    (cov, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_quadratic_model, make_uniform_clt_model};
    use crate::weights::BaseDistribution;

    #[test]
    fn full_batch_is_ordinary_clt() {
        let model = make_uniform_clt_model(1).unwrap();
        let n = 50;
        let scheme = WeightScheme::gaussian(n, n, BaseDistribution::StandardNormal).unwrap();
        let stream = RngStream::root(1);
        let set = clt_error_samples(&model, &scheme, &[0.0], 200, &stream, Execution::Sequential).unwrap();
        // every row equals sqrt(n) * mean of the n uniforms
        let mut data = stream.derive(0u64).derive("data");
        let mean = (0..n).map(|_| model.sample_datum(&mut data).0[0]).sum::<f64>() / n as f64;
        assert!((set.samples.get(0, 0) - (n as f64).sqrt() * mean).abs() < 1e-12);
    }

    #[test]
    fn variance_matches_sigma_squared() {
        let model = make_quadratic_model(2, vec![0.0, 0.0], 1.0).unwrap();
        let scheme = WeightScheme::dirichlet(400, 40).unwrap();
        let set = clt_error_samples(&model, &scheme, &[0.3, -0.2], 4000, &RngStream::root(2), Execution::Parallel)
            .unwrap();
        let (cov, se) = sample_covariance(&set.samples);
        let target = model.noise_covariance(&[0.3, -0.2]);
        for a in 0..2 {
            assert!(set.coordinate_mean(a).within(0.0, 4.0));
            for b in 0..2 {
                assert!((cov.get(a, b) - target.get(a, b)).abs() <= 4.0 * se.get(a, b));
            }
        }
    }

    #[test]
    fn rejects_small_reps() {
        let model = make_uniform_clt_model(1).unwrap();
        let scheme = WeightScheme::minibatch(10, 2).unwrap();
        assert!(clt_error_samples(&model, &scheme, &[0.0], 99, &RngStream::root(0), Execution::Sequential).is_err());
    }
}
