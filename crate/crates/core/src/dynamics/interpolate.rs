use crate::error::{invalid, Error, Result};
use crate::models::LossModel;
use crate::numerics::RngStream;

use super::{ProcessKind, Trajectory};

/// Locates `t` on the step grid: returns `(k, t - kγ)` with `k < K`, or
/// `(K, 0)` at the horizon.
fn locate(traj: &Trajectory, t: f64) -> Result<(usize, f64)> {
    let horizon = traj.horizon();
    if !(t >= 0.0 && t <= horizon) {
        return Err(Error::OutOfRange { t, horizon });
    }
    let steps = traj.len() - 1;
    let k = ((t / traj.dt()).floor() as usize).min(steps);
    let offset = t - k as f64 * traj.dt();
    if k == steps || offset <= 0.0 {
        return Ok((k, 0.0));
    }
    Ok((k, offset))
}

/// Continuous M-SGD interpolant
/// `Y_t = Y_{kγ} - (t - kγ) Σ_i w_{i,k} ∇l(Y_{kγ}, u_{i,k})`.
pub fn interpolate_msgd(traj: &Trajectory, t: f64) -> Result<Vec<f64>> {
    if traj.kind() != ProcessKind::Msgd {
        return Err(invalid("trajectory", "expected an M-SGD trajectory"));
    }
    let (k, s) = locate(traj, t)?;
    if s == 0.0 {
        return Ok(traj.state(k).to_vec());
    }
    Ok(traj
        .state(k)
        .iter()
        .zip(&traj.drifts()[k])
        .map(|(y, d)| y - s * d)
        .collect())
}

/// Continuous Gaussian-SGD interpolant
/// `D_t = D_{kγ} - (t - kγ) ∇g(D_{kγ}) + sqrt(γ/m) σ(D_{kγ}) (B_t - B_{kγ})`.
///
/// Inside a step the Brownian value is drawn from the bridge pinned to the
/// increment the discrete run actually used; `stream` supplies the bridge
/// randomness.
pub fn interpolate_gaussian_piece(
    model: &dyn LossModel,
    traj: &Trajectory,
    t: f64,
    stream: &mut RngStream,
) -> Result<Vec<f64>> {
    if traj.kind() != ProcessKind::GaussianSgd {
        return Err(invalid("trajectory", "expected a Gaussian-SGD trajectory"));
    }
    let (k, s) = locate(traj, t)?;
    if s == 0.0 {
        return Ok(traj.state(k).to_vec());
    }
    let config = traj.config().expect("discrete runs carry their config");
    let gamma = config.gamma();
    let noise = traj.noise.as_ref().expect("Gaussian-SGD runs keep their noise stream");
    let mut xi = vec![0.0; model.noise_dim()];
    noise.derive(k).fill_std_normal(&mut xi);
    let bridge_sd = (s * (gamma - s) / gamma).sqrt();
    let brownian: Vec<f64> = xi
        .iter()
        .map(|x| (s / gamma) * gamma.sqrt() * x + bridge_sd * stream.std_normal())
        .collect();
    let d = traj.state(k);
    let g = model.grad_objective(d);
    let mut out: Vec<f64> = d.iter().zip(&g).map(|(x, gi)| x - s * gi).collect();
    model.add_noise(d, &brownian, (gamma / config.m() as f64).sqrt(), &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run_gaussian_sgd, run_msgd, RunConfig};
    use crate::models::{make_quadratic_model, make_uniform_clt_model};
    use crate::weights::WeightScheme;

    fn msgd_traj() -> Trajectory {
        let model = make_quadratic_model(2, vec![0.0, 0.0], 1.0).unwrap();
        let cfg = RunConfig::new(0.1, 10, 5, 20, vec![1.0, 2.0]).unwrap();
        run_msgd(&model, &WeightScheme::minibatch(20, 5).unwrap(), &cfg, &RngStream::root(1)).unwrap()
    }

    #[test]
    fn msgd_grid_points_and_midpoints() {
        let t = msgd_traj();
        assert_eq!(interpolate_msgd(&t, 0.0).unwrap(), t.state(0));
        for k in 0..=10 {
            let y = interpolate_msgd(&t, k as f64 * 0.1).unwrap();
            for (a, b) in y.iter().zip(t.state(k)) {
                assert!((a - b).abs() < 1e-12, "k={k}");
            }
        }
        let mid = interpolate_msgd(&t, 0.35).unwrap();
        for j in 0..2 {
            let expect = 0.5 * (t.state(3)[j] + t.state(4)[j]);
            assert!((mid[j] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range() {
        let t = msgd_traj();
        assert!(matches!(interpolate_msgd(&t, -0.1), Err(Error::OutOfRange { .. })));
        assert!(matches!(interpolate_msgd(&t, 1.01), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn gaussian_piece_grid_and_bridge_variance() {
        let model = make_uniform_clt_model(1).unwrap();
        // ∇g ≡ 0 and σ = I/√3, so D_t - D_{kγ} = sqrt(γ/m)/√3 (B_t - B_kγ)
        let (gamma, m) = (0.2, 1);
        let cfg = RunConfig::new(gamma, 3, m, m, vec![0.0]).unwrap();
        let base = RngStream::root(2);
        let traj = run_gaussian_sgd(&model, &cfg, &base).unwrap();
        let mut s = base.derive("bridge");
        assert_eq!(interpolate_gaussian_piece(&model, &traj, 0.4, &mut s).unwrap(), traj.state(2));

        let scale = (gamma / m as f64).sqrt() / 3f64.sqrt();
        let t_mid = gamma + gamma / 2.0;
        let anchor = traj.state(1)[0];
        let endpoint_incr = (traj.state(2)[0] - anchor) / scale;
        let reps = 20_000;
        let samples: Vec<f64> = (0..reps)
            .map(|_| (interpolate_gaussian_piece(&model, &traj, t_mid, &mut s).unwrap()[0] - anchor) / scale)
            .collect();
        let mean = samples.iter().sum::<f64>() / reps as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let target_var = gamma / 4.0;
        assert!((mean - endpoint_incr / 2.0).abs() < 4.0 * (target_var / reps as f64).sqrt());
        assert!((var - target_var).abs() < 4.0 * target_var * (2.0 / reps as f64).sqrt(), "{var}");
    }

    #[test]
    fn gaussian_piece_noiseless_is_linear() {
        let model = make_quadratic_model(1, vec![0.0], 0.0).unwrap();
        let cfg = RunConfig::new(0.1, 5, 1, 1, vec![1.0]).unwrap();
        let traj = run_gaussian_sgd(&model, &cfg, &RngStream::root(3)).unwrap();
        let y = interpolate_gaussian_piece(&model, &traj, 0.25, &mut RngStream::root(4)).unwrap();
        let expect = 0.5 * (traj.state(2)[0] + traj.state(3)[0]);
        assert!((y[0] - expect).abs() < 1e-14);
    }
}
