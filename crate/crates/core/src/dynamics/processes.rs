use crate::error::{invalid, Result};
use crate::models::LossModel;
use crate::numerics::RngStream;
use crate::weights::WeightScheme;

use super::{check_state, grid_steps, ProcessKind, RunConfig, Trajectory};

/// Euler–Maruyama substeps per step of size γ.
pub const DEFAULT_EM_SUBSTEPS: usize = 50;

fn check_dim(model: &dyn LossModel, x0: &[f64]) -> Result<()> {
    if x0.len() != model.dim() {
        return Err(invalid(
            "x0",
            format!("model dimension is {}, starting point has {}", model.dim(), x0.len()),
        ));
    }
    Ok(())
}

fn discrete(kind: ProcessKind, config: &RunConfig, states: Vec<Vec<f64>>) -> Trajectory {
    Trajectory {
        kind,
        dt: config.gamma(),
        states,
        config: Some(config.clone()),
        scheme: None,
        drifts: Vec::new(),
        noise: None,
    }
}

/// `x_{k+1} = x_k - γ ∇g(x_k)`.
pub fn run_gd(model: &dyn LossModel, config: &RunConfig) -> Result<Trajectory> {
    check_dim(model, config.x0())?;
    let gamma = config.gamma();
    let mut states = Vec::with_capacity(config.steps() + 1);
    states.push(config.x0().to_vec());
    for k in 0..config.steps() {
        let x = &states[k];
        let g = model.grad_objective(x);
        let next: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - gamma * b).collect();
        check_state(&next, "gd", k + 1)?;
        states.push(next);
    }
    Ok(discrete(ProcessKind::Gd, config, states))
}

/// `x_{k+1} = x_k - γ ∇g(x_k) + (γ/√m) σ(x_k) ξ_{k+1}`, `ξ ~ N(0, I_q)`.
///
/// `ξ_{k+1}` is drawn from `stream.derive(k)`, so the realised Brownian
/// increments can be regenerated later for bridge interpolation.
pub fn run_gaussian_sgd(model: &dyn LossModel, config: &RunConfig, stream: &RngStream) -> Result<Trajectory> {
    check_dim(model, config.x0())?;
    let gamma = config.gamma();
    let noise_scale = gamma / (config.m() as f64).sqrt();
    let mut xi = vec![0.0; model.noise_dim()];
    let mut states = Vec::with_capacity(config.steps() + 1);
    states.push(config.x0().to_vec());
    for k in 0..config.steps() {
        let x = &states[k];
        let g = model.grad_objective(x);
        let mut next: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - gamma * b).collect();
        stream.derive(k).fill_std_normal(&mut xi);
        model.add_noise(x, &xi, noise_scale, &mut next);
        check_state(&next, "gaussian-sgd", k + 1)?;
        states.push(next);
    }
    let mut traj = discrete(ProcessKind::GaussianSgd, config, states);
    traj.noise = Some(stream.clone());
    Ok(traj)
}

/// Online M-SGD: every step draws fresh data `u_{1..n} ~ Q` and a fresh
/// weight vector `W_k`, then moves by `-γ Σ_i w_i ∇l(x_k, u_i)`.
///
/// Data come from `stream.derive("data")`, weights from
/// `stream.derive("weights")`.
pub fn run_msgd(
    model: &dyn LossModel,
    scheme: &WeightScheme,
    config: &RunConfig,
    stream: &RngStream,
) -> Result<Trajectory> {
    check_dim(model, config.x0())?;
    if scheme.n() != config.n() || scheme.m() != config.m() {
        return Err(invalid(
            "scheme",
            format!(
                "scheme has (n, m) = ({}, {}), run config has ({}, {})",
                scheme.n(),
                scheme.m(),
                config.n(),
                config.m()
            ),
        ));
    }
    let gamma = config.gamma();
    let p = model.dim();
    let mut data_stream = stream.derive("data");
    let mut weight_stream = stream.derive("weights");
    let mut w = vec![0.0; scheme.n()];
    let mut u = vec![0.0; model.datum_len()];
    let mut states = Vec::with_capacity(config.steps() + 1);
    let mut drifts = Vec::with_capacity(config.steps());
    states.push(config.x0().to_vec());
    for k in 0..config.steps() {
        scheme.sample_into(&mut weight_stream, &mut w)?;
        let x = &states[k];
        let mut drift = vec![0.0; p];
        for &wi in &w {
            model.fill_datum(&mut data_stream, &mut u);
            if wi != 0.0 {
                model.add_grad_loss(x, &u, wi, &mut drift);
            }
        }
        let next: Vec<f64> = x.iter().zip(&drift).map(|(a, d)| a - gamma * d).collect();
        check_state(&next, "msgd", k + 1)?;
        states.push(next);
        drifts.push(drift);
    }
    let mut traj = discrete(ProcessKind::Msgd, config, states);
    traj.scheme = Some(*scheme);
    traj.drifts = drifts;
    Ok(traj)
}

/// Gradient flow `dX = -∇g(X) dt` by classical RK4 on a grid of spacing `h`.
pub fn run_ode(model: &dyn LossModel, x0: &[f64], h: f64, horizon: f64) -> Result<Trajectory> {
    check_dim(model, x0)?;
    let steps = grid_steps(horizon, h, "horizon")?;
    let axpy = |x: &[f64], a: f64, d: &[f64]| -> Vec<f64> { x.iter().zip(d).map(|(xi, di)| xi - a * di).collect() };
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    for k in 0..steps {
        let x = &states[k];
        let k1 = model.grad_objective(x);
        let k2 = model.grad_objective(&axpy(x, h / 2.0, &k1));
        let k3 = model.grad_objective(&axpy(x, h / 2.0, &k2));
        let k4 = model.grad_objective(&axpy(x, h, &k3));
        let next: Vec<f64> = (0..x.len())
            .map(|i| x[i] - h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        check_state(&next, "ode", k + 1)?;
        states.push(next);
    }
    Ok(Trajectory {
        kind: ProcessKind::Ode,
        dt: h,
        states,
        config: None,
        scheme: None,
        drifts: Vec::new(),
        noise: None,
    })
}

/// Euler–Maruyama for `dX = -∇g(X) dt + sqrt(γ/m) σ(X) dB` with inner step
/// `γ/R`; states are recorded on the γ-grid.
pub fn run_diffusion_em(
    model: &dyn LossModel,
    config: &RunConfig,
    substeps: usize,
    stream: &RngStream,
) -> Result<Trajectory> {
    check_dim(model, config.x0())?;
    if substeps == 0 {
        return Err(invalid("substeps", "need at least one substep"));
    }
    let h = config.gamma() / substeps as f64;
    let noise_scale = (config.gamma() / config.m() as f64).sqrt() * h.sqrt();
    let mut rng = stream.clone();
    let mut z = vec![0.0; model.noise_dim()];
    let mut x = config.x0().to_vec();
    let mut states = Vec::with_capacity(config.steps() + 1);
    states.push(x.clone());
    for k in 0..config.steps() {
        for _ in 0..substeps {
            let g = model.grad_objective(&x);
            rng.fill_std_normal(&mut z);
            let mut next: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - h * b).collect();
            model.add_noise(&x, &z, noise_scale, &mut next);
            x = next;
        }
        check_state(&x, "diffusion-em", k + 1)?;
        states.push(x.clone());
    }
    Ok(discrete(ProcessKind::DiffusionEm, config, states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_quadratic_model, make_uniform_clt_model};
    use crate::numerics::norm;
    use crate::weights::{BaseDistribution, WeightScheme};

    #[test]
    fn gd_linear_recursion() {
        let model = make_quadratic_model(1, vec![0.0], 1.0).unwrap();
        let cfg = RunConfig::new(0.1, 30, 1, 1, vec![1.0]).unwrap();
        let t = run_gd(&model, &cfg).unwrap();
        for (k, s) in t.states().iter().enumerate() {
            assert!((s[0] - 0.9f64.powi(k as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn gd_at_fixed_point_is_constant() {
        let model = make_quadratic_model(2, vec![0.5, -1.0], 1.0).unwrap();
        let cfg = RunConfig::new(0.3, 10, 1, 1, vec![0.5, -1.0]).unwrap();
        let t = run_gd(&model, &cfg).unwrap();
        assert!(t.states().iter().all(|s| s == &vec![0.5, -1.0]));
    }

    #[test]
    fn gaussian_sgd_without_noise_is_gd() {
        let model = make_quadratic_model(2, vec![0.0, 1.0], 0.0).unwrap();
        let cfg = RunConfig::new(0.2, 25, 4, 10, vec![3.0, -2.0]).unwrap();
        let a = run_gd(&model, &cfg).unwrap();
        let b = run_gaussian_sgd(&model, &cfg, &RngStream::root(1)).unwrap();
        assert_eq!(a.states(), b.states());
    }

    #[test]
    fn gaussian_sgd_huge_m_tracks_gd() {
        let model = make_quadratic_model(1, vec![0.0], 1.0).unwrap();
        let cfg = RunConfig::new(0.1, 10, 100_000_000, 100_000_000, vec![1.0]).unwrap();
        let a = run_gd(&model, &cfg).unwrap();
        let b = run_gaussian_sgd(&model, &cfg, &RngStream::root(2)).unwrap();
        let dev = a.states().iter().zip(b.states()).map(|(x, y)| (x[0] - y[0]).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-2, "{dev}");
    }

    #[test]
    fn gaussian_sgd_one_step_variance() {
        let model = make_quadratic_model(1, vec![0.0], 1.0).unwrap();
        let (gamma, m) = (0.1, 5);
        let cfg = RunConfig::new(gamma, 1, m, m, vec![1.0]).unwrap();
        let base = RngStream::root(3);
        let devs: Vec<f64> = (0..10_000u64)
            .map(|r| run_gaussian_sgd(&model, &cfg, &base.derive(r)).unwrap().state(1)[0] - 0.9)
            .collect();
        let mean = devs.iter().sum::<f64>() / 1e4;
        let var = devs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 9_999.0;
        let target = gamma * gamma / m as f64;
        // 4 standard errors of a chi-square variance estimate
        assert!((var - target).abs() < 4.0 * target * (2.0f64 / 1e4).sqrt(), "{var} vs {target}");
    }

    #[test]
    fn msgd_with_degenerate_data_is_gd() {
        let model = make_quadratic_model(2, vec![1.0, -1.0], 0.0).unwrap();
        let cfg = RunConfig::new(0.1, 20, 5, 40, vec![0.0, 2.0]).unwrap();
        let gd = run_gd(&model, &cfg).unwrap();
        for scheme in [
            WeightScheme::minibatch(40, 5).unwrap(),
            WeightScheme::gaussian(40, 5, BaseDistribution::StandardNormal).unwrap(),
            WeightScheme::dirichlet(40, 5).unwrap(),
        ] {
            let t = run_msgd(&model, &scheme, &cfg, &RngStream::root(4)).unwrap();
            for (a, b) in gd.states().iter().zip(t.states()) {
                assert!(norm(&[a[0] - b[0], a[1] - b[1]]) < 1e-12);
            }
        }
    }

    #[test]
    fn full_batch_minibatch_averages_all_data() {
        let model = make_uniform_clt_model(1).unwrap();
        let cfg = RunConfig::new(0.5, 1, 8, 8, vec![0.0]).unwrap();
        let scheme = WeightScheme::minibatch(8, 8).unwrap();
        let stream = RngStream::root(5);
        let t = run_msgd(&model, &scheme, &cfg, &stream).unwrap();
        let mut data = stream.derive("data");
        let mean: f64 = (0..8).map(|_| model.sample_datum(&mut data).0[0]).sum::<f64>() / 8.0;
        assert!((t.drifts()[0][0] - mean).abs() < 1e-15);
    }

    #[test]
    fn msgd_scheme_mismatch_rejected() {
        let model = make_quadratic_model(1, vec![0.0], 1.0).unwrap();
        let cfg = RunConfig::new(0.1, 2, 5, 40, vec![0.0]).unwrap();
        let scheme = WeightScheme::minibatch(41, 5).unwrap();
        assert!(run_msgd(&model, &scheme, &cfg, &RngStream::root(0)).is_err());
    }

    #[test]
    fn ode_rk4_accuracy_and_order() {
        let model = make_quadratic_model(1, vec![0.0], 1.0).unwrap();
        let e = (-1.0f64).exp();
        let err = |h: f64| (run_ode(&model, &[1.0], h, 1.0).unwrap().final_state()[0] - e).abs();
        assert!(err(1e-3) < 1e-6);
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
        let flat = run_ode(&model, &[0.0], 0.1, 1.0).unwrap();
        assert!(flat.states().iter().all(|s| s[0] == 0.0));
    }

    #[test]
    fn em_noiseless_limit() {
        let model = make_quadratic_model(1, vec![0.0], 0.0).unwrap();
        let cfg = RunConfig::with_horizon(0.1, 1.0, 1, 1, vec![1.0]).unwrap();
        let t = run_diffusion_em(&model, &cfg, 100, &RngStream::root(6)).unwrap();
        assert!((t.final_state()[0] - (-1.0f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn em_single_substep_variance() {
        let model = make_quadratic_model(1, vec![0.0], 1.0).unwrap();
        let (gamma, m, r) = (0.5, 4, 1);
        let cfg = RunConfig::new(gamma, 1, m, m, vec![1.0]).unwrap();
        let h = gamma / r as f64;
        let base = RngStream::root(7);
        let xs: Vec<f64> = (0..10_000u64)
            .map(|i| run_diffusion_em(&model, &cfg, r, &base.derive(i)).unwrap().state(1)[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / 1e4;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 9_999.0;
        let target = gamma / m as f64 * h;
        assert!((mean - (1.0 - h)).abs() < 4.0 * (target / 1e4).sqrt());
        assert!((var - target).abs() < 4.0 * target * (2.0f64 / 1e4).sqrt(), "{var} vs {target}");
    }

    #[test]
    fn em_vanishing_noise_tracks_ode() {
        let model = make_quadratic_model(2, vec![0.0, 0.0], 1.0).unwrap();
        let cfg = RunConfig::with_horizon(0.1, 1.0, 100_000_000, 100_000_000, vec![1.0, -1.0]).unwrap();
        let em = run_diffusion_em(&model, &cfg, DEFAULT_EM_SUBSTEPS, &RngStream::root(8)).unwrap();
        let ode = run_ode(&model, &[1.0, -1.0], 0.01, 1.0).unwrap();
        for (k, s) in em.states().iter().enumerate() {
            let o = ode.state_at_time(k as f64 * 0.1).unwrap();
            assert!((s[0] - o[0]).abs() <= 1e-2 && (s[1] - o[1]).abs() <= 1e-2);
        }
    }

    #[test]
    fn divergence_reports_iteration() {
        let model = make_quadratic_model(1, vec![0.0], 0.0).unwrap();
        let cfg = RunConfig::new(0.5, 3, 1, 1, vec![1e200]).unwrap();
        match run_gd(&model, &cfg) {
            Err(crate::Error::Diverged { iteration, .. }) => assert_eq!(iteration, 1),
            other => panic!("{other:?}"),
        }
    }
}
