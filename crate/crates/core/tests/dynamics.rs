use msgd_core::dynamics::{run_diffusion_em, run_gd, run_gaussian_sgd, run_msgd, run_ode, RunConfig};
use msgd_core::exec::replicate;
use msgd_core::models::{make_quadratic_model, LossModel};
use msgd_core::numerics::RngStream;
use msgd_core::stats::log_log_slope;
use msgd_core::weights::{Estimate, WeightScheme};
use msgd_core::Execution;

#[test]
fn gd_tracks_gradient_flow_at_first_order() {
    let model = make_quadratic_model(1, vec![0.0], 1.0).unwrap();
    let (x0, horizon, lip) = (1.0f64, 1.0, 1.0);
    let grad0 = model.grad_objective(&[x0])[0].abs();
    let gammas = [0.1, 0.05, 0.025, 0.0125];
    let mut finals = Vec::new();
    for &gamma in &gammas {
        let cfg = RunConfig::with_horizon(gamma, horizon, 1, 1, vec![x0]).unwrap();
        let gd = run_gd(&model, &cfg).unwrap();
        let ode = run_ode(&model, &[x0], gamma / 20.0, horizon).unwrap();
        let k = cfg.steps();
        let err: Vec<f64> = (0..=k)
            .map(|j| (gd.state(j)[0] - ode.state_at_time(j as f64 * gamma).unwrap()[0]).abs())
            .collect();
        let worst = err.iter().cloned().fold(0.0, f64::max);
        let bound = grad0 * (lip * horizon).exp() * k as f64 * gamma * gamma * (1.0 + lip * gamma).powi(k as i32);
        assert!(worst <= bound, "gamma {gamma}: {worst} > {bound}");
        finals.push(err[k]);
    }
    let slope = log_log_slope(&gammas, &finals).unwrap();
    assert!((0.8..=1.2).contains(&slope), "{slope}");
}

#[test]
fn ensembles_are_unbiased_on_the_quadratic() {
    // E x_K = (1 - γ)^K x_0 for every process whose noise is mean zero
    let model = make_quadratic_model(1, vec![0.0], 1.0).unwrap();
    let (gamma, steps, m, n) = (0.1, 10, 5, 50);
    let cfg = RunConfig::new(gamma, steps, m, n, vec![1.0]).unwrap();
    let scheme = WeightScheme::minibatch(n, m).unwrap();
    let target = 0.9f64.powi(steps as i32);
    let base = RngStream::root(9);
    let reps = 4_000;
    let msgd = replicate(Execution::Parallel, reps, |r| {
        run_msgd(&model, &scheme, &cfg, &base.derive("msgd").derive(r)).unwrap().final_state()[0]
    });
    let gsgd = replicate(Execution::Parallel, reps, |r| {
        run_gaussian_sgd(&model, &cfg, &base.derive("gsgd").derive(r)).unwrap().final_state()[0]
    });
    for (name, xs) in [("msgd", msgd), ("gsgd", gsgd)] {
        let est = Estimate::from_sample(&xs);
        assert!(est.within(target, 4.0), "{name}: {est:?} vs {target}");
    }
    // the diffusion has mean e^{-T} x_0 in the limit of small inner steps
    let em = replicate(Execution::Parallel, reps, |r| {
        run_diffusion_em(&model, &cfg, 50, &base.derive("em").derive(r)).unwrap().final_state()[0]
    });
    let est = Estimate::from_sample(&em);
    let exact = (1.0 - gamma / 50.0f64).powi(50 * steps as i32);
    assert!(est.within(exact, 4.0), "{est:?} vs {exact}");
}

#[test]
fn replicated_runs_do_not_depend_on_execution_mode() {
    let model = make_quadratic_model(2, vec![0.0, 0.0], 1.0).unwrap();
    let cfg = RunConfig::new(0.2, 5, 4, 32, vec![1.0, 1.0]).unwrap();
    let scheme = WeightScheme::dirichlet(32, 4).unwrap();
    let base = RngStream::root(10);
    let run = |exec| {
        replicate(exec, 64, |r| run_msgd(&model, &scheme, &cfg, &base.derive(r)).unwrap().final_state().to_vec())
    };
    assert_eq!(run(Execution::Parallel), run(Execution::Sequential));
}
