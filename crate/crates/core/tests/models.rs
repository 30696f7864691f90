use msgd_core::models::{
    generate_reference_logistic_dataset, make_logistic_model, make_quadratic_model, make_uniform_clt_model, LossModel,
};
use msgd_core::numerics::{
    finite_diff_gradient, max_relative_error, second_directional_difference, RngStream, DEFAULT_STEP,
};
use msgd_core::weights::Estimate;

fn random_point(stream: &mut RngStream, p: usize, scale: f64) -> Vec<f64> {
    (0..p).map(|_| scale * stream.std_normal()).collect()
}

fn models() -> Vec<Box<dyn LossModel>> {
    let mut data_stream = RngStream::root(11).derive("dataset");
    let ds = generate_reference_logistic_dataset(&mut data_stream, 3, 400, 0.05).unwrap();
    vec![
        Box::new(make_quadratic_model(3, vec![0.5, -1.0, 2.0], 0.7).unwrap()),
        Box::new(make_uniform_clt_model(2).unwrap()),
        Box::new(make_logistic_model(ds).unwrap()),
    ]
}

#[test]
fn gradients_match_finite_differences() {
    let mut s = RngStream::root(5);
    for model in models() {
        for _ in 0..10 {
            let x = random_point(&mut s, model.dim(), 1.5);
            let fd = finite_diff_gradient(|y| model.objective(y), &x, DEFAULT_STEP).unwrap();
            let exact = model.grad_objective(&x);
            let err = max_relative_error(&exact, &fd, 1e-6);
            assert!(err < 1e-6, "{}: {err}", model.name());
        }
    }
}

#[test]
fn per_datum_gradient_is_unbiased_and_noise_factor_matches() {
    let mut s = RngStream::root(6);
    for model in models() {
        let theta = random_point(&mut s, model.dim(), 0.8);
        let grad = model.grad_objective(&theta);
        let cov = model.noise_covariance(&theta);
        let p = model.dim();
        let reps = 40_000;
        let mut data = s.derive(model.name());
        let draws: Vec<Vec<f64>> = (0..reps)
            .map(|_| {
                let d = model.sample_datum(&mut data);
                model.grad_loss(&theta, &d)
            })
            .collect();
        for j in 0..p {
            let col: Vec<f64> = draws.iter().map(|g| g[j]).collect();
            let est = Estimate::from_sample(&col);
            assert!(est.within(grad[j], 4.0), "{} mean[{j}]: {est:?} vs {}", model.name(), grad[j]);
            for k in 0..p {
                let prod: Vec<f64> = draws.iter().map(|g| (g[j] - grad[j]) * (g[k] - grad[k])).collect();
                let est = Estimate::from_sample(&prod);
                assert!(
                    est.within(cov.get(j, k), 4.0),
                    "{} cov[{j},{k}]: {est:?} vs {}",
                    model.name(),
                    cov.get(j, k)
                );
            }
        }
    }
}

#[test]
fn logistic_curvature_between_ridge_and_lipschitz() {
    let mut data_stream = RngStream::root(12);
    let ds = generate_reference_logistic_dataset(&mut data_stream, 4, 500, 0.1).unwrap();
    let model = make_logistic_model(ds).unwrap();
    let c = model.constants();
    let lambda = c.strong_convexity.unwrap();
    assert!((lambda - 0.2).abs() < 1e-15);
    let mut s = RngStream::root(13);
    for _ in 0..20 {
        let x = random_point(&mut s, 4, 1.0);
        let mut v = random_point(&mut s, 4, 1.0);
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= nv);
        let curv = second_directional_difference(|y| model.objective(y), &x, &v, 1e-4);
        assert!(curv >= lambda - 1e-5, "{curv}");
        assert!(curv <= c.lipschitz + 1e-5, "{curv} > {}", c.lipschitz);
    }
    assert!(c.lipschitz <= model.loose_lipschitz());
}

#[test]
fn per_datum_gradient_modulus_bounds_differences() {
    // |∇l(a, z) - ∇l(b, z)| <= h₁(z) |a - b| with h₁(z) = |x|²/4 + 2κ
    let mut data_stream = RngStream::root(14);
    let ds = generate_reference_logistic_dataset(&mut data_stream, 3, 200, 0.05).unwrap();
    let model = make_logistic_model(ds.clone()).unwrap();
    let mut s = RngStream::root(15);
    let mut h1_sq = 0.0;
    for i in 0..ds.t() {
        let row = ds.covariates().row(i);
        let h1 = row.iter().map(|x| x * x).sum::<f64>() / 4.0 + 2.0 * ds.kappa();
        h1_sq += h1 * h1;
        let a = random_point(&mut s, 3, 1.0);
        let b = random_point(&mut s, 3, 1.0);
        let diff: f64 = model
            .row_gradient(&a, i)
            .iter()
            .zip(model.row_gradient(&b, i))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let dist: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        assert!(diff <= h1 * dist * (1.0 + 1e-12));
    }
    let reported = model.constants().h1_sq_mean.unwrap();
    assert!((reported - h1_sq / ds.t() as f64).abs() < 1e-12 * reported);
}

#[test]
fn noise_lipschitz_bounds_frobenius_change() {
    let mut data_stream = RngStream::root(16);
    let ds = generate_reference_logistic_dataset(&mut data_stream, 3, 300, 0.05).unwrap();
    let model = make_logistic_model(ds).unwrap();
    let l1 = model.constants().noise_lipschitz;
    let mut s = RngStream::root(17);
    for _ in 0..20 {
        let a = random_point(&mut s, 3, 1.0);
        let b = random_point(&mut s, 3, 1.0);
        let fa = model.noise_factor(&a);
        let fb = model.noise_factor(&b);
        let diff = fa.entries().iter().zip(fb.entries()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let dist: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        assert!(diff <= l1 * dist * (1.0 + 1e-12), "{diff} > {l1} * {dist}");
    }
}
