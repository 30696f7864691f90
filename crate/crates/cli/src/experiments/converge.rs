use msgd_core::dynamics::{run_gaussian_sgd, run_gd, run_msgd, RunConfig};
use msgd_core::models::{make_logistic_model, LossModel};
use msgd_core::numerics::RngStream;
use msgd_core::stats::{
    contraction_fit, convergence_curve, fit_geometric_phase, minimize_by_gd, plateau_bound, rho_bound, ConvergenceCurve,
    GeometricFit,
};
use msgd_core::weights::Estimate;
use msgd_core::Execution;

use super::{build_model, logistic_dataset, or_ones, z_score, Outcome};
use crate::config::{ConvergeParams, ConvergeThresholds, ModelSpec, ProcessSpec, SchemeSpec};
use crate::report::{tag, Artifacts, Cell, Check};
use crate::RunError;

struct Fitted {
    label: String,
    kappa: Option<f64>,
    gamma: f64,
    fit: Option<GeometricFit>,
    rho_se: f64,
}

fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Column means over a set of per-replication curves.
fn mean_curve(samples: &[Vec<f64>]) -> Vec<f64> {
    let len = samples[0].len();
    (0..len).map(|k| samples.iter().map(|s| s[k]).sum::<f64>() / samples.len() as f64).collect()
}

/// Fitted rate in each replication batch over the full fit's window; the
/// spread gives the standard error.
fn batch_rho_se(samples: &[Vec<f64>], batches: usize, window_end: usize) -> f64 {
    let size = samples.len() / batches;
    if size == 0 {
        return f64::NAN;
    }
    let rhos: Vec<f64> = (0..batches)
        .map(|b| {
            let curve = mean_curve(&samples[b * size..(b + 1) * size]);
            let tail = &curve[curve.len() - curve.len() / 3..];
            let plateau = mean_of(tail);
            let excess: Vec<f64> = curve.iter().map(|c| c - plateau).collect();
            contraction_fit(&excess, 0, window_end).unwrap_or(f64::NAN)
        })
        .collect();
    Estimate::from_sample(&rhos).se
}

/// Paired estimate of `mean(x[b]) - mean(x[a])` over replications.
fn segment_diff(samples: &[Vec<f64>], a: std::ops::Range<usize>, b: std::ops::Range<usize>) -> Estimate {
    let diffs: Vec<f64> = samples.iter().map(|s| mean_of(&s[b.clone()]) - mean_of(&s[a.clone()])).collect();
    Estimate::from_sample(&diffs)
}

/// Decrease-then-plateau checks on the per-replication MSE curves.
fn shape_checks(label: &str, samples: &[Vec<f64>], params: &ConvergeParams, th: &ConvergeThresholds, outcome: &mut Outcome) {
    let len = samples[0].len();
    let b = params.block;
    let blocks = len / b;
    let worst = (0..blocks.saturating_sub(1))
        .map(|j| {
            let d = segment_diff(samples, j * b..(j + 1) * b, (j + 1) * b..(j + 2) * b);
            if d.se > 0.0 {
                d.value / d.se
            } else if d.value <= 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::NEG_INFINITY, f64::max);
    outcome
        .checks
        .push(Check::at_most(format!("{label}/block-increase-z"), worst, th.decrease_se));

    let sixth = len / 6;
    let fifth = len - 2 * sixth..len - sixth;
    let last = len - sixth..len;
    let level = mean_of(&mean_curve(samples)[last.clone()]);
    let initial = mean_of(&samples.iter().map(|s| s[0]).collect::<Vec<_>>());
    outcome.checks.push(Check::at_most(
        format!("{label}/final-over-initial"),
        level / initial,
        th.decrease_factor,
    ));
    let d = segment_diff(samples, fifth, last);
    outcome.checks.push(Check::within(
        format!("{label}/plateau-drift"),
        d.value,
        0.0,
        (th.plateau_se * d.se).max(th.plateau_rel * level),
    ));
}

struct Runner {
    process: ProcessSpec,
    scheme: Option<SchemeSpec>,
}

impl Runner {
    fn label(&self) -> String {
        match self.scheme {
            Some(s) => format!("{}-{}", self.process.label(), s.label()),
            None => self.process.label().to_string(),
        }
    }
}

fn runners(params: &ConvergeParams) -> Vec<Runner> {
    let mut out = Vec::new();
    for &process in &params.processes {
        if process == ProcessSpec::Msgd {
            out.extend(params.schemes.iter().map(|&s| Runner {
                process,
                scheme: Some(s),
            }));
        } else {
            out.push(Runner { process, scheme: None });
        }
    }
    out
}

fn curve_rows(curve: &ConvergenceCurve, recursion: Option<&[f64]>) -> Vec<Vec<Cell>> {
    (0..curve.gap.len())
        .map(|k| {
            let mut row = vec![
                Cell::from(k),
                curve.gap[k].value.into(),
                curve.gap[k].se.into(),
                curve.sq_dist[k].value.into(),
                curve.sq_dist[k].se.into(),
                curve.sq_norm[k].value.into(),
                curve.sq_norm[k].se.into(),
            ];
            if let Some(r) = recursion {
                row.push(r[k].into());
            }
            row
        })
        .collect()
}

pub(crate) fn run(
    params: &ConvergeParams,
    th: &ConvergeThresholds,
    root: &RngStream,
    out: &mut Artifacts,
) -> Result<Outcome, RunError> {
    let mut models: Vec<(Option<f64>, Box<dyn LossModel>)> = Vec::new();
    let quadratic_noise = match &params.model {
        ModelSpec::Logistic { kappa, .. } => {
            let ds = logistic_dataset(&params.model, root)?;
            let kappas = params.kappas.clone().unwrap_or_else(|| vec![kappa.expect("validated")]);
            for k in kappas {
                models.push((Some(k), Box::new(make_logistic_model(ds.with_kappa(k)?)?)));
            }
            None
        }
        spec => {
            models.push((None, build_model(spec, root)?));
            match spec {
                ModelSpec::Quadratic { s, .. } => Some(*s),
                _ => None,
            }
        }
    };
    let p = params.model.dim();
    let x0 = or_ones(&params.x0, p);
    let mut outcome = Outcome::default();
    let mut rate_rows = Vec::new();
    let mut fitted: Vec<Fitted> = Vec::new();
    let mut failures = Vec::new();

    for (ki, (kappa, model)) in models.iter().enumerate() {
        let model = model.as_ref();
        let x_star = match model.minimizer() {
            Some(x) => x,
            None => minimize_by_gd(model, &vec![0.0; p], 1e-10, 1_000_000)?,
        };
        let consts = model.constants();
        let lambda = consts.strong_convexity.unwrap_or(f64::NAN);
        let sigma_star = model.noise_factor(&x_star).frobenius_sq();
        let kappa_tag = kappa.map(|k| format!("kappa{}_", tag(k))).unwrap_or_default();
        if let Some(k) = kappa {
            outcome.detail(&format!("x_star_kappa{}", tag(*k)), &x_star);
        } else {
            outcome.detail("x_star", &x_star);
        }

        for (gi, &gamma) in params.gammas.iter().enumerate() {
            let steps = params.steps_for(gamma);
            let cfg = RunConfig::new(gamma, steps, params.m, params.n, x0.clone())?;
            let bound = rho_bound(lambda, gamma, consts.lipschitz, consts.noise_lipschitz, p, params.m);
            let plateau_cap = plateau_bound(lambda, gamma, consts.lipschitz, consts.noise_lipschitz, p, params.m, sigma_star);
            for runner in runners(params) {
                let label = format!("{kappa_tag}gamma{}_{}", tag(gamma), runner.label());
                let scheme = runner.scheme.map(|s| s.build(params.n, params.m)).transpose()?;
                let stream = root.derive(ki).derive(gi).derive(runner.label().as_str());
                let curve = convergence_curve(model, &x_star, params.reps, &stream, Execution::Parallel, |s| {
                    match runner.process {
                        ProcessSpec::Gd => run_gd(model, &cfg),
                        ProcessSpec::GaussianSgd => run_gaussian_sgd(model, &cfg, s),
                        ProcessSpec::Msgd => run_msgd(model, scheme.as_ref().expect("msgd has a scheme"), &cfg, s),
                    }
                })?;
                failures.extend(curve.failures.iter().map(|(r, e)| format!("{label} rep {r}: {e}")));

                let mut recursion = None;
                let fit_source = if let Some(s) = quadratic_noise {
                    // a_{k+1} = (1-γ)² a_k + γ² p s² / (2m), exact on the quadratic
                    let noise = if runner.process == ProcessSpec::Gd {
                        0.0
                    } else {
                        gamma * gamma * p as f64 * s * s / (2.0 * params.m as f64)
                    };
                    let mut a = vec![model.objective(&x0) - model.objective(&x_star)];
                    for k in 0..steps {
                        a.push((1.0 - gamma).powi(2) * a[k] + noise);
                    }
                    let worst = curve.gap.iter().zip(&a).map(|(e, t)| z_score(*e, *t)).fold(0.0, f64::max);
                    outcome
                        .checks
                        .push(Check::at_most(format!("{label}/recursion-max-z"), worst, th.recursion_se));
                    recursion = Some(a);
                    curve.gap_means()
                } else {
                    curve.sq_dist_means()
                };
                let fit = fit_geometric_phase(&fit_source, params.decay, None).ok();
                let rho_se = match (&fit, quadratic_noise) {
                    (Some(f), None) => batch_rho_se(&curve.sq_dist_samples, params.batches, f.window_end),
                    (Some(f), Some(_)) => batch_rho_se(&curve.gap_samples, params.batches, f.window_end),
                    (None, _) => f64::NAN,
                };
                let rho_hat = fit.map_or(f64::NAN, |f| f.rho_hat);
                let plateau_hat = fit.map_or(f64::NAN, |f| f.plateau_hat);
                if quadratic_noise.is_some() {
                    outcome
                        .checks
                        .push(Check::within(format!("{label}/rho-fit"), rho_hat, bound.rho, th.rho_tol));
                    outcome
                        .checks
                        .push(Check::at_most(format!("{label}/plateau<=bound"), plateau_hat, plateau_cap));
                } else {
                    shape_checks(&label, &curve.sq_dist_samples, params, th, &mut outcome);
                }

                let mut header = vec!["k", "gap_mean", "gap_se", "mse_mean", "mse_se", "sq_norm_mean", "sq_norm_se"];
                if recursion.is_some() {
                    header.push("gap_recursion");
                }
                out.write_csv(&format!("curve_{label}.csv"), &header, &curve_rows(&curve, recursion.as_deref()))?;
                rate_rows.push(vec![
                    kappa.map_or(f64::NAN, |k| k).into(),
                    gamma.into(),
                    runner.process.label().into(),
                    runner.scheme.map(|s| s.label()).unwrap_or_default().into(),
                    steps.into(),
                    rho_hat.into(),
                    rho_se.into(),
                    plateau_hat.into(),
                    fit.map_or(0, |f| f.window_end).into(),
                    bound.rho.into(),
                    plateau_cap.into(),
                    curve.failures.len().into(),
                ]);
                fitted.push(Fitted {
                    label: runner.label(),
                    kappa: *kappa,
                    gamma,
                    fit,
                    rho_se,
                });
            }
        }
    }

    // larger ridge penalty, faster contraction
    if models.len() > 1 {
        for &gamma in &params.gammas {
            for runner in runners(params) {
                let mut group: Vec<&Fitted> = fitted
                    .iter()
                    .filter(|f| f.gamma == gamma && f.label == runner.label())
                    .collect();
                group.sort_by(|a, b| b.kappa.unwrap().total_cmp(&a.kappa.unwrap()));
                for pair in group.windows(2) {
                    let (hi, lo) = (pair[0], pair[1]);
                    let rho = |f: &Fitted| f.fit.map_or(f64::NAN, |x| x.rho_hat);
                    let slack = th.order_se * (hi.rho_se.powi(2) + lo.rho_se.powi(2)).sqrt();
                    outcome.checks.push(Check::new(
                        format!(
                            "gamma{}_{}/rho(kappa={})<=rho(kappa={})",
                            tag(gamma),
                            runner.label(),
                            tag(hi.kappa.unwrap()),
                            tag(lo.kappa.unwrap())
                        ),
                        rho(hi),
                        rho(lo),
                        slack,
                        crate::report::Comparison::AtMost,
                    ));
                }
            }
        }
    }
    outcome.checks.push(Check::at_most("diverged-runs", failures.len() as f64, 0.0));
    outcome.detail("failures", &failures);
    out.write_csv(
        "rates.csv",
        &[
            "kappa",
            "gamma",
            "process",
            "scheme",
            "steps",
            "rho_hat",
            "rho_se",
            "plateau_hat",
            "window_end",
            "rho_bound",
            "plateau_bound",
            "failures",
        ],
        &rate_rows,
    )?;
    Ok(outcome)
}
