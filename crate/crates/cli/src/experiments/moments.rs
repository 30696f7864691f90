use msgd_core::numerics::RngStream;
use msgd_core::weights::{empirical_weight_moments, sigma_entries};
use msgd_core::Execution;

use super::{se_tolerance, z_score, Outcome};
use crate::config::{WeightsMomentsParams, WeightsMomentsThresholds};
use crate::report::{Artifacts, Cell, Check};
use crate::RunError;

pub(crate) fn run(
    params: &WeightsMomentsParams,
    th: &WeightsMomentsThresholds,
    root: &RngStream,
    out: &mut Artifacts,
) -> Result<Outcome, RunError> {
    let (n, m) = (params.n, params.m);
    let (diag, off) = sigma_entries(n, m)?;
    let mean_target = 1.0 / n as f64;
    let coords = params.checked_coordinates();
    let mut outcome = Outcome::default();
    let mut summary = Vec::new();
    for spec in &params.schemes {
        let label = spec.label();
        let scheme = spec.build(n, m)?;
        let rep = empirical_weight_moments(&scheme, &root.derive(label.as_str()), params.reps, Execution::Parallel)?;

        for &i in &coords {
            let j = (i + 1) % n;
            let cases = [
                ("mean", rep.coordinate_mean[i], mean_target, th.mean_se),
                ("var", rep.coordinate_variance[i], diag, th.var_se),
                ("cov", rep.adjacent_covariance[i], off, th.cov_se),
            ];
            for (what, est, target, k) in cases {
                let name = if what == "cov" {
                    format!("{label}/cov[{i},{j}]")
                } else {
                    format!("{label}/{what}[{i}]")
                };
                outcome
                    .checks
                    .push(Check::within(name, est.value, target, se_tolerance(k, est.se, target)));
            }
        }
        outcome.checks.push(Check::within(
            format!("{label}/m-sum-sq"),
            rep.m_sum_sq.value,
            1.0,
            se_tolerance(th.sum_sq_se, rep.m_sum_sq.se, 1.0),
        ));

        let worst = |v: &[msgd_core::weights::Estimate], t: f64| v.iter().map(|e| z_score(*e, t)).fold(0.0, f64::max);
        outcome.detail(
            &label,
            serde_json::json!({
                "worst_mean_z_all_coordinates": worst(&rep.coordinate_mean, mean_target),
                "worst_var_z_all_coordinates": worst(&rep.coordinate_variance, diag),
                "worst_cov_z_all_coordinates": worst(&rep.adjacent_covariance, off),
                "m_sum_sq": rep.m_sum_sq,
                "m32_sum_cube": rep.m32_sum_cube,
                "sqrt_m_max_dev": rep.sqrt_m_max_dev,
                "m_sum_sq_dev": rep.m_sum_sq_dev,
            }),
        );
        for (q, est, target) in [
            ("m_sum_sq", rep.m_sum_sq, 1.0),
            ("m32_sum_cube", rep.m32_sum_cube, f64::NAN),
            ("sqrt_m_max_dev", rep.sqrt_m_max_dev, f64::NAN),
            ("m_sum_sq_dev", rep.m_sum_sq_dev, 1.0 - m as f64 / n as f64),
        ] {
            summary.push(vec![Cell::from(label.as_str()), q.into(), est.value.into(), est.se.into(), target.into()]);
        }

        let rows: Vec<Vec<Cell>> = (0..n)
            .map(|i| {
                vec![
                    i.into(),
                    rep.coordinate_mean[i].value.into(),
                    rep.coordinate_mean[i].se.into(),
                    rep.coordinate_variance[i].value.into(),
                    rep.coordinate_variance[i].se.into(),
                    rep.adjacent_covariance[i].value.into(),
                    rep.adjacent_covariance[i].se.into(),
                ]
            })
            .collect();
        out.write_csv(
            &format!("moments_{label}.csv"),
            &["i", "mean", "mean_se", "var", "var_se", "cov_next", "cov_next_se"],
            &rows,
        )?;
    }
    out.write_csv("summary.csv", &["scheme", "quantity", "observed", "se", "target"], &summary)?;
    outcome.detail("targets", serde_json::json!({ "mean": mean_target, "var": diag, "cov": off }));
    Ok(outcome)
}
