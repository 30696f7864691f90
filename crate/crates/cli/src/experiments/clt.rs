use msgd_core::numerics::RngStream;
use msgd_core::stats::{clt_error_samples, ks_normality, sample_covariance};
use msgd_core::Execution;

use super::{build_model, or_zeros, se_tolerance, Outcome};
use crate::config::{CltParams, CltThresholds};
use crate::histogram::emit_histogram;
use crate::report::{Artifacts, Cell, Check};
use crate::RunError;

pub(crate) fn run(params: &CltParams, th: &CltThresholds, root: &RngStream, out: &mut Artifacts) -> Result<Outcome, RunError> {
    let model = build_model(&params.model, root)?;
    let p = model.dim();
    let theta = or_zeros(&params.theta, p);
    let target = model.noise_covariance(&theta);
    let mut outcome = Outcome::default();
    let mut ks_rows = Vec::new();
    for spec in &params.schemes {
        let label = spec.label();
        let scheme = spec.build(params.n, params.m)?;
        let set = clt_error_samples(
            model.as_ref(),
            &scheme,
            &theta,
            params.samples,
            &root.derive(label.as_str()),
            Execution::Parallel,
        )?;
        for j in 0..p {
            let xs = set.coordinate(j);
            let ks = ks_normality(&xs, target.get(j, j))?;
            outcome
                .checks
                .push(Check::at_most(format!("{label}/ks[{j}]"), ks.statistic, th.ks_max));
            let mean = set.coordinate_mean(j);
            ks_rows.push(vec![
                Cell::from(label.as_str()),
                j.into(),
                ks.statistic.into(),
                mean.value.into(),
                mean.se.into(),
                target.get(j, j).into(),
            ]);
            let bins = emit_histogram(&xs, params.bins)?;
            let rows: Vec<Vec<Cell>> = bins
                .iter()
                .map(|b| vec![b.left.into(), b.right.into(), b.count.into()])
                .collect();
            out.write_csv(&format!("hist_{label}_x{}.csv", j + 1), &["bin_left", "bin_right", "count"], &rows)?;
        }
        let (cov, se) = sample_covariance(&set.samples);
        let mut cov_rows = Vec::new();
        for a in 0..p {
            for b in 0..p {
                let t = target.get(a, b);
                outcome.checks.push(Check::within(
                    format!("{label}/cov[{a},{b}]"),
                    cov.get(a, b),
                    t,
                    se_tolerance(th.cov_se, se.get(a, b), t),
                ));
                cov_rows.push(vec![a.into(), b.into(), cov.get(a, b).into(), se.get(a, b).into(), t.into()]);
            }
        }
        out.write_csv(&format!("cov_{label}.csv"), &["row", "col", "cov", "se", "target"], &cov_rows)?;
    }
    out.write_csv(
        "ks.csv",
        &["scheme", "coordinate", "ks_statistic", "mean", "mean_se", "target_variance"],
        &ks_rows,
    )?;
    outcome.detail("model", model.name());
    outcome.detail("theta", &theta);
    Ok(outcome)
}
