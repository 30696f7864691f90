use msgd_core::numerics::RngStream;
use msgd_core::stats::thm1_gap;
use msgd_core::Execution;

use super::{build_model, or_zeros, se_tolerance, Outcome};
use crate::config::{GapParams, GapThresholds};
use crate::report::{Artifacts, Cell, Check};
use crate::RunError;

pub(crate) fn run(params: &GapParams, th: &GapThresholds, root: &RngStream, out: &mut Artifacts) -> Result<Outcome, RunError> {
    let model = build_model(&params.model, root)?;
    let theta = or_zeros(&params.theta, model.dim());
    let mut outcome = Outcome::default();
    let mut rows = Vec::new();
    for &(n, m) in &params.sizes {
        for spec in &params.schemes {
            let label = spec.label();
            let scheme = spec.build(n, m)?;
            let stream = root.derive(n).derive(m).derive(label.as_str());
            let g = thm1_gap(model.as_ref(), &scheme, &theta, params.reps, &stream, Execution::Parallel)?;
            outcome.checks.push(Check::within(
                format!("{label}/n={n}/m={m}"),
                g.estimate,
                g.analytic,
                se_tolerance(th.gap_se, g.se, g.analytic),
            ));
            rows.push(vec![
                Cell::from(label.as_str()),
                n.into(),
                m.into(),
                g.estimate.into(),
                g.se.into(),
                g.analytic.into(),
                g.z().into(),
            ]);
        }
    }
    out.write_csv("gap.csv", &["scheme", "n", "m", "estimate", "se", "analytic", "z"], &rows)?;
    outcome.detail("trace_sigma_sq", model.noise_covariance(&theta).trace());
    Ok(outcome)
}
