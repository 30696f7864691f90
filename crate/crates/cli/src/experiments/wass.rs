use msgd_core::dynamics::{run_diffusion_em, run_msgd, RunConfig};
use msgd_core::exec::replicate;
use msgd_core::models::LossModel;
use msgd_core::numerics::RngStream;
use msgd_core::stats::{coordinate_w2, log_log_slope, sliced_w2};
use msgd_core::weights::WeightScheme;
use msgd_core::Execution;

use super::{build_model, matrix_from_rows, or_ones, Outcome};
use crate::config::{WassParams, WassThresholds};
use crate::report::{Artifacts, Cell, Check};
use crate::RunError;

/// Final states of the successful runs plus the indices of failed ones.
fn ensemble<F>(reps: usize, run: F) -> (Vec<Vec<f64>>, Vec<(usize, String)>)
where
    F: Fn(usize) -> msgd_core::Result<Vec<f64>> + Sync + Send,
{
    let mut ok = Vec::with_capacity(reps);
    let mut failed = Vec::new();
    for (r, res) in replicate(Execution::Parallel, reps, run).into_iter().enumerate() {
        match res {
            Ok(x) => ok.push(x),
            Err(e) => failed.push((r, e.to_string())),
        }
    }
    (ok, failed)
}

struct Distances {
    sliced: Vec<f64>,
    coordinate: Vec<f64>,
    sample_sizes: Vec<usize>,
    failures: Vec<(String, usize, String)>,
}

fn distances(
    model: &dyn LossModel,
    scheme: &WeightScheme,
    params: &WassParams,
    substeps: usize,
    root: &RngStream,
) -> Result<Distances, RunError> {
    let p = model.dim();
    let x0 = or_ones(&params.x0, p);
    let mut d = Distances {
        sliced: Vec::new(),
        coordinate: Vec::new(),
        sample_sizes: Vec::new(),
        failures: Vec::new(),
    };
    for (gi, &gamma) in params.gammas.iter().enumerate() {
        let cfg = RunConfig::with_horizon(gamma, params.horizon, params.m, params.n, x0.clone())?;
        let base = root.derive(gi);
        let msgd_stream = base.derive("msgd");
        let em_stream = base.derive("diffusion").derive(substeps);
        let (mut a, fa) = ensemble(params.reps, |r| {
            run_msgd(model, scheme, &cfg, &msgd_stream.derive(r)).map(|t| t.final_state().to_vec())
        });
        let (mut b, fb) = ensemble(params.reps, |r| {
            run_diffusion_em(model, &cfg, substeps, &em_stream.derive(r)).map(|t| t.final_state().to_vec())
        });
        for (r, e) in fa {
            d.failures.push((format!("msgd gamma={gamma}"), r, e));
        }
        for (r, e) in fb {
            d.failures.push((format!("diffusion gamma={gamma}"), r, e));
        }
        // equal sample sizes: keep the first runs of the larger ensemble
        let size = a.len().min(b.len());
        a.truncate(size);
        b.truncate(size);
        let (ma, mb) = (matrix_from_rows(&a, p)?, matrix_from_rows(&b, p)?);
        let mut directions = base.derive("directions");
        d.sliced.push(sliced_w2(&ma, &mb, params.directions, &mut directions)?.value);
        d.coordinate.push(coordinate_w2(&ma, &mb)?.value);
        d.sample_sizes.push(size);
    }
    Ok(d)
}

fn scaling_checks(prefix: &str, gammas: &[f64], w2: &[f64], th: &WassThresholds, outcome: &mut Outcome) -> Result<f64, RunError> {
    let mut order: Vec<usize> = (0..gammas.len()).collect();
    order.sort_by(|&i, &j| gammas[j].total_cmp(&gammas[i]));
    for pair in order.windows(2) {
        let (big, small) = (pair[0], pair[1]);
        outcome.checks.push(Check::at_most(
            format!("{prefix}monotone/gamma={}->{}", gammas[big], gammas[small]),
            w2[small],
            (1.0 + th.monotone_slack) * w2[big],
        ));
    }
    let slope = log_log_slope(gammas, w2).unwrap_or(f64::NAN);
    outcome
        .checks
        .push(Check::in_range(format!("{prefix}log-log-slope"), slope, th.slope_min, th.slope_max));
    Ok(slope)
}

pub(crate) fn run(params: &WassParams, th: &WassThresholds, root: &RngStream, out: &mut Artifacts) -> Result<Outcome, RunError> {
    let model = build_model(&params.model, root)?;
    let scheme = params.scheme.build(params.n, params.m)?;
    let mut outcome = Outcome::default();
    let mut rows = Vec::new();
    let mut runs = vec![params.em_substeps];
    runs.extend(params.check_substeps);
    let mut failures = Vec::new();
    for (idx, &substeps) in runs.iter().enumerate() {
        // the M-SGD ensemble and slicing directions are shared between runs;
        // only the diffusion discretisation changes
        let d = distances(model.as_ref(), &scheme, params, substeps, root)?;
        for (gi, &gamma) in params.gammas.iter().enumerate() {
            rows.push(vec![
                Cell::from(gamma),
                d.sliced[gi].into(),
                "sliced".into(),
                substeps.into(),
                params.directions.into(),
                d.sample_sizes[gi].into(),
            ]);
            rows.push(vec![
                Cell::from(gamma),
                d.coordinate[gi].into(),
                "coordinate-average".into(),
                substeps.into(),
                0usize.into(),
                d.sample_sizes[gi].into(),
            ]);
        }
        let prefix = if idx == 0 { String::new() } else { format!("substeps={substeps}/") };
        let slope = scaling_checks(&prefix, &params.gammas, &d.sliced, th, &mut outcome)?;
        outcome.detail(&format!("slope_substeps_{substeps}"), slope);
        outcome.detail(
            &format!("coordinate_slope_substeps_{substeps}"),
            log_log_slope(&params.gammas, &d.coordinate).unwrap_or(f64::NAN),
        );
        failures.extend(d.failures.into_iter().map(|(what, r, e)| format!("substeps={substeps} {what} rep {r}: {e}")));
    }
    outcome.checks.push(Check::at_most("diverged-runs", failures.len() as f64, 0.0));
    outcome.detail("failures", &failures);
    out.write_csv(
        "distances.csv",
        &["gamma", "w2sq", "method", "em_substeps", "directions", "sample_size"],
        &rows,
    )?;
    Ok(outcome)
}
