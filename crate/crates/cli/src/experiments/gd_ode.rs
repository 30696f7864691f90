use msgd_core::dynamics::{run_gd, run_ode, RunConfig};
use msgd_core::numerics::{dist_sq, norm, RngStream};
use msgd_core::stats::log_log_slope;

use super::{build_model, or_ones, Outcome};
use crate::config::{GdOdeParams, GdOdeThresholds};
use crate::report::{Artifacts, Cell, Check};
use crate::RunError;

/// Compares GD with the RK4 gradient flow at the grid times `kγ`.
///
/// Two bounds are checked on `max_k |x_k - X(kγ)|` with
/// `C₁ = |∇g(x₀)| e^{LT}`: `C₁ Kγ (1 + Lγ)^K` and the first-order version
/// with an extra factor `γ`.
pub(crate) fn run(params: &GdOdeParams, th: &GdOdeThresholds, root: &RngStream, out: &mut Artifacts) -> Result<Outcome, RunError> {
    let model = build_model(&params.model, root)?;
    let p = model.dim();
    let x0 = or_ones(&params.x0, p);
    let lip = model.constants().lipschitz;
    let c1 = norm(&model.grad_objective(&x0)) * (lip * params.horizon).exp();
    let mut outcome = Outcome::default();
    let mut summary = Vec::new();
    let mut finals = Vec::new();
    for &gamma in &params.gammas {
        let cfg = RunConfig::with_horizon(gamma, params.horizon, 1, 1, x0.clone())?;
        let k_steps = cfg.steps();
        let gd = run_gd(model.as_ref(), &cfg)?;
        let ode = run_ode(model.as_ref(), &x0, gamma / params.ode_refine as f64, params.horizon)?;
        let mut rows = Vec::with_capacity(k_steps + 1);
        let mut worst = 0.0f64;
        let mut last = 0.0;
        for k in 0..=k_steps {
            let a = gd.state(k);
            let b = ode.state(k * params.ode_refine);
            let err = dist_sq(a, b).sqrt();
            worst = worst.max(err);
            last = err;
            let mut row: Vec<Cell> = vec![k.into(), (k as f64 * gamma).into()];
            row.extend(a.iter().map(|&v| Cell::from(v)));
            row.extend(b.iter().map(|&v| Cell::from(v)));
            row.push(err.into());
            rows.push(row);
        }
        let mut header: Vec<String> = vec!["k".into(), "t".into()];
        header.extend((1..=p).map(|j| format!("gd_x{j}")));
        header.extend((1..=p).map(|j| format!("ode_x{j}")));
        header.push("abs_err".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        out.write_csv(&format!("gd_ode_gamma{gamma}.csv"), &header, &rows)?;

        let kg = k_steps as f64 * gamma;
        let growth = (1.0 + lip * gamma).powi(k_steps as i32);
        let bound = c1 * kg * growth;
        let strict = bound * gamma;
        outcome.checks.push(Check::at_most(format!("gamma={gamma}/max-err<=C1*K*gamma^2*(1+L*gamma)^K"), worst, strict));
        outcome.checks.push(Check::at_most(format!("gamma={gamma}/max-err<=C1*K*gamma*(1+L*gamma)^K"), worst, bound));
        summary.push(vec![
            gamma.into(),
            k_steps.into(),
            worst.into(),
            last.into(),
            bound.into(),
            strict.into(),
        ]);
        finals.push(last);
    }
    out.write_csv(
        "summary.csv",
        &["gamma", "steps", "max_err", "final_err", "bound", "bound_first_order"],
        &summary,
    )?;
    let slope = log_log_slope(&params.gammas, &finals)?;
    outcome
        .checks
        .push(Check::in_range("final-err-slope", slope, th.slope_min, th.slope_max));
    outcome.detail("c1", c1);
    outcome.detail("lipschitz", lip);
    outcome.detail("slope", slope);
    Ok(outcome)
}
