//! Contraction under strong convexity.
//!
//! For `0 < γ < min(1/L, 1)` and enough averaging the expected optimality
//! gap obeys `E[g(x_k) - g*] <= ρ^k (g(x_0) - g*) + plateau`, with
//! `ρ = 1 - λγ(2 - Lγ) + 2pLL₁²γ²/(mλ)`. The helpers here compute `ρ`,
//! the plateau bound, Monte Carlo curves and fitted geometric rates.

use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::exec::{replicate, Execution};
use crate::models::LossModel;
use crate::numerics::{dist_sq, norm, norm_sq, RngStream};
use crate::weights::Estimate;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateBound {
    pub rho: f64,
    /// `γ < min(1/L, 1)`.
    pub gamma_ok: bool,
    /// `m > 2pLL₁γ / (λ²(2 - Lγ))`.
    pub m_ok: bool,
    /// `ρ < 1`. Implied by the two flags only when `L₁ <= 1`.
    pub contracts: bool,
}

pub fn rho_bound(lambda: f64, gamma: f64, lipschitz: f64, noise_lipschitz: f64, p: usize, m: usize) -> RateBound {
    let (l, l1, pf, mf) = (lipschitz, noise_lipschitz, p as f64, m as f64);
    let rho = 1.0 - lambda * gamma * (2.0 - l * gamma) + 2.0 * pf * l * l1 * l1 * gamma * gamma / (mf * lambda);
    let gamma_cap = if l > 0.0 { (1.0 / l).min(1.0) } else { 1.0 };
    let m_threshold = 2.0 * pf * l * l1 * gamma / (lambda * lambda * (2.0 - l * gamma));
    RateBound {
        rho,
        gamma_ok: gamma > 0.0 && gamma < gamma_cap,
        m_ok: mf > m_threshold,
        contracts: rho < 1.0,
    }
}

/// Stationary part of the optimality-gap bound,
/// `Lγ ‖σ(x*)‖_F² / (m [λ(2 - Lγ) - 2pLL₁²γ/(mλ)])`.
pub fn plateau_bound(
    lambda: f64,
    gamma: f64,
    lipschitz: f64,
    noise_lipschitz: f64,
    p: usize,
    m: usize,
    noise_frobenius_sq: f64,
) -> f64 {
    let (l, l1, mf) = (lipschitz, noise_lipschitz, m as f64);
    let denom = lambda * (2.0 - l * gamma) - 2.0 * p as f64 * l * l1 * l1 * gamma / (mf * lambda);
    l * gamma * noise_frobenius_sq / (mf * denom)
}

/// Per-iteration Monte Carlo curves over replicated runs.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceCurve {
    /// `E[g(x_k) - g(x*)]`.
    pub gap: Vec<Estimate>,
    /// `E|x_k - x*|²`.
    pub sq_dist: Vec<Estimate>,
    /// `E|x_k|²`.
    pub sq_norm: Vec<Estimate>,
    /// Replication index and message for every failed run.
    pub failures: Vec<(usize, String)>,
    /// Per-replication gap curves of the successful runs, in index order.
    #[serde(skip)]
    pub gap_samples: Vec<Vec<f64>>,
    /// Per-replication squared-distance curves of the successful runs.
    #[serde(skip)]
    pub sq_dist_samples: Vec<Vec<f64>>,
}

impl ConvergenceCurve {
    pub fn gap_means(&self) -> Vec<f64> {
        self.gap.iter().map(|e| e.value).collect()
    }

    pub fn sq_dist_means(&self) -> Vec<f64> {
        self.sq_dist.iter().map(|e| e.value).collect()
    }
}

fn column_estimates(samples: &[Vec<f64>]) -> Vec<Estimate> {
    let len = samples.first().map_or(0, Vec::len);
    (0..len)
        .map(|k| Estimate::from_sample(&samples.iter().map(|s| s[k]).collect::<Vec<_>>()))
        .collect()
}

/// Runs `run(stream.derive(r))` for `r < reps` and averages optimality gap
/// and squared distance to `x_star` along the trajectories. Failed runs are
/// recorded, not dropped silently.
pub fn convergence_curve<F>(
    model: &dyn LossModel,
    x_star: &[f64],
    reps: usize,
    stream: &RngStream,
    exec: Execution,
    run: F,
) -> Result<ConvergenceCurve>
where
    F: Fn(&RngStream) -> Result<Trajectory> + Sync + Send,
{
    if reps < 2 {
        return Err(invalid("reps", "need at least two replications"));
    }
    let g_star = model.objective(x_star);
    let outcomes = replicate(exec, reps, |r| {
        run(&stream.derive(r)).map(|traj| {
            let gaps: Vec<f64> = traj.states().iter().map(|x| model.objective(x) - g_star).collect();
            let dists: Vec<f64> = traj.states().iter().map(|x| dist_sq(x, x_star)).collect();
            let norms: Vec<f64> = traj.states().iter().map(|x| norm_sq(x)).collect();
            (gaps, dists, norms)
        })
    });
    let mut gap_samples = Vec::new();
    let mut sq_dist_samples = Vec::new();
    let mut norm_samples = Vec::new();
    let mut failures = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((g, d, n)) => {
                gap_samples.push(g);
                sq_dist_samples.push(d);
                norm_samples.push(n);
            }
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if gap_samples.len() < 2 {
        return Err(invalid("reps", format!("only {} runs finished", gap_samples.len())));
    }
    Ok(ConvergenceCurve {
        gap: column_estimates(&gap_samples),
        sq_dist: column_estimates(&sq_dist_samples),
        sq_norm: column_estimates(&norm_samples),
        failures,
        gap_samples,
        sq_dist_samples,
    })
}

/// `exp` of the least-squares slope of `ln curve[k]` over
/// `k ∈ [burn_in, burn_in + window]`.
pub fn contraction_fit(curve: &[f64], burn_in: usize, window: usize) -> Result<f64> {
    if window == 0 {
        return Err(invalid("window", "need at least two points"));
    }
    let end = burn_in + window;
    if end >= curve.len() {
        return Err(invalid("window", format!("window ends at {end}, curve has {} points", curve.len())));
    }
    let pts = &curve[burn_in..=end];
    if let Some(bad) = pts.iter().find(|&&c| !(c > 0.0)) {
        return Err(invalid("curve", format!("entries in the window must be positive, found {bad}")));
    }
    let ks: Vec<f64> = (burn_in..=end).map(|k| k as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|c| c.ln()).collect();
    Ok(least_squares_slope(&ks, &ys).exp())
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("points", "need at least two paired points"));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(invalid("points", "log-log fit needs positive values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    Ok(least_squares_slope(&lx, &ly))
}

/// Geometric-phase summary of a curve that decays to a plateau.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeometricFit {
    /// Mean of the last third of the curve.
    pub plateau_hat: f64,
    /// Last index of the fitted window.
    pub window_end: usize,
    /// Fitted per-iteration factor of `curve - plateau_hat`.
    pub rho_hat: f64,
}

/// Fits `curve[k] - plateau ≈ c ρ^k` from `k = 0` until the excess first
/// drops below `decay` times its initial value (or `max_end`, if given).
pub fn fit_geometric_phase(curve: &[f64], decay: f64, max_end: Option<usize>) -> Result<GeometricFit> {
    if curve.len() < 6 {
        return Err(invalid("curve", "need at least six points"));
    }
    let tail = &curve[curve.len() - curve.len() / 3..];
    let plateau_hat = tail.iter().sum::<f64>() / tail.len() as f64;
    let excess: Vec<f64> = curve.iter().map(|c| c - plateau_hat).collect();
    if !(excess[0] > 0.0) {
        return Err(invalid("curve", "curve starts at or below its plateau"));
    }
    let threshold = decay * excess[0];
    let mut end = excess.iter().position(|&e| e < threshold).unwrap_or(curve.len()).saturating_sub(1);
    if let Some(cap) = max_end {
        end = end.min(cap);
    }
    if end < 1 {
        return Err(invalid("curve", "geometric phase shorter than two points"));
    }
    Ok(GeometricFit {
        plateau_hat,
        window_end: end,
        rho_hat: contraction_fit(&excess, 0, end)?,
    })
}

/// Runs gradient descent with step `1/L` until `|∇g| <= tol`.
pub fn minimize_by_gd(model: &dyn LossModel, x0: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let lip = model.constants().lipschitz;
    if !(lip > 0.0) {
        return Err(invalid("model", "needs a positive Lipschitz constant"));
    }
    let step = 1.0 / lip;
    let mut x = x0.to_vec();
    for _ in 0..max_iter {
        let g = model.grad_objective(&x);
        if norm(&g) <= tol {
            return Ok(x);
        }
        x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= step * gi);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient descent minimiser"));
        }
    }
    Err(invalid("max_iter", format!("gradient norm above {tol} after {max_iter} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run_gd, RunConfig};
    use crate::models::make_quadratic_model;

    #[test]
    fn rho_examples() {
        let b = rho_bound(1.0, 0.1, 1.0, 0.0, 2, 7);
        assert!((b.rho - 0.81).abs() < 1e-15);
        assert!(b.gamma_ok && b.m_ok && b.contracts);
        assert!(!rho_bound(1.0, 0.5, 2.0, 0.0, 1, 1).gamma_ok);

        let b = rho_bound(1.0, 0.1, 1.0, 1.0, 6, 10);
        // 1 - 0.1 * 1.9 + 2 * 6 * 0.01 / 10
        let by_hand = 1.0 - 0.19 + 0.012;
        assert!((b.rho - by_hand).abs() < 1e-14 && (b.rho - 0.822).abs() < 1e-12);
        assert!(b.m_ok);
        assert!(!rho_bound(1.0, 0.1, 1.0, 1.0, 6, 0).m_ok);
    }

    #[test]
    fn rho_monotone_in_m() {
        let mut prev = f64::INFINITY;
        for m in 1..200 {
            let r = rho_bound(0.5, 0.2, 1.5, 0.7, 3, m).rho;
            assert!(r <= prev);
            prev = r;
        }
        let a = rho_bound(1.0, 0.1, 1.0, 0.0, 2, 1).rho;
        let b = rho_bound(1.0, 0.1, 1.0, 0.0, 2, 1000).rho;
        assert_eq!(a, b);
    }

    #[test]
    fn fit_exact_geometric() {
        let curve: Vec<f64> = (0..60).map(|k| 0.81f64.powi(k)).collect();
        assert!((contraction_fit(&curve, 0, 20).unwrap() - 0.81).abs() < 1e-10);
        assert!((contraction_fit(&[2.0; 10], 0, 9).unwrap() - 1.0).abs() < 1e-15);
        assert!(contraction_fit(&[1.0, 0.0, 1.0], 0, 2).is_err());
        assert!(contraction_fit(&[1.0, 0.5], 0, 5).is_err());
    }

    #[test]
    fn fit_gd_quadratic_gap_curve() {
        let model = make_quadratic_model(1, vec![0.0], 1.0).unwrap();
        let cfg = RunConfig::new(0.1, 60, 1, 1, vec![1.0]).unwrap();
        let traj = run_gd(&model, &cfg).unwrap();
        let g_star = model.objective(&[0.0]);
        let gaps: Vec<f64> = traj.states().iter().map(|x| model.objective(x) - g_star).collect();
        for (k, g) in gaps.iter().enumerate() {
            assert!((g - 0.5 * 0.81f64.powi(k as i32)).abs() < 1e-12);
        }
        assert!((contraction_fit(&gaps, 0, 20).unwrap() - 0.81).abs() < 1e-6);
    }

    #[test]
    fn geometric_phase_with_plateau() {
        let curve: Vec<f64> = (0..300).map(|k| 0.5 * 0.81f64.powi(k) + 1e-3).collect();
        let fit = fit_geometric_phase(&curve, 0.05, None).unwrap();
        assert!((fit.plateau_hat - 1e-3).abs() < 1e-12);
        assert!((fit.rho_hat - 0.81).abs() < 1e-9);
        assert_eq!(fit.window_end, 14);
    }

    #[test]
    fn slope() {
        let xs = [0.1, 0.05, 0.025];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gd_minimizer_of_quadratic() {
        let model = make_quadratic_model(2, vec![0.3, -0.7], 1.0).unwrap();
        let x = minimize_by_gd(&model, &[5.0, 5.0], 1e-10, 1000).unwrap();
        assert!(dist_sq(&x, &[0.3, -0.7]) < 1e-20);
    }

    #[test]
    fn plateau_bound_reduces_without_noise_lipschitz() {
        let b = plateau_bound(1.0, 0.1, 1.0, 0.0, 1, 50, 1.0);
        assert!((b - 0.1 / (50.0 * 1.9)).abs() < 1e-15);
    }
}
