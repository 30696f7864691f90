//! The discrete and continuous processes compared against each other:
//! gradient descent, Gaussian-noise SGD, online M-SGD, the gradient-flow
//! ODE and an Euler–Maruyama discretisation of the limiting diffusion
//! `dX = -∇g(X) dt + sqrt(γ/m) σ(X) dB`.

mod interpolate;
mod processes;

pub use interpolate::{interpolate_gaussian_piece, interpolate_msgd};
pub use processes::{run_diffusion_em, run_gaussian_sgd, run_gd, run_msgd, run_ode, DEFAULT_EM_SUBSTEPS};

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numerics::RngStream;
use crate::weights::WeightScheme;

/// Coordinates beyond this magnitude count as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e150;

/// Shared settings of one run: step size, iteration count, the pair
/// `(n, m)` and the common starting point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    gamma: f64,
    steps: usize,
    m: usize,
    n: usize,
    x0: Vec<f64>,
}

impl RunConfig {
    pub fn new(gamma: f64, steps: usize, m: usize, n: usize, x0: Vec<f64>) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid("gamma", format!("step size must lie in (0, 1), got {gamma}")));
        }
        if steps == 0 {
            return Err(invalid("steps", "need at least one iteration"));
        }
        if m < 1 || m > n {
            return Err(invalid("m", format!("need 1 <= m <= n, got m={m}, n={n}")));
        }
        if x0.is_empty() || x0.iter().any(|x| !x.is_finite()) {
            return Err(invalid("x0", "starting point must be a finite nonempty vector"));
        }
        Ok(Self {
            gamma,
            steps,
            m,
            n,
            x0,
        })
    }

    /// `K = T/γ`, which must be an integer up to roundoff.
    pub fn with_horizon(gamma: f64, horizon: f64, m: usize, n: usize, x0: Vec<f64>) -> Result<Self> {
        let steps = grid_steps(horizon, gamma, "horizon")?;
        Self::new(gamma, steps, m, n, x0)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.gamma
    }
}

pub(crate) fn grid_steps(horizon: f64, step: f64, name: &'static str) -> Result<usize> {
    if !(horizon > 0.0) || !(step > 0.0) {
        return Err(invalid(name, "horizon and step must be positive"));
    }
    let k = (horizon / step).round();
    if k < 1.0 || (k * step - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(invalid(
            name,
            format!("{horizon} is not an integer multiple of the step {step}"),
        ));
    }
    Ok(k as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessKind {
    Gd,
    GaussianSgd,
    Msgd,
    Ode,
    DiffusionEm,
}

impl ProcessKind {
    pub fn label(self) -> &'static str {
        match self {
            ProcessKind::Gd => "gd",
            ProcessKind::GaussianSgd => "gaussian-sgd",
            ProcessKind::Msgd => "msgd",
            ProcessKind::Ode => "ode",
            ProcessKind::DiffusionEm => "diffusion-em",
        }
    }
}

/// States `x_0..x_K` recorded every `dt` time units.
#[derive(Clone, Debug)]
pub struct Trajectory {
    kind: ProcessKind,
    dt: f64,
    states: Vec<Vec<f64>>,
    config: Option<RunConfig>,
    scheme: Option<WeightScheme>,
    /// M-SGD: `Σ_i w_{i,k} ∇l(x_k, u_{i,k})` for each step.
    drifts: Vec<Vec<f64>>,
    /// Gaussian SGD: stream whose child `k` regenerates `ξ_{k+1}`.
    noise: Option<RngStream>,
}

impl Trajectory {
    pub fn kind(&self) -> ProcessKind {
        self.kind
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least x0")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.dt
    }

    pub fn config(&self) -> Option<&RunConfig> {
        self.config.as_ref()
    }

    pub fn scheme(&self) -> Option<&WeightScheme> {
        self.scheme.as_ref()
    }

    pub fn drifts(&self) -> &[Vec<f64>] {
        &self.drifts
    }

    /// State at time `t`, which must be a grid point up to roundoff.
    pub fn state_at_time(&self, t: f64) -> Result<&[f64]> {
        let horizon = self.horizon();
        if t < 0.0 || t > horizon * (1.0 + 1e-12) {
            return Err(Error::OutOfRange { t, horizon });
        }
        let k = (t / self.dt).round();
        if (k * self.dt - t).abs() > 1e-9 * self.dt.max(t) {
            return Err(invalid("t", format!("{t} is not on the grid of spacing {}", self.dt)));
        }
        Ok(&self.states[k as usize])
    }

    /// CSV with columns `k,t,x1..xp`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let p = self.states[0].len();
        let mut header = String::from("k,t");
        for j in 1..=p {
            header.push_str(&format!(",x{j}"));
        }
        writeln!(w, "{header}")?;
        for (k, s) in self.states.iter().enumerate() {
            let mut line = format!("{k},{:.16e}", k as f64 * self.dt);
            for x in s {
                line.push_str(&format!(",{x:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

pub(crate) fn check_state(state: &[f64], process: &'static str, iteration: usize) -> Result<()> {
    if state.iter().all(|x| x.is_finite() && x.abs() <= DIVERGENCE_BOUND) {
        Ok(())
    } else {
        Err(Error::Diverged { process, iteration })
    }
}
