//! Experiment configuration.
//!
//! A config is a single JSON object:
//!
//! ```json
//! { "command": "clt", "seed": 7, "out": "runs/clt",
//!   "params": { ... }, "thresholds": { ... } }
//! ```
//!
//! Only `command` is required. `params` and `thresholds` are specific to the
//! command; every field has a documented default and unknown keys anywhere
//! are rejected.

use std::fmt;
use std::path::PathBuf;

use msgd_core::dynamics::RunConfig;
use msgd_core::weights::{BaseDistribution, SchemeKind, WeightScheme};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const COMMANDS: [(&str, &str); 6] = [
    ("weights-moments", "Monte Carlo mean, variance and covariance of the weight laws"),
    ("clt", "scaled M-SGD error samples, histograms and KS normality"),
    ("thm1-gap", "second-moment gap between the M-SGD and full-sample errors"),
    ("wass-scaling", "sliced W2 between M-SGD and the diffusion as the step shrinks"),
    ("converge", "optimality-gap and MSE curves under strong convexity"),
    ("gd-ode", "gradient descent against the gradient flow"),
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Syntax(String),
    #[error("`{key}`: {message}")]
    Key { key: String, message: String },
}

fn key_err(key: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError::Key {
        key: key.into(),
        message: message.to_string(),
    }
}

/// Model selection. `kind` is one of `quadratic`, `uniform`, `logistic`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `g(θ) = |θ - θ*|²/2 + p s²/2` with `∇l(θ, u) = θ - θ* + s u`, `u ~ N(0, I)`.
    Quadratic {
        p: usize,
        #[serde(default = "one")]
        s: f64,
        /// Defaults to the origin.
        #[serde(default)]
        theta_star: Option<Vec<f64>>,
    },
    /// `∇l(θ, u) = u` with `u ~ Unif(-1, 1)^p`.
    Uniform { p: usize },
    /// Ridge logistic regression on a synthetic dataset (`y ~ Ber(1/2)`,
    /// `x ~ N(0, I)`) or on a CSV file with header `y,x1,..,xp`.
    Logistic {
        p: usize,
        t: usize,
        #[serde(default)]
        kappa: Option<f64>,
        #[serde(default)]
        dataset: Option<PathBuf>,
    },
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        match *self {
            ModelSpec::Quadratic { p, .. } | ModelSpec::Uniform { p } | ModelSpec::Logistic { p, .. } => p,
        }
    }

    fn validate(&self, key: &str) -> Result<(), ConfigError> {
        if self.dim() == 0 {
            return Err(key_err(format!("{key}.p"), "dimension must be positive"));
        }
        match self {
            ModelSpec::Quadratic { p, s, theta_star } => {
                if !(*s >= 0.0 && s.is_finite()) {
                    return Err(key_err(format!("{key}.s"), "noise scale must be finite and >= 0"));
                }
                if let Some(ts) = theta_star {
                    if ts.len() != *p {
                        return Err(key_err(format!("{key}.theta_star"), format!("expected {p} entries")));
                    }
                }
            }
            ModelSpec::Uniform { .. } => {}
            ModelSpec::Logistic { t, kappa, .. } => {
                if *t == 0 {
                    return Err(key_err(format!("{key}.t"), "dataset size must be positive"));
                }
                if let Some(k) = kappa {
                    check_kappa(&format!("{key}.kappa"), *k)?;
                }
            }
        }
        Ok(())
    }
}

fn check_kappa(key: &str, k: f64) -> Result<(), ConfigError> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(key_err(key, format!("ridge penalty must be positive, got {k}")))
    }
}

/// Weight law. `kind` is one of `minibatch`, `gaussian-structured`,
/// `dirichlet`; the Gaussian-structured base defaults to `standard-normal`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SchemeSpec {
    Minibatch,
    GaussianStructured {
        #[serde(default = "standard_normal")]
        base: BaseDistribution,
    },
    Dirichlet,
}

fn standard_normal() -> BaseDistribution {
    BaseDistribution::StandardNormal
}

impl SchemeSpec {
    pub fn kind(self) -> SchemeKind {
        match self {
            SchemeSpec::Minibatch => SchemeKind::Minibatch,
            SchemeSpec::GaussianStructured { base } => SchemeKind::GaussianStructured { base },
            SchemeSpec::Dirichlet => SchemeKind::Dirichlet,
        }
    }

    pub fn label(self) -> String {
        self.kind().label()
    }

    pub fn build(self, n: usize, m: usize) -> msgd_core::Result<WeightScheme> {
        WeightScheme::new(self.kind(), n, m)
    }
}

fn all_schemes() -> Vec<SchemeSpec> {
    vec![
        SchemeSpec::Minibatch,
        SchemeSpec::GaussianStructured {
            base: BaseDistribution::StandardNormal,
        },
        SchemeSpec::Dirichlet,
    ]
}

fn check_schemes(key: &str, schemes: &[SchemeSpec], n: usize, m: usize) -> Result<(), ConfigError> {
    if schemes.is_empty() {
        return Err(key_err(key, "need at least one scheme"));
    }
    for (i, s) in schemes.iter().enumerate() {
        s.build(n, m).map_err(|e| key_err(format!("{key}[{i}]"), e))?;
        if schemes[..i].contains(s) {
            return Err(key_err(format!("{key}[{i}]"), "duplicate scheme"));
        }
    }
    Ok(())
}

fn check_gamma(key: &str, gamma: f64) -> Result<(), ConfigError> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(key_err(key, format!("step size must satisfy 0 < gamma < 1, got {gamma}")))
    }
}

fn check_gammas(key: &str, gammas: &[f64]) -> Result<(), ConfigError> {
    if gammas.is_empty() {
        return Err(key_err(key, "need at least one step size"));
    }
    gammas.iter().enumerate().try_for_each(|(i, &g)| check_gamma(&format!("{key}[{i}]"), g))
}

fn check_at_least(key: &str, value: usize, min: usize) -> Result<(), ConfigError> {
    if value >= min {
        Ok(())
    } else {
        Err(key_err(key, format!("must be at least {min}, got {value}")))
    }
}

fn check_positive(key: &str, value: f64) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(key_err(key, format!("must be positive, got {value}")))
    }
}

fn check_point(key: &str, x: &Option<Vec<f64>>, p: usize) -> Result<(), ConfigError> {
    match x {
        Some(v) if v.len() != p => Err(key_err(key, format!("expected {p} entries, got {}", v.len()))),
        Some(v) if v.iter().any(|a| !a.is_finite()) => Err(key_err(key, "entries must be finite")),
        _ => Ok(()),
    }
}

fn check_pair(key: &str, n: usize, m: usize) -> Result<(), ConfigError> {
    if m >= 1 && m <= n {
        Ok(())
    } else {
        Err(key_err(key, format!("need 1 <= m <= n, got n={n}, m={m}")))
    }
}

// ---------------------------------------------------------------------------
// per-command parameters

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsMomentsParams {
    pub n: usize,
    pub m: usize,
    pub reps: usize,
    pub schemes: Vec<SchemeSpec>,
    /// Coordinates whose mean, variance and covariance with the next
    /// coordinate are checked. Defaults to `{0, 1, n/2, n-1}`.
    pub coordinates: Option<Vec<usize>>,
}

impl Default for WeightsMomentsParams {
    fn default() -> Self {
        Self {
            n: 2000,
            m: 400,
            reps: 20_000,
            schemes: all_schemes(),
            coordinates: None,
        }
    }
}

impl WeightsMomentsParams {
    pub fn checked_coordinates(&self) -> Vec<usize> {
        match &self.coordinates {
            Some(c) => c.clone(),
            None => {
                let mut c = vec![0, 1, self.n / 2, self.n - 1];
                c.dedup();
                c
            }
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        check_pair("params.m", self.n, self.m)?;
        check_at_least("params.reps", self.reps, 100)?;
        check_schemes("params.schemes", &self.schemes, self.n, self.m)?;
        if let Some(c) = &self.coordinates {
            if let Some(bad) = c.iter().find(|&&i| i >= self.n) {
                return Err(key_err("params.coordinates", format!("index {bad} out of range for n={}", self.n)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsMomentsThresholds {
    pub mean_se: f64,
    pub var_se: f64,
    pub cov_se: f64,
    pub sum_sq_se: f64,
}

impl Default for WeightsMomentsThresholds {
    fn default() -> Self {
        Self {
            mean_se: 4.0,
            var_se: 4.0,
            cov_se: 4.0,
            sum_sq_se: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltParams {
    pub model: ModelSpec,
    pub schemes: Vec<SchemeSpec>,
    pub n: usize,
    pub m: usize,
    pub samples: usize,
    /// Evaluation point; defaults to the origin.
    pub theta: Option<Vec<f64>>,
    pub bins: usize,
}

impl Default for CltParams {
    fn default() -> Self {
        Self {
            model: ModelSpec::Uniform { p: 1 },
            schemes: vec![SchemeSpec::Dirichlet],
            n: 10_000,
            m: 2000,
            samples: 10_000,
            theta: None,
            bins: 50,
        }
    }
}

impl CltParams {
    fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate("params.model")?;
        check_pair("params.m", self.n, self.m)?;
        check_at_least("params.samples", self.samples, 100)?;
        check_at_least("params.bins", self.bins, 1)?;
        check_schemes("params.schemes", &self.schemes, self.n, self.m)?;
        check_point("params.theta", &self.theta, self.model.dim())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltThresholds {
    pub ks_max: f64,
    pub cov_se: f64,
}

impl Default for CltThresholds {
    fn default() -> Self {
        Self {
            ks_max: 0.03,
            cov_se: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapParams {
    pub model: ModelSpec,
    pub schemes: Vec<SchemeSpec>,
    /// `(n, m)` pairs.
    pub sizes: Vec<(usize, usize)>,
    pub theta: Option<Vec<f64>>,
    pub reps: usize,
}

impl Default for GapParams {
    fn default() -> Self {
        Self {
            model: ModelSpec::Quadratic {
                p: 2,
                s: 1.0,
                theta_star: None,
            },
            schemes: all_schemes(),
            sizes: vec![(10_000, 2500), (10_000, 9000)],
            theta: None,
            reps: 2000,
        }
    }
}

impl GapParams {
    fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate("params.model")?;
        if self.sizes.is_empty() {
            return Err(key_err("params.sizes", "need at least one (n, m) pair"));
        }
        for (i, &(n, m)) in self.sizes.iter().enumerate() {
            check_pair(&format!("params.sizes[{i}]"), n, m)?;
            check_schemes("params.schemes", &self.schemes, n, m)?;
        }
        check_at_least("params.reps", self.reps, 1000)?;
        check_point("params.theta", &self.theta, self.model.dim())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapThresholds {
    pub gap_se: f64,
}

impl Default for GapThresholds {
    fn default() -> Self {
        Self { gap_se: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WassParams {
    pub model: ModelSpec,
    pub scheme: SchemeSpec,
    /// Defaults to the all-ones vector.
    pub x0: Option<Vec<f64>>,
    pub horizon: f64,
    pub n: usize,
    pub m: usize,
    pub reps: usize,
    pub gammas: Vec<f64>,
    /// Euler–Maruyama inner steps per γ-step.
    pub em_substeps: usize,
    /// Optional rerun with a finer diffusion discretisation; the scaling
    /// verdicts must not change.
    pub check_substeps: Option<usize>,
    pub directions: usize,
}

impl Default for WassParams {
    fn default() -> Self {
        Self {
            model: ModelSpec::Quadratic {
                p: 2,
                s: 1.0,
                theta_star: None,
            },
            scheme: SchemeSpec::Minibatch,
            x0: None,
            horizon: 1.0,
            n: 512,
            m: 64,
            reps: 500,
            gammas: vec![0.2, 0.1, 0.05, 0.025],
            em_substeps: 50,
            check_substeps: Some(100),
            directions: 200,
        }
    }
}

impl WassParams {
    fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate("params.model")?;
        check_pair("params.m", self.n, self.m)?;
        check_schemes("params.scheme", &[self.scheme], self.n, self.m)?;
        check_point("params.x0", &self.x0, self.model.dim())?;
        check_positive("params.horizon", self.horizon)?;
        check_gammas("params.gammas", &self.gammas)?;
        if self.gammas.len() < 2 {
            return Err(key_err("params.gammas", "need at least two step sizes for a slope"));
        }
        for (i, &g) in self.gammas.iter().enumerate() {
            RunConfig::with_horizon(g, self.horizon, self.m, self.n, vec![0.0; self.model.dim()])
                .map_err(|e| key_err(format!("params.gammas[{i}]"), e))?;
        }
        check_at_least("params.reps", self.reps, 2)?;
        check_at_least("params.em_substeps", self.em_substeps, 1)?;
        if let Some(r) = self.check_substeps {
            check_at_least("params.check_substeps", r, 1)?;
        }
        check_at_least("params.directions", self.directions, 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WassThresholds {
    /// Allowed relative increase of Ŵ₂² when γ is halved.
    pub monotone_slack: f64,
    pub slope_min: f64,
    pub slope_max: f64,
}

impl Default for WassThresholds {
    fn default() -> Self {
        Self {
            monotone_slack: 0.1,
            slope_min: 0.8,
            slope_max: 2.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessSpec {
    Gd,
    GaussianSgd,
    Msgd,
}

impl ProcessSpec {
    pub fn label(self) -> &'static str {
        match self {
            ProcessSpec::Gd => "gd",
            ProcessSpec::GaussianSgd => "gaussian-sgd",
            ProcessSpec::Msgd => "msgd",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeParams {
    pub model: ModelSpec,
    pub processes: Vec<ProcessSpec>,
    /// Weight laws for the M-SGD runs.
    pub schemes: Vec<SchemeSpec>,
    pub gammas: Vec<f64>,
    /// Ridge penalties to sweep (logistic model only).
    pub kappas: Option<Vec<f64>>,
    pub n: usize,
    pub m: usize,
    /// Iteration count; mutually exclusive with `horizon`.
    pub steps: Option<usize>,
    /// Fixed horizon `T`, giving `K = T/γ` iterations.
    pub horizon: Option<f64>,
    pub reps: usize,
    /// Defaults to the all-ones vector.
    pub x0: Option<Vec<f64>>,
    /// Replication batches used for standard errors of fitted rates.
    pub batches: usize,
    /// The geometric phase ends once the excess over the plateau drops
    /// below this fraction of its initial value.
    pub decay: f64,
    /// Iterations per block in the shape checks.
    pub block: usize,
}

impl Default for ConvergeParams {
    fn default() -> Self {
        Self {
            model: ModelSpec::Quadratic {
                p: 1,
                s: 1.0,
                theta_star: None,
            },
            processes: vec![ProcessSpec::GaussianSgd, ProcessSpec::Msgd],
            schemes: all_schemes(),
            gammas: vec![0.1],
            kappas: None,
            n: 1000,
            m: 50,
            steps: None,
            horizon: None,
            reps: 500,
            x0: None,
            batches: 10,
            decay: 0.05,
            block: 10,
        }
    }
}

impl ConvergeParams {
    pub const DEFAULT_STEPS: usize = 200;

    pub fn steps_for(&self, gamma: f64) -> usize {
        match (self.steps, self.horizon) {
            (Some(k), _) => k,
            (None, Some(t)) => (t / gamma).round() as usize,
            (None, None) => Self::DEFAULT_STEPS,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate("params.model")?;
        if self.processes.is_empty() {
            return Err(key_err("params.processes", "need at least one process"));
        }
        check_pair("params.m", self.n, self.m)?;
        if self.processes.contains(&ProcessSpec::Msgd) {
            check_schemes("params.schemes", &self.schemes, self.n, self.m)?;
        }
        check_gammas("params.gammas", &self.gammas)?;
        match (&self.model, &self.kappas) {
            (ModelSpec::Logistic { .. }, Some(ks)) => {
                if ks.is_empty() {
                    return Err(key_err("params.kappas", "need at least one penalty"));
                }
                ks.iter().enumerate().try_for_each(|(i, &k)| check_kappa(&format!("params.kappas[{i}]"), k))?;
            }
            (ModelSpec::Logistic { kappa: None, .. }, None) => {
                return Err(key_err("params.model.kappa", "logistic model needs `kappa` or `params.kappas`"));
            }
            (ModelSpec::Logistic { .. }, None) => {}
            (_, Some(_)) => return Err(key_err("params.kappas", "only meaningful for the logistic model")),
            (_, None) => {}
        }
        match (self.steps, self.horizon) {
            (Some(_), Some(_)) => return Err(key_err("params.horizon", "give either `steps` or `horizon`, not both")),
            (Some(k), None) => check_at_least("params.steps", k, 1)?,
            (None, Some(t)) => {
                for (i, &g) in self.gammas.iter().enumerate() {
                    RunConfig::with_horizon(g, t, self.m, self.n, vec![0.0; self.model.dim()])
                        .map_err(|e| key_err(format!("params.gammas[{i}]"), e))?;
                }
            }
            (None, None) => {}
        }
        check_at_least("params.batches", self.batches, 2)?;
        check_at_least("params.reps", self.reps, 2 * self.batches)?;
        if self.reps % self.batches != 0 {
            return Err(key_err("params.reps", format!("must be a multiple of batches ({})", self.batches)));
        }
        check_point("params.x0", &self.x0, self.model.dim())?;
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(key_err("params.decay", "must lie in (0, 1)"));
        }
        check_at_least("params.block", self.block, 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeThresholds {
    /// Curve against the exact second-moment recursion (quadratic model).
    pub recursion_se: f64,
    /// Fitted rate against the bound's ρ (quadratic model).
    pub rho_tol: f64,
    /// A block mean may exceed its predecessor by at most this many SE.
    pub decrease_se: f64,
    /// Final plateau must be below this fraction of the initial value.
    pub decrease_factor: f64,
    /// Last two sixths of the curve agree within max(plateau_se SE,
    /// plateau_rel × level).
    pub plateau_se: f64,
    pub plateau_rel: f64,
    /// Slack, in combined SE, for the ordering of fitted rates in κ.
    pub order_se: f64,
}

impl Default for ConvergeThresholds {
    fn default() -> Self {
        Self {
            recursion_se: 4.0,
            rho_tol: 0.02,
            decrease_se: 4.0,
            decrease_factor: 0.1,
            plateau_se: 3.0,
            plateau_rel: 0.1,
            order_se: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GdOdeParams {
    pub model: ModelSpec,
    pub x0: Option<Vec<f64>>,
    pub horizon: f64,
    pub gammas: Vec<f64>,
    /// RK4 steps per γ-step.
    pub ode_refine: usize,
}

impl Default for GdOdeParams {
    fn default() -> Self {
        Self {
            model: ModelSpec::Quadratic {
                p: 1,
                s: 1.0,
                theta_star: None,
            },
            x0: None,
            horizon: 1.0,
            gammas: vec![0.1, 0.05, 0.025, 0.0125],
            ode_refine: 20,
        }
    }
}

impl GdOdeParams {
    fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate("params.model")?;
        check_point("params.x0", &self.x0, self.model.dim())?;
        check_positive("params.horizon", self.horizon)?;
        check_gammas("params.gammas", &self.gammas)?;
        if self.gammas.len() < 2 {
            return Err(key_err("params.gammas", "need at least two step sizes for a slope"));
        }
        for (i, &g) in self.gammas.iter().enumerate() {
            RunConfig::with_horizon(g, self.horizon, 1, 1, vec![0.0; self.model.dim()])
                .map_err(|e| key_err(format!("params.gammas[{i}]"), e))?;
        }
        check_at_least("params.ode_refine", self.ode_refine, 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GdOdeThresholds {
    pub slope_min: f64,
    pub slope_max: f64,
}

impl Default for GdOdeThresholds {
    fn default() -> Self {
        Self {
            slope_min: 0.8,
            slope_max: 1.2,
        }
    }
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    WeightsMoments {
        params: WeightsMomentsParams,
        thresholds: WeightsMomentsThresholds,
    },
    Clt {
        params: CltParams,
        thresholds: CltThresholds,
    },
    #[serde(rename = "thm1-gap")]
    Thm1Gap {
        params: GapParams,
        thresholds: GapThresholds,
    },
    WassScaling {
        params: WassParams,
        thresholds: WassThresholds,
    },
    Converge {
        params: ConvergeParams,
        thresholds: ConvergeThresholds,
    },
    GdOde {
        params: GdOdeParams,
        thresholds: GdOdeThresholds,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::WeightsMoments { .. } => "weights-moments",
            Command::Clt { .. } => "clt",
            Command::Thm1Gap { .. } => "thm1-gap",
            Command::WassScaling { .. } => "wass-scaling",
            Command::Converge { .. } => "converge",
            Command::GdOde { .. } => "gd-ode",
        }
    }
}

/// A validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub command: Command,
    raw: Value,
}

impl ExperimentConfig {
    /// Replaces the seed (the `--seed` flag).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let Value::Object(map) = &mut self.raw {
            map.insert("seed".into(), Value::from(seed));
        }
        self
    }

    /// The config as written, with the effective seed.
    pub fn echo(&self) -> &Value {
        &self.raw
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document<P, T> {
    #[allow(dead_code)]
    command: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    params: P,
    #[serde(default)]
    thresholds: T,
}

fn parse_document<P, T>(raw: &str) -> Result<(u64, Option<PathBuf>, P, T), ConfigError>
where
    P: DeserializeOwned + Default,
    T: DeserializeOwned + Default,
{
    let mut de = serde_json::Deserializer::from_str(raw);
    let doc: Document<P, T> = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        key_err(if key == "." { "<root>".into() } else { key }, inner)
    })?;
    Ok((doc.seed, doc.out, doc.params, doc.thresholds))
}

fn check_thresholds(t: &impl Serialize) -> Result<(), ConfigError> {
    if let Ok(Value::Object(map)) = serde_json::to_value(t) {
        for (k, v) in map {
            if let Some(x) = v.as_f64() {
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(key_err(format!("thresholds.{k}"), "must be finite and nonnegative"));
                }
            }
        }
    }
    Ok(())
}

/// Parses and validates a config. Syntax errors carry line and column;
/// schema and range errors name the offending key.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(raw).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let Value::Object(map) = &value else {
        return Err(key_err("<root>", "config must be a JSON object"));
    };
    let command = match map.get("command") {
        Some(Value::String(s)) => s.as_str(),
        Some(_) => return Err(key_err("command", "must be a string")),
        None => return Err(key_err("command", "missing; see --list-commands")),
    };
    macro_rules! build {
        ($variant:ident, $validate:expr) => {{
            let (seed, out, params, thresholds) = parse_document(raw)?;
            $validate(&params)?;
            check_thresholds(&thresholds)?;
            (seed, out, Command::$variant { params, thresholds })
        }};
    }
    let (seed, out, command) = match command {
        "weights-moments" => build!(WeightsMoments, WeightsMomentsParams::validate),
        "clt" => build!(Clt, CltParams::validate),
        "thm1-gap" => build!(Thm1Gap, GapParams::validate),
        "wass-scaling" => build!(WassScaling, WassParams::validate),
        "converge" => build!(Converge, ConvergeParams::validate),
        "gd-ode" => build!(GdOde, GdOdeParams::validate),
        other => {
            let names: Vec<&str> = COMMANDS.iter().map(|c| c.0).collect();
            return Err(key_err("command", format!("unknown command `{other}`; expected one of {}", names.join(", "))));
        }
    };
    let slope_range = match &command {
        Command::WassScaling { thresholds, .. } => Some((thresholds.slope_min, thresholds.slope_max)),
        Command::GdOde { thresholds, .. } => Some((thresholds.slope_min, thresholds.slope_max)),
        _ => None,
    };
    if let Some((lo, hi)) = slope_range {
        if lo > hi {
            return Err(key_err("thresholds.slope_min", "must not exceed slope_max"));
        }
    }
    Ok(ExperimentConfig {
        seed,
        out,
        command,
        raw: value,
    })
}
