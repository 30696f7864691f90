mod clt;
mod converge;
mod gap;
mod gd_ode;
mod moments;
mod wass;

use std::fs;
use std::path::Path;

use msgd_core::models::{
    generate_reference_logistic_dataset, make_logistic_model, make_quadratic_model, make_uniform_clt_model,
    LogisticDataset, LossModel,
};
use msgd_core::numerics::{DenseMatrix, RngStream};
use msgd_core::weights::Estimate;
use serde_json::{Map, Value};

use crate::config::{Command, ExperimentConfig, ModelSpec};
use crate::report::{Artifacts, Check, ExperimentReport};
use crate::RunError;

/// What a command hands back besides the files it wrote.
#[derive(Default)]
pub(crate) struct Outcome {
    pub checks: Vec<Check>,
    pub details: Map<String, Value>,
}

impl Outcome {
    pub fn detail(&mut self, key: &str, value: impl serde::Serialize) {
        self.details
            .insert(key.to_string(), serde_json::to_value(value).expect("details are plain data"));
    }
}

/// Runs one experiment, writing CSV tables and `report.json` into `out_dir`.
/// Replications use the current rayon pool.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport, RunError> {
    let name = config.command.name();
    let mut artifacts = Artifacts::new(out_dir, name, config.seed, config.echo())?;
    let root = RngStream::root(config.seed).derive(name);
    let outcome = match &config.command {
        Command::WeightsMoments { params, thresholds } => moments::run(params, thresholds, &root, &mut artifacts)?,
        Command::Clt { params, thresholds } => clt::run(params, thresholds, &root, &mut artifacts)?,
        Command::Thm1Gap { params, thresholds } => gap::run(params, thresholds, &root, &mut artifacts)?,
        Command::WassScaling { params, thresholds } => wass::run(params, thresholds, &root, &mut artifacts)?,
        Command::Converge { params, thresholds } => converge::run(params, thresholds, &root, &mut artifacts)?,
        Command::GdOde { params, thresholds } => gd_ode::run(params, thresholds, &root, &mut artifacts)?,
    };
    let rows: Vec<Vec<_>> = outcome
        .checks
        .iter()
        .map(|c| {
            vec![
                c.name.clone().into(),
                c.observed.into(),
                c.target.into(),
                c.tolerance.into(),
                serde_json::to_value(c.comparison).unwrap().as_str().unwrap_or("").into(),
                (if c.pass { "pass" } else { "fail" }).into(),
            ]
        })
        .collect();
    artifacts.write_csv(
        "checks.csv",
        &["name", "observed", "target", "tolerance", "comparison", "verdict"],
        &rows,
    )?;
    let mut files = artifacts.into_files();
    files.push("report.json".into());
    let report = ExperimentReport {
        command: name,
        seed: config.seed,
        config: config.echo().clone(),
        resolved: config.command.clone(),
        pass: !outcome.checks.is_empty() && outcome.checks.iter().all(|c| c.pass),
        checks: outcome.checks,
        files,
        details: Value::Object(outcome.details),
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    let path = out_dir.join("report.json");
    fs::write(&path, json).map_err(|e| RunError::io(&path, e))?;
    Ok(report)
}

pub(crate) fn logistic_dataset(spec: &ModelSpec, stream: &RngStream) -> Result<LogisticDataset, RunError> {
    let ModelSpec::Logistic { p, t, kappa, dataset } = spec else {
        unreachable!("caller checked the model kind");
    };
    // the penalty is replaced per run; any positive placeholder will do here
    let kappa = kappa.unwrap_or(1.0);
    let ds = match dataset {
        Some(path) => {
            let f = fs::File::open(path).map_err(|e| RunError::io(path, e))?;
            LogisticDataset::read_csv(std::io::BufReader::new(f), kappa)?
        }
        None => generate_reference_logistic_dataset(&mut stream.derive("dataset"), *p, *t, kappa)?,
    };
    if ds.p() != *p || ds.t() != *t {
        return Err(msgd_core::Error::DimensionMismatch {
            context: "logistic dataset (p, t)",
            expected: p * t,
            actual: ds.p() * ds.t(),
        }
        .into());
    }
    Ok(ds)
}

pub(crate) fn build_model(spec: &ModelSpec, stream: &RngStream) -> Result<Box<dyn LossModel>, RunError> {
    Ok(match spec {
        ModelSpec::Quadratic { p, s, theta_star } => Box::new(make_quadratic_model(
            *p,
            theta_star.clone().unwrap_or_else(|| vec![0.0; *p]),
            *s,
        )?),
        ModelSpec::Uniform { p } => Box::new(make_uniform_clt_model(*p)?),
        ModelSpec::Logistic { .. } => Box::new(make_logistic_model(logistic_dataset(spec, stream)?)?),
    })
}

pub(crate) fn or_ones(x: &Option<Vec<f64>>, p: usize) -> Vec<f64> {
    x.clone().unwrap_or_else(|| vec![1.0; p])
}

pub(crate) fn or_zeros(x: &Option<Vec<f64>>, p: usize) -> Vec<f64> {
    x.clone().unwrap_or_else(|| vec![0.0; p])
}

/// `|value - target|` in standard errors; rounding-level differences with a
/// zero standard error count as zero.
pub(crate) fn z_score(est: Estimate, target: f64) -> f64 {
    let diff = (est.value - target).abs();
    if est.se > 0.0 {
        diff / est.se
    } else if diff <= 1e-12 * target.abs().max(1e-300) || diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Tolerance of `k` standard errors plus rounding slack relative to the target.
pub(crate) fn se_tolerance(k: f64, se: f64, target: f64) -> f64 {
    k * se + 1e-12 * target.abs()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], p: usize) -> Result<DenseMatrix, RunError> {
    Ok(DenseMatrix::from_row_major(rows.len(), p, rows.concat())?)
}
