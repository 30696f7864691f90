//! Ridge-penalised logistic regression on a fixed dataset.
//!
//! `g(β) = (1/t) Σ [-y_i x_iᵀβ + log(1 + exp(x_iᵀβ))] + κ|β|²`, with data
//! resampled uniformly with replacement from the `t` rows at every step.

use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::numerics::{dot, norm_sq, top_eigenvalue_psd, DenseMatrix, RngStream};

use super::{LossModel, ModelConstants};

/// `t` labelled rows `(y_i, x_i)` plus the ridge penalty `κ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticDataset {
    labels: Vec<f64>,
    covariates: DenseMatrix,
    kappa: f64,
}

impl LogisticDataset {
    pub fn new(labels: Vec<f64>, covariates: DenseMatrix, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(invalid("kappa", format!("ridge penalty must be positive, got {kappa}")));
        }
        if labels.is_empty() {
            return Err(invalid("t", "dataset must contain at least one row"));
        }
        if labels.len() != covariates.rows() {
            return Err(Error::DimensionMismatch {
                context: "LogisticDataset::new",
                expected: covariates.rows(),
                actual: labels.len(),
            });
        }
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(invalid("labels", "labels must be 0 or 1"));
        }
        Ok(Self {
            labels,
            covariates,
            kappa,
        })
    }

    pub fn t(&self) -> usize {
        self.labels.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.cols()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn covariates(&self) -> &DenseMatrix {
        &self.covariates
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        Self::new(self.labels.clone(), self.covariates.clone(), kappa)
    }

    /// Header `y,x1,..,xp`, one row per datum, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("y".to_string())
            .chain((1..=self.p()).map(|j| format!("x{j}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.t() {
            let mut line = format!("{}", self.labels[i]);
            for x in self.covariates.row(i) {
                line.push(',');
                line.push_str(&format!("{x:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, kappa: f64) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or(Error::Dataset { line: 1, reason: "empty file".into() })??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"y") || cols.len() < 2 {
            return Err(Error::Dataset { line: 1, reason: format!("bad header `{header}`") });
        }
        for (j, c) in cols.iter().enumerate().skip(1) {
            if *c != format!("x{j}") {
                return Err(Error::Dataset { line: 1, reason: format!("bad column `{c}`") });
            }
        }
        let p = cols.len() - 1;
        let mut labels = Vec::new();
        let mut entries = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let lineno = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != p + 1 {
                return Err(Error::Dataset {
                    line: lineno,
                    reason: format!("expected {} fields, got {}", p + 1, fields.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Dataset { line: lineno, reason: format!("bad number `{s}`") })
            };
            labels.push(parse(fields[0])?);
            for f in &fields[1..] {
                entries.push(parse(f)?);
            }
        }
        let t = labels.len();
        if t == 0 {
            return Err(Error::Dataset { line: 2, reason: "no data rows".into() });
        }
        Self::new(labels, DenseMatrix::from_row_major(t, p, entries)?, kappa)
    }
}

/// `y_i ~ Ber(1/2)`, `x_i ~ N(0, I_p)`, all iid. The population minimiser
/// is `β = 0`.
pub fn generate_reference_logistic_dataset(
    stream: &mut RngStream,
    p: usize,
    t: usize,
    kappa: f64,
) -> Result<LogisticDataset> {
    if p == 0 || t == 0 {
        return Err(invalid("p/t", "dimension and dataset size must be positive"));
    }
    let mut labels = Vec::with_capacity(t);
    let mut entries = Vec::with_capacity(t * p);
    for _ in 0..t {
        labels.push(if stream.next_bit() { 1.0 } else { 0.0 });
        for _ in 0..p {
            entries.push(stream.std_normal());
        }
    }
    LogisticDataset::new(labels, DenseMatrix::from_row_major(t, p, entries)?, kappa)
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Clone, Debug)]
pub struct LogisticModel {
    data: LogisticDataset,
    /// Largest eigenvalue of `X Xᵀ = Σ x_i x_iᵀ`.
    gram_top_eigenvalue: f64,
    noise_lipschitz: f64,
    h1_sq_mean: f64,
}

pub fn make_logistic_model(dataset: LogisticDataset) -> Result<LogisticModel> {
    let p = dataset.p();
    let t = dataset.t();
    let x = dataset.covariates();
    let mut gram = DenseMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..=a {
            let v: f64 = (0..t).map(|i| x.get(i, a) * x.get(i, b)).sum();
            gram.set(a, b, v);
            gram.set(b, a, v);
        }
    }
    let gram_top_eigenvalue = top_eigenvalue_psd(&gram, 1e-6, 100_000);
    let kappa = dataset.kappa();
    let mut fourth = 0.0;
    let mut h1_sq = 0.0;
    for i in 0..t {
        let r2 = norm_sq(x.row(i));
        fourth += r2 * r2;
        h1_sq += (r2 / 4.0 + 2.0 * kappa).powi(2);
    }
    Ok(LogisticModel {
        data: dataset,
        gram_top_eigenvalue,
        // ‖Δσ‖_F² ≤ (1/t) Σ |Δ∇l_i|² ≤ (1/t) Σ (|x_i|²/4)² |Δβ|²
        noise_lipschitz: (fourth / t as f64).sqrt() / 4.0,
        h1_sq_mean: h1_sq / t as f64,
    })
}

impl LogisticModel {
    pub fn dataset(&self) -> &LogisticDataset {
        &self.data
    }

    pub fn gram_top_eigenvalue(&self) -> f64 {
        self.gram_top_eigenvalue
    }

    /// `λ_max(XXᵀ)/t + 2κ`, the bound obtained without the sigmoid-derivative
    /// cap of 1/4.
    pub fn loose_lipschitz(&self) -> f64 {
        self.gram_top_eigenvalue / self.data.t() as f64 + 2.0 * self.data.kappa()
    }

    /// `∇l(β, z_i)` for dataset row `i`.
    pub fn row_gradient(&self, beta: &[f64], i: usize) -> Vec<f64> {
        let x = self.data.covariates().row(i);
        let r = sigmoid(dot(x, beta)) - self.data.labels()[i];
        x.iter()
            .zip(beta)
            .map(|(xj, bj)| r * xj + 2.0 * self.data.kappa() * bj)
            .collect()
    }

    /// Residuals `r_i = sigmoid(x_iᵀβ) - y_i` and `(1/t) Σ r_i x_i`, so that
    /// `∇l(β, z_i) - ∇g(β) = r_i x_i - (1/t) Σ r_j x_j`.
    fn residuals(&self, beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let t = self.data.t();
        let p = self.data.p();
        let x = self.data.covariates();
        let mut residuals = Vec::with_capacity(t);
        let mut mean_term = vec![0.0; p];
        for i in 0..t {
            let row = x.row(i);
            let r = sigmoid(dot(row, beta)) - self.data.labels()[i];
            residuals.push(r);
            for (m, xj) in mean_term.iter_mut().zip(row) {
                *m += r * xj / t as f64;
            }
        }
        (residuals, mean_term)
    }
}

impl LossModel for LogisticModel {
    fn name(&self) -> &'static str {
        "logistic"
    }

    fn dim(&self) -> usize {
        self.data.p()
    }

    fn noise_dim(&self) -> usize {
        self.data.t()
    }

    fn datum_len(&self) -> usize {
        self.data.p() + 1
    }

    fn objective(&self, beta: &[f64]) -> f64 {
        let x = self.data.covariates();
        let t = self.data.t();
        let mut acc = 0.0;
        for i in 0..t {
            let z = dot(x.row(i), beta);
            acc += softplus(z) - self.data.labels()[i] * z;
        }
        acc / t as f64 + self.data.kappa() * norm_sq(beta)
    }

    fn grad_objective(&self, beta: &[f64]) -> Vec<f64> {
        let (_, mean_term) = self.residuals(beta);
        mean_term
            .iter()
            .zip(beta)
            .map(|(m, b)| m + 2.0 * self.data.kappa() * b)
            .collect()
    }

    fn fill_datum(&self, stream: &mut RngStream, out: &mut [f64]) {
        let i = stream.below(self.data.t());
        out[0] = self.data.labels()[i];
        out[1..].copy_from_slice(self.data.covariates().row(i));
    }

    fn add_grad_loss(&self, beta: &[f64], datum: &[f64], scale: f64, out: &mut [f64]) {
        let (y, x) = (datum[0], &datum[1..]);
        let r = sigmoid(dot(x, beta)) - y;
        let ridge = 2.0 * self.data.kappa();
        for ((o, xj), bj) in out.iter_mut().zip(x).zip(beta) {
            *o += scale * (r * xj + ridge * bj);
        }
    }

    /// `σ(β) = t^{-1/2} [∇l(β, z_i) - ∇g(β)]_{i=1..t}`, a `p × t` matrix.
    fn noise_factor(&self, beta: &[f64]) -> DenseMatrix {
        let (residuals, mean_term) = self.residuals(beta);
        let t = self.data.t();
        let p = self.data.p();
        let inv_sqrt_t = 1.0 / (t as f64).sqrt();
        let x = self.data.covariates();
        let mut m = DenseMatrix::zeros(p, t);
        for (i, r) in residuals.iter().enumerate() {
            let row = x.row(i);
            for j in 0..p {
                // the ridge term is common to ∇l_i and ∇g and cancels
                m.set(j, i, inv_sqrt_t * (r * row[j] - mean_term[j]));
            }
        }
        m
    }

    fn add_noise(&self, beta: &[f64], xi: &[f64], scale: f64, out: &mut [f64]) {
        let (residuals, mean_term) = self.residuals(beta);
        let t = self.data.t();
        let inv_sqrt_t = 1.0 / (t as f64).sqrt();
        let x = self.data.covariates();
        let xi_sum: f64 = xi.iter().sum();
        for (i, (r, z)) in residuals.iter().zip(xi).enumerate() {
            let c = scale * inv_sqrt_t * r * z;
            for (o, xj) in out.iter_mut().zip(x.row(i)) {
                *o += c * xj;
            }
        }
        for (o, m) in out.iter_mut().zip(&mean_term) {
            *o -= scale * inv_sqrt_t * xi_sum * m;
        }
    }

    fn constants(&self) -> ModelConstants {
        let kappa = self.data.kappa();
        ModelConstants {
            lipschitz: self.gram_top_eigenvalue / (4.0 * self.data.t() as f64) + 2.0 * kappa,
            noise_lipschitz: self.noise_lipschitz,
            strong_convexity: Some(2.0 * kappa),
            h1_sq_mean: Some(self.h1_sq_mean),
        }
    }
}
