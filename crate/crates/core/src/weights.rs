//! Random weight vectors with minibatch mean and covariance.
//!
//! All three schemes produce `W` with `E[W] = l/n` and covariance `Σ` where
//! `Σ_ii = (n-m)/(m n²)` and `Σ_ij = -(n-m)/(m n² (n-1))`:
//!
//! * [`SchemeKind::Minibatch`]: `1/m` on a uniform `m`-subset, zero elsewhere.
//! * [`SchemeKind::GaussianStructured`]: `c (X - X̄ l) + l/n` with iid
//!   unit-variance `X`, `c = sqrt((n-m)/(m n (n-1)))`.
//! * [`SchemeKind::Dirichlet`]: `Dir((m-1)/(n-m), ..., (m-1)/(n-m))`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::exec::{replicate, Execution};
use crate::numerics::{sample_gamma, RngStream};

const DIRICHLET_RETRIES: usize = 10;

/// Law of the iid base variables of the Gaussian-structured scheme. All
/// have mean zero and unit variance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseDistribution {
    StandardNormal,
    Rademacher,
    /// `sqrt(3) * Unif(-1, 1)`.
    UniformScaled,
}

impl BaseDistribution {
    #[inline]
    fn draw(self, stream: &mut RngStream) -> f64 {
        match self {
            BaseDistribution::StandardNormal => stream.std_normal(),
            BaseDistribution::Rademacher => {
                if stream.next_bit() {
                    1.0
                } else {
                    -1.0
                }
            }
            BaseDistribution::UniformScaled => 3f64.sqrt() * (2.0 * stream.uniform() - 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SchemeKind {
    Minibatch,
    GaussianStructured { base: BaseDistribution },
    Dirichlet,
}

impl SchemeKind {
    pub fn label(&self) -> String {
        match self {
            SchemeKind::Minibatch => "minibatch".into(),
            SchemeKind::GaussianStructured { base } => match base {
                BaseDistribution::StandardNormal => "gaussian-normal".into(),
                BaseDistribution::Rademacher => "gaussian-rademacher".into(),
                BaseDistribution::UniformScaled => "gaussian-uniform".into(),
            },
            SchemeKind::Dirichlet => "dirichlet".into(),
        }
    }
}

/// A validated weight law for sample size `n` and minibatch parameter `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightScheme {
    kind: SchemeKind,
    n: usize,
    m: usize,
}

impl WeightScheme {
    pub fn new(kind: SchemeKind, n: usize, m: usize) -> Result<Self> {
        if m < 1 || m > n {
            return Err(invalid("m", format!("need 1 <= m <= n, got m={m}, n={n}")));
        }
        match kind {
            SchemeKind::Dirichlet if m < 2 || m >= n => Err(invalid(
                "m",
                format!("Dirichlet weights need 2 <= m < n so that (m-1)/(n-m) is positive and finite, got m={m}, n={n}"),
            )),
            SchemeKind::GaussianStructured { .. } if n < 2 => {
                Err(invalid("n", "Gaussian-structured weights need n >= 2"))
            }
            _ => Ok(Self { kind, n, m }),
        }
    }

    pub fn minibatch(n: usize, m: usize) -> Result<Self> {
        Self::new(SchemeKind::Minibatch, n, m)
    }

    pub fn gaussian(n: usize, m: usize, base: BaseDistribution) -> Result<Self> {
        Self::new(SchemeKind::GaussianStructured { base }, n, m)
    }

    pub fn dirichlet(n: usize, m: usize) -> Result<Self> {
        Self::new(SchemeKind::Dirichlet, n, m)
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Per-coordinate Dirichlet parameter `(m-1)/(n-m)`.
    pub fn dirichlet_shape(&self) -> f64 {
        (self.m as f64 - 1.0) / (self.n - self.m) as f64
    }

    /// Gaussian-structured scale `sqrt((n-m)/(m n (n-1)))`.
    pub fn gaussian_scale(&self) -> f64 {
        let (n, m) = (self.n as f64, self.m as f64);
        ((n - m) / (m * n * (n - 1.0))).sqrt()
    }

    pub fn sample(&self, stream: &mut RngStream) -> Result<WeightVector> {
        let mut values = vec![0.0; self.n];
        self.sample_into(stream, &mut values)?;
        Ok(WeightVector {
            values,
            scheme: *self,
        })
    }

    /// Fills `out` (length `n`) with one draw. Used by the iteration loops to
    /// avoid reallocating.
    pub fn sample_into(&self, stream: &mut RngStream, out: &mut [f64]) -> Result<()> {
        if out.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "WeightScheme::sample_into",
                expected: self.n,
                actual: out.len(),
            });
        }
        match self.kind {
            SchemeKind::Minibatch => {
                fill_minibatch(stream, self.m, out);
                Ok(())
            }
            SchemeKind::GaussianStructured { base } => {
                fill_gaussian_structured(stream, base, self.gaussian_scale(), out);
                Ok(())
            }
            SchemeKind::Dirichlet => fill_dirichlet(stream, self.dirichlet_shape(), out),
        }
    }
}

/// One weight draw together with the law that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightVector {
    values: Vec<f64>,
    scheme: WeightScheme,
}

impl WeightVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scheme(&self) -> &WeightScheme {
        &self.scheme
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Diagonal and off-diagonal entries of `Σ`. The off-diagonal is 0 when n = 1.
pub fn sigma_entries(n: usize, m: usize) -> Result<(f64, f64)> {
    if m < 1 || m > n {
        return Err(invalid("m", format!("need 1 <= m <= n, got m={m}, n={n}")));
    }
    let (nf, mf) = (n as f64, m as f64);
    let diag = (nf - mf) / (mf * nf * nf);
    let offdiag = if n == 1 { 0.0 } else { -diag / (nf - 1.0) };
    Ok((diag, offdiag))
}

pub fn sample_minibatch_weights(stream: &mut RngStream, scheme: &WeightScheme) -> Result<WeightVector> {
    expect_kind(scheme, matches!(scheme.kind, SchemeKind::Minibatch))?;
    scheme.sample(stream)
}

pub fn sample_gaussian_structured_weights(
    stream: &mut RngStream,
    scheme: &WeightScheme,
) -> Result<WeightVector> {
    expect_kind(scheme, matches!(scheme.kind, SchemeKind::GaussianStructured { .. }))?;
    scheme.sample(stream)
}

pub fn sample_dirichlet_weights(stream: &mut RngStream, scheme: &WeightScheme) -> Result<WeightVector> {
    expect_kind(scheme, matches!(scheme.kind, SchemeKind::Dirichlet))?;
    scheme.sample(stream)
}

fn expect_kind(scheme: &WeightScheme, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(invalid("scheme", format!("unexpected scheme kind {}", scheme.kind.label())))
    }
}

/// Sparse partial Fisher–Yates: only displaced positions are stored, so the
/// scratch space is O(m) whatever n is.
fn fill_minibatch(stream: &mut RngStream, m: usize, out: &mut [f64]) {
    let n = out.len();
    out.iter_mut().for_each(|w| *w = 0.0);
    let weight = 1.0 / m as f64;
    if m == n {
        out.iter_mut().for_each(|w| *w = weight);
        return;
    }
    let mut displaced: HashMap<usize, usize> = HashMap::with_capacity(2 * m);
    for i in 0..m {
        let j = i + stream.below(n - i);
        let at_i = displaced.get(&i).copied().unwrap_or(i);
        let at_j = displaced.get(&j).copied().unwrap_or(j);
        displaced.insert(j, at_i);
        out[at_j] = weight;
    }
}

fn fill_gaussian_structured(stream: &mut RngStream, base: BaseDistribution, c: f64, out: &mut [f64]) {
    let n = out.len() as f64;
    let inv_n = 1.0 / n;
    if c == 0.0 {
        out.iter_mut().for_each(|w| *w = inv_n);
        return;
    }
    let mut sum = 0.0;
    for w in out.iter_mut() {
        *w = base.draw(stream);
        sum += *w;
    }
    let mean = sum / n;
    for w in out.iter_mut() {
        *w = c * (*w - mean) + inv_n;
    }
}

fn fill_dirichlet(stream: &mut RngStream, shape: f64, out: &mut [f64]) -> Result<()> {
    if gamma_normalize(stream, shape, out)? {
        return Ok(());
    }
    let origin = stream.word_pos() as u64;
    for attempt in 0..DIRICHLET_RETRIES {
        let mut retry = stream.derive("dirichlet-retry").derive(origin).derive(attempt);
        if gamma_normalize(&mut retry, shape, out)? {
            return Ok(());
        }
    }
    Err(Error::DirichletUnderflow(DIRICHLET_RETRIES + 1))
}

fn gamma_normalize(stream: &mut RngStream, shape: f64, out: &mut [f64]) -> Result<bool> {
    let mut sum = 0.0;
    for w in out.iter_mut() {
        *w = sample_gamma(stream, shape)?;
        sum += *w;
    }
    if !(sum > 0.0) || !sum.is_finite() {
        return Ok(false);
    }
    out.iter_mut().for_each(|w| *w /= sum);
    Ok(true)
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// `|value - target|` in standard errors.
    pub fn z(&self, target: f64) -> f64 {
        (self.value - target).abs() / self.se
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        (self.value - target).abs() <= n_se * self.se
    }

    /// Mean and standard error of the mean of a sample.
    pub fn from_sample(xs: &[f64]) -> Estimate {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Estimate {
            value: mean,
            se: (var / n).sqrt(),
        }
    }
}

/// Monte Carlo moments of a weight law.
#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub reps: usize,
    /// `E[w_i]` for every coordinate.
    pub coordinate_mean: Vec<Estimate>,
    /// `Var(w_i)` for every coordinate.
    pub coordinate_variance: Vec<Estimate>,
    /// `Cov(w_i, w_{i+1 mod n})` for every `i`.
    pub adjacent_covariance: Vec<Estimate>,
    /// `E[m Σ w_i²]`.
    pub m_sum_sq: Estimate,
    /// `E[m^{3/2} Σ |w_i|³]`.
    pub m32_sum_cube: Estimate,
    /// `E[sqrt(m) max_i |w_i - 1/n|]`.
    pub sqrt_m_max_dev: Estimate,
    /// `E[m Σ (w_i - 1/n)²]`.
    pub m_sum_sq_dev: Estimate,
}

impl MomentReport {
    /// Largest z-score of any coordinate mean against `1/n`.
    pub fn worst_mean_z(&self) -> f64 {
        let target = 1.0 / self.coordinate_mean.len() as f64;
        self.coordinate_mean.iter().map(|e| e.z(target)).fold(0.0, f64::max)
    }
}

#[derive(Clone)]
struct MomentSums {
    // power sums of d_i = w_i - 1/n
    s1: Vec<f64>,
    s2: Vec<f64>,
    s3: Vec<f64>,
    s4: Vec<f64>,
    // products d_i d_{i+1} and their squares
    c1: Vec<f64>,
    c2: Vec<f64>,
    scalars: [[f64; 2]; 4],
}

impl MomentSums {
    fn new(n: usize) -> Self {
        Self {
            s1: vec![0.0; n],
            s2: vec![0.0; n],
            s3: vec![0.0; n],
            s4: vec![0.0; n],
            c1: vec![0.0; n],
            c2: vec![0.0; n],
            scalars: [[0.0; 2]; 4],
        }
    }

    fn add(&mut self, w: &[f64], m: usize) {
        let n = w.len();
        let inv_n = 1.0 / n as f64;
        let mf = m as f64;
        let (mut sq, mut cube, mut maxdev, mut sqdev) = (0.0, 0.0, 0.0f64, 0.0);
        for i in 0..n {
            let d = w[i] - inv_n;
            let d2 = d * d;
            self.s1[i] += d;
            self.s2[i] += d2;
            self.s3[i] += d2 * d;
            self.s4[i] += d2 * d2;
            let p = d * (w[(i + 1) % n] - inv_n);
            self.c1[i] += p;
            self.c2[i] += p * p;
            sq += w[i] * w[i];
            cube += w[i].abs().powi(3);
            maxdev = maxdev.max(d.abs());
            sqdev += d2;
        }
        let vals = [mf * sq, mf.powf(1.5) * cube, mf.sqrt() * maxdev, mf * sqdev];
        for (acc, v) in self.scalars.iter_mut().zip(vals) {
            acc[0] += v;
            acc[1] += v * v;
        }
    }

    fn merge(&mut self, other: &MomentSums) {
        let pairs = [
            (&mut self.s1, &other.s1),
            (&mut self.s2, &other.s2),
            (&mut self.s3, &other.s3),
            (&mut self.s4, &other.s4),
            (&mut self.c1, &other.c1),
            (&mut self.c2, &other.c2),
        ];
        for (a, b) in pairs {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.scalars.iter_mut().zip(&other.scalars) {
            a[0] += b[0];
            a[1] += b[1];
        }
    }
}

fn scalar_estimate(acc: [f64; 2], reps: f64) -> Estimate {
    let mean = acc[0] / reps;
    let var = ((acc[1] - reps * mean * mean) / (reps - 1.0)).max(0.0);
    Estimate {
        value: mean,
        se: (var / reps).sqrt(),
    }
}

const MOMENT_CHUNKS: usize = 64;

/// Monte Carlo moments over `reps` independent draws. Draw `r` uses the
/// stream `stream.derive(r)`; partial sums are combined in chunk order so
/// the result is independent of the thread count.
pub fn empirical_weight_moments(
    scheme: &WeightScheme,
    stream: &RngStream,
    reps: usize,
    exec: Execution,
) -> Result<MomentReport> {
    if reps < 100 {
        return Err(invalid("reps", format!("need at least 100 draws, got {reps}")));
    }
    let n = scheme.n();
    let chunk = reps.div_ceil(MOMENT_CHUNKS);
    let partials = replicate(exec, MOMENT_CHUNKS, |c| -> Result<MomentSums> {
        let mut sums = MomentSums::new(n);
        let mut w = vec![0.0; n];
        for r in (c * chunk)..((c + 1) * chunk).min(reps) {
            scheme.sample_into(&mut stream.derive(r), &mut w)?;
            sums.add(&w, scheme.m());
        }
        Ok(sums)
    });
    let mut total = MomentSums::new(n);
    for p in partials {
        total.merge(&p?);
    }

    let rf = reps as f64;
    let inv_n = 1.0 / n as f64;
    let mut coordinate_mean = Vec::with_capacity(n);
    let mut coordinate_variance = Vec::with_capacity(n);
    let mut adjacent_covariance = Vec::with_capacity(n);
    for i in 0..n {
        let mu = total.s1[i] / rf;
        let raw2 = total.s2[i] / rf;
        let var = (total.s2[i] - rf * mu * mu) / (rf - 1.0);
        coordinate_mean.push(Estimate {
            value: inv_n + mu,
            se: (var.max(0.0) / rf).sqrt(),
        });
        let m4 = total.s4[i] / rf - 4.0 * mu * total.s3[i] / rf + 6.0 * mu * mu * raw2
            - 3.0 * mu.powi(4);
        coordinate_variance.push(Estimate {
            value: var,
            se: ((m4 - var * var).max(0.0) / rf).sqrt(),
        });
        let j = (i + 1) % n;
        let prod_mean = total.c1[i] / rf;
        let cov = prod_mean - mu * total.s1[j] / rf;
        let prod_var = total.c2[i] / rf - prod_mean * prod_mean;
        adjacent_covariance.push(Estimate {
            value: cov,
            se: (prod_var.max(0.0) / rf).sqrt(),
        });
    }
    Ok(MomentReport {
        reps,
        coordinate_mean,
        coordinate_variance,
        adjacent_covariance,
        m_sum_sq: scalar_estimate(total.scalars[0], rf),
        m32_sum_cube: scalar_estimate(total.scalars[1], rf),
        sqrt_m_max_dev: scalar_estimate(total.scalars[2], rf),
        m_sum_sq_dev: scalar_estimate(total.scalars[3], rf),
    })
}

/// `E[Π X_i^{β_i}]` for `X ~ Dir(α)`, evaluated in log space.
pub fn dirichlet_mixed_moment(alpha: &[f64], beta: &[u32]) -> Result<f64> {
    if alpha.len() != beta.len() {
        return Err(Error::DimensionMismatch {
            context: "dirichlet_mixed_moment",
            expected: alpha.len(),
            actual: beta.len(),
        });
    }
    if alpha.is_empty() || alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(invalid("alpha", "all entries must be positive and finite"));
    }
    let a_sum: f64 = alpha.iter().sum();
    let b_sum: f64 = beta.iter().map(|&b| f64::from(b)).sum();
    let mut log = ln_gamma(a_sum) - ln_gamma(a_sum + b_sum);
    for (&a, &b) in alpha.iter().zip(beta) {
        if b > 0 {
            log += ln_gamma(a + f64::from(b)) - ln_gamma(a);
        }
    }
    Ok(log.exp())
}
