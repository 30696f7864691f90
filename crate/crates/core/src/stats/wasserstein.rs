//! Empirical squared Wasserstein-2 distances between equal-size samples.
//!
//! In one dimension the optimal coupling of two empirical measures with the
//! same number of atoms pairs order statistics, so the squared distance is
//! `(1/N) Σ (a_(i) - b_(i))²`. In `R^p` we average that quantity over random
//! one-dimensional projections (sliced W₂) or over the coordinate axes.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numerics::{dot, DenseMatrix, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    Exact1D,
    Sliced,
    CoordinateAverage,
}

impl DistanceMethod {
    pub fn label(self) -> &'static str {
        match self {
            DistanceMethod::Exact1D => "exact-1d",
            DistanceMethod::Sliced => "sliced",
            DistanceMethod::CoordinateAverage => "coordinate-average",
        }
    }
}

/// A squared-W₂ estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub method: DistanceMethod,
    pub n_directions: Option<usize>,
    pub sample_size: usize,
}

fn sorted_sq_distance(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

pub fn w2_1d(a: &[f64], b: &[f64]) -> Result<DistanceEstimate> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "w2_1d",
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(invalid("samples", "need at least two atoms per sample"));
    }
    Ok(DistanceEstimate {
        value: sorted_sq_distance(a.to_vec(), b.to_vec()),
        method: DistanceMethod::Exact1D,
        n_directions: None,
        sample_size: a.len(),
    })
}

fn check_pair(a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            context: "sample sizes",
            expected: a.rows(),
            actual: b.rows(),
        });
    }
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            context: "sample dimensions",
            expected: a.cols(),
            actual: b.cols(),
        });
    }
    if a.rows() < 2 {
        return Err(invalid("samples", "need at least two atoms per sample"));
    }
    Ok(())
}

fn project(m: &DenseMatrix, u: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|r| dot(m.row(r), u)).collect()
}

/// Sliced squared W₂ over `n_directions` uniform unit directions drawn from
/// `stream`. Rows are atoms.
pub fn sliced_w2(
    a: &DenseMatrix,
    b: &DenseMatrix,
    n_directions: usize,
    stream: &mut RngStream,
) -> Result<DistanceEstimate> {
    check_pair(a, b)?;
    if n_directions == 0 {
        return Err(invalid("n_directions", "need at least one direction"));
    }
    let p = a.cols();
    let mut total = 0.0;
    let mut u = vec![0.0; p];
    for _ in 0..n_directions {
        let norm = loop {
            stream.fill_std_normal(&mut u);
            let nrm = dot(&u, &u).sqrt();
            if nrm > 0.0 {
                break nrm;
            }
        };
        u.iter_mut().for_each(|x| *x /= norm);
        total += sorted_sq_distance(project(a, &u), project(b, &u));
    }
    Ok(DistanceEstimate {
        value: total / n_directions as f64,
        method: DistanceMethod::Sliced,
        n_directions: Some(n_directions),
        sample_size: a.rows(),
    })
}

/// Mean over coordinates of the exact one-dimensional squared W₂ of the
/// coordinate marginals.
pub fn coordinate_w2(a: &DenseMatrix, b: &DenseMatrix) -> Result<DistanceEstimate> {
    check_pair(a, b)?;
    let p = a.cols();
    let col = |m: &DenseMatrix, j: usize| (0..m.rows()).map(|r| m.get(r, j)).collect::<Vec<_>>();
    let total: f64 = (0..p).map(|j| sorted_sq_distance(col(a, j), col(b, j))).sum();
    Ok(DistanceEstimate {
        value: total / p as f64,
        method: DistanceMethod::CoordinateAverage,
        n_directions: None,
        sample_size: a.rows(),
    })
}
