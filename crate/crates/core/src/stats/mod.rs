//! Estimators and verdict helpers: scaled M-SGD error samples, normality
//! statistics, empirical Wasserstein-2 distances, the exact second-moment
//! gap, and contraction-rate tools.

mod clt;
mod gap;
mod ks;
mod rate;
mod wasserstein;

pub use clt::{clt_error_samples, sample_covariance, ErrorSampleSet};
pub use gap::{thm1_gap, GapEstimate};
pub use ks::{ks_normality, normal_cdf, KsResult};
pub use rate::{
    contraction_fit, convergence_curve, fit_geometric_phase, log_log_slope, minimize_by_gd, plateau_bound,
    rho_bound, ConvergenceCurve, GeometricFit, RateBound,
};
pub use wasserstein::{coordinate_w2, sliced_w2, w2_1d, DistanceEstimate, DistanceMethod};

pub use crate::weights::Estimate;
