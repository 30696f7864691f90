//! Seeded randomness, small dense linear algebra and finite differences.

mod diff;
mod linalg;
mod rng;

pub use diff::{finite_diff_gradient, max_relative_error, second_directional_difference, DEFAULT_STEP};
pub use linalg::{dist_sq, dot, norm, norm_sq, top_eigenvalue_psd, DenseMatrix};
pub use rng::{derive_stream, sample_gamma, sample_std_normal, Label, RngStream};
