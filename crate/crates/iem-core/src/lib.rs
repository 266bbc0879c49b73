//! A global distance function induced by a probability density through the
//! score fields of its Gaussian-blurred versions, together with its local
//! Riemannian metric, generalized and mismatched variants, distance-matrix
//! clustering, and a validation suite of provable identities.
//!
//! The pieces:
//!
//! - [`prior`] — analytic densities (Gaussian, product Laplace, depth-1
//!   mixtures) with exact blurred log-densities, scores, Hessians,
//!   Tweedie denoisers, posterior covariances, and samplers.
//! - [`channel`] — log-uniform SNR grids, counter-keyed Wiener paths, and
//!   the left-endpoint quadrature rule in log-SNR.
//! - [`iem`] — the distance estimators (plain, generalized `f'`-weighted,
//!   mismatched, uncoupled) and pairwise distance matrices.
//! - [`local_metric`] — the local Riemannian metric in Hessian and
//!   covariance forms, discrimination ellipses, average-metric identities.
//! - [`cluster`] — K-medoids over a precomputed distance matrix.
//! - [`validate`] — deterministic identity checks with machine-readable
//!   pass/fail reports.

pub mod channel;
pub mod cluster;
pub mod iem;
pub mod local_metric;
pub mod prior;
mod special;
pub mod validate;

pub use channel::{make_grid, sample_path, BrownianPath, SnrGrid};
pub use iem::{
    distance_matrix, iem as iem_distance, iem_f, iem_squared, mismatched_iem, z_process,
    BuiltinFPrime, DistanceEstimate, FPrime, IntegrationConfig,
};
pub use local_metric::{ellipse, metric_cov_form, metric_hessian_form, Ellipse, LocalMetric};
pub use prior::{PriorConfig, PriorSpec};
