//! Reference densities used by the validation suites, tests, and docs.

use nalgebra::{DMatrix, DVector};

use super::PriorSpec;

/// Standard normal in `d` dimensions.
pub fn std_gaussian(d: usize) -> PriorSpec {
    PriorSpec::gaussian(DVector::zeros(d), DMatrix::identity(d, d)).expect("valid prior")
}

/// 2-D Gaussian with strongly anisotropic covariance diag(1, 0.1),
/// centered at (0, 1).
pub fn anisotropic_gaussian() -> PriorSpec {
    PriorSpec::gaussian(
        DVector::from_vec(vec![0.0, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.1]),
    )
    .expect("valid prior")
}

/// 2-D two-mode Gaussian mixture with differently shaped modes:
/// `0.3 N((0,1), diag(1, 0.1)) + 0.7 N((1,-1), [[1,0.5],[0.5,0.4]])`.
pub fn two_mode_gmm() -> PriorSpec {
    let a = PriorSpec::gaussian(
        DVector::from_vec(vec![0.0, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.1]),
    )
    .expect("valid prior");
    let b = PriorSpec::gaussian(
        DVector::from_vec(vec![1.0, -1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.4]),
    )
    .expect("valid prior");
    PriorSpec::mixture(vec![0.3, 0.7], vec![a, b]).expect("valid prior")
}

/// Separable heavy-tailed prior `Lap(0, 4) × Lap(1, 2)`.
pub fn product_laplace_2d() -> PriorSpec {
    PriorSpec::product_laplace(
        DVector::from_vec(vec![0.0, 1.0]),
        DVector::from_vec(vec![4.0, 2.0]),
    )
    .expect("valid prior")
}

/// Two strongly correlated modes stacked vertically, the toy clustering
/// instance: `½ N((0,1), C) + ½ N((0,-1), C)` with `C = [[1,0.95],[0.95,1]]`.
pub fn correlated_gmm() -> PriorSpec {
    let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.95, 0.95, 1.0]);
    let a = PriorSpec::gaussian(DVector::from_vec(vec![0.0, 1.0]), c.clone()).expect("valid prior");
    let b = PriorSpec::gaussian(DVector::from_vec(vec![0.0, -1.0]), c).expect("valid prior");
    PriorSpec::mixture(vec![0.5, 0.5], vec![a, b]).expect("valid prior")
}

/// 1-D bimodal Gaussian mixture, handy for cheap dense-grid checks.
pub fn bimodal_gmm_1d() -> PriorSpec {
    let a = PriorSpec::gaussian(
        DVector::from_vec(vec![-1.0]),
        DMatrix::from_vec(1, 1, vec![0.3]),
    )
    .expect("valid prior");
    let b = PriorSpec::gaussian(
        DVector::from_vec(vec![1.5]),
        DMatrix::from_vec(1, 1, vec![0.8]),
    )
    .expect("valid prior");
    PriorSpec::mixture(vec![0.4, 0.6], vec![a, b]).expect("valid prior")
}

/// 1-D mixture with one Laplace and one Gaussian mode.
pub fn laplace_gaussian_mix_1d() -> PriorSpec {
    let a = PriorSpec::product_laplace(
        DVector::from_vec(vec![-1.5]),
        DVector::from_vec(vec![0.5]),
    )
    .expect("valid prior");
    let b = PriorSpec::gaussian(
        DVector::from_vec(vec![1.5]),
        DMatrix::from_vec(1, 1, vec![0.5]),
    )
    .expect("valid prior");
    PriorSpec::mixture(vec![0.5, 0.5], vec![a, b]).expect("valid prior")
}
