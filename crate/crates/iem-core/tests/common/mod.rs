//! Shared oracles for the integration tests: central finite differences
//! and a direct log-domain quadrature of the blurring convolution. These
//! stay independent of the closed-form evaluation paths they check.

use nalgebra::{DMatrix, DVector};

use iem_core::prior::PriorSpec;

/// Central finite difference of the blurred log-density, step
/// `1e-4 * (1 + |y_i|)` per coordinate.
pub fn fd_score(prior: &PriorSpec, y: &DVector<f64>, gamma: f64) -> DVector<f64> {
    let d = y.len();
    let mut g = DVector::zeros(d);
    for i in 0..d {
        let h = 1e-4 * (1.0 + y[i].abs());
        let mut yp = y.clone();
        let mut ym = y.clone();
        yp[i] += h;
        ym[i] -= h;
        let lp = prior.blurred_log_density(&yp, gamma).unwrap();
        let lm = prior.blurred_log_density(&ym, gamma).unwrap();
        g[i] = (lp - lm) / (2.0 * h);
    }
    g
}

/// Central finite difference of the analytic blurred score.
pub fn fd_hessian(prior: &PriorSpec, y: &DVector<f64>, gamma: f64) -> DMatrix<f64> {
    let d = y.len();
    let mut h_mat = DMatrix::zeros(d, d);
    for j in 0..d {
        let h = 1e-4 * (1.0 + y[j].abs());
        let mut yp = y.clone();
        let mut ym = y.clone();
        yp[j] += h;
        ym[j] -= h;
        let sp = prior.blurred_score(&yp, gamma).unwrap();
        let sm = prior.blurred_score(&ym, gamma).unwrap();
        for i in 0..d {
            h_mat[(i, j)] = (sp[i] - sm[i]) / (2.0 * h);
        }
    }
    h_mat
}

/// Brute-force 1-D blurred log-density: trapezoid quadrature of
/// `∫ p_x(t) N(y; γt, γ) dt` in the log domain.
pub fn blurred_log_density_quadrature(prior: &PriorSpec, y: f64, gamma: f64) -> f64 {
    assert_eq!(prior.dim(), 1);
    let (lo_box, hi_box) = prior.support_box(14.0);
    // integrate over the union of the prior's support and the noise window
    let noise_halfwidth = 14.0 / gamma.sqrt();
    let lo = lo_box[0].min(y / gamma - noise_halfwidth);
    let hi = hi_box[0].max(y / gamma + noise_halfwidth);
    let n = 200_001usize;
    let step = (hi - lo) / (n - 1) as f64;
    let log_gauss_norm = -0.5 * (2.0 * std::f64::consts::PI * gamma).ln();
    let mut terms = Vec::with_capacity(n);
    let mut t_vec = DVector::zeros(1);
    for k in 0..n {
        let t = lo + k as f64 * step;
        t_vec[0] = t;
        let lp = prior.log_density(&t_vec).unwrap();
        let r = y - gamma * t;
        let lg = log_gauss_norm - 0.5 * r * r / gamma;
        let mut v = lp + lg;
        if k == 0 || k == n - 1 {
            v -= std::f64::consts::LN_2; // trapezoid end weights
        }
        terms.push(v);
    }
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|v| (v - m).exp()).sum();
    m + sum.ln() + step.ln()
}
