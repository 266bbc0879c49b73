//! Local-metric checks: Gaussian closed forms, the algebraic agreement of
//! the Hessian and covariance forms under matched seeds, limit behavior,
//! ellipse geometry on the heavy-tailed prior, and the average-metric
//! identities on a Gaussian.

use nalgebra::{DMatrix, DVector};

use iem_core::iem::IntegrationConfig;
use iem_core::local_metric::{
    average_metric_triplet, ellipse, metric_cov_form, metric_hessian_form,
};
use iem_core::prior::{presets, PriorSpec};

fn v2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

#[test]
fn gaussian_1d_matches_scalar_closed_form() {
    // ∫₀^Γ γ²(γ²σ²+γ)⁻² dγ = (1/σ²)(1 - 1/(1+Γσ²))
    let var = 0.6;
    let prior = PriorSpec::gaussian(
        DVector::from_vec(vec![0.4]),
        DMatrix::from_vec(1, 1, vec![var]),
    )
    .unwrap();
    let cfg = IntegrationConfig {
        n_steps: 200,
        n_paths: 50,
        seed: 1,
        ..Default::default()
    };
    let m = metric_hessian_form(&prior, &DVector::from_vec(vec![0.2]), &cfg).unwrap();
    let target = (1.0 / var) * (1.0 - 1.0 / (1.0 + cfg.gamma_max * var));
    let got = m.g[(0, 0)];
    assert!((got - target).abs() / target < 0.03, "{got} vs {target}");
}

#[test]
fn gaussian_2d_matches_matrix_closed_form_and_precision_limit() {
    let prior = presets::anisotropic_gaussian();
    let (_, cov) = prior.gaussian_params().unwrap();
    let cfg = IntegrationConfig {
        n_steps: 512,
        n_paths: 2,
        seed: 3,
        ..Default::default()
    };
    let m = metric_hessian_form(&prior, &v2(0.3, 0.9), &cfg).unwrap();
    let eye = DMatrix::<f64>::identity(2, 2);
    let prec = cov.clone().try_inverse().unwrap();
    let target = &prec
        * (&eye - (cov * cfg.gamma_max + &eye).try_inverse().unwrap());
    let rel = (&m.g - &target).norm() / target.norm();
    assert!(rel < 0.03, "closed-form relative error {rel}");
    // at Γ = 2^10 the metric is within a few percent of Σ⁻¹
    let rel_prec = (&m.g - &prec).norm() / prec.norm();
    assert!(rel_prec < 0.03, "precision-limit relative error {rel_prec}");
}

#[test]
fn hessian_and_cov_forms_agree_to_round_off_under_matched_seeds() {
    let cfg = IntegrationConfig {
        n_steps: 200,
        n_paths: 3,
        seed: 11,
        ..Default::default()
    };
    for (label, prior, x) in [
        ("gaussian", presets::anisotropic_gaussian(), v2(0.5, 1.0)),
        ("gmm", presets::two_mode_gmm(), v2(0.2, -0.4)),
        ("laplace", presets::product_laplace_2d(), v2(1.0, 2.0)),
    ] {
        let a = metric_hessian_form(&prior, &x, &cfg).unwrap();
        let b = metric_cov_form(&prior, &x, &cfg).unwrap();
        let rel = (&a.g - &b.g).norm() / a.g.norm();
        assert!(rel <= 1e-9, "{label}: forms differ by {rel:.3e}");
    }
}

#[test]
fn cov_form_integrand_approaches_identity_at_low_snr() {
    // γ → 0 gives Cov → Σ and I - γCov → I
    let prior = presets::two_mode_gmm();
    let gamma = 2f64.powi(-14);
    let x = v2(0.0, 0.5);
    let y = &x * gamma; // w ≈ 0 scale is √γ, irrelevant for the limit
    let c = prior.posterior_cov(&y, gamma).unwrap();
    let t = DMatrix::<f64>::identity(2, 2) - c * gamma;
    let dev = (&t - DMatrix::<f64>::identity(2, 2)).abs().max();
    assert!(dev < 1e-3, "deviation from identity {dev}");
}

#[test]
fn laplace_discrimination_radii_grow_away_from_the_ridges() {
    // along the ray from the ridge crossing (0, 1) in direction (1, 1)
    let prior = presets::product_laplace_2d();
    let cfg = IntegrationConfig {
        gamma_min: 0.25,
        gamma_max: 4.0,
        n_steps: 200,
        n_paths: 50,
        seed: 0,
    };
    let mut prev_min = 0.0;
    let mut prev_max = 0.0;
    for t in [0.5, 1.0, 1.5, 2.0, 2.5] {
        let x = v2(t, 1.0 + t);
        let m = metric_hessian_form(&prior, &x, &cfg).unwrap();
        let e = ellipse(&m).unwrap();
        let (rmax, rmin) = (e.radii.max(), e.radii.min());
        assert!(rmin > prev_min && rmax > prev_max, "radii not monotone at t={t}");
        prev_min = rmin;
        prev_max = rmax;
    }
}

#[test]
fn gaussian_average_triplet_converges_to_precision() {
    let prior = presets::anisotropic_gaussian();
    let (_, cov) = prior.gaussian_params().unwrap();
    let prec = cov.clone().try_inverse().unwrap();
    let cfg = IntegrationConfig {
        n_steps: 256,
        n_paths: 1,
        seed: 2,
        ..Default::default()
    };
    let t = average_metric_triplet(&prior, 4000, &cfg, 5).unwrap();
    let rel = |m: &DMatrix<f64>| (m - &prec).norm() / prec.norm();
    assert!(rel(&t.metric_mean) < 0.03, "metric mean {}", rel(&t.metric_mean));
    let h = t.neg_hessian_mean.as_ref().unwrap();
    assert!(rel(h) < 1e-12, "clean Hessian is exact for Gaussians");
    assert!(
        rel(&t.score_outer_mean) < 0.08,
        "score outer mean {}",
        rel(&t.score_outer_mean)
    );
}

#[test]
fn laplace_triplet_skips_the_distributional_hessian() {
    let prior = presets::product_laplace_2d();
    let cfg = IntegrationConfig {
        n_steps: 64,
        gamma_max: 16.0,
        ..Default::default()
    };
    let t = average_metric_triplet(&prior, 50, &cfg, 4).unwrap();
    assert!(t.neg_hessian_mean.is_none());
    assert_eq!(t.metric_mean.nrows(), 2);
    assert_eq!(t.score_outer_mean.nrows(), 2);
}
