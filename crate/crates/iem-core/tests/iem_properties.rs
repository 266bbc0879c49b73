//! Estimator-level properties: closed-form Gaussian values, metric
//! behavior across configurations, variant reductions, and the
//! distance-matrix contracts.

use nalgebra::{DMatrix, DVector};

use iem_core::channel::{make_grid, sample_path};
use iem_core::iem::{
    self, distance_matrix, euclidean_matrix, iem_f, iem_squared, iem_squared_uncoupled,
    mismatched_iem, z_process, BuiltinFPrime, IntegrationConfig,
};
use iem_core::prior::{presets, PriorSpec};

fn v2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

#[test]
fn identity_covariance_reduces_to_euclidean() {
    let prior = presets::std_gaussian(2);
    let cfg = IntegrationConfig::default();
    let d = iem::iem(&prior, &v2(0.0, 0.0), &v2(3.0, 4.0), &cfg).unwrap();
    assert!((d - 5.0).abs() / 5.0 < 0.03, "distance {d}");
}

#[test]
fn scalar_gaussian_squared_distance_is_one() {
    // exact value: ∫ (1+γ)^-2 dγ over [0, ∞) = 1
    let prior = presets::std_gaussian(1);
    let cfg = IntegrationConfig::default();
    let e = iem_squared(
        &prior,
        &DVector::from_vec(vec![0.0]),
        &DVector::from_vec(vec![1.0]),
        &cfg,
    )
    .unwrap();
    assert!((e.squared_value - 1.0).abs() < 0.03, "squared {}", e.squared_value);
}

#[test]
fn gaussian_matches_mahalanobis_at_default_steps() {
    let prior = presets::anisotropic_gaussian();
    let (_, cov) = prior.gaussian_params().unwrap();
    let prec = cov.clone().try_inverse().unwrap();
    let cfg = IntegrationConfig {
        n_paths: 50,
        ..Default::default()
    };
    for (a, b) in [
        (v2(0.0, 1.0), v2(1.0, 0.5)),
        (v2(-2.0, 0.3), v2(0.4, 1.8)),
        (v2(0.7, 0.7), v2(0.7, 2.0)),
    ] {
        let delta = &a - &b;
        let target = ((&prec * &delta).dot(&delta)).sqrt();
        let d = iem::iem(&prior, &a, &b, &cfg).unwrap();
        assert!((d - target).abs() / target < 0.03, "{d} vs {target}");
    }
}

#[test]
fn squared_value_is_monotone_in_gamma_max_on_nested_grids() {
    let prior = presets::two_mode_gmm();
    // same log-step, so the smaller grid's nodes and path prefix are shared
    let coarse = IntegrationConfig {
        gamma_min: 2f64.powi(-10),
        gamma_max: 1.0,
        n_steps: 101,
        n_paths: 3,
        seed: 5,
    };
    let fine = IntegrationConfig {
        gamma_max: 2f64.powi(10),
        n_steps: 201,
        ..coarse
    };
    let a = v2(0.1, 0.9);
    let b = v2(1.2, -0.7);
    let lo = iem_squared(&prior, &a, &b, &coarse).unwrap().squared_value;
    let hi = iem_squared(&prior, &a, &b, &fine).unwrap().squared_value;
    assert!(hi >= lo, "{hi} < {lo}");
}

#[test]
fn z_process_final_node_equals_direct_log_density_difference() {
    let prior = presets::two_mode_gmm();
    let grid = make_grid(2f64.powi(-8), 2f64.powi(8), 65).unwrap();
    let path = sample_path(&grid, 2, 21);
    let x1 = v2(0.2, 0.8);
    let x2 = v2(-0.5, -1.0);
    let z = z_process(&prior, &prior, &x1, &x2, &path).unwrap();
    let gamma = grid.gamma_max();
    let w = path.value(grid.len() - 1);
    let y1 = &x1 * gamma + DVector::from_column_slice(w);
    let y2 = &x2 * gamma + DVector::from_column_slice(w);
    let direct = prior.blurred_log_density(&y1, gamma).unwrap()
        - prior.blurred_log_density(&y2, gamma).unwrap();
    assert_eq!(z[grid.len() - 1], direct);
}

#[test]
fn square_weight_separates_cross_mode_pairs() {
    // density-matched pairs with equal Euclidean separation 1.6: one within
    // a mode (along its long axis), one straddling the saddle
    let prior = presets::correlated_gmm();
    let cfg = IntegrationConfig {
        n_steps: 400,
        n_paths: 400,
        seed: 0,
        ..Default::default()
    };
    let u = std::f64::consts::FRAC_1_SQRT_2 * 0.8;
    let same = iem_f(&prior, &v2(-u, 1.0 - u), &v2(u, 1.0 + u), &BuiltinFPrime::Square, &cfg)
        .unwrap();
    let cross = iem_f(&prior, &v2(0.0, -0.8), &v2(0.0, 0.8), &BuiltinFPrime::Square, &cfg)
        .unwrap();
    assert!(
        same.value < cross.value,
        "same-mode {} vs cross-mode {}",
        same.value,
        cross.value
    );
}

#[test]
fn mismatched_translation_identity_gives_zero() {
    let prior = presets::two_mode_gmm();
    let shift = v2(0.5, -0.25);
    let translated = prior.translate(&(-&shift)).unwrap();
    let cfg = IntegrationConfig {
        n_steps: 128,
        n_paths: 2,
        seed: 3,
        ..Default::default()
    };
    let x1 = v2(0.75, 1.5);
    let x2 = &x1 - &shift;
    let e = mismatched_iem(&prior, &translated, &x1, &x2, &cfg).unwrap();
    assert!(e.squared_value.abs() < 1e-20, "squared {}", e.squared_value);
}

#[test]
fn mismatched_gaussian_mean_shift_recovers_kl() {
    // For N(0, I) vs N(s, I) the integrand is deterministic, so a single
    // probe point recovers KL = ½‖s‖² up to quadrature error.
    let pa = presets::std_gaussian(2);
    let s = v2(0.8, -0.6);
    let pb = PriorSpec::gaussian(s.clone(), DMatrix::identity(2, 2)).unwrap();
    let cfg = IntegrationConfig::default();
    let x = v2(0.3, 0.9);
    let e = mismatched_iem(&pa, &pb, &x, &x, &cfg).unwrap();
    let kl = 0.5 * s.norm_squared();
    assert!(
        (0.5 * e.squared_value - kl).abs() / kl < 0.01,
        "half squared {} vs kl {kl}",
        0.5 * e.squared_value
    );
}

#[test]
fn uncoupled_estimator_pays_a_variance_penalty_on_gaussians() {
    // With shared paths the Gaussian integrand is the deterministic
    // Δᵀ(γΣ+I)⁻²Δ; independent paths add the positive noise-difference
    // term E‖M⁻¹(w - w')‖², so the uncoupled estimate sits strictly above.
    let prior = presets::anisotropic_gaussian();
    let cfg = IntegrationConfig {
        n_steps: 64,
        n_paths: 2,
        seed: 9,
        ..Default::default()
    };
    let a = v2(0.0, 1.0);
    let b = v2(1.0, 0.0);
    let coupled = iem_squared(&prior, &a, &b, &cfg).unwrap().squared_value;
    let uncoupled = iem_squared_uncoupled(&prior, &a, &b, &cfg)
        .unwrap()
        .squared_value;
    assert!(uncoupled > coupled, "{uncoupled} <= {coupled}");
}

#[test]
fn uncoupled_estimator_is_unbiased_but_not_exact_at_identity() {
    let prior = presets::two_mode_gmm();
    let cfg = IntegrationConfig {
        n_steps: 128,
        n_paths: 4,
        seed: 1,
        ..Default::default()
    };
    let x = v2(0.2, 0.4);
    let e = iem_squared_uncoupled(&prior, &x, &x, &cfg).unwrap();
    assert!(e.squared_value > 0.0);
}

#[test]
fn distance_matrix_contracts() {
    let prior = presets::correlated_gmm();
    let cfg = IntegrationConfig {
        n_steps: 96,
        n_paths: 2,
        seed: 7,
        ..Default::default()
    };
    let points = prior.sample(12, 3).unwrap();
    let m = distance_matrix(&prior, &points, &cfg).unwrap();
    assert_eq!(m.transpose(), m);
    for i in 0..12 {
        assert_eq!(m[(i, i)], 0.0);
        for j in 0..12 {
            assert!(m[(i, j)] >= 0.0);
        }
    }
    // entries equal the standalone estimator bit for bit
    for &(i, j) in &[(0usize, 5usize), (3, 9), (7, 11)] {
        let a = points.row(i).transpose();
        let b = points.row(j).transpose();
        let d = iem::iem(&prior, &a, &b, &cfg).unwrap();
        assert_eq!(m[(i, j)], d, "entry ({i},{j})");
    }
    // euclidean companion
    let e = euclidean_matrix(&points);
    assert_eq!(e.transpose(), e);
    assert_eq!(e[(2, 2)], 0.0);
    let want = (points.row(0) - points.row(1)).norm();
    assert_eq!(e[(0, 1)], want);
}

#[test]
fn reference_distances_match_pairwise_calls() {
    let prior = presets::two_mode_gmm();
    let cfg = IntegrationConfig {
        n_steps: 64,
        n_paths: 1,
        seed: 2,
        ..Default::default()
    };
    let reference = v2(0.0, 1.0);
    let pts = vec![v2(0.5, 0.5), v2(-1.0, 2.0), v2(0.0, 1.0)];
    let ds = iem::reference_distances(&prior, &reference, &pts, &cfg).unwrap();
    for (p, d) in pts.iter().zip(&ds) {
        let direct = iem::iem(&prior, &reference, p, &cfg).unwrap();
        assert_eq!(*d, direct);
    }
    assert_eq!(ds[2], 0.0);
}

#[test]
fn dimension_mismatches_are_rejected() {
    let prior = presets::std_gaussian(2);
    let cfg = IntegrationConfig {
        n_steps: 16,
        ..Default::default()
    };
    let bad = DVector::from_vec(vec![1.0]);
    assert!(iem_squared(&prior, &bad, &bad, &cfg).is_err());
    let p1 = presets::std_gaussian(1);
    assert!(mismatched_iem(&prior, &p1, &v2(0.0, 0.0), &v2(1.0, 1.0), &cfg).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let prior = presets::std_gaussian(1);
    let x = DVector::from_vec(vec![0.0]);
    for cfg in [
        IntegrationConfig {
            gamma_min: 0.0,
            ..Default::default()
        },
        IntegrationConfig {
            gamma_max: 1e-4,
            ..Default::default()
        },
        IntegrationConfig {
            n_steps: 1,
            ..Default::default()
        },
        IntegrationConfig {
            n_paths: 0,
            ..Default::default()
        },
    ] {
        assert!(iem_squared(&prior, &x, &x, &cfg).is_err());
    }
}
