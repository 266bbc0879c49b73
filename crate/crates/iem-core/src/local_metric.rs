//! The local Riemannian metric `G(x, Γ)` induced by the second-order
//! expansion `IEM²(x, x+ε, Γ) = εᵀ G(x, Γ) ε + o(‖ε‖²)`, in both of its
//! equivalent forms, with discrimination-threshold ellipses and the
//! average-metric identities.
//!
//! ```text
//! G(x, Γ) = ∫₀^Γ γ² E[(∇²log p_{y_γ}(γx + w_γ))²] dγ            (Hessian form)
//!         = ∫₀^Γ E[(I - γ Cov[x | y_γ = γx + w_γ])²] dγ         (covariance form)
//! ```
//!
//! The two forms are related node-by-node through the second-order Tweedie
//! identity, so with matched seeds they agree to round-off — the
//! agreement test is a regression check on the identity, not a
//! statistical one. For `Γ → ∞`, averaging over `x ~ p_x` gives
//! `E[G(x)] = E[-∇²log p_x] = E[∇log p_x ∇log p_xᵀ]`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::channel::{derive_stream_seed, sample_path_indexed};
use crate::iem::{IemError, IntegrationConfig};
use crate::prior::{PriorError, PriorSpec, PSD_CLAMP};

/// Symmetric PSD local metric at an anchor point, with its
/// eigendecomposition (eigenvalues descending, eigenvectors as columns).
#[derive(Debug, Clone)]
pub struct LocalMetric {
    pub g: DMatrix<f64>,
    pub x: DVector<f64>,
    pub gamma_max: f64,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl LocalMetric {
    fn new(g_raw: DMatrix<f64>, x: DVector<f64>, gamma_max: f64) -> Result<Self, IemError> {
        let g = (&g_raw + g_raw.transpose()) * 0.5;
        let eig = g.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        if min_eig < -PSD_CLAMP {
            return Err(IemError::Prior(PriorError::NotPsd {
                min_eigenvalue: min_eig,
            }));
        }
        let d = g.nrows();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .expect("finite eigenvalues")
        });
        let eigenvalues = DVector::from_fn(d, |i, _| eig.eigenvalues[order[i]].max(0.0));
        let eigenvectors = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(Self {
            g,
            x,
            gamma_max,
            eigenvalues,
            eigenvectors,
        })
    }
}

/// Discrimination-threshold ellipse: the unit ball of `G` under
/// `G^{-1/2}`. Radii are `λ_i^{-1/2}`; a larger radius means lower
/// sensitivity along that axis.
#[derive(Debug, Clone)]
pub struct Ellipse {
    pub center: DVector<f64>,
    pub axes: DMatrix<f64>,
    pub radii: DVector<f64>,
}

/// Monte Carlo averages over `x ~ p_x` of the three matrices that
/// coincide at `Γ = ∞`: the local metric, `-∇²log p_x`, and the score
/// outer product.
#[derive(Debug, Clone)]
pub struct MetricTriplet {
    pub metric_mean: DMatrix<f64>,
    /// `None` when the prior has Laplace components (distributional Hessian).
    pub neg_hessian_mean: Option<DMatrix<f64>>,
    pub score_outer_mean: DMatrix<f64>,
}

fn integrate_matrix_integrand<F>(
    prior: &PriorSpec,
    x: &DVector<f64>,
    cfg: &IntegrationConfig,
    mut node_term: F,
) -> Result<DMatrix<f64>, IemError>
where
    F: FnMut(&crate::prior::BlurredPrior, &DVector<f64>, f64) -> Result<DMatrix<f64>, IemError>,
{
    let grid = cfg.grid()?;
    let d = prior.dim();
    if x.len() != d {
        return Err(IemError::DimensionMismatch(format!(
            "anchor has dimension {}, prior has {d}",
            x.len()
        )));
    }
    let kernels = grid
        .nodes()
        .iter()
        .map(|&g| prior.blur(g))
        .collect::<Result<Vec<_>, PriorError>>()?;
    let dt = grid.log_step();
    let mut acc = DMatrix::zeros(d, d);
    let mut y = DVector::zeros(d);
    for p in 0..cfg.n_paths {
        let path = sample_path_indexed(&grid, d, cfg.seed, p as u64);
        for i in 0..grid.len() - 1 {
            let gamma = grid.nodes()[i];
            let w = path.value(i);
            for c in 0..d {
                y[c] = gamma * x[c] + w[c];
            }
            let term = node_term(&kernels[i], &y, gamma)?;
            // left-endpoint rule in log space: weight γ Δt
            acc += term * (gamma * dt);
        }
    }
    acc /= cfg.n_paths as f64;
    if acc.iter().any(|v| !v.is_finite()) {
        return Err(IemError::NonFinite);
    }
    Ok(acc)
}

/// `G(x, Γ)` via the Hessian form `∫ γ² E[(∇²log p_{y_γ})²] dγ`.
pub fn metric_hessian_form(
    prior: &PriorSpec,
    x: &DVector<f64>,
    cfg: &IntegrationConfig,
) -> Result<LocalMetric, IemError> {
    let g = integrate_matrix_integrand(prior, x, cfg, |kernel, y, gamma| {
        let h = kernel.hessian(y)?;
        Ok(&h * &h * (gamma * gamma))
    })?;
    LocalMetric::new(g, x.clone(), cfg.gamma_max)
}

/// `G(x, Γ)` via the covariance form `∫ E[(I - γ Cov[x|y_γ])²] dγ`,
/// with the posterior covariance from the second-order Tweedie identity.
pub fn metric_cov_form(
    prior: &PriorSpec,
    x: &DVector<f64>,
    cfg: &IntegrationConfig,
) -> Result<LocalMetric, IemError> {
    let d = prior.dim();
    let eye = DMatrix::<f64>::identity(d, d);
    let g = integrate_matrix_integrand(prior, x, cfg, |kernel, y, gamma| {
        let cov = kernel.posterior_cov(y)?;
        let t = &eye - cov * gamma;
        Ok(&t * &t)
    })?;
    LocalMetric::new(g, x.clone(), cfg.gamma_max)
}

/// Local metrics and their ellipses over a batch of anchors, evaluated in
/// parallel with one shared path set (the anchors reuse `cfg.seed`).
pub fn ellipse_field(
    prior: &PriorSpec,
    anchors: &[DVector<f64>],
    cfg: &IntegrationConfig,
) -> Result<Vec<(LocalMetric, Ellipse)>, IemError> {
    anchors
        .par_iter()
        .map(|x| {
            let m = metric_hessian_form(prior, x, cfg)?;
            let e = ellipse(&m)?;
            Ok((m, e))
        })
        .collect()
}

/// Eigen-geometry of `G^{-1/2}`: axes are the eigenvectors of `G`, radii
/// the inverse square roots of its eigenvalues.
pub fn ellipse(metric: &LocalMetric) -> Result<Ellipse, IemError> {
    let floor = 1e-12;
    if metric.eigenvalues.iter().any(|&l| l <= floor) {
        return Err(IemError::InvalidConfig(format!(
            "metric is singular: eigenvalue {:.3e} under the {floor:.0e} floor",
            metric.eigenvalues.min()
        )));
    }
    Ok(Ellipse {
        center: metric.x.clone(),
        axes: metric.eigenvectors.clone(),
        radii: metric.eigenvalues.map(|l| 1.0 / l.sqrt()),
    })
}

/// Monte Carlo check data for the `Γ = ∞` average-metric identity:
/// sample `n_samples` points from the prior and average (a) the local
/// metric (each sample on its own derived path stream), (b) `-∇²log p_x`,
/// (c) `∇log p_x ∇log p_xᵀ`.
pub fn average_metric_triplet(
    prior: &PriorSpec,
    n_samples: usize,
    cfg: &IntegrationConfig,
    seed: u64,
) -> Result<MetricTriplet, IemError> {
    if n_samples == 0 {
        return Err(IemError::InvalidConfig("n_samples must be >= 1".into()));
    }
    let d = prior.dim();
    let samples = prior.sample(n_samples, seed)?;
    let supports_hessian = prior
        .clean_hessian(&samples.row(0).transpose())
        .map(|_| true)
        .unwrap_or(false);

    let per_sample = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let x = samples.row(i).transpose();
            let sample_cfg = IntegrationConfig {
                seed: derive_stream_seed(cfg.seed, i as u64),
                ..*cfg
            };
            let g = metric_hessian_form(prior, &x, &sample_cfg)?.g;
            let s = prior.clean_score(&x)?;
            let h = if supports_hessian {
                Some(prior.clean_hessian(&x)?)
            } else {
                None
            };
            Ok((g, s, h))
        })
        .collect::<Result<Vec<_>, IemError>>()?;

    let mut metric_mean = DMatrix::zeros(d, d);
    let mut score_outer_mean = DMatrix::zeros(d, d);
    let mut neg_hessian_mean = supports_hessian.then(|| DMatrix::zeros(d, d));
    for (g, s, h) in &per_sample {
        metric_mean += g;
        score_outer_mean += s * s.transpose();
        if let (Some(acc), Some(h)) = (neg_hessian_mean.as_mut(), h) {
            *acc -= h;
        }
    }
    let n = n_samples as f64;
    metric_mean /= n;
    score_outer_mean /= n;
    if let Some(acc) = neg_hessian_mean.as_mut() {
        *acc /= n;
    }
    Ok(MetricTriplet {
        metric_mean,
        neg_hessian_mean,
        score_outer_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::presets;
    use approx::assert_relative_eq;

    #[test]
    fn ellipse_of_identity_metric_is_unit_circle() {
        let m = LocalMetric::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            4.0,
        )
        .unwrap();
        let e = ellipse(&m).unwrap();
        assert_relative_eq!(e.radii[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(e.radii[1], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn ellipse_radii_are_inverse_sqrt_eigenvalues() {
        let m = LocalMetric::new(
            DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]),
            DVector::zeros(2),
            4.0,
        )
        .unwrap();
        // eigenvalues sorted descending: (4, 1) -> radii (1/2, 1)
        assert_relative_eq!(m.eigenvalues[0], 4.0, max_relative = 1e-14);
        let e = ellipse(&m).unwrap();
        assert_relative_eq!(e.radii[0], 0.5, max_relative = 1e-14);
        assert_relative_eq!(e.radii[1], 1.0, max_relative = 1e-14);
        // axes orthonormal
        let q = &e.axes * e.axes.transpose();
        assert!((q - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-10);
    }

    #[test]
    fn singular_metric_is_rejected() {
        let m = LocalMetric::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DVector::zeros(2),
            4.0,
        )
        .unwrap();
        assert!(ellipse(&m).is_err());
    }

    #[test]
    fn gaussian_metric_is_constant_in_x() {
        let p = presets::anisotropic_gaussian();
        let cfg = IntegrationConfig {
            n_steps: 96,
            n_paths: 2,
            seed: 1,
            ..Default::default()
        };
        let g1 = metric_hessian_form(&p, &DVector::from_vec(vec![0.0, 1.0]), &cfg)
            .unwrap()
            .g;
        let g2 = metric_hessian_form(&p, &DVector::from_vec(vec![3.0, -2.0]), &cfg)
            .unwrap()
            .g;
        assert!((&g1 - &g2).abs().max() < 1e-12 * g1.abs().max());
    }

    #[test]
    fn score_outer_average_is_psd() {
        let p = presets::two_mode_gmm();
        let cfg = IntegrationConfig {
            n_steps: 32,
            gamma_max: 16.0,
            ..Default::default()
        };
        let t = average_metric_triplet(&p, 50, &cfg, 9).unwrap();
        let eig = t.score_outer_mean.symmetric_eigen();
        assert!(eig.eigenvalues.min() > -1e-12);
    }
}
