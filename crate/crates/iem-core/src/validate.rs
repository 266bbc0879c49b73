//! Independent oracles and identity checks for the provable relations the
//! metric satisfies: the Mahalanobis closed form, the pointwise
//! information–estimation identity, the Itô dynamics of the log-ratio
//! process, the KL decomposition of averaged squared distances, the
//! quadratic expansion against the local metric, invariance under
//! Euclidean isometries, and the metric axioms.
//!
//! Every check is deterministic given its seed and reports a
//! machine-readable pass/fail: `pass` iff `measured <= tolerance`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::channel::{derive_stream_seed, sample_path_indexed, ChannelError};
use crate::iem::{
    self, iem_squared, iem_squared_on_paths, DistanceEstimate, Engine, IemError, IntegrationConfig,
    Side,
};
use crate::local_metric::metric_hessian_form;
use crate::prior::{presets, PriorError, PriorSpec};

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error(transparent)]
    Iem(#[from] IemError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("unknown validation suite `{0}`")]
    UnknownSuite(String),
    #[error("{0}")]
    Unsupported(String),
}

/// Outcome of one identity check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub config: serde_json::Value,
}

impl CheckReport {
    fn new(name: impl Into<String>, measured: f64, tolerance: f64, config: serde_json::Value) -> Self {
        Self {
            name: name.into(),
            pass: measured <= tolerance,
            measured,
            tolerance,
            config,
        }
    }
}

// ---------------------------------------------------------------------------
// Mahalanobis closed form
// ---------------------------------------------------------------------------

/// Gaussian prior: the squared metric must equal `Δᵀ Σ⁻¹ Δ`.
pub fn check_mahalanobis(
    cov: &DMatrix<f64>,
    mean: &DVector<f64>,
    pairs: &[(DVector<f64>, DVector<f64>)],
    cfg: &IntegrationConfig,
) -> Result<CheckReport, ValidateError> {
    let prior = PriorSpec::gaussian(mean.clone(), cov.clone())?;
    let prec = cov
        .clone()
        .cholesky()
        .expect("construction guarantees SPD")
        .inverse();
    let mut worst = 0.0f64;
    for (x1, x2) in pairs {
        let delta = x1 - x2;
        let target = (&prec * &delta).dot(&delta);
        let est = iem_squared(&prior, x1, x2, cfg)?.squared_value;
        worst = worst.max((est - target).abs() / target);
    }
    Ok(CheckReport::new(
        "mahalanobis",
        worst,
        0.03,
        json!({"cfg": cfg, "pairs": pairs.len(), "dim": mean.len()}),
    ))
}

/// Near-singular covariance: as the integration ceiling grows the estimate
/// for a displacement along the collapsing direction keeps growing
/// (factor >= 4 per ceiling step here), diverging in the limit.
pub fn check_mahalanobis_divergence(seed: u64) -> Result<CheckReport, ValidateError> {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-6]);
    let prior = PriorSpec::gaussian(DVector::zeros(2), cov)?;
    let x1 = DVector::zeros(2);
    let x2 = DVector::from_vec(vec![0.0, 1.0]);
    let mut values = Vec::new();
    for e in [4, 7, 10] {
        let cfg = IntegrationConfig {
            gamma_max: 2f64.powi(e),
            n_steps: 200,
            n_paths: 1,
            seed,
            ..Default::default()
        };
        values.push(iem_squared(&prior, &x1, &x2, &cfg)?.squared_value);
    }
    // measured = largest successive ratio prev/next; growth by >= 4x means <= 0.25
    let measured = values
        .windows(2)
        .map(|w| w[0] / w[1])
        .fold(0.0f64, f64::max);
    Ok(CheckReport::new(
        "mahalanobis_divergence",
        measured,
        0.25,
        json!({"squared_values": values, "gamma_max": [16.0, 128.0, 1024.0]}),
    ))
}

// ---------------------------------------------------------------------------
// Pointwise information-estimation identity
// ---------------------------------------------------------------------------

/// Both sides of the per-path identity for a 1-D prior:
/// `-log p_{y_Γ}(Γx + w_Γ)` versus the discretized
/// `Σ e_i·Δw_i + ½ Σ ‖e_i‖² Δγ_i - log p_{w_Γ}(w_Γ)` with
/// `e_i = x - E[x | y_{γ_i} = γ_i x + w_i]`.
fn immse_sides(
    prior: &PriorSpec,
    x: f64,
    cfg: &IntegrationConfig,
    seed: u64,
) -> Result<(f64, f64), ValidateError> {
    assert_eq!(prior.dim(), 1, "pointwise identity check wants a 1-D prior");
    let grid = cfg.grid()?;
    let path = sample_path_indexed(&grid, 1, seed, 0);
    let n = grid.len();
    let gamma_max = grid.gamma_max();
    let xv = DVector::from_vec(vec![x]);

    let mut ito = 0.0;
    let mut drift = 0.0;
    let mut y = DVector::zeros(1);
    let mut s = DVector::zeros(1);
    for i in 0..n - 1 {
        let gamma = grid.nodes()[i];
        let w = path.value(i)[0];
        y[0] = gamma * x + w;
        let kernel = prior.blur(gamma)?;
        kernel.log_density_score_into(&y, &mut s)?;
        // Tweedie: e = x - E[x|y] = -w/γ - score
        let e = -w / gamma - s[0];
        let dw = path.value(i + 1)[0] - w;
        let dgamma = grid.nodes()[i + 1] - gamma;
        ito += e * dw;
        drift += 0.5 * e * e * dgamma;
    }
    let w_end = path.value(n - 1)[0];
    let log_p_w = -0.5 * (2.0 * std::f64::consts::PI * gamma_max).ln()
        - 0.5 * w_end * w_end / gamma_max;
    let rhs = ito + drift - log_p_w;

    y[0] = gamma_max * x + w_end;
    let lhs = -prior.blurred_log_density(&y, gamma_max)?;
    let _ = &xv;
    Ok((lhs, rhs))
}

/// Per-path identity at a fixed step count; measured value is
/// `|lhs - rhs| / (1 + |lhs|)`.
pub fn check_pointwise_immse(
    prior: &PriorSpec,
    x: f64,
    cfg: &IntegrationConfig,
    seed: u64,
) -> Result<CheckReport, ValidateError> {
    let (lhs, rhs) = immse_sides(prior, x, cfg, seed)?;
    let measured = (lhs - rhs).abs() / (1.0 + lhs.abs());
    Ok(CheckReport::new(
        "pointwise_immse",
        measured,
        0.05,
        json!({"cfg": cfg, "x": x, "seed": seed, "lhs": lhs, "rhs": rhs}),
    ))
}

/// Strong-order-½ convergence: the mean squared identity residual over a
/// seed batch halves when the step count doubles. Measured value is the
/// distance of `log2(mse_coarse / mse_fine)` from the center of the
/// accepted band `[1.5, 3]`.
pub fn check_immse_convergence(
    prior: &PriorSpec,
    x: f64,
    base_steps: usize,
    n_seeds: u64,
    cfg: &IntegrationConfig,
) -> Result<CheckReport, ValidateError> {
    let mse = |steps: usize| -> Result<f64, ValidateError> {
        let c = IntegrationConfig {
            n_steps: steps,
            ..*cfg
        };
        let mut acc = 0.0;
        for s in 0..n_seeds {
            let (lhs, rhs) = immse_sides(prior, x, &c, derive_stream_seed(cfg.seed, s))?;
            acc += (lhs - rhs).powi(2);
        }
        Ok(acc / n_seeds as f64)
    };
    let coarse = mse(base_steps)?;
    let fine = mse(base_steps * 2)?;
    let ratio = coarse / fine;
    // band [1.5, 3] in log2 is [0.585, 1.585]; center 1.085, half-width 0.5
    let measured = (ratio.log2() - 1.085).abs();
    Ok(CheckReport::new(
        "immse_convergence",
        measured,
        0.5,
        json!({
            "base_steps": base_steps, "n_seeds": n_seeds, "x": x,
            "mse_coarse": coarse, "mse_fine": fine, "ratio": ratio,
            "accepted_ratio_band": [1.5, 3.0],
        }),
    ))
}

// ---------------------------------------------------------------------------
// Log-ratio process dynamics
// ---------------------------------------------------------------------------

/// Drift + diffusion accumulation of the log-ratio process versus its
/// direct evaluation at the final node.
pub fn check_z_consistency(
    prior: &PriorSpec,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    cfg: &IntegrationConfig,
    seed: u64,
) -> Result<CheckReport, ValidateError> {
    let (direct, accumulated) = z_sides(prior, x1, x2, cfg, seed)?;
    let measured = (direct - accumulated).abs() / (1.0 + direct.abs());
    Ok(CheckReport::new(
        "z_consistency",
        measured,
        0.05,
        json!({"cfg": cfg, "seed": seed, "direct": direct, "accumulated": accumulated}),
    ))
}

fn z_sides(
    prior: &PriorSpec,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    cfg: &IntegrationConfig,
    seed: u64,
) -> Result<(f64, f64), ValidateError> {
    let grid = cfg.grid()?;
    let d = prior.dim();
    let path = sample_path_indexed(&grid, d, seed, 0);
    let z = iem::z_process(prior, prior, x1, x2, &path)?;
    let n = grid.len();

    // z evolves as dz = (s1 - s2)·dw - ½(‖e1‖² - ‖e2‖²) dγ, started from
    // the directly evaluated value at the first node.
    let mut acc = z[0];
    let mut y = DVector::zeros(d);
    let mut s1 = DVector::zeros(d);
    let mut s2 = DVector::zeros(d);
    for i in 0..n - 1 {
        let gamma = grid.nodes()[i];
        let w = path.value(i);
        let kernel = prior.blur(gamma)?;
        for c in 0..d {
            y[c] = gamma * x1[c] + w[c];
        }
        kernel.log_density_score_into(&y, &mut s1)?;
        for c in 0..d {
            y[c] = gamma * x2[c] + w[c];
        }
        kernel.log_density_score_into(&y, &mut s2)?;

        let w_next = path.value(i + 1);
        let dgamma = grid.nodes()[i + 1] - gamma;
        let mut diffusion = 0.0;
        let mut e1_sq = 0.0;
        let mut e2_sq = 0.0;
        for c in 0..d {
            let dw = w_next[c] - w[c];
            diffusion += (s1[c] - s2[c]) * dw;
            let e1 = -w[c] / gamma - s1[c];
            let e2 = -w[c] / gamma - s2[c];
            e1_sq += e1 * e1;
            e2_sq += e2 * e2;
        }
        acc += diffusion - 0.5 * (e1_sq - e2_sq) * dgamma;
    }
    Ok((z[n - 1], acc))
}

/// Residual MSE of the z-identity shrinks roughly fourfold over two step
/// doublings; measured is `mse_fine / mse_coarse`.
pub fn check_z_decay(
    prior: &PriorSpec,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    cfg: &IntegrationConfig,
    n_seeds: u64,
) -> Result<CheckReport, ValidateError> {
    let mse = |steps: usize| -> Result<f64, ValidateError> {
        let c = IntegrationConfig {
            n_steps: steps,
            ..*cfg
        };
        let mut acc = 0.0;
        for s in 0..n_seeds {
            let (direct, accumulated) = z_sides(prior, x1, x2, &c, derive_stream_seed(cfg.seed, s))?;
            acc += (direct - accumulated).powi(2);
        }
        Ok(acc / n_seeds as f64)
    };
    let coarse = mse(cfg.n_steps)?;
    let fine = mse(cfg.n_steps * 4)?;
    let measured = fine / coarse;
    Ok(CheckReport::new(
        "z_error_decay",
        measured,
        0.6,
        json!({"steps": [cfg.n_steps, cfg.n_steps * 4], "n_seeds": n_seeds,
               "mse_coarse": coarse, "mse_fine": fine}),
    ))
}

// ---------------------------------------------------------------------------
// KL decomposition
// ---------------------------------------------------------------------------

/// Tensor-grid trapezoid KL divergence `KL(p_x ‖ p_{x-s})` for 1-D/2-D
/// priors; independent of the channel machinery under test.
pub fn kl_shift_quadrature(prior: &PriorSpec, shift: &DVector<f64>) -> Result<f64, ValidateError> {
    let d = prior.dim();
    if d > 2 {
        return Err(ValidateError::Unsupported(
            "quadrature KL oracle supports d <= 2".into(),
        ));
    }
    let nodes_per_axis = 2001usize;
    let (mut lo, mut hi) = prior.support_box(8.0);
    for i in 0..d {
        lo[i] -= shift[i].abs();
        hi[i] += shift[i].abs();
    }
    let axis = |i: usize| -> Vec<f64> {
        let step = (hi[i] - lo[i]) / (nodes_per_axis - 1) as f64;
        (0..nodes_per_axis).map(|k| lo[i] + k as f64 * step).collect()
    };
    // KL(p ‖ p_shifted) = ∫ p(u) [log p(u) - log p(u + s)] du
    let integrand = |u: &DVector<f64>| -> Result<f64, ValidateError> {
        let lp = prior.log_density(u)?;
        let lps = prior.log_density(&(u + shift))?;
        let p = lp.exp();
        Ok(if p == 0.0 { 0.0 } else { p * (lp - lps) })
    };
    let mut total = 0.0;
    if d == 1 {
        let xs = axis(0);
        let step = xs[1] - xs[0];
        for (k, &x) in xs.iter().enumerate() {
            let w = if k == 0 || k == nodes_per_axis - 1 { 0.5 } else { 1.0 };
            total += w * integrand(&DVector::from_vec(vec![x]))?;
        }
        total *= step;
    } else {
        let xs = axis(0);
        let ys = axis(1);
        let step = (xs[1] - xs[0]) * (ys[1] - ys[0]);
        let mut u = DVector::zeros(2);
        for (i, &x) in xs.iter().enumerate() {
            let wx = if i == 0 || i == nodes_per_axis - 1 { 0.5 } else { 1.0 };
            let mut row = 0.0;
            for (j, &y) in ys.iter().enumerate() {
                let wy = if j == 0 || j == nodes_per_axis - 1 { 0.5 } else { 1.0 };
                u[0] = x;
                u[1] = y;
                row += wy * integrand(&u)?;
            }
            total += wx * row;
        }
        total *= step;
    }
    Ok(total)
}

/// `½ E_x[IEM²(x, x+s)]` versus `KL(p_x ‖ p_{x-s})` (closed form for
/// Gaussians, quadrature otherwise).
pub fn check_kl_decomposition(
    prior: &PriorSpec,
    shift: &DVector<f64>,
    n_samples: usize,
    cfg: &IntegrationConfig,
) -> Result<CheckReport, ValidateError> {
    let kl = match prior.gaussian_params() {
        Some((_, cov)) => {
            let prec = cov.clone().cholesky().expect("SPD").inverse();
            0.5 * (&prec * shift).dot(shift)
        }
        None => kl_shift_quadrature(prior, shift)?,
    };
    let samples = prior.sample(n_samples, derive_stream_seed(cfg.seed, 0x6b6c))?;
    let mut acc = 0.0;
    for i in 0..n_samples {
        let x = samples.row(i).transpose();
        let xs = &x + shift;
        let sample_cfg = IntegrationConfig {
            seed: derive_stream_seed(cfg.seed, i as u64),
            ..*cfg
        };
        acc += iem_squared(prior, &x, &xs, &sample_cfg)?.squared_value;
    }
    let lhs = 0.5 * acc / n_samples as f64;
    let measured = if kl == 0.0 && lhs == 0.0 {
        0.0
    } else {
        (lhs - kl).abs() / kl.abs().max(1e-12)
    };
    Ok(CheckReport::new(
        "kl_decomposition",
        measured,
        0.05,
        json!({"cfg": cfg, "n_samples": n_samples, "shift": shift.as_slice(),
               "half_mean_squared_iem": lhs, "kl": kl}),
    ))
}

// ---------------------------------------------------------------------------
// Quadratic expansion against the local metric
// ---------------------------------------------------------------------------

/// `IEM²(x, x+ε) ≈ εᵀ G(x) ε` for `‖ε‖ = 1e-2` along both
/// eigen-directions of `G`, with matched paths on both sides.
pub fn check_quadratic_expansion(
    prior: &PriorSpec,
    x: &DVector<f64>,
    cfg: &IntegrationConfig,
) -> Result<CheckReport, ValidateError> {
    let metric = metric_hessian_form(prior, x, cfg)?;
    let eps_norm = 1e-2;
    let mut ratios = Vec::new();
    let mut worst = 0.0f64;
    for j in 0..prior.dim() {
        let dir = metric.eigenvectors.column(j).into_owned();
        let eps = &dir * eps_norm;
        let target = (&metric.g * &eps).dot(&eps);
        let xp = x + &eps;
        let sq = iem_squared(prior, x, &xp, cfg)?.squared_value;
        let dev = (sq - target).abs() / target;
        ratios.push(json!({"direction": j, "quadratic_form": target, "iem_squared": sq, "deviation": dev}));
        worst = worst.max(dev);
    }
    Ok(CheckReport::new(
        "quadratic_expansion",
        worst,
        0.05,
        json!({"cfg": cfg, "x": x.as_slice(), "eps_norm": eps_norm, "directions": ratios}),
    ))
}

// ---------------------------------------------------------------------------
// Isometry invariance
// ---------------------------------------------------------------------------

fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| -> f64 { StandardNormal.sample(rng) });
    let qr = m.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

fn random_signed_permutation(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let perm = rand::seq::index::sample(rng, d, d).into_vec();
    let mut m = DMatrix::zeros(d, d);
    for (i, &j) in perm.iter().enumerate() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        m[(i, j)] = sign;
    }
    m
}

/// Transform the prior, both points, and the paths (`w ↦ A w`) by a random
/// Euclidean isometry `x ↦ A x + b`; the squared-metric estimate must be
/// unchanged to round-off. Priors with Laplace components use random
/// signed permutations (the family is closed under exactly those).
pub fn check_isometry(
    prior: &PriorSpec,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    cfg: &IntegrationConfig,
    seed: u64,
    n_isometries: usize,
) -> Result<CheckReport, ValidateError> {
    let d = prior.dim();
    let grid = cfg.grid()?;
    let paths: Vec<_> = (0..cfg.n_paths)
        .map(|p| sample_path_indexed(&grid, d, cfg.seed, p as u64))
        .collect();
    let base = iem_squared_on_paths(prior, x1, x2, &grid, &paths)?.squared_value;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n_isometries {
        let a = if prior.has_laplace_component() {
            random_signed_permutation(d, &mut rng)
        } else {
            random_orthogonal(d, &mut rng)
        };
        let b = DVector::from_fn(d, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let prior_t = prior.transform_isometry(&a, &b)?;
        let x1_t = &a * x1 + &b;
        let x2_t = &a * x2 + &b;
        let mut out = DVector::zeros(d);
        let paths_t: Vec<_> = paths
            .iter()
            .map(|p| {
                p.map_nodes(|src, dst| {
                    out.gemv(1.0, &a, &DVector::from_column_slice(src), 0.0);
                    dst.copy_from_slice(out.as_slice());
                })
            })
            .collect();
        let transformed = iem_squared_on_paths(&prior_t, &x1_t, &x2_t, &grid, &paths_t)?.squared_value;
        worst = worst.max((transformed - base).abs() / base.abs().max(1e-300));
    }
    Ok(CheckReport::new(
        "isometry_invariance",
        worst,
        1e-12,
        json!({"cfg": cfg, "seed": seed, "n_isometries": n_isometries, "base_squared": base}),
    ))
}

// ---------------------------------------------------------------------------
// Metric axioms
// ---------------------------------------------------------------------------

/// Symmetry (exact under shared paths), nonnegativity, exact zero
/// self-distance with statistical separation away from it, and the
/// triangle inequality with `3·stderr` slack, over seeded sample triples.
pub fn metric_axiom_suite(
    prior: &PriorSpec,
    n_triples: usize,
    cfg: &IntegrationConfig,
) -> Result<CheckReport, ValidateError> {
    let engine = Engine::new(prior, None, cfg)?;
    let samples = prior.sample(3 * n_triples, derive_stream_seed(cfg.seed, 0x617869))?;
    let points: Vec<DVector<f64>> = (0..3 * n_triples).map(|i| samples.row(i).transpose()).collect();
    let tables = points
        .iter()
        .map(|p| engine.point_table(p, Side::A))
        .collect::<Result<Vec<_>, _>>()?;

    let dist = |i: usize, j: usize| -> Result<DistanceEstimate, IemError> {
        engine.estimate(&tables[i], &tables[j], None)
    };

    let mut sym_violation = 0.0f64;
    let mut neg_violation = 0.0f64;
    let mut self_violation = 0.0f64;
    let mut sep_violation = 0.0f64;
    let mut tri_violation = 0.0f64;
    for t in 0..n_triples {
        let (a, b, c) = (3 * t, 3 * t + 1, 3 * t + 2);
        let d_ab = dist(a, b)?;
        let d_ba = dist(b, a)?;
        sym_violation = sym_violation.max((d_ab.squared_value - d_ba.squared_value).abs());
        let d_bc = dist(b, c)?;
        let d_ac = dist(a, c)?;
        for e in [&d_ab, &d_bc, &d_ac] {
            neg_violation = neg_violation.max(-e.squared_value);
        }
        let d_aa = dist(a, a)?;
        self_violation = self_violation.max(d_aa.squared_value.abs());
        // statistical separation for well-separated pairs
        if (&points[a] - &points[b]).norm() >= 0.1 {
            sep_violation = sep_violation.max(5.0 * d_ab.value_stderr() - d_ab.value);
        }
        // triangle with 3x combined stderr slack plus a round-off guard
        let slack = 3.0 * (d_ab.value_stderr() + d_bc.value_stderr() + d_ac.value_stderr())
            + 1e-12 * (d_ab.value + d_bc.value + 1.0);
        tri_violation = tri_violation.max(d_ac.value - d_ab.value - d_bc.value - slack);
    }
    let measured = sym_violation
        .max(neg_violation)
        .max(self_violation)
        .max(sep_violation)
        .max(tri_violation);
    Ok(CheckReport::new(
        "metric_axioms",
        measured.max(0.0),
        0.0,
        json!({
            "cfg": cfg, "n_triples": n_triples,
            "symmetry_violation": sym_violation,
            "negativity_violation": neg_violation,
            "self_distance_violation": self_violation,
            "separation_violation": sep_violation,
            "triangle_violation": tri_violation,
        }),
    ))
}

// ---------------------------------------------------------------------------
// Named suites
// ---------------------------------------------------------------------------

fn with_name(mut r: CheckReport, name: String) -> CheckReport {
    r.name = name;
    r
}

fn mahalanobis_suite(seed: u64) -> Result<Vec<CheckReport>, ValidateError> {
    let cfg = IntegrationConfig {
        n_steps: 200,
        n_paths: 50,
        seed,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_stream_seed(seed, 0x6d61));
    let draw_pairs = |rng: &mut ChaCha8Rng| -> Vec<(DVector<f64>, DVector<f64>)> {
        (0..20)
            .map(|_| {
                let a = DVector::from_fn(2, |_, _| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * std::f64::consts::SQRT_2
                });
                let b = DVector::from_fn(2, |_, _| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * std::f64::consts::SQRT_2
                });
                (a, b)
            })
            .collect()
    };

    let mut reports = Vec::new();
    let diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.1]);
    let mean = DVector::from_vec(vec![0.0, 1.0]);
    let pairs = draw_pairs(&mut rng);
    reports.push(with_name(
        check_mahalanobis(&diag, &mean, &pairs, &cfg)?,
        "mahalanobis(diag_1_0.1)".into(),
    ));

    let g = DMatrix::from_fn(2, 2, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let spd = &g * g.transpose() + DMatrix::<f64>::identity(2, 2) * 0.1;
    let pairs = draw_pairs(&mut rng);
    reports.push(with_name(
        check_mahalanobis(&spd, &DVector::zeros(2), &pairs, &cfg)?,
        "mahalanobis(random_spd)".into(),
    ));

    // 1-D scalar oracle: sigma = 1, |x1 - x2| = 1 gives exactly 1
    let one = DMatrix::identity(1, 1);
    let pairs_1d = vec![(DVector::from_vec(vec![0.0]), DVector::from_vec(vec![1.0]))];
    reports.push(with_name(
        check_mahalanobis(&one, &DVector::zeros(1), &pairs_1d, &cfg)?,
        "mahalanobis(scalar_unit)".into(),
    ));

    reports.push(check_mahalanobis_divergence(seed)?);
    Ok(reports)
}

fn immse_suite(seed: u64) -> Result<Vec<CheckReport>, ValidateError> {
    let cfg = IntegrationConfig {
        n_steps: 4096,
        seed,
        ..Default::default()
    };
    let mut reports = Vec::new();
    for (label, prior) in [
        ("gaussian", presets::std_gaussian(1)),
        ("gmm", presets::bimodal_gmm_1d()),
    ] {
        for s in 0..5u64 {
            let r = check_pointwise_immse(&prior, 0.7, &cfg, derive_stream_seed(seed, 100 + s))?;
            reports.push(with_name(r, format!("pointwise_immse({label}, seed{s})")));
        }
        let r = check_immse_convergence(&prior, 0.7, 2048, 100, &cfg)?;
        reports.push(with_name(r, format!("immse_convergence({label})")));
    }
    Ok(reports)
}

fn z_suite(seed: u64) -> Result<Vec<CheckReport>, ValidateError> {
    let cfg = IntegrationConfig {
        n_steps: 4096,
        seed,
        ..Default::default()
    };
    let mut reports = Vec::new();
    let ga = presets::std_gaussian(2);
    let x1 = DVector::from_vec(vec![0.4, -0.2]);
    let x2 = DVector::from_vec(vec![-1.0, 0.7]);
    for s in 0..5u64 {
        let r = check_z_consistency(&ga, &x1, &x2, &cfg, derive_stream_seed(seed, 200 + s))?;
        reports.push(with_name(r, format!("z_consistency(gaussian, seed{s})")));
    }
    let gmm = presets::two_mode_gmm();
    for s in 0..5u64 {
        let r = check_z_consistency(&gmm, &x1, &x2, &cfg, derive_stream_seed(seed, 300 + s))?;
        reports.push(with_name(r, format!("z_consistency(gmm, seed{s})")));
    }
    let decay_cfg = IntegrationConfig {
        n_steps: 1024,
        seed,
        ..Default::default()
    };
    reports.push(check_z_decay(&ga, &x1, &x2, &decay_cfg, 40)?);
    Ok(reports)
}

fn kl_suite(seed: u64) -> Result<Vec<CheckReport>, ValidateError> {
    let cfg = IntegrationConfig {
        n_paths: 10,
        seed,
        ..Default::default()
    };
    let mut reports = Vec::new();
    let g = presets::std_gaussian(2);
    let r = check_kl_decomposition(&g, &DVector::from_vec(vec![1.0, 0.0]), 1000, &cfg)?;
    reports.push(with_name(r, "kl_decomposition(gaussian)".into()));
    let gmm = presets::correlated_gmm();
    let r = check_kl_decomposition(&gmm, &DVector::from_vec(vec![0.0, 0.5]), 1000, &cfg)?;
    reports.push(with_name(r, "kl_decomposition(gmm_vs_quadrature)".into()));
    Ok(reports)
}

fn expansion_suite(seed: u64) -> Result<Vec<CheckReport>, ValidateError> {
    let cfg = IntegrationConfig {
        n_paths: 200,
        seed,
        ..Default::default()
    };
    let prior = presets::two_mode_gmm();
    let anchors = [
        DVector::from_vec(vec![0.0, 1.0]),
        DVector::from_vec(vec![1.0, -1.0]),
        DVector::from_vec(vec![0.5, 0.0]),
        DVector::from_vec(vec![-1.0, 1.5]),
        DVector::from_vec(vec![2.0, -0.5]),
    ];
    anchors
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let r = check_quadratic_expansion(&prior, x, &cfg)?;
            Ok(with_name(r, format!("quadratic_expansion(anchor{i})")))
        })
        .collect()
}

fn isometry_suite(seed: u64) -> Result<Vec<CheckReport>, ValidateError> {
    let cfg = IntegrationConfig {
        n_steps: 128,
        n_paths: 2,
        seed,
        ..Default::default()
    };
    let x1 = DVector::from_vec(vec![0.3, 0.8]);
    let x2 = DVector::from_vec(vec![-0.9, -0.4]);
    let mut reports = Vec::new();
    for (label, prior) in [
        ("gaussian", presets::anisotropic_gaussian()),
        ("gmm", presets::two_mode_gmm()),
        ("laplace", presets::product_laplace_2d()),
    ] {
        let r = check_isometry(&prior, &x1, &x2, &cfg, derive_stream_seed(seed, 400), 20)?;
        reports.push(with_name(r, format!("isometry_invariance({label})")));
    }
    Ok(reports)
}

fn axiom_suite_all(seed: u64) -> Result<Vec<CheckReport>, ValidateError> {
    let cfg = IntegrationConfig {
        n_steps: 200,
        n_paths: 50,
        seed,
        ..Default::default()
    };
    let mut reports = Vec::new();
    for (label, prior) in [
        ("gaussian", presets::anisotropic_gaussian()),
        ("gmm", presets::two_mode_gmm()),
        ("laplace", presets::product_laplace_2d()),
    ] {
        let r = metric_axiom_suite(&prior, 100, &cfg)?;
        reports.push(with_name(r, format!("metric_axioms({label})")));
    }
    Ok(reports)
}

pub const SUITE_NAMES: &[&str] = &[
    "mahalanobis",
    "immse",
    "z",
    "kl",
    "expansion",
    "isometry",
    "axioms",
];

/// Run one named suite (or `all`) with its pinned configuration.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<CheckReport>, ValidateError> {
    match name {
        "mahalanobis" => mahalanobis_suite(seed),
        "immse" => immse_suite(seed),
        "z" => z_suite(seed),
        "kl" => kl_suite(seed),
        "expansion" => expansion_suite(seed),
        "isometry" => isometry_suite(seed),
        "axioms" => axiom_suite_all(seed),
        "all" => {
            let mut all = Vec::new();
            for suite in SUITE_NAMES {
                all.extend(run_suite(suite, seed)?);
            }
            Ok(all)
        }
        other => Err(ValidateError::UnknownSuite(other.into())),
    }
}
