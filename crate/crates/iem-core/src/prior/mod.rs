//! Analytic prior densities with exact blurred log-densities, scores,
//! Hessians, Tweedie denoisers, posterior covariances, and samplers.
//!
//! A prior `p_x` on ℝ^d is observed through the Gaussian channel
//! `y_γ = γ x + w_γ`, `w_γ ~ N(0, γ I)`, so the channel output density
//! `p_{y_γ}` is the γ-scaled prior convolved with `N(0, γ I)`. Everything
//! downstream needs the blurred log-density and its first two derivatives
//! in `y`:
//!
//! - Gaussian prior: `p_{y_γ} = N(γμ, γ²Σ + γI)` in closed form.
//! - Product Laplace: per-coordinate Laplace⊛Gaussian convolution,
//!   evaluated in log domain through the scaled complementary error
//!   function (see [`blur`]).
//! - Mixtures (depth 1, Gaussian or product-Laplace leaves): log-sum-exp
//!   of the component blurred densities with posterior responsibilities.
//!
//! The Tweedie–Miyasawa identities tie these to denoising:
//! `E[x | y_γ = y] = y/γ + ∇log p_{y_γ}(y)` and
//! `Cov[x | y_γ = y] = ∇²log p_{y_γ}(y) + I/γ`.

mod blur;
pub mod presets;

pub use blur::{BlurredEval, BlurredPrior};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Threshold below which `Σ_k π_k` must match 1.
const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Posterior-covariance eigenvalues below this are a hard error; values in
/// `[-PSD_CLAMP, 0)` are treated as round-off and clamped to zero.
pub const PSD_CLAMP: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PriorError {
    #[error("invalid prior field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("SNR gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("non-finite value while evaluating {0}")]
    NonFinite(&'static str),
    #[error("clean score undefined: coordinate {coord} sits exactly at a Laplace location")]
    AtKink { coord: usize },
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("posterior covariance not PSD: eigenvalue {min_eigenvalue} below -{PSD_CLAMP}")]
    NotPsd { min_eigenvalue: f64 },
    #[error("dimension mismatch: prior has dimension {expected}, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

fn invalid(field: &str, reason: impl Into<String>) -> PriorError {
    PriorError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone)]
pub(crate) struct GaussianParams {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Lower Cholesky factor of `cov`.
    pub chol: DMatrix<f64>,
    /// `cov⁻¹`, used by the clean score/Hessian.
    pub precision: DMatrix<f64>,
    /// `-½ d ln 2π - ½ ln det cov`.
    pub log_norm: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct ProductLaplaceParams {
    pub mu: DVector<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone)]
pub(crate) enum Leaf {
    Gaussian(GaussianParams),
    ProductLaplace(ProductLaplaceParams),
}

#[derive(Debug, Clone)]
pub(crate) enum PriorKind {
    Gaussian(GaussianParams),
    ProductLaplace(ProductLaplaceParams),
    Mixture {
        weights: Vec<f64>,
        log_weights: Vec<f64>,
        leaves: Vec<Leaf>,
    },
}

/// An analytic prior density: Gaussian, product Laplace, or a depth-1
/// mixture of those. Immutable after construction and freely shareable.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    kind: PriorKind,
    dim: usize,
}

// ---------------------------------------------------------------------------
// JSON configuration schema
// ---------------------------------------------------------------------------

/// Serializable description of a prior, the on-disk JSON schema.
///
/// ```json
/// {"type":"gaussian","mean":[0,1],"cov":[[1,0],[0,0.1]]}
/// {"type":"product_laplace","mu":[0,1],"b":[4,2]}
/// {"type":"mixture","weights":[0.5,0.5],"components":[...]}
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PriorConfig {
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    ProductLaplace {
        mu: Vec<f64>,
        b: Vec<f64>,
    },
    Mixture {
        weights: Vec<f64>,
        components: Vec<PriorConfig>,
    },
}

impl PriorConfig {
    pub fn to_spec(&self) -> Result<PriorSpec, PriorError> {
        match self {
            PriorConfig::Gaussian { mean, cov } => {
                let d = mean.len();
                if cov.len() != d || cov.iter().any(|row| row.len() != d) {
                    return Err(invalid("cov", format!("must be a {d}x{d} matrix matching `mean`")));
                }
                let mean = DVector::from_column_slice(mean);
                let cov = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
                PriorSpec::gaussian(mean, cov)
            }
            PriorConfig::ProductLaplace { mu, b } => PriorSpec::product_laplace(
                DVector::from_column_slice(mu),
                DVector::from_column_slice(b),
            ),
            PriorConfig::Mixture { weights, components } => {
                let comps = components
                    .iter()
                    .map(|c| c.to_spec())
                    .collect::<Result<Vec<_>, _>>()?;
                PriorSpec::mixture(weights.clone(), comps)
            }
        }
    }
}

impl PriorSpec {
    /// Round-trip back to the serializable form.
    pub fn to_config(&self) -> PriorConfig {
        fn gauss_cfg(g: &GaussianParams) -> PriorConfig {
            PriorConfig::Gaussian {
                mean: g.mean.iter().copied().collect(),
                cov: (0..g.cov.nrows())
                    .map(|i| g.cov.row(i).iter().copied().collect())
                    .collect(),
            }
        }
        fn laplace_cfg(l: &ProductLaplaceParams) -> PriorConfig {
            PriorConfig::ProductLaplace {
                mu: l.mu.iter().copied().collect(),
                b: l.b.iter().copied().collect(),
            }
        }
        match &self.kind {
            PriorKind::Gaussian(g) => gauss_cfg(g),
            PriorKind::ProductLaplace(l) => laplace_cfg(l),
            PriorKind::Mixture { weights, leaves, .. } => PriorConfig::Mixture {
                weights: weights.clone(),
                components: leaves
                    .iter()
                    .map(|l| match l {
                        Leaf::Gaussian(g) => gauss_cfg(g),
                        Leaf::ProductLaplace(p) => laplace_cfg(p),
                    })
                    .collect(),
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

fn build_gaussian(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<GaussianParams, PriorError> {
    let d = mean.len();
    if d == 0 {
        return Err(invalid("mean", "dimension must be >= 1"));
    }
    if cov.nrows() != d || cov.ncols() != d {
        return Err(invalid(
            "cov",
            format!("expected {d}x{d}, got {}x{}", cov.nrows(), cov.ncols()),
        ));
    }
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(invalid("mean", "entries must be finite"));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(invalid("cov", "entries must be finite"));
    }
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let asym = (&cov - cov.transpose()).abs().max();
    if asym > 1e-12 * scale {
        return Err(invalid("cov", format!("not symmetric: max asymmetry {asym:.3e}")));
    }
    let sym = (&cov + cov.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.min();
    if min_eig <= 0.0 {
        return Err(invalid(
            "cov",
            format!("smallest eigenvalue {min_eig:.3e} is not > 0"),
        ));
    }
    let chol = sym
        .clone()
        .cholesky()
        .ok_or_else(|| invalid("cov", "Cholesky factorization failed"))?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let precision = chol.inverse();
    let log_norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det;
    Ok(GaussianParams {
        mean,
        cov: sym,
        chol: chol.unpack(),
        precision,
        log_norm,
    })
}

fn build_laplace(mu: DVector<f64>, b: DVector<f64>) -> Result<ProductLaplaceParams, PriorError> {
    let d = mu.len();
    if d == 0 {
        return Err(invalid("mu", "dimension must be >= 1"));
    }
    if b.len() != d {
        return Err(invalid("b", format!("expected {d} scales, got {}", b.len())));
    }
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(invalid("mu", "entries must be finite"));
    }
    if b.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(invalid("b", "all scales must be finite and > 0"));
    }
    Ok(ProductLaplaceParams { mu, b })
}

impl PriorSpec {
    pub fn gaussian(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, PriorError> {
        let g = build_gaussian(mean, cov)?;
        let dim = g.mean.len();
        Ok(Self {
            kind: PriorKind::Gaussian(g),
            dim,
        })
    }

    pub fn product_laplace(mu: DVector<f64>, b: DVector<f64>) -> Result<Self, PriorError> {
        let l = build_laplace(mu, b)?;
        let dim = l.mu.len();
        Ok(Self {
            kind: PriorKind::ProductLaplace(l),
            dim,
        })
    }

    /// Mixture over Gaussian / product-Laplace components (nesting depth 1).
    pub fn mixture(weights: Vec<f64>, components: Vec<PriorSpec>) -> Result<Self, PriorError> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(invalid(
                "weights",
                format!(
                    "got {} weights for {} components",
                    weights.len(),
                    components.len()
                ),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("weights", "all weights must be finite and > 0"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(invalid("weights", format!("must sum to 1, got {sum}")));
        }
        let dim = components[0].dim;
        let mut leaves = Vec::with_capacity(components.len());
        for (i, c) in components.into_iter().enumerate() {
            if c.dim != dim {
                return Err(invalid(
                    "components",
                    format!("component {i} has dimension {}, expected {dim}", c.dim),
                ));
            }
            match c.kind {
                PriorKind::Gaussian(g) => leaves.push(Leaf::Gaussian(g)),
                PriorKind::ProductLaplace(l) => leaves.push(Leaf::ProductLaplace(l)),
                PriorKind::Mixture { .. } => {
                    return Err(invalid(
                        "components",
                        format!("component {i} is a mixture; nesting depth is limited to 1"),
                    ))
                }
            }
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            kind: PriorKind::Mixture {
                weights,
                log_weights,
                leaves,
            },
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_mixture(&self) -> bool {
        matches!(self.kind, PriorKind::Mixture { .. })
    }

    pub(crate) fn kind(&self) -> &PriorKind {
        &self.kind
    }

    /// Mixture weights, if this prior is a mixture.
    pub fn mixture_weights(&self) -> Option<&[f64]> {
        match &self.kind {
            PriorKind::Mixture { weights, .. } => Some(weights),
            _ => None,
        }
    }

    /// Mean and covariance when the prior is a plain Gaussian.
    pub fn gaussian_params(&self) -> Option<(&DVector<f64>, &DMatrix<f64>)> {
        match &self.kind {
            PriorKind::Gaussian(g) => Some((&g.mean, &g.cov)),
            _ => None,
        }
    }

    /// True if any component is a product-Laplace density.
    pub fn has_laplace_component(&self) -> bool {
        match &self.kind {
            PriorKind::Gaussian(_) => false,
            PriorKind::ProductLaplace(_) => true,
            PriorKind::Mixture { leaves, .. } => {
                leaves.iter().any(|l| matches!(l, Leaf::ProductLaplace(_)))
            }
        }
    }

    fn check_dim(&self, len: usize) -> Result<(), PriorError> {
        if len != self.dim {
            return Err(PriorError::DimensionMismatch {
                expected: self.dim,
                got: len,
            });
        }
        Ok(())
    }

    /// The same density translated by `shift`: `p̃(x) = p(x - shift)`.
    pub fn translate(&self, shift: &DVector<f64>) -> Result<Self, PriorError> {
        self.check_dim(shift.len())?;
        let kind = match &self.kind {
            PriorKind::Gaussian(g) => PriorKind::Gaussian(GaussianParams {
                mean: &g.mean + shift,
                ..g.clone()
            }),
            PriorKind::ProductLaplace(l) => PriorKind::ProductLaplace(ProductLaplaceParams {
                mu: &l.mu + shift,
                b: l.b.clone(),
            }),
            PriorKind::Mixture {
                weights,
                log_weights,
                leaves,
            } => PriorKind::Mixture {
                weights: weights.clone(),
                log_weights: log_weights.clone(),
                leaves: leaves
                    .iter()
                    .map(|l| match l {
                        Leaf::Gaussian(g) => Leaf::Gaussian(GaussianParams {
                            mean: &g.mean + shift,
                            ..g.clone()
                        }),
                        Leaf::ProductLaplace(p) => Leaf::ProductLaplace(ProductLaplaceParams {
                            mu: &p.mu + shift,
                            b: p.b.clone(),
                        }),
                    })
                    .collect(),
            },
        };
        Ok(Self {
            kind,
            dim: self.dim,
        })
    }

    /// Push the density through the Euclidean isometry `x ↦ A x + b`
    /// (A orthogonal). Gaussian families transform in closed form; product
    /// Laplace stays in-family only for signed permutations.
    pub fn transform_isometry(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self, PriorError> {
        self.check_dim(b.len())?;
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(PriorError::DimensionMismatch {
                expected: self.dim,
                got: a.nrows(),
            });
        }
        let ortho_defect = (a.transpose() * a - DMatrix::<f64>::identity(self.dim, self.dim))
            .abs()
            .max();
        if ortho_defect > 1e-10 {
            return Err(invalid("a", format!("not orthogonal: defect {ortho_defect:.3e}")));
        }
        fn map_gauss(g: &GaussianParams, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<GaussianParams, PriorError> {
            build_gaussian(a * &g.mean + b, a * &g.cov * a.transpose())
        }
        fn map_laplace(
            l: &ProductLaplaceParams,
            a: &DMatrix<f64>,
            b: &DVector<f64>,
        ) -> Result<ProductLaplaceParams, PriorError> {
            let d = l.mu.len();
            // require a signed permutation
            let mut mu = DVector::zeros(d);
            let mut bs = DVector::zeros(d);
            for i in 0..d {
                let mut hit = None;
                for j in 0..d {
                    let v = a[(i, j)];
                    if v.abs() > 1e-12 {
                        if (v.abs() - 1.0).abs() > 1e-12 || hit.is_some() {
                            return Err(PriorError::Unsupported(
                                "product-Laplace priors only transform under signed permutations"
                                    .into(),
                            ));
                        }
                        hit = Some((j, v));
                    }
                }
                let (j, s) = hit.ok_or_else(|| {
                    PriorError::Unsupported(
                        "product-Laplace priors only transform under signed permutations".into(),
                    )
                })?;
                mu[i] = s * l.mu[j] + b[i];
                bs[i] = l.b[j];
            }
            build_laplace(mu, bs)
        }
        let kind = match &self.kind {
            PriorKind::Gaussian(g) => PriorKind::Gaussian(map_gauss(g, a, b)?),
            PriorKind::ProductLaplace(l) => PriorKind::ProductLaplace(map_laplace(l, a, b)?),
            PriorKind::Mixture {
                weights,
                log_weights,
                leaves,
            } => PriorKind::Mixture {
                weights: weights.clone(),
                log_weights: log_weights.clone(),
                leaves: leaves
                    .iter()
                    .map(|l| {
                        Ok(match l {
                            Leaf::Gaussian(g) => Leaf::Gaussian(map_gauss(g, a, b)?),
                            Leaf::ProductLaplace(p) => Leaf::ProductLaplace(map_laplace(p, a, b)?),
                        })
                    })
                    .collect::<Result<Vec<_>, PriorError>>()?,
            },
        };
        Ok(Self {
            kind,
            dim: self.dim,
        })
    }

    /// Axis-aligned box `mean ± k · std` covering all components; the
    /// quadrature oracles integrate over this region.
    pub fn support_box(&self, k: f64) -> (DVector<f64>, DVector<f64>) {
        let mut lo = DVector::from_element(self.dim, f64::INFINITY);
        let mut hi = DVector::from_element(self.dim, f64::NEG_INFINITY);
        let mut absorb = |mean: &DVector<f64>, std: &DVector<f64>| {
            for i in 0..self.dim {
                lo[i] = lo[i].min(mean[i] - k * std[i]);
                hi[i] = hi[i].max(mean[i] + k * std[i]);
            }
        };
        let leaf_box = |leaf: &Leaf| match leaf {
            Leaf::Gaussian(g) => (g.mean.clone(), g.cov.diagonal().map(|v| v.sqrt())),
            Leaf::ProductLaplace(l) => (l.mu.clone(), l.b.map(|b| b * std::f64::consts::SQRT_2)),
        };
        match &self.kind {
            PriorKind::Gaussian(g) => absorb(&g.mean, &g.cov.diagonal().map(|v| v.sqrt())),
            PriorKind::ProductLaplace(l) => {
                absorb(&l.mu, &l.b.map(|b| b * std::f64::consts::SQRT_2))
            }
            PriorKind::Mixture { leaves, .. } => {
                for leaf in leaves {
                    let (m, s) = leaf_box(leaf);
                    absorb(&m, &s);
                }
            }
        }
        (lo, hi)
    }
}

// ---------------------------------------------------------------------------
// Clean (unblurred) density operations
// ---------------------------------------------------------------------------

fn gauss_log_density(g: &GaussianParams, x: &DVector<f64>) -> f64 {
    let q = x - &g.mean;
    g.log_norm - 0.5 * (&g.precision * &q).dot(&q)
}

fn gauss_score(g: &GaussianParams, x: &DVector<f64>) -> DVector<f64> {
    -(&g.precision * (x - &g.mean))
}

fn laplace_log_density(l: &ProductLaplaceParams, x: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..l.mu.len() {
        acc += -(2.0 * l.b[i]).ln() - (x[i] - l.mu[i]).abs() / l.b[i];
    }
    acc
}

fn laplace_score(l: &ProductLaplaceParams, x: &DVector<f64>) -> Result<DVector<f64>, PriorError> {
    let d = l.mu.len();
    let mut s = DVector::zeros(d);
    for i in 0..d {
        let z = x[i] - l.mu[i];
        if z == 0.0 {
            return Err(PriorError::AtKink { coord: i });
        }
        s[i] = -z.signum() / l.b[i];
    }
    Ok(s)
}

impl PriorSpec {
    /// Clean (unblurred) log-density `log p_x(x)`.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64, PriorError> {
        self.check_dim(x.len())?;
        Ok(match &self.kind {
            PriorKind::Gaussian(g) => gauss_log_density(g, x),
            PriorKind::ProductLaplace(l) => laplace_log_density(l, x),
            PriorKind::Mixture {
                log_weights, leaves, ..
            } => {
                let terms: Vec<f64> = leaves
                    .iter()
                    .zip(log_weights)
                    .map(|(leaf, lw)| {
                        lw + match leaf {
                            Leaf::Gaussian(g) => gauss_log_density(g, x),
                            Leaf::ProductLaplace(l) => laplace_log_density(l, x),
                        }
                    })
                    .collect();
                crate::special::log_sum_exp(&terms)
            }
        })
    }

    /// Gradient of [`Self::log_density`]. Errors at Laplace kinks.
    pub fn clean_score(&self, x: &DVector<f64>) -> Result<DVector<f64>, PriorError> {
        self.check_dim(x.len())?;
        match &self.kind {
            PriorKind::Gaussian(g) => Ok(gauss_score(g, x)),
            PriorKind::ProductLaplace(l) => laplace_score(l, x),
            PriorKind::Mixture {
                log_weights, leaves, ..
            } => {
                let mut logs = Vec::with_capacity(leaves.len());
                let mut scores = Vec::with_capacity(leaves.len());
                for (leaf, lw) in leaves.iter().zip(log_weights) {
                    match leaf {
                        Leaf::Gaussian(g) => {
                            logs.push(lw + gauss_log_density(g, x));
                            scores.push(gauss_score(g, x));
                        }
                        Leaf::ProductLaplace(l) => {
                            logs.push(lw + laplace_log_density(l, x));
                            scores.push(laplace_score(l, x)?);
                        }
                    }
                }
                let lse = crate::special::log_sum_exp(&logs);
                let mut s = DVector::zeros(self.dim);
                for (lk, sk) in logs.iter().zip(&scores) {
                    s += sk * (lk - lse).exp();
                }
                Ok(s)
            }
        }
    }

    /// Hessian of [`Self::log_density`]; only defined when every component
    /// is Gaussian (the Laplace clean Hessian is distributional).
    pub fn clean_hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, PriorError> {
        self.check_dim(x.len())?;
        match &self.kind {
            PriorKind::Gaussian(g) => Ok(-&g.precision),
            PriorKind::ProductLaplace(_) => Err(PriorError::Unsupported(
                "clean Hessian of a Laplace density is distributional".into(),
            )),
            PriorKind::Mixture {
                log_weights, leaves, ..
            } => {
                let mut logs = Vec::with_capacity(leaves.len());
                let mut scores = Vec::with_capacity(leaves.len());
                let mut hessians = Vec::with_capacity(leaves.len());
                for (leaf, lw) in leaves.iter().zip(log_weights) {
                    match leaf {
                        Leaf::Gaussian(g) => {
                            logs.push(lw + gauss_log_density(g, x));
                            scores.push(gauss_score(g, x));
                            hessians.push(-&g.precision);
                        }
                        Leaf::ProductLaplace(_) => {
                            return Err(PriorError::Unsupported(
                                "clean Hessian of a Laplace mixture component is distributional"
                                    .into(),
                            ))
                        }
                    }
                }
                let lse = crate::special::log_sum_exp(&logs);
                let mut s = DVector::zeros(self.dim);
                let mut h = DMatrix::zeros(self.dim, self.dim);
                for ((lk, sk), hk) in logs.iter().zip(&scores).zip(&hessians) {
                    let r = (lk - lse).exp();
                    h += (hk + sk * sk.transpose()) * r;
                    s += sk * r;
                }
                h -= &s * s.transpose();
                Ok(h)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Blurred-density operations (channel output at SNR γ)
// ---------------------------------------------------------------------------

impl PriorSpec {
    /// Prepare the blurred density `p_{y_γ}` for repeated evaluation.
    pub fn blur(&self, gamma: f64) -> Result<BlurredPrior, PriorError> {
        BlurredPrior::new(self, gamma)
    }

    /// `log p_{y_γ}(y)`.
    pub fn blurred_log_density(&self, y: &DVector<f64>, gamma: f64) -> Result<f64, PriorError> {
        self.check_dim(y.len())?;
        self.blur(gamma)?.log_density(y)
    }

    /// `∇ log p_{y_γ}(y)`.
    pub fn blurred_score(&self, y: &DVector<f64>, gamma: f64) -> Result<DVector<f64>, PriorError> {
        self.check_dim(y.len())?;
        self.blur(gamma)?.score(y)
    }

    /// `∇² log p_{y_γ}(y)`.
    pub fn blurred_hessian(&self, y: &DVector<f64>, gamma: f64) -> Result<DMatrix<f64>, PriorError> {
        self.check_dim(y.len())?;
        self.blur(gamma)?.hessian(y)
    }

    /// Log-density, score, and Hessian in one pass.
    pub fn blurred_eval(&self, y: &DVector<f64>, gamma: f64) -> Result<BlurredEval, PriorError> {
        self.check_dim(y.len())?;
        self.blur(gamma)?.eval(y)
    }

    /// Tweedie posterior mean `E[x | y_γ = y] = y/γ + ∇log p_{y_γ}(y)`.
    pub fn denoise(&self, y: &DVector<f64>, gamma: f64) -> Result<DVector<f64>, PriorError> {
        self.check_dim(y.len())?;
        let score = self.blur(gamma)?.score(y)?;
        Ok(y / gamma + score)
    }

    /// Second-order Tweedie posterior covariance
    /// `Cov[x | y_γ = y] = ∇²log p_{y_γ}(y) + I/γ`, symmetrized, with
    /// eigenvalues in `[-1e-8, 0)` clamped to zero.
    pub fn posterior_cov(&self, y: &DVector<f64>, gamma: f64) -> Result<DMatrix<f64>, PriorError> {
        self.check_dim(y.len())?;
        self.blur(gamma)?.posterior_cov(y)
    }
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

fn sample_leaf(kind: &Leaf, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    match kind {
        Leaf::Gaussian(g) => {
            let d = g.mean.len();
            let z = DVector::from_fn(d, |_, _| -> f64 { StandardNormal.sample(rng) });
            let x = &g.mean + &g.chol * z;
            out.copy_from_slice(x.as_slice());
        }
        Leaf::ProductLaplace(l) => {
            for i in 0..l.mu.len() {
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                out[i] = l.mu[i] + l.b[i] * (e1 - e2);
            }
        }
    }
}

impl PriorSpec {
    /// Draw `n` i.i.d. samples, one per row; deterministic given `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DMatrix<f64>, PriorError> {
        Ok(self.sample_with_components(n, seed)?.0)
    }

    /// Like [`Self::sample`], also returning the mixture component index
    /// drawn for each sample (all zeros for non-mixtures).
    pub fn sample_with_components(
        &self,
        n: usize,
        seed: u64,
    ) -> Result<(DMatrix<f64>, Vec<usize>), PriorError> {
        if n == 0 {
            return Err(invalid("n", "sample count must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = DMatrix::zeros(n, self.dim);
        let mut labels = vec![0usize; n];
        let mut row = vec![0.0; self.dim];
        let single: Option<Leaf> = match &self.kind {
            PriorKind::Gaussian(g) => Some(Leaf::Gaussian(g.clone())),
            PriorKind::ProductLaplace(l) => Some(Leaf::ProductLaplace(l.clone())),
            PriorKind::Mixture { .. } => None,
        };
        for i in 0..n {
            match (&single, &self.kind) {
                (Some(leaf), _) => sample_leaf(leaf, &mut rng, &mut row),
                (None, PriorKind::Mixture { weights, leaves, .. }) => {
                    let u: f64 = rand::Rng::random(&mut rng);
                    let mut acc = 0.0;
                    let mut k = leaves.len() - 1;
                    for (j, w) in weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            k = j;
                            break;
                        }
                    }
                    labels[i] = k;
                    sample_leaf(&leaves[k], &mut rng, &mut row);
                }
                _ => unreachable!(),
            }
            for (j, v) in row.iter().enumerate() {
                data[(i, j)] = *v;
            }
        }
        Ok((data, labels))
    }
}
