//! Estimators for the information-estimation metric, its generalized and
//! mismatched variants, the log-ratio process, and pairwise distance
//! matrices.
//!
//! The squared distance between `x1` and `x2` under a prior `p_x` is the
//! γ-integral of the expected squared difference between the blurred
//! scores at the two noisy probes `γ x_k + w_γ`:
//!
//! ```text
//! IEM²(x1, x2, Γ) = ∫₀^Γ E‖∇log p_{y_γ}(γx1 + w_γ) - ∇log p_{y_γ}(γx2 + w_γ)‖² dγ
//! ```
//!
//! Estimation detail that everything downstream relies on: both probe
//! points of a pair (and every pair of a distance matrix) share the same
//! Brownian paths. Sharing is an unbiased coupling — the integrand's
//! expectation at each γ is unchanged — but it makes the estimator exactly
//! symmetric, gives exact zeros on the diagonal, and removes most of the
//! variance of distance *comparisons*. The uncoupled estimator is kept
//! available for A/B comparison.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    self, integrate, make_grid, sample_path_indexed, BrownianPath, ChannelError, SnrGrid,
};
use crate::prior::{BlurredPrior, PriorError, PriorSpec};

#[derive(Debug, Error)]
pub enum IemError {
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite integrand")]
    NonFinite,
}

/// Parameters of every stochastic-integral estimator.
///
/// `gamma_min`/`gamma_max` bound the SNR integral, `n_steps` log-uniform
/// nodes discretize it, `n_paths` Brownian paths average the expectation,
/// and `seed` keys the counter-based path RNG.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            gamma_min: 2f64.powi(-10),
            gamma_max: 2f64.powi(10),
            n_steps: 512,
            n_paths: 1,
            seed: 0,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<(), IemError> {
        if !(self.gamma_min.is_finite() && self.gamma_max.is_finite())
            || self.gamma_min <= 0.0
            || self.gamma_max <= self.gamma_min
        {
            return Err(IemError::InvalidConfig(format!(
                "need 0 < gamma_min < gamma_max, got [{}, {}]",
                self.gamma_min, self.gamma_max
            )));
        }
        if self.n_steps < 2 {
            return Err(IemError::InvalidConfig("n_steps must be >= 2".into()));
        }
        if self.n_paths < 1 {
            return Err(IemError::InvalidConfig("n_paths must be >= 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<SnrGrid, IemError> {
        self.validate()?;
        Ok(make_grid(self.gamma_min, self.gamma_max, self.n_steps)?)
    }

    /// Same configuration with a different seed.
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// An IEM value with its Monte Carlo uncertainty and per-γ diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceEstimate {
    /// `sqrt(max(squared_value, 0))`.
    pub value: f64,
    /// Mean over paths of the discretized γ-integral.
    pub squared_value: f64,
    /// Standard error of `squared_value` across paths (0 when `n_paths = 1`).
    pub stderr: f64,
    /// Per-node mean integrand, one entry per grid node.
    pub integrand_trace: Vec<f64>,
}

impl DistanceEstimate {
    /// Standard error propagated to `value` by the delta method.
    pub fn value_stderr(&self) -> f64 {
        if self.value > 0.0 {
            self.stderr / (2.0 * self.value)
        } else {
            // near zero the delta method degenerates; fall back to the
            // square root of the squared-value uncertainty
            self.stderr.max(0.0).sqrt()
        }
    }
}

/// Derivative `f'(z, γ)` of the scalar reweighting map in the generalized
/// metric; the integrand is multiplied by `f'(z_γ, γ)²`.
pub trait FPrime {
    fn fprime(&self, z: f64, gamma: f64) -> f64;
}

/// The two built-in reweighting choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinFPrime {
    /// `f(z) = z`, so `f' ≡ 1`: recovers the plain metric.
    Identity,
    /// `f(z) = z²`, so `f'(z) = 2z`: weights score differences by the
    /// magnitude of the log-probability ratio.
    Square,
}

impl FPrime for BuiltinFPrime {
    fn fprime(&self, z: f64, _gamma: f64) -> f64 {
        match self {
            BuiltinFPrime::Identity => 1.0,
            BuiltinFPrime::Square => 2.0 * z,
        }
    }
}

// ---------------------------------------------------------------------------
// Engine: kernels + paths prepared once, points evaluated into score tables
// ---------------------------------------------------------------------------

/// Per-point cache: blurred scores and log-densities at `γ_i x + w_i` for
/// every (path, node).
pub(crate) struct ScoreTable {
    n_nodes: usize,
    dim: usize,
    scores: Vec<f64>, // [path][node][dim]
    logd: Vec<f64>,   // [path][node]
}

impl ScoreTable {
    #[inline]
    fn score(&self, path: usize, node: usize) -> &[f64] {
        let base = (path * self.n_nodes + node) * self.dim;
        &self.scores[base..base + self.dim]
    }

    #[inline]
    fn logd(&self, path: usize, node: usize) -> f64 {
        self.logd[path * self.n_nodes + node]
    }
}

pub(crate) struct Engine {
    grid: SnrGrid,
    kernels_a: Vec<BlurredPrior>,
    kernels_b: Option<Vec<BlurredPrior>>,
    paths: Vec<BrownianPath>,
    dim: usize,
    n_paths: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    A,
    B,
}

impl Engine {
    pub(crate) fn new(
        prior_a: &PriorSpec,
        prior_b: Option<&PriorSpec>,
        cfg: &IntegrationConfig,
    ) -> Result<Self, IemError> {
        let grid = cfg.grid()?;
        let dim = prior_a.dim();
        if let Some(b) = prior_b {
            if b.dim() != dim {
                return Err(IemError::DimensionMismatch(format!(
                    "priors have dimensions {dim} and {}",
                    b.dim()
                )));
            }
        }
        let kernels_a = grid
            .nodes()
            .iter()
            .map(|&g| prior_a.blur(g))
            .collect::<Result<Vec<_>, _>>()?;
        let kernels_b = prior_b
            .map(|p| {
                grid.nodes()
                    .iter()
                    .map(|&g| p.blur(g))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;
        let paths = (0..cfg.n_paths)
            .map(|p| sample_path_indexed(&grid, dim, cfg.seed, p as u64))
            .collect();
        Ok(Self {
            grid,
            kernels_a,
            kernels_b,
            paths,
            dim,
            n_paths: cfg.n_paths,
        })
    }

    pub(crate) fn from_paths(
        prior_a: &PriorSpec,
        prior_b: Option<&PriorSpec>,
        grid: &SnrGrid,
        paths: &[BrownianPath],
    ) -> Result<Self, IemError> {
        let dim = prior_a.dim();
        for p in paths {
            if p.dim() != dim {
                return Err(IemError::DimensionMismatch(format!(
                    "path dimension {} does not match prior dimension {dim}",
                    p.dim()
                )));
            }
            if p.grid() != grid {
                return Err(IemError::InvalidConfig(
                    "path was sampled on a different grid".into(),
                ));
            }
        }
        if paths.is_empty() {
            return Err(IemError::InvalidConfig("need at least one path".into()));
        }
        let kernels_a = grid
            .nodes()
            .iter()
            .map(|&g| prior_a.blur(g))
            .collect::<Result<Vec<_>, _>>()?;
        let kernels_b = prior_b
            .map(|p| {
                grid.nodes()
                    .iter()
                    .map(|&g| p.blur(g))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;
        Ok(Self {
            grid: grid.clone(),
            kernels_a,
            kernels_b,
            paths: paths.to_vec(),
            dim,
            n_paths: paths.len(),
        })
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<(), IemError> {
        if x.len() != self.dim {
            return Err(IemError::DimensionMismatch(format!(
                "point has dimension {}, prior has {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Blurred scores and log-densities of one point along every path.
    pub(crate) fn point_table(&self, x: &DVector<f64>, side: Side) -> Result<ScoreTable, IemError> {
        self.check_point(x)?;
        let kernels = match side {
            Side::A => &self.kernels_a,
            Side::B => self.kernels_b.as_ref().unwrap_or(&self.kernels_a),
        };
        let n = self.grid.len();
        let mut scores = vec![0.0; self.n_paths * n * self.dim];
        let mut logd = vec![0.0; self.n_paths * n];
        let mut y = DVector::zeros(self.dim);
        let mut s = DVector::zeros(self.dim);
        for (p, path) in self.paths.iter().enumerate() {
            for (i, (&gamma, kernel)) in self.grid.nodes().iter().zip(kernels).enumerate() {
                let w = path.value(i);
                for c in 0..self.dim {
                    y[c] = gamma * x[c] + w[c];
                }
                let l = kernel.log_density_score_into(&y, &mut s)?;
                logd[p * n + i] = l;
                let base = (p * n + i) * self.dim;
                scores[base..base + self.dim].copy_from_slice(s.as_slice());
            }
        }
        Ok(ScoreTable {
            n_nodes: n,
            dim: self.dim,
            scores,
            logd,
        })
    }

    /// Per-node integrand `‖s_a - s_b‖²`, optionally reweighted by
    /// `f'(z_i, γ_i)²`, for one path.
    fn fill_integrand(
        &self,
        ta: &ScoreTable,
        tb: &ScoreTable,
        path: usize,
        fprime: Option<&dyn FPrime>,
        out: &mut [f64],
    ) {
        for i in 0..self.grid.len() {
            let sa = ta.score(path, i);
            let sb = tb.score(path, i);
            let mut g = 0.0;
            for c in 0..self.dim {
                let d = sa[c] - sb[c];
                g += d * d;
            }
            if let Some(f) = fprime {
                let z = ta.logd(path, i) - tb.logd(path, i);
                let w = f.fprime(z, self.grid.nodes()[i]);
                g *= w * w;
            }
            out[i] = g;
        }
    }

    /// Full estimate with per-path spread and the mean integrand trace.
    pub(crate) fn estimate(
        &self,
        ta: &ScoreTable,
        tb: &ScoreTable,
        fprime: Option<&dyn FPrime>,
    ) -> Result<DistanceEstimate, IemError> {
        let n = self.grid.len();
        let mut g = vec![0.0; n];
        let mut trace = vec![0.0; n];
        let mut per_path = Vec::with_capacity(self.n_paths);
        for p in 0..self.n_paths {
            self.fill_integrand(ta, tb, p, fprime, &mut g);
            for (t, v) in trace.iter_mut().zip(&g) {
                *t += v;
            }
            per_path.push(integrate(&self.grid, &g)?);
        }
        let np = self.n_paths as f64;
        for t in trace.iter_mut() {
            *t /= np;
        }
        let squared_value = per_path.iter().sum::<f64>() / np;
        if !squared_value.is_finite() {
            return Err(IemError::NonFinite);
        }
        let stderr = if self.n_paths >= 2 {
            let var = per_path
                .iter()
                .map(|v| (v - squared_value).powi(2))
                .sum::<f64>()
                / (np - 1.0);
            (var / np).sqrt()
        } else {
            0.0
        };
        Ok(DistanceEstimate {
            value: squared_value.max(0.0).sqrt(),
            squared_value,
            stderr,
            integrand_trace: trace,
        })
    }

    /// Value-only fast path sharing the exact summation order of
    /// [`Engine::estimate`].
    fn squared_value(&self, ta: &ScoreTable, tb: &ScoreTable) -> Result<f64, IemError> {
        let n = self.grid.len();
        let mut g = vec![0.0; n];
        let mut acc = 0.0;
        for p in 0..self.n_paths {
            self.fill_integrand(ta, tb, p, None, &mut g);
            acc += integrate(&self.grid, &g)?;
        }
        let v = acc / self.n_paths as f64;
        if !v.is_finite() {
            return Err(IemError::NonFinite);
        }
        Ok(v)
    }
}

// ---------------------------------------------------------------------------
// Public estimators
// ---------------------------------------------------------------------------

/// The log-probability-ratio process along one path:
/// `z_i = log p_{y_γ}^A(γ_i x1 + w_i) - log p_{y_γ}^B(γ_i x2 + w_i)`.
pub fn z_process(
    prior_a: &PriorSpec,
    prior_b: &PriorSpec,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    path: &BrownianPath,
) -> Result<Vec<f64>, IemError> {
    let dim = prior_a.dim();
    if prior_b.dim() != dim || x1.len() != dim || x2.len() != dim || path.dim() != dim {
        return Err(IemError::DimensionMismatch(format!(
            "prior dims {}/{}, points {}/{}, path {}",
            dim,
            prior_b.dim(),
            x1.len(),
            x2.len(),
            path.dim()
        )));
    }
    let grid = path.grid();
    let mut z = Vec::with_capacity(grid.len());
    let mut y = DVector::zeros(dim);
    for (i, &gamma) in grid.nodes().iter().enumerate() {
        let w = path.value(i);
        let ka = prior_a.blur(gamma)?;
        let kb = prior_b.blur(gamma)?;
        for c in 0..dim {
            y[c] = gamma * x1[c] + w[c];
        }
        let la = ka.log_density(&y)?;
        for c in 0..dim {
            y[c] = gamma * x2[c] + w[c];
        }
        let lb = kb.log_density(&y)?;
        z.push(la - lb);
    }
    Ok(z)
}

/// Squared metric estimate with coupled paths.
pub fn iem_squared(
    prior: &PriorSpec,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    cfg: &IntegrationConfig,
) -> Result<DistanceEstimate, IemError> {
    let engine = Engine::new(prior, None, cfg)?;
    let ta = engine.point_table(x1, Side::A)?;
    let tb = engine.point_table(x2, Side::A)?;
    engine.estimate(&ta, &tb, None)
}

/// The metric itself: square root of [`iem_squared`].
pub fn iem(
    prior: &PriorSpec,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    cfg: &IntegrationConfig,
) -> Result<f64, IemError> {
    Ok(iem_squared(prior, x1, x2, cfg)?.value)
}

/// Generalized metric with the integrand reweighted by `f'(z_γ, γ)²`.
/// The identity handle reproduces [`iem_squared`] bit-exactly.
pub fn iem_f(
    prior: &PriorSpec,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    fprime: &dyn FPrime,
    cfg: &IntegrationConfig,
) -> Result<DistanceEstimate, IemError> {
    let engine = Engine::new(prior, None, cfg)?;
    let ta = engine.point_table(x1, Side::A)?;
    let tb = engine.point_table(x2, Side::A)?;
    engine.estimate(&ta, &tb, Some(fprime))
}

/// Mismatched variant: `x1` carries `prior_a`, `x2` carries `prior_b`.
/// With `prior_a = prior_b` this reduces to [`iem_squared`] exactly.
pub fn mismatched_iem(
    prior_a: &PriorSpec,
    prior_b: &PriorSpec,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    cfg: &IntegrationConfig,
) -> Result<DistanceEstimate, IemError> {
    let engine = Engine::new(prior_a, Some(prior_b), cfg)?;
    let ta = engine.point_table(x1, Side::A)?;
    let tb = engine.point_table(x2, Side::B)?;
    engine.estimate(&ta, &tb, None)
}

/// Squared metric on caller-supplied paths (all paths must share `grid`).
pub fn iem_squared_on_paths(
    prior: &PriorSpec,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    grid: &SnrGrid,
    paths: &[BrownianPath],
) -> Result<DistanceEstimate, IemError> {
    let engine = Engine::from_paths(prior, None, grid, paths)?;
    let ta = engine.point_table(x1, Side::A)?;
    let tb = engine.point_table(x2, Side::A)?;
    engine.estimate(&ta, &tb, None)
}

/// A/B alternative to the coupled estimator: the two probe points ride
/// independent Brownian paths. Unbiased for the same integral, but the
/// estimator is no longer exactly symmetric or exactly zero at `x1 = x2`.
pub fn iem_squared_uncoupled(
    prior: &PriorSpec,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    cfg: &IntegrationConfig,
) -> Result<DistanceEstimate, IemError> {
    let engine_a = Engine::new(prior, None, cfg)?;
    let shifted = IntegrationConfig {
        seed: channel::derive_stream_seed(cfg.seed, 0x756e_636f_7570_6c65),
        ..*cfg
    };
    let engine_b = Engine::new(prior, None, &shifted)?;
    let ta = engine_a.point_table(x1, Side::A)?;
    let tb = engine_b.point_table(x2, Side::A)?;
    engine_a.estimate(&ta, &tb, None)
}

/// Distances from one reference point to many probes, sharing a single
/// path set and kernel preparation across the whole batch.
pub fn reference_distances(
    prior: &PriorSpec,
    reference: &DVector<f64>,
    points: &[DVector<f64>],
    cfg: &IntegrationConfig,
) -> Result<Vec<f64>, IemError> {
    let engine = Engine::new(prior, None, cfg)?;
    let tref = engine.point_table(reference, Side::A)?;
    let tables = points
        .par_iter()
        .map(|x| engine.point_table(x, Side::A))
        .collect::<Result<Vec<_>, _>>()?;
    tables
        .par_iter()
        .map(|t| Ok(engine.squared_value(&tref, t)?.max(0.0).sqrt()))
        .collect()
}

/// Pairwise metric matrix over the rows of `points` (n × d). One path set
/// is reused for every pair, so the result is exactly symmetric with an
/// exactly zero diagonal, and entry (i, j) equals `iem(points_i, points_j)`
/// bit for bit.
pub fn distance_matrix(
    prior: &PriorSpec,
    points: &DMatrix<f64>,
    cfg: &IntegrationConfig,
) -> Result<DMatrix<f64>, IemError> {
    let n = points.nrows();
    if n < 2 {
        return Err(IemError::InvalidConfig(
            "distance matrix needs at least 2 points".into(),
        ));
    }
    let engine = Engine::new(prior, None, cfg)?;
    let pts: Vec<DVector<f64>> = (0..n).map(|i| points.row(i).transpose()).collect();
    let tables = pts
        .par_iter()
        .map(|x| engine.point_table(x, Side::A))
        .collect::<Result<Vec<_>, _>>()?;

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| Ok(engine.squared_value(&tables[i], &tables[j])?.max(0.0).sqrt()))
        .collect::<Result<Vec<f64>, IemError>>()?;

    let mut m = DMatrix::zeros(n, n);
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok(m)
}

/// Euclidean pairwise distances over the rows of `points`, the baseline
/// the clustering experiment compares against.
pub fn euclidean_matrix(points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.nrows();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (points.row(i) - points.row(j)).norm();
            m[(i, j)] = d;
            m[(j, i)] = d;
        }
    }
    m
}

// ---------------------------------------------------------------------------
// Matrix import/export
// ---------------------------------------------------------------------------

/// CSV with point indices as row/column headers.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let n = m.nrows();
    let mut out = String::new();
    out.push_str("point");
    for j in 0..n {
        out.push_str(&format!(",{j}"));
    }
    out.push('\n');
    for i in 0..n {
        out.push_str(&format!("{i}"));
        for j in 0..n {
            out.push_str(&format!(",{}", m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Parse a matrix written by [`matrix_to_csv`].
pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>, IemError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| IemError::InvalidConfig("empty distance-matrix CSV".into()))?;
    let n = header.split(',').count() - 1;
    if n == 0 {
        return Err(IemError::InvalidConfig("distance-matrix CSV has no columns".into()));
    }
    let mut m = DMatrix::zeros(n, n);
    let mut rows = 0usize;
    for (i, line) in lines.enumerate() {
        let mut fields = line.split(',');
        fields.next(); // row label
        let mut cols = 0usize;
        for (j, f) in fields.enumerate() {
            if i >= n || j >= n {
                return Err(IemError::InvalidConfig(format!(
                    "distance-matrix CSV has more than {n} rows/columns"
                )));
            }
            m[(i, j)] = f.trim().parse::<f64>().map_err(|e| {
                IemError::InvalidConfig(format!("bad value at row {i}, column {j}: {e}"))
            })?;
            cols += 1;
        }
        if cols != n {
            return Err(IemError::InvalidConfig(format!(
                "row {i} has {cols} values, expected {n}"
            )));
        }
        rows += 1;
    }
    if rows != n {
        return Err(IemError::InvalidConfig(format!(
            "matrix CSV has {rows} rows, expected {n}"
        )));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::presets;

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn identical_points_give_exact_zero() {
        let p = presets::two_mode_gmm();
        let cfg = IntegrationConfig {
            n_steps: 64,
            ..Default::default()
        };
        let e = iem_squared(&p, &v2(0.3, -0.4), &v2(0.3, -0.4), &cfg).unwrap();
        assert_eq!(e.squared_value, 0.0);
        assert_eq!(e.value, 0.0);
        assert!(e.integrand_trace.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn shared_paths_make_the_estimator_exactly_symmetric() {
        let p = presets::two_mode_gmm();
        let cfg = IntegrationConfig {
            n_steps: 96,
            n_paths: 3,
            seed: 11,
            ..Default::default()
        };
        let a = v2(0.2, 0.9);
        let b = v2(1.4, -1.1);
        let d_ab = iem_squared(&p, &a, &b, &cfg).unwrap();
        let d_ba = iem_squared(&p, &b, &a, &cfg).unwrap();
        assert_eq!(d_ab.squared_value, d_ba.squared_value);
        assert_eq!(d_ab.value, d_ba.value);
    }

    #[test]
    fn z_process_is_antisymmetric_and_zero_on_identity() {
        let p = presets::bimodal_gmm_1d();
        let grid = make_grid(2f64.powi(-6), 2f64.powi(6), 40).unwrap();
        let path = channel::sample_path(&grid, 1, 5);
        let x1 = DVector::from_vec(vec![0.2]);
        let x2 = DVector::from_vec(vec![-0.7]);
        let z12 = z_process(&p, &p, &x1, &x2, &path).unwrap();
        let z21 = z_process(&p, &p, &x2, &x1, &path).unwrap();
        for (a, b) in z12.iter().zip(&z21) {
            assert_eq!(*a, -*b);
        }
        let zii = z_process(&p, &p, &x1, &x1, &path).unwrap();
        assert!(zii.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn identity_fprime_reproduces_plain_estimate_bit_exactly() {
        let p = presets::two_mode_gmm();
        let cfg = IntegrationConfig {
            n_steps: 80,
            n_paths: 2,
            seed: 3,
            ..Default::default()
        };
        let a = v2(0.0, 1.0);
        let b = v2(0.8, -0.6);
        let plain = iem_squared(&p, &a, &b, &cfg).unwrap();
        let ident = iem_f(&p, &a, &b, &BuiltinFPrime::Identity, &cfg).unwrap();
        assert_eq!(plain.squared_value, ident.squared_value);
        assert_eq!(plain.integrand_trace, ident.integrand_trace);
    }

    #[test]
    fn square_fprime_is_zero_on_identity_pair() {
        let p = presets::two_mode_gmm();
        let cfg = IntegrationConfig {
            n_steps: 48,
            ..Default::default()
        };
        let a = v2(0.4, 0.2);
        let e = iem_f(&p, &a, &a, &BuiltinFPrime::Square, &cfg).unwrap();
        assert_eq!(e.squared_value, 0.0);
    }

    #[test]
    fn mismatched_with_equal_priors_reduces_to_plain() {
        let p = presets::anisotropic_gaussian();
        let cfg = IntegrationConfig {
            n_steps: 64,
            n_paths: 2,
            seed: 9,
            ..Default::default()
        };
        let a = v2(0.1, 1.2);
        let b = v2(-0.9, 0.4);
        let plain = iem_squared(&p, &a, &b, &cfg).unwrap();
        let mm = mismatched_iem(&p, &p, &a, &b, &cfg).unwrap();
        assert_eq!(plain.squared_value, mm.squared_value);
    }

    #[test]
    fn matrix_csv_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.5, 2.25, 1.5, 0.0, 0.75, 2.25, 0.75, 0.0]);
        let text = matrix_to_csv(&m);
        let back = matrix_from_csv(&text).unwrap();
        assert_eq!(m, back);
        assert!(matrix_from_csv("").is_err());
        assert!(matrix_from_csv("point,0,1\n0,0.0,1.0\n").is_err());
    }
}
