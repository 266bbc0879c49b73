//! SNR grids, Wiener-path sampling, and the quadrature rule shared by all
//! stochastic-integral estimators.
//!
//! The observation channel is `y_γ = γ x + w_γ` with `w_γ ~ N(0, γ I)` a
//! standard Wiener process in the SNR variable `γ`. Every integral over γ
//! is evaluated after the change of variables `t = ln γ`, on a log-uniform
//! node set, with the left-endpoint (Euler–Maruyama, non-anticipative)
//! rule:
//!
//! ```text
//! ∫ g(γ) dγ  ≈  Σ_{i=0}^{n-2} g(γ_i) · γ_i · Δt,    Δt = ln(γ_max/γ_min)/(n-1)
//! ```
//!
//! Path increments are generated by a counter-keyed RNG: the normal draws
//! for a node depend only on `(seed, path_index, node_index)`, so paths are
//! reproducible independent of evaluation order or parallelism, and grids
//! sharing a log-step prefix share their path prefix exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid SNR range: {0}")]
    InvalidRange(String),
    #[error("non-finite value in quadrature input or result")]
    NonFinite,
    #[error("expected {expected} per-node values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Log-uniform SNR grid `γ_0 < γ_1 < … < γ_{n-1}` with exact endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrGrid {
    gamma_min: f64,
    gamma_max: f64,
    nodes: Vec<f64>,
    log_step: f64,
}

impl SnrGrid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn gamma_min(&self) -> f64 {
        self.gamma_min
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }

    /// Uniform spacing in `ln γ`.
    pub fn log_step(&self) -> f64 {
        self.log_step
    }
}

/// Build a log-uniform grid over `[gamma_min, gamma_max]` with `n_steps` nodes.
pub fn make_grid(gamma_min: f64, gamma_max: f64, n_steps: usize) -> Result<SnrGrid, ChannelError> {
    if !(gamma_min.is_finite() && gamma_max.is_finite()) || gamma_min <= 0.0 || gamma_max <= gamma_min {
        return Err(ChannelError::InvalidRange(format!(
            "need 0 < gamma_min < gamma_max, got [{gamma_min}, {gamma_max}]"
        )));
    }
    if n_steps < 2 {
        return Err(ChannelError::InvalidRange(format!(
            "need at least 2 steps, got {n_steps}"
        )));
    }
    let log_min = gamma_min.ln();
    let log_step = (gamma_max.ln() - log_min) / (n_steps - 1) as f64;
    let mut nodes = Vec::with_capacity(n_steps);
    for i in 0..n_steps {
        let g = if i == 0 {
            gamma_min
        } else if i == n_steps - 1 {
            gamma_max
        } else {
            (log_min + i as f64 * log_step).exp()
        };
        nodes.push(g);
    }
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ChannelError::InvalidRange(
            "grid too fine: nodes are not strictly increasing in f64".into(),
        ));
    }
    Ok(SnrGrid {
        gamma_min,
        gamma_max,
        nodes,
        log_step,
    })
}

/// One Wiener-path realization sampled at the grid nodes:
/// `w_0 ~ N(0, γ_0 I)` and `w_{i+1} - w_i ~ N(0, (γ_{i+1} - γ_i) I)`.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    grid: SnrGrid,
    dim: usize,
    values: Vec<f64>, // node-major: [node][coordinate]
}

impl BrownianPath {
    pub fn grid(&self) -> &SnrGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Path value at a node.
    pub fn value(&self, node: usize) -> &[f64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    /// Apply a node-wise map `w_i ↦ f(w_i)` (e.g. an orthogonal matrix,
    /// under which the result is again a Brownian path).
    pub fn map_nodes(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> BrownianPath {
        let mut values = vec![0.0; self.values.len()];
        for i in 0..self.grid.len() {
            let (src, dst) = (
                &self.values[i * self.dim..(i + 1) * self.dim],
                &mut values[i * self.dim..(i + 1) * self.dim],
            );
            f(src, dst);
        }
        BrownianPath {
            grid: self.grid.clone(),
            dim: self.dim,
            values,
        }
    }
}

/// SplitMix64 finalizer; the workhorse behind all seed derivation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent stream seed from a base seed and a stream index.
pub fn derive_stream_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ stream.wrapping_mul(0xA076_1D64_78BD_642F))
}

fn node_key(seed: u64, path_index: u64, node_index: u64) -> u64 {
    splitmix64(derive_stream_seed(seed, path_index) ^ node_index.wrapping_mul(0xE703_7ED1_A0B4_28DB))
}

fn node_normals(seed: u64, path_index: u64, node_index: u64, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(node_key(seed, path_index, node_index));
    for v in out.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
}

/// Sample the path with `path_index = 0` under `seed`.
pub fn sample_path(grid: &SnrGrid, dim: usize, seed: u64) -> BrownianPath {
    sample_path_indexed(grid, dim, seed, 0)
}

/// Sample one of a family of independent paths keyed by `(seed, path_index)`.
pub fn sample_path_indexed(grid: &SnrGrid, dim: usize, seed: u64, path_index: u64) -> BrownianPath {
    assert!(dim >= 1, "path dimension must be >= 1");
    let n = grid.len();
    let mut values = vec![0.0; n * dim];
    let mut draws = vec![0.0; dim];

    node_normals(seed, path_index, 0, &mut draws);
    let s0 = grid.nodes[0].sqrt();
    for c in 0..dim {
        values[c] = s0 * draws[c];
    }
    for i in 1..n {
        node_normals(seed, path_index, i as u64, &mut draws);
        let s = (grid.nodes[i] - grid.nodes[i - 1]).sqrt();
        for c in 0..dim {
            values[i * dim + c] = values[(i - 1) * dim + c] + s * draws[c];
        }
    }
    BrownianPath {
        grid: grid.clone(),
        dim,
        values,
    }
}

/// Left-endpoint quadrature in log space: `Σ_{i<n-1} g_i γ_i Δt ≈ ∫ g dγ`.
///
/// The final node carries no weight. Exact for `g(γ) = c/γ`.
pub fn integrate(grid: &SnrGrid, values: &[f64]) -> Result<f64, ChannelError> {
    if values.len() != grid.len() {
        return Err(ChannelError::LengthMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    let dt = grid.log_step;
    let mut acc = 0.0;
    for i in 0..grid.len() - 1 {
        acc += values[i] * grid.nodes[i] * dt;
    }
    if !acc.is_finite() {
        return Err(ChannelError::NonFinite);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_three_nodes_is_one_e_e2() {
        let g = make_grid(1.0, std::f64::consts::E.powi(2), 3).unwrap();
        assert_eq!(g.nodes()[0], 1.0);
        assert!((g.nodes()[1] - std::f64::consts::E).abs() < 1e-14);
        assert_eq!(g.nodes()[2], std::f64::consts::E.powi(2));
    }

    #[test]
    fn grid_endpoints_exact_and_log_uniform() {
        let g = make_grid(2f64.powi(-10), 2f64.powi(10), 200).unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g.nodes()[0], 2f64.powi(-10));
        assert_eq!(g.nodes()[199], 2f64.powi(10));
        let dt = g.log_step();
        assert!((dt * 199.0 - (2f64.powi(10) / 2f64.powi(-10)).ln()).abs() < 1e-12);
        for w in g.nodes().windows(2) {
            assert!((w[1].ln() - w[0].ln() - dt).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_rejects_bad_ranges() {
        assert!(make_grid(0.0, 1.0, 10).is_err());
        assert!(make_grid(1.0, 1.0, 10).is_err());
        assert!(make_grid(2.0, 1.0, 10).is_err());
        assert!(make_grid(0.5, 2.0, 1).is_err());
    }

    #[test]
    fn integrate_constant_integrand() {
        let g = make_grid(1.0, std::f64::consts::E.powi(2), 3).unwrap();
        let v = integrate(&g, &[1.0, 1.0, 1.0]).unwrap();
        assert!((v - (1.0 + std::f64::consts::E)).abs() < 1e-12);

        // converges to e² - 1 as the grid is refined
        let fine = make_grid(1.0, std::f64::consts::E.powi(2), 10_000).unwrap();
        let ones = vec![1.0; fine.len()];
        let vf = integrate(&fine, &ones).unwrap();
        let exact = std::f64::consts::E.powi(2) - 1.0;
        assert!((vf - exact).abs() / exact < 1e-3, "got {vf}, want {exact}");
    }

    #[test]
    fn integrate_is_exact_for_one_over_gamma() {
        let g = make_grid(0.25, 8.0, 57).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|x| 1.0 / x).collect();
        let v = integrate(&g, &vals).unwrap();
        assert!((v - (8.0f64 / 0.25).ln()).abs() < 1e-12);
    }

    #[test]
    fn integrate_zero_and_nonfinite() {
        let g = make_grid(1.0, 2.0, 5).unwrap();
        assert_eq!(integrate(&g, &[0.0; 5]).unwrap(), 0.0);
        assert!(matches!(
            integrate(&g, &[1.0, f64::NAN, 1.0, 1.0, 1.0]),
            Err(ChannelError::NonFinite)
        ));
        assert!(integrate(&g, &[1.0; 4]).is_err());
    }

    #[test]
    fn paths_are_deterministic_and_seed_sensitive() {
        let g = make_grid(0.5, 32.0, 20).unwrap();
        let a = sample_path(&g, 3, 7);
        let b = sample_path(&g, 3, 7);
        assert_eq!(a.values, b.values);
        let c = sample_path(&g, 3, 8);
        assert_ne!(a.values, c.values);
        let d = sample_path_indexed(&g, 3, 7, 1);
        assert_ne!(a.values, d.values);
    }

    #[test]
    fn nested_grids_share_path_prefix() {
        let coarse = make_grid(2f64.powi(-4), 1.0, 41).unwrap();
        let fine = make_grid(2f64.powi(-4), 2f64.powi(4), 81).unwrap();
        assert!((coarse.log_step() - fine.log_step()).abs() < 1e-15);
        let pa = sample_path(&coarse, 2, 3);
        let pb = sample_path(&fine, 2, 3);
        for i in 0..coarse.len() {
            assert_eq!(pa.value(i), pb.value(i));
        }
    }
}
