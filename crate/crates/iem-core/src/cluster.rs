//! K-medoids (Voronoi iteration) over a precomputed distance matrix, plus
//! the permutation-maximized accuracy used to score mode recovery.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),
    #[error("k must satisfy 1 <= k <= n, got k = {k} with n = {n}")]
    BadK { k: usize, n: usize },
    #[error("exhaustive label matching supports k <= 6, got {0}")]
    TooManyClusters(usize),
    #[error("assignments and truth have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusteringResult {
    pub medoid_indices: Vec<usize>,
    pub assignments: Vec<usize>,
    pub total_cost: f64,
}

fn validate_matrix(d: &DMatrix<f64>) -> Result<(), ClusterError> {
    if d.nrows() != d.ncols() || d.nrows() == 0 {
        return Err(ClusterError::InvalidMatrix(format!(
            "expected a nonempty square matrix, got {}x{}",
            d.nrows(),
            d.ncols()
        )));
    }
    for i in 0..d.nrows() {
        if d[(i, i)] != 0.0 {
            return Err(ClusterError::InvalidMatrix(format!(
                "diagonal entry ({i},{i}) is {}, expected 0",
                d[(i, i)]
            )));
        }
        for j in 0..d.ncols() {
            let v = d[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(ClusterError::InvalidMatrix(format!(
                    "entry ({i},{j}) = {v} is negative or non-finite"
                )));
            }
            if (v - d[(j, i)]).abs() > 1e-9 {
                return Err(ClusterError::InvalidMatrix(format!(
                    "asymmetry at ({i},{j}): {} vs {}",
                    v,
                    d[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// Voronoi-iteration K-medoids.
///
/// Medoids are initialized by uniform sampling without replacement
/// (seeded), then assignment and medoid-update sweeps alternate until the
/// assignments stabilize or `max_iter` sweeps pass. Ties go to the lowest
/// point index; each medoid is pinned to its own cluster. The total cost
/// is nonincreasing across sweeps.
pub fn kmedoids(
    d: &DMatrix<f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<ClusteringResult, ClusterError> {
    validate_matrix(d)?;
    let n = d.nrows();
    if k == 0 || k > n {
        return Err(ClusterError::BadK { k, n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids = rand::seq::index::sample(&mut rng, n, k).into_vec();
    medoids.sort_unstable();

    let assign = |medoids: &[usize], out: &mut Vec<usize>| {
        out.clear();
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, &m) in medoids.iter().enumerate() {
                if m == i {
                    best = c;
                    break;
                }
                let dist = d[(i, m)];
                if dist < best_d || (dist == best_d && m < medoids[best]) {
                    best = c;
                    best_d = dist;
                }
            }
            out.push(best);
        }
    };

    let mut assignments = Vec::with_capacity(n);
    assign(&medoids, &mut assignments);

    for _ in 0..max_iter {
        // medoid update: the in-cluster point minimizing summed distance
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| assignments[i] == c).collect();
            let mut best = medoids[c];
            let mut best_cost = f64::INFINITY;
            for &cand in &members {
                let cost: f64 = members.iter().map(|&j| d[(cand, j)]).sum();
                if cost < best_cost {
                    best = cand;
                    best_cost = cost;
                }
            }
            medoids[c] = best;
        }
        let mut next = Vec::with_capacity(n);
        assign(&medoids, &mut next);
        if next == assignments {
            break;
        }
        assignments = next;
    }

    let total_cost = (0..n).map(|i| d[(i, medoids[assignments[i]])]).sum();
    Ok(ClusteringResult {
        medoid_indices: medoids,
        assignments,
        total_cost,
    })
}

/// Best agreement between two labelings over all `k!` label permutations
/// (exhaustive; limited to `k <= 6`).
pub fn accuracy(assignments: &[usize], truth: &[usize], k: usize) -> Result<f64, ClusterError> {
    if assignments.len() != truth.len() {
        return Err(ClusterError::LengthMismatch(assignments.len(), truth.len()));
    }
    if k > 6 {
        return Err(ClusterError::TooManyClusters(k));
    }
    if assignments.is_empty() {
        return Ok(1.0);
    }
    // k x k contingency table, then maximize the trace over permutations
    let mut counts = vec![vec![0usize; k]; k];
    for (&a, &t) in assignments.iter().zip(truth) {
        if a >= k || t >= k {
            return Err(ClusterError::InvalidMatrix(format!(
                "label out of range: assignment {a} / truth {t} with k = {k}"
            )));
        }
        counts[a][t] += 1;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let agree: usize = (0..k).map(|c| counts[c][p[c]]).sum();
        best = best.max(agree);
    });
    Ok(best as f64 / assignments.len() as f64)
}

fn permute(items: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_two_clusters() {
        let d = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let r = kmedoids(&d, 2, 0, 100).unwrap();
        let mut meds = r.medoid_indices.clone();
        meds.sort_unstable();
        assert_eq!(meds, vec![0, 1]);
        assert_eq!(r.total_cost, 0.0);
    }

    #[test]
    fn k_equals_n_gives_zero_cost() {
        let d = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 2.0, 3.0, 2.0, 0.0, 1.0, 3.0, 1.0, 0.0],
        );
        let r = kmedoids(&d, 3, 7, 100).unwrap();
        assert_eq!(r.total_cost, 0.0);
        for (i, &c) in r.assignments.iter().enumerate() {
            assert_eq!(r.medoid_indices[c], i);
        }
    }

    #[test]
    fn medoids_belong_to_their_own_cluster() {
        let n = 40;
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let a = (i as f64 % 7.0) - (j as f64 % 7.0);
                let b = i as f64 / 7.0 - j as f64 / 7.0;
                d[(i, j)] = (a * a + b * b).sqrt();
            }
        }
        let r = kmedoids(&d, 4, 1, 100).unwrap();
        for (c, &m) in r.medoid_indices.iter().enumerate() {
            assert_eq!(r.assignments[m], c);
        }
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(matches!(
            kmedoids(&asym, 1, 0, 10),
            Err(ClusterError::InvalidMatrix(_))
        ));
        let diag = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 0.0]);
        assert!(kmedoids(&diag, 1, 0, 10).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!(kmedoids(&neg, 1, 0, 10).is_err());
        let ok = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(kmedoids(&ok, 3, 0, 10), Err(ClusterError::BadK { .. })));
        assert!(kmedoids(&ok, 0, 0, 10).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let n = 30;
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                d[(i, j)] = ((i as f64).sin() - (j as f64).sin()).abs()
                    + ((i as f64).cos() - (j as f64).cos()).abs();
            }
        }
        for i in 0..n {
            d[(i, i)] = 0.0;
        }
        let a = kmedoids(&d, 3, 42, 100).unwrap();
        let b = kmedoids(&d, 3, 42, 100).unwrap();
        assert_eq!(a.medoid_indices, b.medoid_indices);
        assert_eq!(a.assignments, b.assignments);
    }

    #[test]
    fn accuracy_examples() {
        let a = vec![0, 0, 1, 1];
        assert_eq!(accuracy(&a, &a, 2).unwrap(), 1.0);
        let flipped = vec![1, 1, 0, 0];
        assert_eq!(accuracy(&a, &flipped, 2).unwrap(), 1.0);
        assert!(accuracy(&a, &[0, 0, 1], 2).is_err());
        assert!(matches!(
            accuracy(&a, &a, 7),
            Err(ClusterError::TooManyClusters(7))
        ));
    }

    #[test]
    fn random_binary_labels_agree_about_half_the_time() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n = 500;
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let guess: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let acc = accuracy(&guess, &truth, 2).unwrap();
        // permutation maximization folds accuracy to >= 0.5; binomial
        // spread keeps it under ~0.57 with overwhelming probability
        assert!((0.5..0.57).contains(&acc), "accuracy {acc}");
    }
}
