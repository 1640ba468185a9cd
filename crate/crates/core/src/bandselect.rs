//! Band selection by kernel k-means over the rows of the endmember matrix.
//!
//! Every band `ℓ` is the point `Φ(m_ℓ)` in the kernel's feature space. Bands
//! are clustered with (fast) global kernel k-means and each cluster is
//! represented by its medoid: the member closest to the cluster centroid.
//!
//! Distances only need the Gram matrix:
//!
//! ```text
//! ‖Φ(m_ℓ) − μ_k‖² = K_ℓℓ − (2/N_k) Σ_{i∈C_k} K_ℓi + (1/N_k²) Σ_{i,j∈C_k} K_ij
//! ```
//!
//! The per-cluster sums `Σ_{i∈C_k} K_ℓi` are cached for every band, so one
//! Lloyd sweep costs `O(L²)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernels::{gram_matrix, KernelSpec};
use crate::linalg::Matrix;
use crate::model::{BandSelection, EndmemberMatrix};

/// Default Lloyd iteration cap.
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster id of every point, in `[0, k)`.
    pub assignment: Vec<usize>,
    /// Total within-cluster squared distance to the centroids.
    pub error: f64,
    pub per_cluster_error: Vec<f64>,
    /// Error after initialisation and after every Lloyd sweep.
    pub error_trace: Vec<f64>,
    pub iterations: usize,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.per_cluster_error.len()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| (c == cluster).then_some(i))
            .collect()
    }
}

/// Squared feature-space distance from point `ell` to the centroid of `cluster`.
pub fn point_to_centroid_sq(gram: &Matrix, ell: usize, cluster: &[usize]) -> Result<f64> {
    if cluster.is_empty() {
        return Err(invalid!("empty cluster"));
    }
    let n = gram.rows();
    if ell >= n || cluster.iter().any(|&i| i >= n) {
        return Err(invalid!("point index out of range for {n} points"));
    }
    let nk = cluster.len() as f64;
    let cross: f64 = cluster.iter().map(|&i| gram[(ell, i)]).sum();
    let inner: f64 = cluster
        .iter()
        .map(|&i| cluster.iter().map(|&j| gram[(i, j)]).sum::<f64>())
        .sum();
    Ok(gram[(ell, ell)] - 2.0 * cross / nk + inner / (nk * nk))
}

/// Cached cluster statistics for one assignment.
struct Stats {
    k: usize,
    counts: Vec<usize>,
    /// `sums[ℓ·k + c] = Σ_{i∈C_c} K_ℓi`
    sums: Vec<f64>,
    /// `Σ_{i,j∈C_c} K_ij`
    inner: Vec<f64>,
}

impl Stats {
    fn new(gram: &Matrix, assignment: &[usize], k: usize) -> Self {
        let n = gram.rows();
        let mut counts = vec![0; k];
        for &c in assignment {
            counts[c] += 1;
        }
        let mut sums = vec![0.0; n * k];
        for l in 0..n {
            let row = gram.row(l);
            let out = &mut sums[l * k..(l + 1) * k];
            for (i, &c) in assignment.iter().enumerate() {
                out[c] += row[i];
            }
        }
        let mut inner = vec![0.0; k];
        for (i, &c) in assignment.iter().enumerate() {
            inner[c] += sums[i * k + c];
        }
        Self {
            k,
            counts,
            sums,
            inner,
        }
    }

    /// Moves point `l` between clusters, updating the cached sums in `O(L)`.
    fn move_point(&mut self, gram: &Matrix, l: usize, from: usize, to: usize) {
        let k = self.k;
        for (i, &v) in gram.row(l).iter().enumerate() {
            self.sums[i * k + from] -= v;
            self.sums[i * k + to] += v;
        }
        self.counts[from] -= 1;
        self.counts[to] += 1;
    }

    /// Same clusters with room for `k` ids; the new ids start empty.
    fn widened(&self, k: usize) -> Self {
        let n = self.sums.len() / self.k;
        let mut sums = vec![0.0; n * k];
        for l in 0..n {
            sums[l * k..l * k + self.k].copy_from_slice(&self.sums[l * self.k..(l + 1) * self.k]);
        }
        let mut counts = self.counts.clone();
        counts.resize(k, 0);
        let mut inner = self.inner.clone();
        inner.resize(k, 0.0);
        Self {
            k,
            counts,
            sums,
            inner,
        }
    }

    fn refresh_inner(&mut self, assignment: &[usize]) {
        self.inner.iter_mut().for_each(|v| *v = 0.0);
        for (i, &c) in assignment.iter().enumerate() {
            self.inner[c] += self.sums[i * self.k + c];
        }
    }

    #[inline]
    fn dist(&self, gram: &Matrix, l: usize, c: usize) -> f64 {
        let nk = self.counts[c] as f64;
        gram[(l, l)] - 2.0 * self.sums[l * self.k + c] / nk + self.inner[c] / (nk * nk)
    }

    fn per_cluster_error(&self, gram: &Matrix, assignment: &[usize]) -> Vec<f64> {
        let mut err = vec![0.0; self.k];
        for (l, &c) in assignment.iter().enumerate() {
            err[c] += self.dist(gram, l, c);
        }
        err
    }
}

fn check_gram(gram: &Matrix, k: usize) -> Result<()> {
    let n = gram.rows();
    if gram.cols() != n {
        return Err(invalid!("gram matrix must be square"));
    }
    if k == 0 {
        return Err(invalid!("need at least one cluster"));
    }
    if k > n {
        return Err(invalid!("{k} clusters requested for {n} points"));
    }
    Ok(())
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(gram: &Matrix, assignment: &mut [usize], k: usize) -> Stats {
    let mut stats = Stats::new(gram, assignment, k);
    while let Some(empty) = stats.counts.iter().position(|&c| c == 0) {
        let mut far = None;
        let mut far_d = f64::NEG_INFINITY;
        for (l, &c) in assignment.iter().enumerate() {
            if stats.counts[c] < 2 {
                continue;
            }
            let d = stats.dist(gram, l, c);
            if d > far_d {
                far_d = d;
                far = Some(l);
            }
        }
        let l = far.expect("k <= n guarantees a cluster with two points");
        assignment[l] = empty;
        stats = Stats::new(gram, assignment, k);
    }
    stats
}

/// Lloyd iterations in feature space from `init`. Empty clusters are reseeded
/// with the point farthest from its centroid. A point only changes cluster
/// for a strictly closer centroid; ties go to the lowest cluster id.
pub fn kernel_kmeans(
    gram: &Matrix,
    k: usize,
    init: &[usize],
    max_iter: usize,
) -> Result<Clustering> {
    check_gram(gram, k)?;
    let n = gram.rows();
    if init.len() != n {
        return Err(invalid!(
            "initial assignment has {} entries for {n} points",
            init.len()
        ));
    }
    if let Some(&bad) = init.iter().find(|&&c| c >= k) {
        return Err(invalid!("initial cluster id {bad} >= {k}"));
    }
    let mut assignment = init.to_vec();
    let stats = repair_empty(gram, &mut assignment, k);
    Ok(lloyd(gram, assignment, stats, max_iter).0)
}

fn lloyd(
    gram: &Matrix,
    mut assignment: Vec<usize>,
    mut stats: Stats,
    max_iter: usize,
) -> (Clustering, Stats) {
    let (n, k) = (gram.rows(), stats.k);
    let mut per_cluster = stats.per_cluster_error(gram, &assignment);
    let mut trace = vec![per_cluster.iter().sum::<f64>()];
    let mut iterations = 0;
    let mut moves = Vec::new();
    while iterations < max_iter {
        iterations += 1;
        moves.clear();
        for l in 0..n {
            let cur = assignment[l];
            let mut best = cur;
            let mut best_d = stats.dist(gram, l, cur);
            for c in 0..k {
                let d = stats.dist(gram, l, c);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            if best != cur {
                moves.push((l, best));
            }
        }
        if moves.is_empty() {
            break;
        }
        for &(l, to) in &moves {
            stats.move_point(gram, l, assignment[l], to);
            assignment[l] = to;
        }
        if stats.counts.contains(&0) {
            stats = repair_empty(gram, &mut assignment, k);
        } else {
            stats.refresh_inner(&assignment);
        }
        per_cluster = stats.per_cluster_error(gram, &assignment);
        trace.push(per_cluster.iter().sum());
    }
    let clustering = Clustering {
        error: per_cluster.iter().sum(),
        per_cluster_error: per_cluster,
        assignment,
        error_trace: trace,
        iterations,
    };
    (clustering, stats)
}

/// Global kernel k-means: clusters are added one at a time.
///
/// With `fast = false` every point is tried as the seed of the new cluster and
/// the best converged run is kept. With `fast = true` the seed is the point
/// with the largest guaranteed error reduction
/// `Σ_ℓ max(0, d²_ℓ − ‖Φ(m_ℓ) − Φ(m_n)‖²)`, and one run is made per step.
pub fn global_kernel_kmeans(
    gram: &Matrix,
    k: usize,
    fast: bool,
    max_iter: usize,
) -> Result<Clustering> {
    check_gram(gram, k)?;
    let n = gram.rows();
    let diag: Vec<f64> = (0..n).map(|l| gram[(l, l)]).collect();
    let init = vec![0; n];
    let (mut current, mut stats) = lloyd(gram, init.clone(), Stats::new(gram, &init, 1), max_iter);
    for m in 2..=k {
        let own: Vec<f64> = (0..n)
            .map(|l| stats.dist(gram, l, current.assignment[l]))
            .collect();
        // Every point closer to the candidate than to its centroid joins it.
        let seeded = |cand: usize| -> (Vec<usize>, Stats) {
            let mut init = current.assignment.clone();
            let mut st = stats.widened(m);
            let row = gram.row(cand);
            for l in 0..n {
                let d = diag[l] - 2.0 * row[l] + diag[cand];
                if l == cand || d < own[l] {
                    st.move_point(gram, l, init[l], m - 1);
                    init[l] = m - 1;
                }
            }
            if st.counts.contains(&0) {
                st = repair_empty(gram, &mut init, m);
            } else {
                st.refresh_inner(&init);
            }
            (init, st)
        };
        let (next, next_stats) = if fast {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for cand in 0..n {
                let row = gram.row(cand);
                let dc = diag[cand];
                let mut score = 0.0;
                for l in 0..n {
                    let gain = own[l] - (diag[l] - 2.0 * row[l] + dc);
                    if gain > 0.0 {
                        score += gain;
                    }
                }
                if score > best_score {
                    best_score = score;
                    best = cand;
                }
            }
            let (init, st) = seeded(best);
            lloyd(gram, init, st, max_iter)
        } else {
            let mut best: Option<(Clustering, Stats)> = None;
            for cand in 0..n {
                let (init, st) = seeded(cand);
                let run = lloyd(gram, init, st, max_iter);
                if best.as_ref().is_none_or(|b| run.0.error < b.0.error) {
                    best = Some(run);
                }
            }
            best.expect("n >= 1 candidates")
        };
        current = next;
        stats = next_stats;
    }
    Ok(current)
}

/// Medoid of each cluster: the member with the smallest distance to its
/// centroid, lowest index on ties. Returned in cluster order.
pub fn medoids(gram: &Matrix, clustering: &Clustering) -> Vec<usize> {
    let k = clustering.k();
    let stats = Stats::new(gram, &clustering.assignment, k);
    let mut best = vec![usize::MAX; k];
    let mut best_d = vec![f64::INFINITY; k];
    for (l, &c) in clustering.assignment.iter().enumerate() {
        let d = stats.dist(gram, l, c);
        if d < best_d[c] {
            best_d[c] = d;
            best[c] = l;
        }
    }
    best
}

/// Relabels clusters in order of their lowest member.
fn canonical_labels(assignment: &[usize], k: usize) -> Vec<usize> {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    assignment
        .iter()
        .map(|&c| {
            if map[c] == usize::MAX {
                map[c] = next;
                next += 1;
            }
            map[c]
        })
        .collect()
}

/// Clusters the bands described by `gram` into `n_b` groups with fast global
/// kernel k-means and keeps each cluster's medoid.
pub fn select_bands_from_gram(gram: &Matrix, n_b: usize, max_iter: usize) -> Result<BandSelection> {
    let l = gram.rows();
    if n_b == 0 || n_b > l {
        return Err(invalid!("cannot select {n_b} of {l} bands"));
    }
    if n_b == l {
        return Ok(BandSelection::all(l));
    }
    let clustering = global_kernel_kmeans(gram, n_b, true, max_iter)?;
    let mut indices = medoids(gram, &clustering);
    indices.sort_unstable();
    Ok(BandSelection {
        indices,
        clusters: canonical_labels(&clustering.assignment, n_b),
        cluster_error: clustering.error,
    })
}

pub fn select_bands(m: &EndmemberMatrix, n_b: usize, kernel: &KernelSpec) -> Result<BandSelection> {
    kernel.validate()?;
    let gram = gram_matrix(kernel, m.matrix());
    select_bands_from_gram(&gram, n_b, DEFAULT_MAX_ITER)
}

/// Uniform sample of `n_b` distinct bands, sorted.
pub fn select_bands_random(l: usize, n_b: usize, seed: u64) -> Result<BandSelection> {
    if n_b == 0 || n_b > l {
        return Err(invalid!("cannot select {n_b} of {l} bands"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = rand::seq::index::sample(&mut rng, l, n_b).into_vec();
    BandSelection::from_indices(indices)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(rows: &[[f64; 2]]) -> Matrix {
        let v: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        Matrix::from_rows(&v).unwrap()
    }

    fn two_groups() -> Matrix {
        points(&[
            [0.0, 0.0],
            [10.0, 10.0],
            [0.1, 0.0],
            [10.1, 10.0],
            [0.0, 0.1],
            [10.0, 10.1],
        ])
    }

    #[test]
    fn singleton_and_duplicate_distance() {
        let g = gram_matrix(&KernelSpec::gaussian(0.3), &two_groups());
        assert_eq!(point_to_centroid_sq(&g, 2, &[2]).unwrap(), 0.0);
        let dup = points(&[[0.3, 0.2], [0.3, 0.2], [0.9, 0.1]]);
        let g = gram_matrix(&KernelSpec::gaussian(0.3), &dup);
        assert!(point_to_centroid_sq(&g, 0, &[0, 1]).unwrap().abs() < 1e-15);
        assert!(point_to_centroid_sq(&g, 0, &[]).is_err());
    }

    #[test]
    fn explicit_feature_distance() {
        let pts = points(&[[0.1, 0.7], [0.4, 0.2], [0.9, 0.5], [0.3, 0.3]]);
        let g = gram_matrix(&KernelSpec::linear(), &pts);
        let cluster = [1usize, 2];
        let centroid = [(0.4 + 0.9) / 2.0, (0.2 + 0.5) / 2.0];
        for ell in 0..4 {
            let p = pts.row(ell);
            let want = (p[0] - centroid[0]).powi(2) + (p[1] - centroid[1]).powi(2);
            let got = point_to_centroid_sq(&g, ell, &cluster).unwrap();
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn k_equals_n_gives_zero_error() {
        let g = gram_matrix(&KernelSpec::gaussian(0.3), &two_groups());
        let init: Vec<usize> = (0..6).collect();
        let c = kernel_kmeans(&g, 6, &init, 10).unwrap();
        assert!(c.error.abs() < 1e-12);
        let c = global_kernel_kmeans(&g, 6, true, 10).unwrap();
        assert!(c.error.abs() < 1e-12);
        let mut sorted = c.assignment.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn separated_groups_recovered() {
        let g = gram_matrix(&KernelSpec::gaussian(1.0), &two_groups());
        for fast in [true, false] {
            let c = global_kernel_kmeans(&g, 2, fast, 50).unwrap();
            let a = &c.assignment;
            assert!(a[0] == a[2] && a[2] == a[4]);
            assert!(a[1] == a[3] && a[3] == a[5]);
            assert_ne!(a[0], a[1]);
        }
    }

    #[test]
    fn one_cluster_closed_form() {
        let g = gram_matrix(&KernelSpec::gaussian(0.5), &two_groups());
        let c = global_kernel_kmeans(&g, 1, true, 10).unwrap();
        let n = 6.0;
        let want = g.trace() - g.as_slice().iter().sum::<f64>() / n;
        assert!((c.error - want).abs() < 1e-12);
    }

    #[test]
    fn empty_cluster_repaired() {
        let g = gram_matrix(&KernelSpec::gaussian(1.0), &two_groups());
        let c = kernel_kmeans(&g, 3, &[0, 0, 0, 0, 0, 0], 20).unwrap();
        for k in 0..3 {
            assert!(!c.members(k).is_empty());
        }
    }

    #[test]
    fn too_many_clusters() {
        let g = Matrix::identity(3);
        assert!(kernel_kmeans(&g, 4, &[0, 1, 2], 5).is_err());
        assert!(global_kernel_kmeans(&g, 4, true, 5).is_err());
        assert!(select_bands_from_gram(&g, 0, 5).is_err());
    }

    #[test]
    fn random_selection_contract() {
        let s = select_bands_random(420, 10, 3).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.indices.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s, select_bands_random(420, 10, 3).unwrap());
        assert_eq!(
            select_bands_random(420, 420, 1).unwrap().indices,
            (0..420).collect::<Vec<_>>()
        );
        assert!(select_bands_random(5, 6, 1).is_err());
    }

    #[test]
    fn canonical_relabel() {
        assert_eq!(canonical_labels(&[2, 2, 0, 1, 0], 3), vec![0, 0, 1, 2, 1]);
    }
}
