//! Kernel k-means against explicit-feature k-means and exhaustive partitions.

mod common;

use common::{blobs, explicit_kmeans, partition_error, partitions, random_points};
use nlunmix_core::{global_kernel_kmeans, gram_matrix, kernel_kmeans, KernelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn linear_kernel_matches_explicit_kmeans() {
    let mut g = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let n = g.random_range(6..40);
        let k = g.random_range(2..=4.min(n));
        let x = random_points(&mut g, n, 3);
        let gram = gram_matrix(&KernelSpec::linear(), &x);
        let init: Vec<usize> = (0..n).map(|_| g.random_range(0..k)).collect();
        let kk = kernel_kmeans(&gram, k, &init, 100).unwrap();
        assert_eq!(kk.assignment, explicit_kmeans(&x, k, &init, 100));
    }
}

#[test]
fn there_are_966_three_partitions_of_eight() {
    assert_eq!(partitions(8, 3).len(), 966);
}

#[test]
fn global_kernel_kmeans_matches_exhaustive_optimum() {
    let parts = partitions(8, 3);
    let mut g = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..40 {
        let x = blobs(&mut g);
        let gram = gram_matrix(&KernelSpec::gaussian(0.1), &x);
        let (best_err, best) = parts
            .iter()
            .map(|p| (partition_error(&gram, p, 3), p))
            .fold(
                (f64::INFINITY, &parts[0]),
                |a, b| if b.0 < a.0 { b } else { a },
            );
        let exact = global_kernel_kmeans(&gram, 3, false, 100).unwrap();
        assert!(
            (exact.error - best_err).abs() <= 1e-9,
            "{} vs {best_err}",
            exact.error
        );
        // The optimum is a fixed point of the Lloyd iterations.
        let stay = kernel_kmeans(&gram, 3, best, 100).unwrap();
        assert_eq!(&stay.assignment, best);
        assert!((stay.error - best_err).abs() <= 1e-12);
        let fast = global_kernel_kmeans(&gram, 3, true, 100).unwrap();
        assert!(fast.error >= best_err - 1e-12);
    }
}
