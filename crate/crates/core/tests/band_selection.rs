//! Band-selection invariants on synthetic endmember matrices.

use nlunmix_core::{
    generate_synthetic_endmembers, global_kernel_kmeans, gram_matrix, kernel_kmeans, medoids,
    point_to_centroid_sq, select_bands, select_bands_from_gram, select_bands_random, Clustering,
    KernelSpec,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assert_monotone(c: &Clustering) {
    for w in c.error_trace.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-10 * (1.0 + w[0].abs()),
            "{:?}",
            c.error_trace
        );
    }
    assert!((c.error - c.error_trace.last().unwrap()).abs() <= 1e-12 * (1.0 + c.error));
}

#[test]
fn lloyd_error_never_increases() {
    let m = generate_synthetic_endmembers(120, 5, 4).unwrap();
    let gram = gram_matrix(&KernelSpec::gaussian(0.3), m.matrix());
    let mut g = ChaCha8Rng::seed_from_u64(1);
    for k in [2, 5, 10, 30] {
        for _ in 0..5 {
            let init: Vec<usize> = (0..120).map(|_| g.random_range(0..k)).collect();
            let c = kernel_kmeans(&gram, k, &init, 100).unwrap();
            assert_monotone(&c);
            assert!(c.assignment.iter().all(|&a| a < k));
            assert_eq!((0..k).filter(|&j| c.members(j).is_empty()).count(), 0);
        }
        assert_monotone(&global_kernel_kmeans(&gram, k, true, 100).unwrap());
    }
}

#[test]
fn medoids_are_closest_members() {
    let m = generate_synthetic_endmembers(90, 4, 6).unwrap();
    let gram = gram_matrix(&KernelSpec::gaussian(0.3), m.matrix());
    let c = global_kernel_kmeans(&gram, 8, true, 100).unwrap();
    let meds = medoids(&gram, &c);
    for (k, &med) in meds.iter().enumerate() {
        let members = c.members(k);
        assert!(members.contains(&med));
        let d_med = point_to_centroid_sq(&gram, med, &members).unwrap();
        for &i in &members {
            let d = point_to_centroid_sq(&gram, i, &members).unwrap();
            assert!(d_med <= d + 1e-12);
        }
    }
}

#[test]
fn selection_has_one_medoid_per_cluster() {
    let m = generate_synthetic_endmembers(420, 5, 1).unwrap();
    let kernel = KernelSpec::gaussian(0.3);
    let gram = gram_matrix(&kernel, m.matrix());
    for n_b in [1, 10, 100] {
        let sel = select_bands(&m, n_b, &kernel).unwrap();
        assert_eq!(sel.len(), n_b);
        assert!(sel.indices.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sel.clusters.len(), 420);
        for &band in &sel.indices {
            let members: Vec<usize> = (0..420)
                .filter(|&i| sel.clusters[i] == sel.clusters[band])
                .collect();
            let d = point_to_centroid_sq(&gram, band, &members).unwrap();
            for &i in &members {
                assert!(d <= point_to_centroid_sq(&gram, i, &members).unwrap() + 1e-12);
            }
        }
    }
    let all = select_bands_from_gram(&gram, 420, 100).unwrap();
    assert_eq!(all.indices, (0..420).collect::<Vec<_>>());
    assert!(select_bands(&m, 0, &kernel).is_err());
    assert!(select_bands(&m, 421, &kernel).is_err());
}

#[test]
fn selection_ignores_endmember_order() {
    let m = generate_synthetic_endmembers(150, 5, 2).unwrap();
    let kernel = KernelSpec::gaussian(0.3);
    let base = select_bands(&m, 12, &kernel).unwrap();
    let permuted = m.permute_endmembers(&[3, 0, 4, 1, 2]).unwrap();
    assert_eq!(
        select_bands(&permuted, 12, &kernel).unwrap().indices,
        base.indices
    );
}

#[test]
fn random_selection_is_uniform_over_bands() {
    // Each band is kept with probability n_b / L; check the count over many
    // draws against a 5-sigma binomial band.
    let (l, n_b, draws) = (40, 10, 4000);
    let mut hits = vec![0usize; l];
    for seed in 0..draws {
        for i in select_bands_random(l, n_b, seed as u64).unwrap().indices {
            hits[i] += 1;
        }
    }
    let p = n_b as f64 / l as f64;
    let mean = draws as f64 * p;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    for (band, &h) in hits.iter().enumerate() {
        assert!(
            (h as f64 - mean).abs() <= 5.0 * sd,
            "band {band}: {h} vs {mean}"
        );
    }
    assert_eq!(
        select_bands_random(l, n_b, 7).unwrap(),
        select_bands_random(l, n_b, 7).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gram_follows_band_permutation(seed in 0u64..1000, shift in 1usize..30) {
        let m = generate_synthetic_endmembers(30, 3, seed).unwrap();
        let kernel = KernelSpec::gaussian(0.3);
        let gram = gram_matrix(&kernel, m.matrix());
        let perm: Vec<usize> = (0..30).map(|i| (i * 7 + shift) % 30).collect();
        let permuted = gram_matrix(&kernel, &m.matrix().select_rows(&perm));
        for i in 0..30 {
            for j in 0..30 {
                prop_assert_eq!(permuted[(i, j)], gram[(perm[i], perm[j])]);
            }
        }
    }
}
