//! Statistical and structural checks on the synthetic data generators.

use nlunmix_core::synth::{spectral_angle_deg, stepped_schedule, WAVELENGTH_RANGE};
use nlunmix_core::{
    add_noise, generate_scene, generate_synthetic_endmembers, mix, sample_abundances,
    validate_simplex, BandParam, EndmemberMatrix, Error, Matrix, MixingModel, NoiseSpec,
};
use proptest::prelude::*;

#[test]
fn flat_dirichlet_means() {
    let (r, n) = (5, 2000);
    let a = sample_abundances(r, n, 11).unwrap();
    for i in 0..r {
        let mean = a.row(i).iter().sum::<f64>() / n as f64;
        // sd of the mean is sqrt((R−1)/(R²(R+1)) / N) ≈ 0.0037
        assert!((mean - 0.2).abs() < 0.02, "component {i}: {mean}");
    }
    for j in 0..n {
        assert!(validate_simplex(&a.col(j), 1e-12).unwrap());
    }
}

#[test]
fn flat_dirichlet_covariance() {
    let (r, n) = (3, 100_000);
    let a = sample_abundances(r, n, 12).unwrap();
    let mean: Vec<f64> = (0..r)
        .map(|i| a.row(i).iter().sum::<f64>() / n as f64)
        .collect();
    let cov = |i: usize, j: usize| {
        a.row(i)
            .iter()
            .zip(a.row(j))
            .map(|(x, y)| (x - mean[i]) * (y - mean[j]))
            .sum::<f64>()
            / (n - 1) as f64
    };
    let rf = r as f64;
    let var = (rf - 1.0) / (rf * rf * (rf + 1.0));
    let off = -1.0 / (rf * rf * (rf + 1.0));
    for i in 0..r {
        assert!((cov(i, i) - var).abs() < 0.05 * var);
        for j in (i + 1)..r {
            assert!((cov(i, j) - off).abs() < 0.05 * off.abs());
        }
    }
}

#[test]
fn abundance_stream_is_seeded() {
    assert_eq!(
        sample_abundances(4, 10, 3).unwrap(),
        sample_abundances(4, 10, 3).unwrap()
    );
    assert_ne!(
        sample_abundances(4, 10, 3).unwrap(),
        sample_abundances(4, 10, 4).unwrap()
    );
    assert!(sample_abundances(1, 10, 3).is_err());
}

#[test]
fn noise_power_matches_snr() {
    let x = Matrix::from_vec(
        50,
        400,
        (0..20_000).map(|i| 0.2 + (i % 17) as f64 * 0.03).collect(),
    )
    .unwrap();
    let power = x.as_slice().iter().map(|v| v * v).sum::<f64>() / 20_000.0;
    for snr in [10.0, 21.0, 30.0] {
        let y = add_noise(&x, &NoiseSpec::new(snr, 5)).unwrap();
        let noise: Vec<f64> = y
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(a, b)| a - b)
            .collect();
        let var = noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64;
        let want = power * 10f64.powf(-snr / 10.0);
        assert!(
            (var / want - 1.0).abs() < 0.05,
            "snr {snr}: {var} vs {want}"
        );
    }
    assert_eq!(add_noise(&x, &NoiseSpec::noiseless(5)).unwrap(), x);
    assert!(add_noise(&x, &NoiseSpec::new(f64::NAN, 5)).is_err());
}

#[test]
fn generated_endmembers_are_separated() {
    let m = generate_synthetic_endmembers(420, 8, 1).unwrap();
    assert_eq!((m.bands(), m.endmembers()), (420, 8));
    let w = m.wavelengths().unwrap();
    assert_eq!((w[0], w[419]), WAVELENGTH_RANGE);
    for i in 0..8 {
        let s = m.signature(i);
        assert!(s.iter().all(|&v| v >= 0.0));
        let peak = s.iter().copied().fold(0.0, f64::max);
        assert!((0.4..=1.0 + 1e-12).contains(&peak));
        for j in (i + 1)..8 {
            assert!(spectral_angle_deg(&s, &m.signature(j)) >= 5.0);
        }
    }
    assert!(generate_synthetic_endmembers(3, 4, 1).is_err());
}

#[test]
fn schedules_step_every_42_bands() {
    let delta = stepped_schedule(420, 0.5, 0.05, 42);
    assert_eq!(delta.len(), 420);
    assert_eq!(delta[0], 0.5);
    assert_eq!(delta[41], 0.5);
    assert!((delta[42] - 0.55).abs() < 1e-12);
    assert!((delta[419] - 0.95).abs() < 1e-12);
    let xi = stepped_schedule(420, 0.5, 0.04, 42);
    assert!((xi[419] - 0.86).abs() < 1e-12);
}

#[test]
fn degenerate_nonlinearities_reduce_to_linear_mixing() {
    let m = generate_synthetic_endmembers(60, 4, 9).unwrap();
    let lmm = generate_scene(&m, 30, &MixingModel::Lmm, &NoiseSpec::new(21.0, 2), 3).unwrap();
    for model in [MixingModel::gbm(0.0), MixingModel::pnmm(1.0)] {
        let s = generate_scene(&m, 30, &model, &NoiseSpec::new(21.0, 2), 3).unwrap();
        assert_eq!(s.pixels(), lmm.pixels());
        assert_eq!(s.abundances(), lmm.abundances());
    }
}

#[test]
fn model_validation_and_domain_errors() {
    let m = EndmemberMatrix::new(Matrix::from_rows(&[vec![1.0, -0.5], vec![0.2, 0.4]]).unwrap())
        .unwrap();
    let err = mix(&m, &[0.2, 0.8], &MixingModel::pnmm(0.7)).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
    // Integer exponents accept negative mixtures.
    assert!(mix(&m, &[0.2, 0.8], &MixingModel::pnmm(2.0)).is_ok());
    assert!(mix(&m, &[0.5, 0.5], &MixingModel::gbm(1.5)).is_err());
    let short = MixingModel::Gbm {
        delta: BandParam::PerBand(vec![0.5]),
    };
    assert!(mix(&m, &[0.5, 0.5], &short).is_err());
    assert!(mix(&m, &[1.0], &MixingModel::Lmm).is_err());
}

fn simplex(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lmm_is_linear(a in prop::collection::vec(0.01f64..1.0, 4), b in prop::collection::vec(0.01f64..1.0, 4), t in 0.0f64..1.0) {
        let m = generate_synthetic_endmembers(25, 4, 13).unwrap();
        let (a, b) = (simplex(&a), simplex(&b));
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let (ya, yb, yc) = (
            mix(&m, &a, &MixingModel::Lmm).unwrap(),
            mix(&m, &b, &MixingModel::Lmm).unwrap(),
            mix(&m, &c, &MixingModel::Lmm).unwrap(),
        );
        for k in 0..25 {
            prop_assert!((yc[k] - (t * ya[k] + (1.0 - t) * yb[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_terms_only_add(a in prop::collection::vec(0.01f64..1.0, 5), delta in 0.0f64..=1.0) {
        let m = generate_synthetic_endmembers(25, 5, 14).unwrap();
        let a = simplex(&a);
        let lin = mix(&m, &a, &MixingModel::Lmm).unwrap();
        let gbm = mix(&m, &a, &MixingModel::gbm(delta)).unwrap();
        for k in 0..25 {
            prop_assert!(gbm[k] >= lin[k]);
        }
    }
}
