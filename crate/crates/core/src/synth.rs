//! Synthetic data: endmember spectra, simplex abundances, linear / bilinear /
//! post-nonlinear mixing, and additive Gaussian noise at a target SNR.
//!
//! Every generator takes an explicit seed and uses its own ChaCha stream, so
//! noise realised for a given seed does not depend on the mixing model.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::model::{AbundanceVector, EndmemberMatrix, Scene};

const MAX_ENDMEMBER_ATTEMPTS: usize = 100;
const MIN_SPECTRAL_ANGLE_DEG: f64 = 5.0;
/// Wavelength range (micrometres) used for generated spectra.
pub const WAVELENGTH_RANGE: (f64, f64) = (0.3951, 2.56);

/// A nonlinearity parameter: one value for all bands, or one per band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandParam {
    Constant(f64),
    PerBand(Vec<f64>),
}

impl BandParam {
    #[inline]
    fn at(&self, band: usize) -> f64 {
        match self {
            BandParam::Constant(v) => *v,
            BandParam::PerBand(v) => v[band],
        }
    }

    fn check_len(&self, l: usize) -> Result<()> {
        match self {
            BandParam::PerBand(v) if v.len() != l => Err(invalid!(
                "per-band schedule has {} entries for {l} bands",
                v.len()
            )),
            _ => Ok(()),
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            BandParam::Constant(v) => core::slice::from_ref(v),
            BandParam::PerBand(v) => v,
        }
    }
}

/// Piecewise-constant per-band schedule: `start + k·step` on the `k`-th
/// plateau of `plateau` consecutive bands.
pub fn stepped_schedule(bands: usize, start: f64, step: f64, plateau: usize) -> Vec<f64> {
    assert!(plateau > 0, "plateau width must be positive");
    (0..bands)
        .map(|l| start + step * (l / plateau) as f64)
        .collect()
}

/// Piecewise-constant schedule from explicit breakpoints: `values[k]` applies
/// from band `breaks[k]` (inclusive) up to the next breakpoint.
pub fn piecewise_schedule(bands: usize, breaks: &[usize], values: &[f64]) -> Result<Vec<f64>> {
    if breaks.len() != values.len() || breaks.first() != Some(&0) {
        return Err(invalid!(
            "breakpoints must start at band 0 and match values"
        ));
    }
    if breaks.windows(2).any(|w| w[1] <= w[0]) || breaks.iter().any(|&b| b >= bands) {
        return Err(invalid!(
            "breakpoints must be strictly increasing and < {bands}"
        ));
    }
    let mut out = Vec::with_capacity(bands);
    for (k, &v) in values.iter().enumerate() {
        let end = breaks.get(k + 1).copied().unwrap_or(bands);
        out.extend(core::iter::repeat_n(v, end - breaks[k]));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum MixingModel {
    Lmm,
    /// Bilinear model with a single interaction weight per band.
    Gbm {
        delta: BandParam,
    },
    /// Post-nonlinear model `(Mα)^ξ`, elementwise.
    Pnmm {
        xi: BandParam,
    },
}

impl MixingModel {
    pub fn gbm(delta: f64) -> Self {
        MixingModel::Gbm {
            delta: BandParam::Constant(delta),
        }
    }

    pub fn pnmm(xi: f64) -> Self {
        MixingModel::Pnmm {
            xi: BandParam::Constant(xi),
        }
    }

    pub fn validate(&self, bands: usize) -> Result<()> {
        match self {
            MixingModel::Lmm => Ok(()),
            MixingModel::Gbm { delta } => {
                delta.check_len(bands)?;
                if delta.values().iter().any(|d| !(0.0..=1.0).contains(d)) {
                    return Err(invalid!("GBM delta must lie in [0, 1]"));
                }
                Ok(())
            }
            MixingModel::Pnmm { xi } => {
                xi.check_len(bands)?;
                if xi.values().iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return Err(invalid!("PNMM exponent must be positive"));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MixingModel::Lmm => "lmm",
            MixingModel::Gbm { .. } => "gbm",
            MixingModel::Pnmm { .. } => "pnmm",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Target SNR in dB; `+∞` means noiseless.
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self { snr_db, seed }
    }

    pub fn noiseless(seed: u64) -> Self {
        Self {
            snr_db: f64::INFINITY,
            seed,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }
}

/// Everything needed to regenerate a synthetic scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub model: MixingModel,
    /// `None` for noiseless scenes.
    pub snr_db: Option<f64>,
    pub noise_seed: u64,
    pub abundance_seed: u64,
    pub pixels: usize,
    pub bands: usize,
    pub endmembers: usize,
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

const ABUNDANCE_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const ENDMEMBER_STREAM: u64 = 3;

/// `R × N` matrix whose columns are uniform on the simplex (flat Dirichlet via
/// normalised unit exponentials).
pub fn sample_abundances(r: usize, n: usize, seed: u64) -> Result<Matrix> {
    if r < 2 {
        return Err(invalid!("need at least 2 endmembers, got {r}"));
    }
    if n < 1 {
        return Err(invalid!("need at least one pixel"));
    }
    let mut g = rng(seed, ABUNDANCE_STREAM);
    let mut a = Matrix::zeros(r, n);
    let mut col = vec![0.0; r];
    for j in 0..n {
        let mut total = 0.0;
        for v in col.iter_mut() {
            let e: f64 = g.sample(Exp1);
            *v = e;
            total += e;
        }
        for (i, v) in col.iter().enumerate() {
            a[(i, j)] = v / total;
        }
    }
    Ok(a)
}

/// Noiseless mixed spectrum for one abundance vector.
pub fn mix(m: &EndmemberMatrix, alpha: &[f64], model: &MixingModel) -> Result<Vec<f64>> {
    let mm = m.matrix();
    let (l, r) = (mm.rows(), mm.cols());
    if alpha.len() != r {
        return Err(invalid!("{} abundances for {r} endmembers", alpha.len()));
    }
    model.validate(l)?;
    let mut out = mm.mul_vec(alpha);
    match model {
        MixingModel::Lmm => {}
        MixingModel::Gbm { delta } => {
            for (band, y) in out.iter_mut().enumerate() {
                let row = mm.row(band);
                let mut cross = 0.0;
                for i in 0..r {
                    for j in (i + 1)..r {
                        cross += alpha[i] * alpha[j] * row[i] * row[j];
                    }
                }
                *y += delta.at(band) * cross;
            }
        }
        MixingModel::Pnmm { xi } => {
            for (band, y) in out.iter_mut().enumerate() {
                let e = xi.at(band);
                if e == 1.0 {
                    continue;
                }
                if *y < 0.0 && libm::trunc(e) != e {
                    return Err(Error::Domain(alloc::format!(
                        "negative linear mixture {y} at band {band} with non-integer exponent {e}"
                    )));
                }
                *y = libm::pow(*y, e);
            }
        }
    }
    Ok(out)
}

/// Adds i.i.d. Gaussian noise with `σ² = mean(x²)·10^(−snr/10)`.
pub fn add_noise(x: &Matrix, spec: &NoiseSpec) -> Result<Matrix> {
    if x.as_slice().is_empty() {
        return Err(invalid!("cannot add noise to an empty matrix"));
    }
    if !x.is_finite() {
        return Err(invalid!("non-finite signal"));
    }
    if spec.is_noiseless() {
        return Ok(x.clone());
    }
    if !spec.snr_db.is_finite() {
        return Err(invalid!("SNR must be finite or +inf, got {}", spec.snr_db));
    }
    let power = x.as_slice().iter().map(|v| v * v).sum::<f64>() / x.as_slice().len() as f64;
    let sigma = libm::sqrt(power * libm::pow(10.0, -spec.snr_db / 10.0));
    let mut g = rng(spec.seed, NOISE_STREAM);
    let mut out = x.clone();
    // Pixel-major order so a pixel's noise does not depend on later pixels.
    for j in 0..x.cols() {
        for i in 0..x.rows() {
            let z: f64 = g.sample(StandardNormal);
            out[(i, j)] += sigma * z;
        }
    }
    Ok(out)
}

pub fn generate_scene(
    m: &EndmemberMatrix,
    n_pixels: usize,
    model: &MixingModel,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<Scene> {
    model.validate(m.bands())?;
    let a = sample_abundances(m.endmembers(), n_pixels, seed)?;
    let mut clean = Matrix::zeros(m.bands(), n_pixels);
    for j in 0..n_pixels {
        clean.set_col(j, &mix(m, &a.col(j), model)?);
    }
    let pixels = add_noise(&clean, noise)?;
    let meta = SceneMeta {
        model: model.clone(),
        snr_db: (!noise.is_noiseless()).then_some(noise.snr_db),
        noise_seed: noise.seed,
        abundance_seed: seed,
        pixels: n_pixels,
        bands: m.bands(),
        endmembers: m.endmembers(),
    };
    Scene::new(pixels, Some(a), Some(meta))
}

/// Smooth nonnegative spectra made of Gaussian absorption/reflection bumps on
/// a slowly varying baseline, each rescaled to a peak in `[0.4, 1]`.
/// Regenerates until every pair is at least 5° apart.
pub fn generate_synthetic_endmembers(l: usize, r: usize, seed: u64) -> Result<EndmemberMatrix> {
    if r < 2 {
        return Err(invalid!("need at least 2 endmembers, got {r}"));
    }
    if l < r {
        return Err(invalid!("fewer bands ({l}) than endmembers ({r})"));
    }
    let mut g = rng(seed, ENDMEMBER_STREAM);
    let (w0, w1) = WAVELENGTH_RANGE;
    let wavelengths: Vec<f64> = (0..l)
        .map(|i| {
            let t = i as f64 / (l - 1) as f64;
            w0 * (1.0 - t) + w1 * t
        })
        .collect();
    let min_cos = libm::cos(MIN_SPECTRAL_ANGLE_DEG.to_radians());
    for _ in 0..MAX_ENDMEMBER_ATTEMPTS {
        let cols: Vec<Vec<f64>> = (0..r).map(|_| random_spectrum(&mut g, l)).collect();
        let separated = (0..r).all(|i| ((i + 1)..r).all(|j| cosine(&cols[i], &cols[j]) <= min_cos));
        if separated {
            let data = Matrix::from_columns(&cols).expect("equal-length columns");
            return EndmemberMatrix::with_metadata(data, Some(wavelengths), None);
        }
    }
    Err(Error::DegenerateConfiguration(alloc::format!(
        "could not draw {r} endmembers at least {MIN_SPECTRAL_ANGLE_DEG} degrees apart in {MAX_ENDMEMBER_ATTEMPTS} attempts"
    )))
}

fn random_spectrum(g: &mut ChaCha8Rng, l: usize) -> Vec<f64> {
    let b0: f64 = g.random_range(0.05..0.3);
    let b1: f64 = g.random_range(-0.2..0.2);
    let b2: f64 = g.random_range(-0.2..0.2);
    let bumps = g.random_range(3..=8usize);
    let params: Vec<(f64, f64, f64)> = (0..bumps)
        .map(|_| {
            (
                g.random_range(0.0..1.0),
                g.random_range(0.02..0.15),
                g.random_range(0.1..1.0),
            )
        })
        .collect();
    let mut s: Vec<f64> = (0..l)
        .map(|i| {
            let t = if l > 1 {
                i as f64 / (l - 1) as f64
            } else {
                0.0
            };
            let base = b0 + b1 * (t - 0.5) + b2 * (t - 0.5) * (t - 0.5);
            let bump: f64 = params
                .iter()
                .map(|&(c, w, a)| a * libm::exp(-(t - c) * (t - c) / (2.0 * w * w)))
                .sum();
            (base + bump).max(0.0)
        })
        .collect();
    let peak = s.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let target: f64 = g.random_range(0.4..=1.0);
    for v in s.iter_mut() {
        *v *= target / peak;
    }
    s
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let ab = crate::linalg::dot(a, b);
    let na = libm::sqrt(crate::linalg::dot(a, a));
    let nb = libm::sqrt(crate::linalg::dot(b, b));
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    ab / (na * nb)
}

/// Spectral angle in degrees between two spectra.
pub fn spectral_angle_deg(a: &[f64], b: &[f64]) -> f64 {
    libm::acos(cosine(a, b).clamp(-1.0, 1.0)).to_degrees()
}

/// Abundance vector drawn uniformly from the simplex.
pub fn sample_abundance_vector(r: usize, seed: u64) -> Result<AbundanceVector> {
    let a = sample_abundances(r, 1, seed)?;
    AbundanceVector::new(a.col(0))
}
