//! Shared data types: endmember matrices, abundance vectors, scenes and band
//! selections, plus simplex validation and band restriction.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::synth::SceneMeta;

/// Tolerance for constructed (ground-truth) abundances.
pub const SIMPLEX_TOL_EXACT: f64 = 1e-9;
/// Tolerance for estimated abundances returned by approximate solvers.
pub const SIMPLEX_TOL_ESTIMATE: f64 = 1e-6;

/// Returns true iff `min(v) ≥ −tol` and `|Σv − 1| ≤ tol`.
pub fn validate_simplex(v: &[f64], tol: f64) -> Result<bool> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid!("non-finite entry in abundance vector"));
    }
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = v.iter().sum();
    Ok(min >= -tol && (sum - 1.0).abs() <= tol)
}

/// `L × R` endmember signatures, one column per material.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndmemberMatrix {
    data: Matrix,
    wavelengths: Option<Vec<f64>>,
    names: Option<Vec<String>>,
}

impl EndmemberMatrix {
    pub fn new(data: Matrix) -> Result<Self> {
        Self::with_metadata(data, None, None)
    }

    pub fn with_metadata(
        data: Matrix,
        wavelengths: Option<Vec<f64>>,
        names: Option<Vec<String>>,
    ) -> Result<Self> {
        let (l, r) = (data.rows(), data.cols());
        if r < 2 {
            return Err(invalid!("need at least 2 endmembers, got {r}"));
        }
        if l < 2 {
            return Err(invalid!("need at least 2 bands, got {l}"));
        }
        if l < r {
            return Err(invalid!("fewer bands ({l}) than endmembers ({r})"));
        }
        if !data.is_finite() {
            return Err(invalid!("endmember matrix has non-finite entries"));
        }
        if let Some(w) = &wavelengths {
            if w.len() != l {
                return Err(invalid!("{} wavelengths for {l} bands", w.len()));
            }
            if w.iter().any(|x| !x.is_finite()) || w.windows(2).any(|p| p[1] <= p[0]) {
                return Err(invalid!(
                    "wavelengths must be finite and strictly increasing"
                ));
            }
        }
        if let Some(n) = &names {
            if n.len() != r {
                return Err(invalid!("{} names for {r} endmembers", n.len()));
            }
        }
        Ok(Self {
            data,
            wavelengths,
            names,
        })
    }

    #[inline]
    pub fn bands(&self) -> usize {
        self.data.rows()
    }

    #[inline]
    pub fn endmembers(&self) -> usize {
        self.data.cols()
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn wavelengths(&self) -> Option<&[f64]> {
        self.wavelengths.as_deref()
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Column `i`, the signature of material `i`.
    pub fn signature(&self, i: usize) -> Vec<f64> {
        self.data.col(i)
    }

    /// Keeps the rows listed in `sel`, in order. The result may have fewer
    /// bands than endmembers; only the finite/shape invariants still apply.
    pub fn restrict_bands(&self, sel: &BandSelection) -> Result<Self> {
        check_indices(&sel.indices, self.bands())?;
        Ok(Self {
            data: self.data.select_rows(&sel.indices),
            wavelengths: self
                .wavelengths
                .as_ref()
                .map(|w| sel.indices.iter().map(|&i| w[i]).collect()),
            names: self.names.clone(),
        })
    }

    /// Swaps columns according to `perm` (new column `j` is old column `perm[j]`).
    pub fn permute_endmembers(&self, perm: &[usize]) -> Result<Self> {
        let cols: Vec<Vec<f64>> = perm.iter().map(|&j| self.signature(j)).collect();
        let data = Matrix::from_columns(&cols).ok_or_else(|| invalid!("bad permutation"))?;
        let names = self
            .names
            .as_ref()
            .map(|n| perm.iter().map(|&j| n[j].clone()).collect());
        Self::with_metadata(data, self.wavelengths.clone(), names)
    }
}

/// A point on the unit simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbundanceVector(Vec<f64>);

impl AbundanceVector {
    /// Validates with [`SIMPLEX_TOL_EXACT`].
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(values, SIMPLEX_TOL_EXACT)
    }

    pub fn with_tolerance(values: Vec<f64>, tol: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid!("abundance vector needs at least 2 entries"));
        }
        if !validate_simplex(&values, tol)? {
            return Err(invalid!("abundances are not on the simplex (tol {tol:e})"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn vertex(r: usize, i: usize) -> Self {
        let mut v = alloc::vec![0.0; r];
        v[i] = 1.0;
        Self(v)
    }
}

/// Observed pixels (`L × N`) with optional ground truth (`R × N`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pixels: Matrix,
    abundances: Option<Matrix>,
    meta: Option<SceneMeta>,
}

impl Scene {
    pub fn new(
        pixels: Matrix,
        abundances: Option<Matrix>,
        meta: Option<SceneMeta>,
    ) -> Result<Self> {
        if pixels.cols() == 0 || pixels.rows() == 0 {
            return Err(invalid!("scene has no pixels"));
        }
        if !pixels.is_finite() {
            return Err(invalid!("scene pixels contain non-finite values"));
        }
        if let Some(a) = &abundances {
            if a.cols() != pixels.cols() {
                return Err(invalid!(
                    "{} abundance columns for {} pixels",
                    a.cols(),
                    pixels.cols()
                ));
            }
            for j in 0..a.cols() {
                if !validate_simplex(&a.col(j), SIMPLEX_TOL_EXACT)? {
                    return Err(invalid!(
                        "ground-truth abundance column {j} is not on the simplex"
                    ));
                }
            }
        }
        Ok(Self {
            pixels,
            abundances,
            meta,
        })
    }

    #[inline]
    pub fn bands(&self) -> usize {
        self.pixels.rows()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.cols()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.cols() == 0
    }

    pub fn pixels(&self) -> &Matrix {
        &self.pixels
    }

    pub fn pixel(&self, j: usize) -> Vec<f64> {
        self.pixels.col(j)
    }

    pub fn abundances(&self) -> Option<&Matrix> {
        self.abundances.as_ref()
    }

    pub fn meta(&self) -> Option<&SceneMeta> {
        self.meta.as_ref()
    }

    pub fn restrict_bands(&self, sel: &BandSelection) -> Result<Self> {
        check_indices(&sel.indices, self.bands())?;
        Ok(Self {
            pixels: self.pixels.select_rows(&sel.indices),
            abundances: self.abundances.clone(),
            meta: self.meta.clone(),
        })
    }
}

/// Retained band indices plus the clustering that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSelection {
    /// Strictly increasing band indices.
    pub indices: Vec<usize>,
    /// Cluster id of every band (empty for selections not made by clustering).
    pub clusters: Vec<usize>,
    /// Final clustering error; zero for non-clustering selections.
    pub cluster_error: f64,
}

impl BandSelection {
    /// A plain selection from arbitrary indices; sorted and deduplicated check.
    pub fn from_indices(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSelection("duplicate band index".into()));
        }
        if indices.is_empty() {
            return Err(Error::InvalidSelection("empty band selection".into()));
        }
        Ok(Self {
            indices,
            clusters: Vec::new(),
            cluster_error: 0.0,
        })
    }

    pub fn all(l: usize) -> Self {
        Self {
            indices: (0..l).collect(),
            clusters: (0..l).collect(),
            cluster_error: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn check_indices(indices: &[usize], l: usize) -> Result<()> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= l) {
        return Err(Error::InvalidSelection(alloc::format!(
            "band index {bad} out of range for {l} bands"
        )));
    }
    if indices.is_empty() {
        return Err(Error::InvalidSelection("empty band selection".into()));
    }
    Ok(())
}

/// Scene-level unmixing output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnmixResult {
    /// `R × N` estimated abundances.
    pub abundances: Matrix,
    /// Final `u` per pixel; `1.0` for linear methods.
    pub u_values: Vec<f64>,
    /// Outer iterations per pixel.
    pub iterations: Vec<usize>,
    /// `true` where the pixel failed or fell back to FCLS.
    pub failed: Vec<bool>,
    /// Seconds spent unmixing, excluding IO.
    pub wall_time: f64,
}
