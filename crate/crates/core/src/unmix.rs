//! Supervised per-pixel unmixing: the kernel-based SK-Hype estimator and the
//! fully constrained least-squares (FCLS) baseline.
//!
//! SK-Hype models each band as `r_ℓ = u·αᵀm_ℓ + (1−u)·ψ(m_ℓ) + n_ℓ` with `ψ`
//! in the RKHS of the chosen kernel, and alternates between
//!
//! 1. the dual QP in `(β, γ)` for fixed `u`
//!
//!    ```text
//!    max  −½ [β;γ]ᵀ [[K_u + μI, uM], [uMᵀ, uI]] [β;γ] + rᵀβ    s.t. γ ⪰ 0
//!    K_u = u·MMᵀ + (1−u)·K
//!    ```
//!
//! 2. a closed-form update of `u`.
//!
//! `β` is unconstrained and is eliminated exactly: with `H = K_u + μI`,
//! `β = H⁻¹(r − uMγ)`, leaving an `R`-variable nonnegative QP in `γ` with
//! Hessian `uI − u²MᵀH⁻¹M`. All solves with `H` go through one eigen
//! decomposition `K = VΛVᵀ` shared by every pixel: in that basis `H` is a
//! diagonal plus the rank-`R` term `u·M̃M̃ᵀ` (`M̃ = VᵀM`), so each outer step
//! costs `O(L·R²)` after an `O(L²)` rotation of the pixel.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{gram_matrix, KernelSpec};
use crate::linalg::{axpy, cholesky, cholesky_solve_in_place, dot, Matrix, SymmetricEigen};
use crate::model::{AbundanceVector, EndmemberMatrix, SIMPLEX_TOL_ESTIMATE};
use crate::qp::{solve_qp, solve_qp_warm, QpOptions, QpProblem, QpStatus};

/// Normalisation denominators at or below this are treated as degenerate.
const DEGENERATE_NORMALISER: f64 = 1e-12;

/// Which form of the `u` update to apply.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UUpdate {
    /// `u = 1 / (1 + ((1−u₋₁)/u₋₁)·√(βᵀKβ / ‖Mᵀβ+γ‖²))`, the minimiser of the
    /// penalty `½(‖α‖²/u + ‖ψ‖²/(1−u))` at the current dual point.
    #[default]
    Reciprocal,
    /// `u = 1 + (1−u₋₁)·√(βᵀKβ / ‖Mᵀβ+γ‖²)`, clamped. Kept for comparison
    /// only; it always lands on the upper bound.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkHypeConfig {
    pub kernel: KernelSpec,
    pub mu: f64,
    pub u_init: f64,
    pub u_bounds: (f64, f64),
    pub outer_tol: f64,
    pub max_outer_iter: usize,
    pub qp: QpOptions,
    pub u_update: UUpdate,
}

impl Default for SkHypeConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::gaussian(0.3),
            mu: 1e-2,
            u_init: 0.5,
            u_bounds: (0.01, 0.99),
            outer_tol: 1e-4,
            max_outer_iter: 50,
            qp: QpOptions::default(),
            u_update: UUpdate::Reciprocal,
        }
    }
}

impl SkHypeConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let (lo, hi) = self.u_bounds;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(invalid!(
                "u bounds must satisfy 0 < u_min < u_max < 1, got ({lo}, {hi})"
            ));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid!("mu must be positive, got {}", self.mu));
        }
        if !(self.u_init > 0.0 && self.u_init < 1.0) {
            return Err(invalid!("u_init must lie in (0, 1), got {}", self.u_init));
        }
        if !(self.outer_tol > 0.0) || self.max_outer_iter == 0 {
            return Err(invalid!(
                "outer_tol must be positive and max_outer_iter nonzero"
            ));
        }
        Ok(())
    }
}

/// Full per-pixel SK-Hype output.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelSolution {
    pub alpha: AbundanceVector,
    /// `u` used in the final dual solve.
    pub u: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Model residuals `e = μβ`.
    pub residuals: Vec<f64>,
    /// Dual objective `G(u, β, γ)` along the final inner QP, `β` eliminated.
    pub dual_objective_trace: Vec<f64>,
    pub outer_iterations: usize,
}

/// Applies the `u` update rule to the energies of the linear and nonlinear
/// parts, clamping to `bounds`.
pub fn u_from_energies(
    nonlinear_energy: f64,
    linear_norm_sq: f64,
    u_prev: f64,
    rule: UUpdate,
    bounds: (f64, f64),
) -> Result<f64> {
    if !(linear_norm_sq > 0.0) || !linear_norm_sq.is_finite() {
        return Err(Error::DegeneratePixel(alloc::format!(
            "‖Mᵀβ+γ‖² = {linear_norm_sq} in u update"
        )));
    }
    let ratio = libm::sqrt(nonlinear_energy.max(0.0) / linear_norm_sq);
    let u = match rule {
        UUpdate::Reciprocal => 1.0 / (1.0 + (1.0 - u_prev) / u_prev * ratio),
        UUpdate::Literal => 1.0 + (1.0 - u_prev) * ratio,
    };
    Ok(u.clamp(bounds.0, bounds.1))
}

/// `u` update from a dual point, evaluating `βᵀKβ` and `‖Mᵀβ+γ‖²` directly.
pub fn skhype_u_update(
    beta: &[f64],
    gamma: &[f64],
    m: &EndmemberMatrix,
    gram: &Matrix,
    u_prev: f64,
    rule: UUpdate,
    bounds: (f64, f64),
) -> Result<f64> {
    let l = m.bands();
    if beta.len() != l || gram.rows() != l || gram.cols() != l || gamma.len() != m.endmembers() {
        return Err(invalid!("u update shape mismatch"));
    }
    let kb = gram.mul_vec(beta);
    let mut lin = m.matrix().tr_mul_vec(beta);
    for (v, g) in lin.iter_mut().zip(gamma) {
        *v += g;
    }
    u_from_energies(dot(beta, &kb), dot(&lin, &lin), u_prev, rule, bounds)
}

/// SK-Hype prepared for one endmember matrix: the Gram spectrum and the
/// rotated endmembers are computed once and shared by every pixel.
#[derive(Clone, Debug)]
pub struct SkHype {
    cfg: SkHypeConfig,
    /// Eigenvalues of `K`, clamped at zero.
    lambda: Vec<f64>,
    /// Eigenvectors of `K` as columns.
    basis: Matrix,
    /// `VᵀM`
    m_rot: Matrix,
    bands: usize,
    endmembers: usize,
}

impl SkHype {
    /// Builds the Gram matrix from the rows of `m` with `cfg.kernel`.
    pub fn new(m: &EndmemberMatrix, cfg: &SkHypeConfig) -> Result<Self> {
        cfg.validate()?;
        let gram = gram_matrix(&cfg.kernel, m.matrix());
        Self::with_gram(m, &gram, cfg)
    }

    pub fn with_gram(m: &EndmemberMatrix, gram: &Matrix, cfg: &SkHypeConfig) -> Result<Self> {
        cfg.validate()?;
        let l = m.bands();
        if gram.rows() != l || gram.cols() != l {
            return Err(invalid!(
                "gram is {}x{} for {l} bands",
                gram.rows(),
                gram.cols()
            ));
        }
        let eig = SymmetricEigen::new(gram);
        let lambda = eig.values.iter().map(|v| v.max(0.0)).collect();
        let m_rot = eig.vectors.tr_matmul(m.matrix());
        Ok(Self {
            cfg: cfg.clone(),
            lambda,
            basis: eig.vectors,
            m_rot,
            bands: l,
            endmembers: m.endmembers(),
        })
    }

    pub fn config(&self) -> &SkHypeConfig {
        &self.cfg
    }

    pub fn unmix(&self, r: &[f64]) -> Result<PixelSolution> {
        if r.len() != self.bands {
            return Err(invalid!(
                "pixel has {} bands, expected {}",
                r.len(),
                self.bands
            ));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("pixel has non-finite values"));
        }
        let (l, rr) = (self.bands, self.endmembers);
        let r_rot = self.basis.tr_mul_vec(r);
        let mut u = self
            .cfg
            .u_init
            .clamp(self.cfg.u_bounds.0, self.cfg.u_bounds.1);
        let mut outer = 0;
        let mut warm: Option<Vec<f64>> = None;
        loop {
            outer += 1;
            let step = self.dual_step(&r_rot, u, warm.as_deref())?;
            let lin = step.lin.clone();
            let u_next = u_from_energies(
                step.nonlinear_energy,
                dot(&lin, &lin),
                u,
                self.cfg.u_update,
                self.cfg.u_bounds,
            )?;
            let done = (u_next - u).abs() <= self.cfg.outer_tol || outer >= self.cfg.max_outer_iter;
            if done {
                let beta = self.basis.mul_vec(&step.beta_rot);
                let denom: f64 = lin.iter().sum();
                if !(denom > DEGENERATE_NORMALISER) {
                    return Err(Error::DegeneratePixel(alloc::format!(
                        "abundance normaliser 1ᵀ(Mᵀβ+γ) = {denom:e}"
                    )));
                }
                let alpha: Vec<f64> = lin.iter().map(|v| v / denom).collect();
                let alpha = AbundanceVector::with_tolerance(alpha, SIMPLEX_TOL_ESTIMATE)?;
                let residuals = beta.iter().map(|b| self.cfg.mu * b).collect();
                debug_assert_eq!(beta.len(), l);
                debug_assert_eq!(step.gamma.len(), rr);
                return Ok(PixelSolution {
                    alpha,
                    u,
                    beta,
                    gamma: step.gamma,
                    residuals,
                    dual_objective_trace: step.dual_trace,
                    outer_iterations: outer,
                });
            }
            u = u_next;
            warm = Some(step.gamma);
        }
    }

    /// Solves the dual for fixed `u` in the rotated basis.
    /// `warm` is the previous outer step's `γ`.
    fn dual_step(&self, r_rot: &[f64], u: f64, warm: Option<&[f64]>) -> Result<DualStep> {
        let (l, rr) = (self.bands, self.endmembers);
        let mu = self.cfg.mu;
        let mut beta_rot: Vec<f64> = self
            .lambda
            .iter()
            .map(|&lam| 1.0 / ((1.0 - u) * lam + mu))
            .collect();
        let d_inv = &mut beta_rot;

        // P = M̃ᵀD⁻¹M̃ (lower triangle), y = M̃ᵀD⁻¹r̃, rᵀD⁻¹r
        let mut b = Matrix::zeros(rr, rr);
        let mut y = vec![0.0; rr];
        let mut rdr = 0.0;
        for k in 0..l {
            let row = self.m_rot.row(k);
            let dk = d_inv[k];
            rdr += dk * r_rot[k] * r_rot[k];
            for i in 0..rr {
                let a = dk * row[i];
                y[i] += a * r_rot[k];
                let out = &mut b.row_mut(i)[..=i];
                for (o, &mj) in out.iter_mut().zip(row) {
                    *o += a * mj;
                }
            }
        }
        // B = I + uP is SPD.
        for i in 0..rr {
            for j in 0..i {
                let v = u * b[(i, j)];
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
            b[(i, i)] = 1.0 + u * b[(i, i)];
        }
        let chol = cholesky(&b)
            .ok_or_else(|| Error::DegeneratePixel("I + uM̃ᵀD⁻¹M̃ is not positive definite".into()))?;
        // MᵀH⁻¹M = B⁻¹P = (I − B⁻¹)/u, so the γ Hessian uI − u²·MᵀH⁻¹M is
        // simply uB⁻¹.
        let mut q = Matrix::identity(rr);
        for i in 0..rr {
            cholesky_solve_in_place(&chol, q.row_mut(i));
        }
        for i in 0..rr {
            for j in 0..i {
                let v = 0.5 * u * (q[(i, j)] + q[(j, i)]);
                q[(i, j)] = v;
                q[(j, i)] = v;
            }
            q[(i, i)] *= u;
        }
        // w = MᵀH⁻¹r = B⁻¹y
        let mut w = y.clone();
        cholesky_solve_in_place(&chol, &mut w);
        let c: Vec<f64> = w.iter().map(|v| -u * v).collect();
        let prob = QpProblem::new(q, c).with_nonneg(0..rr);
        let sol = match warm {
            Some(g) => solve_qp_warm(&prob, &self.cfg.qp, g)?,
            None => solve_qp(&prob, &self.cfg.qp)?,
        };
        if sol.status != QpStatus::Converged {
            return Err(Error::QpFailure(alloc::format!(
                "dual QP ended with {:?} (kkt residual {:e})",
                sol.status,
                sol.kkt_residual
            )));
        }
        let gamma = sol.z;

        // rᵀH⁻¹r for the dual objective offset.
        let rhr = rdr - u * dot(&y, &w);
        let dual_trace = sol.objective_trace.iter().map(|f| 0.5 * rhr - f).collect();

        // β̃ = H̃⁻¹(r̃ − uM̃γ) = D⁻¹x − uD⁻¹M̃B⁻¹M̃ᵀD⁻¹x
        let mut t = vec![0.0; rr];
        for k in 0..l {
            let row = self.m_rot.row(k);
            let dx = d_inv[k] * (r_rot[k] - u * dot(row, &gamma));
            axpy(dx, row, &mut t);
            d_inv[k] = dx;
        }
        cholesky_solve_in_place(&chol, &mut t);
        // beta_rot held D⁻¹ and now holds D⁻¹x; finish in place.
        let mut lin = gamma.clone();
        let mut nonlinear_energy = 0.0;
        for k in 0..l {
            let row = self.m_rot.row(k);
            let lam = self.lambda[k];
            let dk = 1.0 / ((1.0 - u) * lam + mu);
            let bk = beta_rot[k] - u * dk * dot(row, &t);
            beta_rot[k] = bk;
            nonlinear_energy += lam * bk * bk;
            axpy(bk, row, &mut lin);
        }
        Ok(DualStep {
            beta_rot,
            gamma,
            lin,
            nonlinear_energy,
            dual_trace,
        })
    }
}

struct DualStep {
    beta_rot: Vec<f64>,
    gamma: Vec<f64>,
    /// `Mᵀβ + γ`
    lin: Vec<f64>,
    /// `βᵀKβ`
    nonlinear_energy: f64,
    dual_trace: Vec<f64>,
}

/// One-shot SK-Hype on a single pixel. For many pixels build [`SkHype`] once.
pub fn skhype_unmix_pixel(
    r: &[f64],
    m: &EndmemberMatrix,
    gram: &Matrix,
    cfg: &SkHypeConfig,
) -> Result<PixelSolution> {
    SkHype::with_gram(m, gram, cfg)?.unmix(r)
}

/// FCLS prepared for one endmember matrix.
#[derive(Clone, Debug)]
pub struct Fcls {
    m: Matrix,
    mtm: Matrix,
    opts: QpOptions,
}

impl Fcls {
    pub fn new(m: &EndmemberMatrix, opts: &QpOptions) -> Self {
        Self {
            m: m.matrix().clone(),
            mtm: m.matrix().tr_matmul(m.matrix()),
            opts: *opts,
        }
    }

    /// `argmin ‖r − Mα‖²` over the simplex.
    pub fn unmix(&self, r: &[f64]) -> Result<AbundanceVector> {
        if r.len() != self.m.rows() {
            return Err(invalid!(
                "pixel has {} bands, expected {}",
                r.len(),
                self.m.rows()
            ));
        }
        let n = self.m.cols();
        let prob = QpProblem::new(self.mtm.clone(), self.m.tr_mul_vec(r))
            .with_nonneg(0..n)
            .with_equality(
                Matrix::from_vec(1, n, vec![1.0; n]).expect("1×R"),
                vec![1.0],
            );
        let sol = solve_qp(&prob, &self.opts)?;
        if sol.status != QpStatus::Converged {
            return Err(Error::QpFailure(alloc::format!(
                "FCLS ended with {:?} (kkt residual {:e})",
                sol.status,
                sol.kkt_residual
            )));
        }
        AbundanceVector::with_tolerance(sol.z, SIMPLEX_TOL_ESTIMATE)
    }
}

pub fn fcls_unmix_pixel(
    r: &[f64],
    m: &EndmemberMatrix,
    opts: &QpOptions,
) -> Result<AbundanceVector> {
    Fcls::new(m, opts).unmix(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Fcls {
        #[serde(default)]
        qp: QpOptions,
    },
    #[serde(rename = "skhype")]
    SkHype(SkHypeConfig),
}

/// Per-pixel outcome of a prepared unmixer.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelOutcome {
    pub alpha: Vec<f64>,
    pub u: f64,
    pub iterations: usize,
    /// SK-Hype failed on this pixel and the FCLS estimate was used instead.
    pub fell_back: bool,
}

/// A method prepared against one endmember matrix; shareable across threads.
#[derive(Clone, Debug)]
pub enum Unmixer {
    Fcls(Fcls),
    SkHype { solver: SkHype, fallback: Fcls },
}

impl Unmixer {
    pub fn new(m: &EndmemberMatrix, method: &Method) -> Result<Self> {
        Ok(match method {
            Method::Fcls { qp } => Unmixer::Fcls(Fcls::new(m, qp)),
            Method::SkHype(cfg) => Unmixer::SkHype {
                solver: SkHype::new(m, cfg)?,
                fallback: Fcls::new(m, &cfg.qp),
            },
        })
    }

    /// Unmixes one pixel; SK-Hype failures fall back to FCLS.
    pub fn unmix(&self, r: &[f64]) -> Result<PixelOutcome> {
        match self {
            Unmixer::Fcls(f) => Ok(PixelOutcome {
                alpha: f.unmix(r)?.into_inner(),
                u: 1.0,
                iterations: 1,
                fell_back: false,
            }),
            Unmixer::SkHype { solver, fallback } => match solver.unmix(r) {
                Ok(sol) => Ok(PixelOutcome {
                    alpha: sol.alpha.into_inner(),
                    u: sol.u,
                    iterations: sol.outer_iterations,
                    fell_back: false,
                }),
                Err(Error::DegeneratePixel(_)) | Err(Error::QpFailure(_)) => Ok(PixelOutcome {
                    alpha: fallback.unmix(r)?.into_inner(),
                    u: solver.cfg.u_bounds.1,
                    iterations: 0,
                    fell_back: true,
                }),
                Err(e) => Err(e),
            },
        }
    }
}
