//! Dense convex quadratic programs
//!
//! ```text
//!     minimize    ½ zᵀQz − cᵀz
//!     subject to  z_i ≥ 0   for i in the nonnegative set
//!                 A z = b   (optional)
//! ```
//!
//! solved by a primal active-set method. Nonnegativity-only problems get a
//! short projected-gradient warm start to seed the working set; problems with
//! equality constraints get a feasible start from a regularised nonnegative
//! least-squares phase. Ties in pivoting are broken by lowest index so solves
//! are deterministic.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    cholesky, cholesky_in_place, cholesky_solve_packed, dot, independent_rows, lu_solve, norm_inf,
    Matrix,
};

const PROJECTED_GRADIENT_STEPS: usize = 25;

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub q: Matrix,
    pub c: Vec<f64>,
    /// Indices constrained to be nonnegative.
    pub nonneg: Vec<usize>,
    pub eq: Option<(Matrix, Vec<f64>)>,
}

impl QpProblem {
    pub fn new(q: Matrix, c: Vec<f64>) -> Self {
        Self {
            q,
            c,
            nonneg: Vec::new(),
            eq: None,
        }
    }

    pub fn with_nonneg(mut self, idx: impl IntoIterator<Item = usize>) -> Self {
        self.nonneg = idx.into_iter().collect();
        self.nonneg.sort_unstable();
        self.nonneg.dedup();
        self
    }

    pub fn with_equality(mut self, a: Matrix, b: Vec<f64>) -> Self {
        self.eq = Some((a, b));
        self
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let qz = self.q.mul_vec(z);
        z.iter()
            .zip(&qz)
            .zip(&self.c)
            .map(|((zi, qzi), ci)| 0.5 * zi * qzi - ci * zi)
            .sum()
    }

    fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.dim()];
        for &i in &self.nonneg {
            m[i] = true;
        }
        m
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::InvalidProblem("empty problem".into()));
        }
        if self.q.rows() != n || self.q.cols() != n {
            return Err(Error::InvalidProblem(alloc::format!(
                "Q is {}x{} but c has length {n}",
                self.q.rows(),
                self.q.cols()
            )));
        }
        if !self.q.is_finite() || self.c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite Q or c".into()));
        }
        if self.q.asymmetry() > 1e-10 * self.q.max_abs().max(1.0) {
            return Err(Error::InvalidProblem("Q is not symmetric".into()));
        }
        if let Some(&i) = self.nonneg.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidProblem(alloc::format!(
                "constraint index {i} >= {n}"
            )));
        }
        if let Some((a, b)) = &self.eq {
            if a.cols() != n || a.rows() != b.len() {
                return Err(Error::InvalidProblem(
                    "equality block shape mismatch".into(),
                ));
            }
            if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidProblem("non-finite equality block".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: QpStatus,
    /// Objective after every accepted iterate (feasible iterates only).
    pub objective_trace: Vec<f64>,
}

/// Solves `p`. Fails only on malformed or non-convex input; infeasibility and
/// iteration limits are reported through [`QpSolution::status`].
pub fn solve_qp(p: &QpProblem, opts: &QpOptions) -> Result<QpSolution> {
    solve_qp_impl(p, opts, None)
}

/// [`solve_qp`] started from `start`, typically the solution of a nearby
/// problem. The start is projected onto the bounds; for problems with
/// equality constraints it is used only if it satisfies them.
pub fn solve_qp_warm(p: &QpProblem, opts: &QpOptions, start: &[f64]) -> Result<QpSolution> {
    if start.len() != p.dim() {
        return Err(invalid!(
            "warm start has length {} for a {}-variable problem",
            start.len(),
            p.dim()
        ));
    }
    if start.iter().any(|v| !v.is_finite()) {
        return Err(invalid!("warm start has non-finite entries"));
    }
    solve_qp_impl(p, opts, Some(start))
}

fn solve_qp_impl(p: &QpProblem, opts: &QpOptions, start: Option<&[f64]>) -> Result<QpSolution> {
    p.validate()?;
    let q = psd_checked(&p.q)?;
    let shifted;
    let prob = if let Some(q) = q {
        shifted = QpProblem { q, ..p.clone() };
        &shifted
    } else {
        p
    };
    let mask = prob.mask();

    let projected = start.map(|s| {
        s.iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { v.max(0.0) } else { v })
            .collect::<Vec<f64>>()
    });
    let z0 = match (&prob.eq, projected) {
        (None, Some(z)) => z,
        (None, None) => projected_gradient(prob, &mask),
        (Some((a, b)), Some(z)) if norm_inf(&residual(a, b, &z)) <= 1e-14 * (1.0 + norm_inf(b)) => {
            z
        }
        (Some((a, b)), _) => {
            let z = feasible_start(a, b, &mask, opts)?;
            let res = residual(a, b, &z);
            if norm_inf(&res) > 1e-7 * (1.0 + norm_inf(b)) {
                let objective = p.objective(&z);
                let kkt_residual = kkt_residual(p, &z);
                return Ok(QpSolution {
                    z,
                    objective,
                    kkt_residual,
                    iterations: 0,
                    status: QpStatus::Infeasible,
                    objective_trace: Vec::new(),
                });
            }
            z
        }
    };
    let bounded = match prob.eq {
        None => bounds_active_set(prob, &mask, z0.clone(), opts),
        Some(_) => None,
    };
    let (z, iterations, exhausted, trace) =
        bounded.unwrap_or_else(|| active_set(prob, &mask, z0, opts));
    let objective = p.objective(&z);
    let kkt = kkt_residual(p, &z);
    let status = if !exhausted && kkt <= opts.tol {
        QpStatus::Converged
    } else {
        QpStatus::MaxIter
    };
    Ok(QpSolution {
        z,
        objective,
        kkt_residual: kkt,
        iterations,
        status,
        objective_trace: trace,
    })
}

/// Returns `Some(shifted Q)` when `Q` is only PSD within the accepted slack,
/// `None` when it is already positive definite.
fn psd_checked(q: &Matrix) -> Result<Option<Matrix>> {
    if cholesky(q).is_some() {
        return Ok(None);
    }
    let n = q.rows();
    let slack = 1e-8 * q.trace().abs().max(f64::MIN_POSITIVE * n as f64);
    let mut shifted = q.clone();
    for i in 0..n {
        shifted[(i, i)] += slack;
    }
    if cholesky(&shifted).is_none() {
        return Err(Error::InvalidProblem(
            "Q is not positive semidefinite".into(),
        ));
    }
    Ok(Some(shifted))
}

fn residual(a: &Matrix, b: &[f64], z: &[f64]) -> Vec<f64> {
    let az = a.mul_vec(z);
    b.iter().zip(az).map(|(bi, ai)| bi - ai).collect()
}

fn gradient(p: &QpProblem, z: &[f64]) -> Vec<f64> {
    let mut g = p.q.mul_vec(z);
    for (gi, ci) in g.iter_mut().zip(&p.c) {
        *gi -= ci;
    }
    g
}

fn projected_gradient(p: &QpProblem, mask: &[bool]) -> Vec<f64> {
    let n = p.dim();
    // Gershgorin bound on the largest eigenvalue.
    let lip = (0..n)
        .map(|i| p.q.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut z = vec![0.0; n];
    if lip <= 0.0 {
        return z;
    }
    let step = 1.0 / lip;
    let mut g = vec![0.0; n];
    for _ in 0..PROJECTED_GRADIENT_STEPS {
        for i in 0..n {
            g[i] = crate::linalg::dot(p.q.row(i), &z) - p.c[i];
        }
        for i in 0..n {
            z[i] -= step * g[i];
            if mask[i] && z[i] < 0.0 {
                z[i] = 0.0;
            }
        }
    }
    z
}

// Regularised least squares on the equality system subject to the bounds.
fn feasible_start(a: &Matrix, b: &[f64], mask: &[bool], opts: &QpOptions) -> Result<Vec<f64>> {
    let n = a.cols();
    let mut q = a.tr_matmul(a);
    let reg = 1e-12 * (q.trace() / n as f64).max(1.0);
    for i in 0..n {
        q[(i, i)] += reg;
    }
    let c = a.tr_mul_vec(b);
    let nonneg = (0..n).filter(|&i| mask[i]);
    let phase1 = QpProblem::new(q, c).with_nonneg(nonneg);
    let sol = solve_qp(&phase1, opts)?;
    Ok(sol.z)
}

/// Primal active set for problems with bounds only. Each iteration minimises
/// over the free variables by Cholesky and steps toward that minimiser as far
/// as the bounds allow. Returns `None` if a free block is not positive
/// definite so the general path can take over.
fn bounds_active_set(
    p: &QpProblem,
    mask: &[bool],
    mut z: Vec<f64>,
    opts: &QpOptions,
) -> Option<(Vec<f64>, usize, bool, Vec<f64>)> {
    let n = p.dim();
    let scale = 1.0 + norm_inf(&p.c) + p.q.max_abs();
    let lambda_tol = 1e-12 * scale;
    let mut active: Vec<bool> = (0..n).map(|i| mask[i] && z[i] <= 0.0).collect();
    for i in 0..n {
        if active[i] {
            z[i] = 0.0;
        }
    }
    let mut trace = vec![p.objective(&z)];
    let mut free = Vec::with_capacity(n);
    let mut block = vec![0.0; n * n];
    let mut x = vec![0.0; n];
    for iter in 1..=opts.max_iter {
        free.clear();
        free.extend((0..n).filter(|&i| !active[i]));
        let nf = free.len();
        let blk = &mut block[..nf * nf];
        for (r, &i) in free.iter().enumerate() {
            let q_row = p.q.row(i);
            for (c, &j) in free.iter().enumerate() {
                blk[r * nf + c] = q_row[j];
            }
            x[r] = p.c[i];
        }
        if !cholesky_in_place(blk, nf) {
            return None;
        }
        cholesky_solve_packed(blk, nf, &mut x[..nf]);

        let mut t = 1.0;
        let mut blocking = None;
        for (r, &i) in free.iter().enumerate() {
            if mask[i] && x[r] < 0.0 {
                let ti = z[i] / (z[i] - x[r]);
                if ti < t {
                    t = ti;
                    blocking = Some(i);
                }
            }
        }
        for (r, &i) in free.iter().enumerate() {
            z[i] += t * (x[r] - z[i]);
        }
        if let Some(i) = blocking {
            z[i] = 0.0;
            active[i] = true;
            trace.push(p.objective(&z));
            continue;
        }
        trace.push(p.objective(&z));

        // Minimiser of the working set reached: release the bound with the
        // most negative multiplier.
        let mut release = None;
        let mut worst = -lambda_tol;
        for i in 0..n {
            if active[i] {
                let s = dot(p.q.row(i), &z) - p.c[i];
                if s < worst {
                    worst = s;
                    release = Some(i);
                }
            }
        }
        match release {
            Some(i) => active[i] = false,
            None => return Some((z, iter, false, trace)),
        }
    }
    Some((z, opts.max_iter, true, trace))
}

fn active_set(
    p: &QpProblem,
    mask: &[bool],
    mut z: Vec<f64>,
    opts: &QpOptions,
) -> (Vec<f64>, usize, bool, Vec<f64>) {
    let n = p.dim();
    let scale = 1.0 + norm_inf(&p.c) + p.q.max_abs();
    let lambda_tol = 1e-12 * scale;
    let mut active: Vec<bool> = (0..n).map(|i| mask[i] && z[i] <= 0.0).collect();
    for i in 0..n {
        if active[i] {
            z[i] = 0.0;
        }
    }
    let mut trace = Vec::new();
    let mut feasible = match &p.eq {
        None => true,
        Some((a, b)) => norm_inf(&residual(a, b, &z)) <= 1e-14 * (1.0 + norm_inf(b)),
    };
    if feasible {
        trace.push(p.objective(&z));
    }

    for iter in 1..=opts.max_iter {
        let g = gradient(p, &z);
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let (step, nu) = subproblem(p, &free, &g, &z);

        let step_size = norm_inf(&step);
        if step_size <= 1e-14 * (1.0 + norm_inf(&z)) {
            // Stationary on the working set: check multiplier signs.
            let mut s = g.clone();
            if let (Some((a, _)), Some(nu)) = (&p.eq, &nu) {
                for (si, ati) in s.iter_mut().zip(a.tr_mul_vec(nu)) {
                    *si += ati;
                }
            }
            let mut release = None;
            let mut worst = -lambda_tol;
            for i in 0..n {
                if active[i] && s[i] < worst {
                    worst = s[i];
                    release = Some(i);
                }
            }
            match release {
                Some(i) => active[i] = false,
                None => return (z, iter, false, trace),
            }
            continue;
        }

        // Ratio test against inactive bounds.
        let mut t = 1.0;
        let mut blocking = None;
        for (k, &i) in free.iter().enumerate() {
            if mask[i] && step[k] < 0.0 {
                let ti = -z[i] / step[k];
                if ti < t {
                    t = ti;
                    blocking = Some(i);
                }
            }
        }
        for (k, &i) in free.iter().enumerate() {
            z[i] += t * step[k];
        }
        if let Some(i) = blocking {
            z[i] = 0.0;
            active[i] = true;
        }
        if !feasible {
            if let Some((a, b)) = &p.eq {
                feasible = norm_inf(&residual(a, b, &z)) <= 1e-12 * (1.0 + norm_inf(b));
            }
        }
        if feasible {
            trace.push(p.objective(&z));
        }
    }
    (z, opts.max_iter, true, trace)
}

/// Newton step on the free variables, keeping (and restoring) the equality
/// constraints. Returns the step restricted to `free` and the multipliers of
/// the equality rows (zero for rows dropped as dependent).
fn subproblem(p: &QpProblem, free: &[usize], g: &[f64], z: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
    let nf = free.len();
    let (rows, a_free, res) = match &p.eq {
        Some((a, b)) if nf > 0 => {
            let mut af = Matrix::zeros(a.rows(), nf);
            for i in 0..a.rows() {
                for (k, &j) in free.iter().enumerate() {
                    af[(i, k)] = a[(i, j)];
                }
            }
            let rows = independent_rows(&af, 1e-12);
            let res = residual(a, b, z);
            (rows, Some(af), res)
        }
        _ => (Vec::new(), None, Vec::new()),
    };
    let m = rows.len();
    if nf == 0 {
        let nu = p.eq.as_ref().map(|(a, _)| vec![0.0; a.rows()]);
        return (Vec::new(), nu);
    }
    let dim = nf + m;
    let mut kkt = Matrix::zeros(dim, dim);
    let mut rhs = vec![0.0; dim];
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            kkt[(r, c)] = p.q[(i, j)];
        }
        rhs[r] = -g[i];
    }
    if let Some(af) = &a_free {
        for (k, &row) in rows.iter().enumerate() {
            for c in 0..nf {
                kkt[(nf + k, c)] = af[(row, c)];
                kkt[(c, nf + k)] = af[(row, c)];
            }
            rhs[nf + k] = res[row];
        }
    }
    let sol = lu_solve(&kkt, &rhs, 1e-15).unwrap_or_else(|| {
        // Singular reduced Hessian: fall back to a steepest-descent direction.
        let mut d = vec![0.0; dim];
        for (r, &i) in free.iter().enumerate() {
            d[r] = -g[i];
        }
        d
    });
    let nu = p.eq.as_ref().map(|(a, _)| {
        let mut nu = vec![0.0; a.rows()];
        for (k, &row) in rows.iter().enumerate() {
            nu[row] = sol[nf + k];
        }
        nu
    });
    (sol[..nf].to_vec(), nu)
}

/// Worst violation among stationarity (multipliers recovered by least
/// squares), complementarity and primal feasibility.
pub fn kkt_residual(p: &QpProblem, z: &[f64]) -> f64 {
    let n = p.dim();
    let mask = p.mask();
    let g = gradient(p, z);
    let mut s = g.clone();
    let mut feas: f64 = 0.0;
    for i in 0..n {
        if mask[i] {
            feas = feas.max(-z[i]);
        }
    }
    if let Some((a, b)) = &p.eq {
        feas = feas.max(norm_inf(&residual(a, b, z)));
        // Multipliers from the components that must be exactly stationary.
        let support: Vec<usize> = (0..n).filter(|&i| !mask[i] || z[i] > 0.0).collect();
        if !support.is_empty() {
            let mut a_s = Matrix::zeros(a.rows(), support.len());
            for i in 0..a.rows() {
                for (k, &j) in support.iter().enumerate() {
                    a_s[(i, k)] = a[(i, j)];
                }
            }
            let rows = independent_rows(&a_s, 1e-12);
            if !rows.is_empty() {
                let m = rows.len();
                let mut normal = Matrix::zeros(m, m);
                let mut rhs = vec![0.0; m];
                for (r, &ri) in rows.iter().enumerate() {
                    for (c, &ci) in rows.iter().enumerate() {
                        normal[(r, c)] = crate::linalg::dot(a_s.row(ri), a_s.row(ci));
                    }
                    rhs[r] = -support
                        .iter()
                        .enumerate()
                        .map(|(k, &j)| a_s[(ri, k)] * g[j])
                        .sum::<f64>();
                }
                if let Some(nu_red) = lu_solve(&normal, &rhs, 1e-14) {
                    let mut nu = vec![0.0; a.rows()];
                    for (r, &ri) in rows.iter().enumerate() {
                        nu[ri] = nu_red[r];
                    }
                    for (si, ati) in s.iter_mut().zip(a.tr_mul_vec(&nu)) {
                        *si += ati;
                    }
                }
            }
        }
    }
    let mut stat: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for i in 0..n {
        if mask[i] {
            let lambda = s[i].max(0.0);
            stat = stat.max((s[i] - lambda).abs());
            comp = comp.max((lambda * z[i]).abs());
        } else {
            stat = stat.max(s[i].abs());
        }
    }
    stat.max(comp).max(feas)
}

/// Checks shapes of a candidate point; used by callers that evaluate
/// residuals of externally produced solutions.
pub fn checked_kkt_residual(p: &QpProblem, z: &[f64]) -> Result<f64> {
    p.validate()?;
    if z.len() != p.dim() {
        return Err(invalid!(
            "point has length {} for a {}-variable problem",
            z.len(),
            p.dim()
        ));
    }
    Ok(kkt_residual(p, z))
}
