//! Reference solvers shared by the oracle tests and the acceptance suite.
#![allow(dead_code)]

use nlunmix_core::linalg::lu_solve;
use nlunmix_core::{point_to_centroid_sq, Matrix, QpProblem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const GRID_STEPS: usize = 1000;

/// Minimises over every choice of bounds held at zero and keeps the best
/// feasible stationary point. Exact for strictly convex problems.
pub fn brute_force(p: &QpProblem) -> Vec<f64> {
    let n = p.dim();
    let bounded = &p.nonneg;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for subset in 0u32..(1 << bounded.len()) {
        let fixed: Vec<usize> = (0..bounded.len())
            .filter(|b| subset & (1 << b) != 0)
            .map(|b| bounded[b])
            .collect();
        let free: Vec<usize> = (0..n).filter(|i| !fixed.contains(i)).collect();
        let m = p.eq.as_ref().map_or(0, |(a, _)| a.rows());
        let dim = free.len() + m;
        let mut kkt = Matrix::zeros(dim, dim);
        let mut rhs = vec![0.0; dim];
        for (r, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                kkt[(r, c)] = p.q[(i, j)];
            }
            rhs[r] = p.c[i];
        }
        if let Some((a, b)) = &p.eq {
            for k in 0..m {
                for (c, &j) in free.iter().enumerate() {
                    kkt[(free.len() + k, c)] = a[(k, j)];
                    kkt[(c, free.len() + k)] = a[(k, j)];
                }
                rhs[free.len() + k] = b[k];
            }
        }
        let sol = if dim == 0 {
            Vec::new()
        } else {
            match lu_solve(&kkt, &rhs, 1e-13) {
                Some(sol) => sol,
                None => continue,
            }
        };
        let mut z = vec![0.0; n];
        for (r, &i) in free.iter().enumerate() {
            z[i] = sol[r];
        }
        if bounded.iter().any(|&i| z[i] < -1e-12) {
            continue;
        }
        if let Some((a, b)) = &p.eq {
            let az = a.mul_vec(&z);
            if az.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-9) {
                continue;
            }
        }
        let f = p.objective(&z);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, z));
        }
    }
    best.unwrap_or_else(|| panic!("no feasible optimum for {p:?}"))
        .1
}

pub fn random_problem(g: &mut ChaCha8Rng) -> QpProblem {
    let n = g.random_range(1..=6usize);
    let k = n + 2;
    let b = Matrix::from_vec(
        k,
        n,
        (0..k * n).map(|_| g.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let mut q = b.tr_matmul(&b);
    for i in 0..n {
        q[(i, i)] += 0.05;
    }
    let c: Vec<f64> = (0..n).map(|_| g.random_range(-2.0..2.0)).collect();
    let nonneg: Vec<usize> = (0..n).filter(|_| g.random_bool(0.75)).collect();
    let mut p = QpProblem::new(q, c).with_nonneg(nonneg);
    if n >= 2 && g.random_bool(0.5) {
        // Feasible by construction: b = A z₀ with z₀ ≥ 0.
        let a: Vec<f64> = (0..n).map(|_| g.random_range(0.1..1.0)).collect();
        let z0: Vec<f64> = (0..n).map(|_| g.random_range(0.0..1.0)).collect();
        let rhs = a.iter().zip(&z0).map(|(x, y)| x * y).sum();
        p = p.with_equality(Matrix::from_vec(1, n, a).unwrap(), vec![rhs]);
    }
    p
}

/// Grid minimiser of `‖r − Mα‖²` over `α` on the 3-simplex at spacing 1e-3.
pub fn grid_search(m: &Matrix, r: &[f64]) -> [f64; 3] {
    let mtm = m.tr_matmul(m);
    let mtr = m.tr_mul_vec(r);
    let f = |a: [f64; 3]| {
        let mut v = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                v += a[i] * mtm[(i, j)] * a[j];
            }
            v -= 2.0 * a[i] * mtr[i];
        }
        v
    };
    let mut best = ([0.0; 3], f64::INFINITY);
    for i in 0..=GRID_STEPS {
        for j in 0..=(GRID_STEPS - i) {
            let a = [
                i as f64 / GRID_STEPS as f64,
                j as f64 / GRID_STEPS as f64,
                (GRID_STEPS - i - j) as f64 / GRID_STEPS as f64,
            ];
            let v = f(a);
            if v < best.1 {
                best = (a, v);
            }
        }
    }
    best.0
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn centroids(x: &Matrix, assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; x.cols()]; k];
    let mut n = vec![0usize; k];
    for (i, &a) in assignment.iter().enumerate() {
        n[a] += 1;
        for (cj, xj) in c[a].iter_mut().zip(x.row(i)) {
            *cj += xj;
        }
    }
    for (ci, &ni) in c.iter_mut().zip(&n) {
        if ni > 0 {
            ci.iter_mut().for_each(|v| *v /= ni as f64);
        }
    }
    c
}

/// Lloyd's algorithm on explicit points with the same move and repair rules.
pub fn explicit_kmeans(x: &Matrix, k: usize, init: &[usize], max_iter: usize) -> Vec<usize> {
    let n = x.rows();
    let mut a = init.to_vec();
    let repair = |a: &mut Vec<usize>| loop {
        let mut counts = vec![0; k];
        a.iter().for_each(|&c| counts[c] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let c = centroids(x, a, k);
        let far = (0..n)
            .filter(|&i| counts[a[i]] >= 2)
            .fold((usize::MAX, f64::NEG_INFINITY), |best, i| {
                let d = sq_dist(x.row(i), &c[a[i]]);
                if d > best.1 {
                    (i, d)
                } else {
                    best
                }
            })
            .0;
        a[far] = empty;
    };
    repair(&mut a);
    for _ in 0..max_iter {
        let c = centroids(x, &a, k);
        let mut next = a.clone();
        for i in 0..n {
            let mut best = a[i];
            let mut best_d = sq_dist(x.row(i), &c[a[i]]);
            for (j, cj) in c.iter().enumerate() {
                let d = sq_dist(x.row(i), cj);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            next[i] = best;
        }
        if next == a {
            break;
        }
        a = next;
        repair(&mut a);
    }
    a
}

pub fn random_points(g: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    Matrix::from_vec(n, d, (0..n * d).map(|_| g.random_range(0.0..1.0)).collect()).unwrap()
}

/// Every assignment of `n` points to exactly `k` non-empty, canonically
/// labelled clusters.
pub fn partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, n: usize, k: usize, used: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            if used == k {
                out.push(prefix.clone());
            }
            return;
        }
        let remaining = n - prefix.len();
        if k - used > remaining {
            return;
        }
        for c in 0..=used.min(k - 1) {
            prefix.push(c);
            rec(prefix, n, k, used.max(c + 1), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n, k, 0, &mut out);
    out
}

pub fn partition_error(gram: &Matrix, assignment: &[usize], k: usize) -> f64 {
    (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..assignment.len())
                .filter(|&i| assignment[i] == c)
                .collect();
            members
                .iter()
                .map(|&l| point_to_centroid_sq(gram, l, &members).unwrap())
                .sum::<f64>()
        })
        .sum()
}

/// Eight points around three random centres (3 + 3 + 2).
pub fn blobs(g: &mut ChaCha8Rng) -> Matrix {
    let centres: Vec<[f64; 2]> = (0..3)
        .map(|_| [g.random_range(0.0..1.0), g.random_range(0.0..1.0)])
        .collect();
    let mut data = Vec::new();
    for i in 0..8 {
        let c = centres[i % 3];
        data.push(c[0] + g.random_range(-0.08..0.08));
        data.push(c[1] + g.random_range(-0.08..0.08));
    }
    Matrix::from_vec(8, 2, data).unwrap()
}
