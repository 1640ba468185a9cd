//! Scene-level unmixing on a fixed-size thread pool.

use std::time::Instant;

use log::warn;
use nlunmix_core::{EndmemberMatrix, Matrix, Method, Scene, UnmixResult, Unmixer};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Number of worker threads to use when the caller asks for "all".
pub fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs `f` on a pool of `workers` threads, or inline for a single worker.
pub fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Unmixes every pixel of `scene` against `m`.
///
/// Pixels are independent and each is solved by the same sequential code, so
/// the output does not depend on `workers`. A pixel whose solver errors is
/// marked failed and set to the simplex barycentre. `wall_time` covers the
/// unmixer set-up (kernel Gram and eigendecomposition) plus all pixels.
pub fn unmix_scene(
    scene: &Scene,
    m: &EndmemberMatrix,
    method: &Method,
    workers: usize,
) -> Result<UnmixResult> {
    if scene.bands() != m.bands() {
        return Err(Error::Config(format!(
            "scene has {} bands but the endmember matrix has {}",
            scene.bands(),
            m.bands()
        )));
    }
    // One contiguous row per pixel.
    let rows = scene.pixels().transpose();
    let r = m.endmembers();
    let n = scene.len();

    let start = Instant::now();
    let unmixer = Unmixer::new(m, method)?;
    let solve = |j: usize| unmixer.unmix(rows.row(j));
    let outcomes: Vec<_> = with_pool(workers, || {
        if workers <= 1 {
            (0..n).map(solve).collect()
        } else {
            (0..n).into_par_iter().map(solve).collect()
        }
    })?;
    let wall_time = start.elapsed().as_secs_f64();

    let mut abundances = Matrix::zeros(r, n);
    let mut u_values = Vec::with_capacity(n);
    let mut iterations = Vec::with_capacity(n);
    let mut failed = Vec::with_capacity(n);
    let mut errors = 0usize;
    for (j, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(o) => {
                abundances.set_col(j, &o.alpha);
                u_values.push(o.u);
                iterations.push(o.iterations);
                failed.push(o.fell_back);
            }
            Err(e) => {
                if errors == 0 {
                    warn!("pixel {j}: {e}");
                }
                errors += 1;
                abundances.set_col(j, &vec![1.0 / r as f64; r]);
                u_values.push(f64::NAN);
                iterations.push(0);
                failed.push(true);
            }
        }
    }
    if errors > 1 {
        warn!("{errors} pixels failed in total");
    }
    Ok(UnmixResult {
        abundances,
        u_values,
        iterations,
        failed,
        wall_time,
    })
}
