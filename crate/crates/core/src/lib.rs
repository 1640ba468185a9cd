//! Supervised nonlinear hyperspectral unmixing with kernel k-means band
//! selection.
//!
//! * [`synth`] generates endmembers, simplex abundances and LMM / GBM / PNMM
//!   mixtures with noise at a target SNR.
//! * [`unmix`] estimates abundances per pixel with SK-Hype (a linear trend
//!   plus an RKHS residual, fitted through its dual QP) or with FCLS.
//! * [`bandselect`] clusters bands with fast global kernel k-means and keeps
//!   one medoid band per cluster, shrinking the unmixing problem.
//! * [`qp`] is the active-set solver behind both unmixers.
//!
//! The crate is `no_std` (with `alloc`); IO, threading and timing live in the
//! companion `nlunmix` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bandselect;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod qp;
pub mod synth;
pub mod unmix;

pub use bandselect::{
    global_kernel_kmeans, kernel_kmeans, medoids, point_to_centroid_sq, select_bands,
    select_bands_from_gram, select_bands_random, Clustering,
};
pub use error::{Error, Result};
pub use kernels::{gram_matrix, GaussianScale, KernelSpec};
pub use linalg::Matrix;
pub use metrics::{relative_execution_time, rmse, rmse_with, RmseConvention};
pub use model::{
    validate_simplex, AbundanceVector, BandSelection, EndmemberMatrix, Scene, UnmixResult,
};
pub use qp::{kkt_residual, solve_qp, solve_qp_warm, QpOptions, QpProblem, QpSolution, QpStatus};
pub use synth::{
    add_noise, generate_scene, generate_synthetic_endmembers, mix, sample_abundances, BandParam,
    MixingModel, NoiseSpec, SceneMeta,
};
pub use unmix::{
    fcls_unmix_pixel, skhype_u_update, skhype_unmix_pixel, Fcls, Method, PixelOutcome,
    PixelSolution, SkHype, SkHypeConfig, UUpdate, Unmixer,
};
