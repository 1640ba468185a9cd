//! Experiment orchestration: scene generation, per-method cells, RMSE and
//! RET tables, random-selection histograms and the replication presets.
//!
//! Seeds are derived from one scene seed `s` (the scene's own `seed`, else
//! the experiment `seed`): endmembers use `s`, abundances `s + 1`, noise
//! `s + 2`, and random band selection trial `t` uses `s + 10_000 + t`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use nlunmix_core::synth::stepped_schedule;
use nlunmix_core::{
    generate_scene, generate_synthetic_endmembers, relative_execution_time, rmse_with,
    select_bands, select_bands_random, BandParam, BandSelection, EndmemberMatrix, KernelSpec,
    Method, MixingModel, NoiseSpec, QpOptions, RmseConvention, Scene, SkHypeConfig, UUpdate,
    UnmixResult,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{load_endmembers_csv, write_atomic, write_json, write_matrix_csv};
use crate::runner::{available_workers, unmix_scene, with_pool};

const RANDOM_TRIAL_OFFSET: u64 = 10_000;
const HISTOGRAM_BINS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum EndmemberSource {
    /// Generated spectra, seeded from the scene seed.
    Synthetic {
        bands: usize,
        count: usize,
    },
    Csv {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub name: String,
    pub endmembers: EndmemberSource,
    pub pixels: usize,
    pub model: MixingModel,
    /// `None` generates a noiseless scene.
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SceneSpec {
    fn seed(&self, base: u64) -> u64 {
        self.seed.unwrap_or(base)
    }

    /// Builds the endmember matrix and the scene.
    pub fn build(&self, base_seed: u64) -> Result<(EndmemberMatrix, Scene)> {
        let s = self.seed(base_seed);
        let m = match &self.endmembers {
            EndmemberSource::Synthetic { bands, count } => {
                generate_synthetic_endmembers(*bands, *count, s)?
            }
            EndmemberSource::Csv { path } => load_endmembers_csv(path)?,
        };
        let noise = match self.snr_db {
            Some(db) => NoiseSpec::new(db, s.wrapping_add(2)),
            None => NoiseSpec::noiseless(s.wrapping_add(2)),
        };
        let scene = generate_scene(&m, self.pixels, &self.model, &noise, s.wrapping_add(1))?;
        Ok((m, scene))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    Fcls,
    SkhypeFull,
    /// Kernel k-means band selection, then SK-Hype on the kept bands.
    SkhypeReduced {
        n_b: usize,
    },
    /// SK-Hype on uniformly random band subsets; reported RMSE is the median.
    SkhypeRandom {
        n_b: usize,
        trials: usize,
    },
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Fcls => "fcls".into(),
            MethodSpec::SkhypeFull => "skhype_full".into(),
            MethodSpec::SkhypeReduced { n_b } => format!("skhype_reduced_{n_b}"),
            MethodSpec::SkhypeRandom { n_b, .. } => format!("skhype_random_{n_b}"),
        }
    }
}

/// SK-Hype solver settings; the kernel is shared with band selection and set
/// at the experiment level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub mu: f64,
    pub u_init: f64,
    pub u_bounds: (f64, f64),
    pub outer_tol: f64,
    pub max_outer_iter: usize,
    pub u_update: UUpdate,
    pub qp: QpOptions,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SkHypeConfig::default();
        Self {
            mu: d.mu,
            u_init: d.u_init,
            u_bounds: d.u_bounds,
            outer_tol: d.outer_tol,
            max_outer_iter: d.max_outer_iter,
            u_update: d.u_update,
            qp: d.qp,
        }
    }
}

impl SolverSettings {
    pub fn with_kernel(&self, kernel: KernelSpec) -> SkHypeConfig {
        SkHypeConfig {
            kernel,
            mu: self.mu,
            u_init: self.u_init,
            u_bounds: self.u_bounds,
            outer_tol: self.outer_tol,
            max_outer_iter: self.max_outer_iter,
            qp: self.qp,
            u_update: self.u_update,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenes: Vec<SceneSpec>,
    pub methods: Vec<MethodSpec>,
    pub kernel: KernelSpec,
    pub skhype: SolverSettings,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads for untimed work; `0` means all available cores.
    pub workers: usize,
    pub rmse: RmseConvention,
    /// Report RET columns; needs an FCLS method as the baseline.
    pub report_ret: bool,
    /// Pin unmixing to one worker so timings are comparable.
    pub timed: bool,
    /// Write each cell's abundance matrix.
    pub write_abundances: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenes: Vec::new(),
            methods: Vec::new(),
            kernel: KernelSpec::gaussian(0.3),
            skhype: SolverSettings::default(),
            seed: 42,
            output_dir: PathBuf::from("results"),
            workers: 0,
            rmse: RmseConvention::RootMean,
            report_ret: true,
            timed: true,
            write_abundances: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenes.is_empty() {
            return Err(Error::Config("experiment has no scenes".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("experiment has no methods".into()));
        }
        if self.report_ret && !self.methods.contains(&MethodSpec::Fcls) {
            return Err(Error::Config(
                "RET is reported relative to FCLS, so methods must include fcls".into(),
            ));
        }
        let mut names: Vec<&str> = self.scenes.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("scene names must be unique".into()));
        }
        for s in &self.scenes {
            if s.name.is_empty() || s.name.contains(['/', '\\']) || s.name.starts_with('.') {
                return Err(Error::Config(format!("bad scene name {:?}", s.name)));
            }
            if s.pixels == 0 {
                return Err(Error::Config(format!("scene {} has no pixels", s.name)));
            }
        }
        for m in &self.methods {
            match *m {
                MethodSpec::SkhypeReduced { n_b: 0 } | MethodSpec::SkhypeRandom { n_b: 0, .. } => {
                    return Err(Error::Config("n_b must be positive".into()));
                }
                MethodSpec::SkhypeRandom { trials: 0, .. } => {
                    return Err(Error::Config(
                        "random selection needs at least one trial".into(),
                    ));
                }
                _ => {}
            }
        }
        self.kernel.validate()?;
        self.skhype.with_kernel(self.kernel).validate()?;
        Ok(())
    }

    pub fn skhype_config(&self) -> SkHypeConfig {
        self.skhype.with_kernel(self.kernel)
    }

    pub fn workers(&self) -> usize {
        if self.workers == 0 {
            available_workers()
        } else {
            self.workers
        }
    }

    fn unmix_workers(&self) -> usize {
        if self.timed {
            1
        } else {
            self.workers()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scene: String,
    pub model: String,
    pub endmembers: usize,
    pub method: String,
    /// Bands used by the unmixer.
    pub n_b: usize,
    pub rmse: Option<f64>,
    pub ret_unmix: Option<f64>,
    /// RET including band selection.
    pub ret_total: Option<f64>,
    pub t_select_s: Option<f64>,
    pub t_unmix_s: Option<f64>,
    pub failed_pixels: usize,
    pub status: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn find(&self, scene: &str, method: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.scene == scene && r.method == method)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)
                .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
        write_atomic(path, &bytes)
    }
}

/// Per-cell record written next to the cell's abundances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellManifest {
    pub scene: String,
    pub method: MethodSpec,
    pub label: String,
    /// SHA-256 of the resolved scene, method and solver settings.
    pub config_hash: String,
    pub rmse: Option<f64>,
    pub rmse_convention: RmseConvention,
    pub mu: Option<f64>,
    pub bands: Option<Vec<usize>>,
    pub t_select_s: Option<f64>,
    pub t_unmix_s: Option<f64>,
    pub failed_pixels: Vec<usize>,
    pub status: String,
}

/// Random-selection RMSEs against the kernel k-means selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionHistogram {
    pub n_b: usize,
    pub seeds: Vec<u64>,
    pub trial_rmse: Vec<f64>,
    pub kkmbs_rmse: f64,
    pub kkmbs_bands: Vec<usize>,
    pub median: f64,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Equal-width bins over `[min, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> (Vec<f64>, Vec<usize>) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = if hi > lo {
        bins.clamp(1, values.len().max(1))
    } else {
        1
    };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let k = if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[k] += 1;
    }
    (edges, counts)
}

fn truth(scene: &Scene) -> Result<&nlunmix_core::Matrix> {
    scene
        .abundances()
        .ok_or_else(|| Error::Config("scene has no ground-truth abundances".into()))
}

fn unmix_on(
    scene: &Scene,
    m: &EndmemberMatrix,
    sel: &BandSelection,
    method: &Method,
    workers: usize,
) -> Result<UnmixResult> {
    unmix_scene(
        &scene.restrict_bands(sel)?,
        &m.restrict_bands(sel)?,
        method,
        workers,
    )
}

/// Unmixes `scene` on `trials` random `n_b`-band subsets and on the kernel
/// k-means selection, returning the RMSE of each.
#[allow(clippy::too_many_arguments)]
pub fn random_selection_study(
    scene: &Scene,
    m: &EndmemberMatrix,
    n_b: usize,
    trials: usize,
    cfg: &SkHypeConfig,
    conv: RmseConvention,
    seed: u64,
    workers: usize,
) -> Result<SelectionHistogram> {
    if trials == 0 {
        return Err(Error::Config(
            "random selection needs at least one trial".into(),
        ));
    }
    let a_true = truth(scene)?;
    let method = Method::SkHype(cfg.clone());
    let kkmbs = select_bands(m, n_b, &cfg.kernel)?;
    let kkmbs_rmse = rmse_with(
        a_true,
        &unmix_on(scene, m, &kkmbs, &method, workers)?.abundances,
        conv,
    )?;

    let seeds: Vec<u64> = (0..trials as u64)
        .map(|t| seed.wrapping_add(RANDOM_TRIAL_OFFSET + t))
        .collect();
    let trial = |&s: &u64| -> Result<f64> {
        let sel = select_bands_random(m.bands(), n_b, s)?;
        Ok(rmse_with(
            a_true,
            &unmix_on(scene, m, &sel, &method, 1)?.abundances,
            conv,
        )?)
    };
    let trial_rmse: Vec<f64> = with_pool(workers, || {
        if workers <= 1 {
            seeds.iter().map(trial).collect::<Result<Vec<_>>>()
        } else {
            seeds.par_iter().map(trial).collect::<Result<Vec<_>>>()
        }
    })??;

    let (bin_edges, counts) = histogram(&trial_rmse, HISTOGRAM_BINS);
    Ok(SelectionHistogram {
        n_b,
        median: median(&trial_rmse),
        seeds,
        trial_rmse,
        kkmbs_rmse,
        kkmbs_bands: kkmbs.indices,
        bin_edges,
        counts,
    })
}

/// Writes `histogram.json` and `trials.csv` into `dir`.
pub fn write_histogram(dir: &Path, h: &SelectionHistogram) -> Result<()> {
    write_json(&dir.join("histogram.json"), h)?;
    let path = dir.join("trials.csv");
    let mut text = String::from("kind,seed,rmse\n");
    for (s, r) in h.seeds.iter().zip(&h.trial_rmse) {
        text.push_str(&format!("random,{s},{r}\n"));
    }
    text.push_str(&format!("kkmbs,,{}\n", h.kkmbs_rmse));
    write_atomic(&path, text.as_bytes())
}

pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config values serialise");
    format!("{:x}", Sha256::digest(&bytes))
}

struct Cell {
    n_b: usize,
    rmse: Option<f64>,
    t_select: Option<f64>,
    t_unmix: Option<f64>,
    bands: Option<Vec<usize>>,
    failed: Vec<usize>,
    abundances: Option<nlunmix_core::Matrix>,
    histogram: Option<SelectionHistogram>,
}

fn failed_indices(res: &UnmixResult) -> Vec<usize> {
    res.failed
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(j, _)| j)
        .collect()
}

fn run_cell(
    cfg: &ExperimentConfig,
    spec: &SceneSpec,
    scene: &Scene,
    m: &EndmemberMatrix,
    method: &MethodSpec,
) -> Result<Cell> {
    let a_true = truth(scene)?;
    let workers = cfg.unmix_workers();
    let sk = Method::SkHype(cfg.skhype_config());
    let finish = |res: UnmixResult, n_b, t_select, bands| -> Result<Cell> {
        Ok(Cell {
            n_b,
            rmse: Some(rmse_with(a_true, &res.abundances, cfg.rmse)?),
            t_select,
            t_unmix: Some(res.wall_time),
            bands,
            failed: failed_indices(&res),
            abundances: Some(res.abundances),
            histogram: None,
        })
    };
    match *method {
        MethodSpec::Fcls => {
            let fcls = Method::Fcls { qp: cfg.skhype.qp };
            finish(
                unmix_scene(scene, m, &fcls, workers)?,
                m.bands(),
                None,
                None,
            )
        }
        MethodSpec::SkhypeFull => {
            finish(unmix_scene(scene, m, &sk, workers)?, m.bands(), None, None)
        }
        MethodSpec::SkhypeReduced { n_b } => {
            let start = Instant::now();
            let sel = select_bands(m, n_b, &cfg.kernel)?;
            let t_select = start.elapsed().as_secs_f64();
            let res = unmix_on(scene, m, &sel, &sk, workers)?;
            finish(res, n_b, Some(t_select), Some(sel.indices))
        }
        MethodSpec::SkhypeRandom { n_b, trials } => {
            let seed = spec.seed(cfg.seed);
            let mut t_sel = 0.0;
            let mut t_unmix = 0.0;
            // Timing comes from a sequential pass over a few trials; the full
            // study below may run in parallel.
            let timing_trials = trials.min(3);
            for t in 0..timing_trials as u64 {
                let start = Instant::now();
                let sel = select_bands_random(
                    m.bands(),
                    n_b,
                    seed.wrapping_add(RANDOM_TRIAL_OFFSET + t),
                )?;
                t_sel += start.elapsed().as_secs_f64();
                t_unmix += unmix_on(scene, m, &sel, &sk, 1)?.wall_time;
            }
            let h = random_selection_study(
                scene,
                m,
                n_b,
                trials,
                &cfg.skhype_config(),
                cfg.rmse,
                seed,
                cfg.workers(),
            )?;
            Ok(Cell {
                n_b,
                rmse: Some(h.median),
                t_select: Some(t_sel / timing_trials as f64),
                t_unmix: Some(t_unmix / timing_trials as f64),
                bands: None,
                failed: Vec::new(),
                abundances: None,
                histogram: Some(h),
            })
        }
    }
}

/// Runs every scene × method cell, writing `results.csv`, the resolved
/// `config.json`, and per-cell `manifest.json` / `abundances.csv` under
/// `cfg.output_dir`. A failing cell is recorded in its row and the run
/// continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    write_json(&out.join("config.json"), cfg)?;
    let mut table = ResultTable::default();
    let skcfg = cfg.skhype_config();

    // FCLS runs first in each scene: it is the RET denominator.
    let mut order: Vec<&MethodSpec> = cfg
        .methods
        .iter()
        .filter(|m| **m == MethodSpec::Fcls)
        .collect();
    order.extend(cfg.methods.iter().filter(|m| **m != MethodSpec::Fcls));

    for spec in &cfg.scenes {
        info!("scene {}: generating", spec.name);
        let built = spec.build(cfg.seed);
        let mut t_fcls = None;
        for method in &order {
            let label = method.label();
            let cell_dir = out.join(&spec.name).join(&label);
            let mut manifest = CellManifest {
                scene: spec.name.clone(),
                method: **method,
                label: label.clone(),
                config_hash: config_hash(&(
                    spec,
                    method,
                    &cfg.kernel,
                    &cfg.skhype,
                    cfg.seed,
                    cfg.rmse,
                )),
                rmse: None,
                rmse_convention: cfg.rmse,
                mu: None,
                bands: None,
                t_select_s: None,
                t_unmix_s: None,
                failed_pixels: Vec::new(),
                status: "ok".into(),
            };
            let mut row = ResultRow {
                scene: spec.name.clone(),
                model: spec.model.name().into(),
                endmembers: built.as_ref().map_or(0, |(m, _)| m.endmembers()),
                method: label.clone(),
                n_b: 0,
                rmse: None,
                ret_unmix: None,
                ret_total: None,
                t_select_s: None,
                t_unmix_s: None,
                failed_pixels: 0,
                status: "ok".into(),
            };
            let cell = match &built {
                Ok((m, scene)) => run_cell(cfg, spec, scene, m, method),
                Err(e) => Err(Error::Config(format!("scene generation failed: {e}"))),
            };
            match cell {
                Ok(cell) => {
                    if **method == MethodSpec::Fcls {
                        t_fcls = cell.t_unmix;
                    }
                    let ret = |t: Option<f64>| match (cfg.report_ret, t, t_fcls) {
                        (true, Some(t), Some(base)) => relative_execution_time(t, base).ok(),
                        _ => None,
                    };
                    let total = cell.t_unmix.map(|t| t + cell.t_select.unwrap_or(0.0));
                    if let (Some(a), true) = (&cell.abundances, cfg.write_abundances) {
                        write_matrix_csv(&cell_dir.join("abundances.csv"), a)?;
                    }
                    if let Some(h) = &cell.histogram {
                        write_histogram(&cell_dir, h)?;
                    }
                    info!(
                        "scene {} {label}: rmse {:.4}",
                        spec.name,
                        cell.rmse.unwrap_or(f64::NAN)
                    );
                    manifest.rmse = cell.rmse;
                    manifest.mu = (**method != MethodSpec::Fcls).then_some(skcfg.mu);
                    manifest.bands = cell.bands;
                    manifest.t_select_s = cell.t_select;
                    manifest.t_unmix_s = cell.t_unmix;
                    row.n_b = cell.n_b;
                    row.rmse = cell.rmse;
                    row.ret_unmix = ret(cell.t_unmix);
                    row.ret_total = ret(total);
                    row.t_select_s = cell.t_select;
                    row.t_unmix_s = cell.t_unmix;
                    row.failed_pixels = cell.failed.len();
                    manifest.failed_pixels = cell.failed;
                }
                Err(e) => {
                    warn!("scene {} {label}: {e}", spec.name);
                    row.status = format!("error[{}]: {e}", e.code());
                    manifest.status = row.status.clone();
                }
            }
            write_json(&cell_dir.join("manifest.json"), &manifest)?;
            table.rows.push(row);
        }
    }
    // Rows follow the configured method order within each scene.
    let rank = |label: &str| cfg.methods.iter().position(|m| m.label() == label);
    let scene_rank = |name: &str| cfg.scenes.iter().position(|s| s.name == name);
    table
        .rows
        .sort_by_key(|r| (scene_rank(&r.scene), rank(&r.method)));
    table.write_csv(&out.join("results.csv"))?;
    Ok(table)
}

/// Desk-scale defaults for the replication presets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PresetScale {
    pub pixels: usize,
    pub bands: usize,
    pub snr_db: f64,
}

impl Default for PresetScale {
    fn default() -> Self {
        Self {
            pixels: 2000,
            bands: 420,
            snr_db: 21.0,
        }
    }
}

fn synthetic_scene(
    name: String,
    scale: PresetScale,
    count: usize,
    model: MixingModel,
) -> SceneSpec {
    SceneSpec {
        name,
        endmembers: EndmemberSource::Synthetic {
            bands: scale.bands,
            count,
        },
        pixels: scale.pixels,
        model,
        snr_db: Some(scale.snr_db),
        seed: None,
    }
}

fn table_methods() -> Vec<MethodSpec> {
    let mut methods = vec![MethodSpec::Fcls, MethodSpec::SkhypeFull];
    methods.extend([10, 100, 300].map(|n_b| MethodSpec::SkhypeReduced { n_b }));
    methods
}

/// PNMM (ξ = 0.7) and GBM (δ = 1) with 5 and 8 endmembers, five methods each.
pub fn table1_config(seed: u64, scale: PresetScale) -> ExperimentConfig {
    let mut scenes = Vec::new();
    for (tag, model) in [
        ("pnmm", MixingModel::pnmm(0.7)),
        ("gbm", MixingModel::gbm(1.0)),
    ] {
        for r in [5, 8] {
            scenes.push(synthetic_scene(
                format!("{tag}_r{r}"),
                scale,
                r,
                model.clone(),
            ));
        }
    }
    ExperimentConfig {
        scenes,
        methods: table_methods(),
        seed,
        ..ExperimentConfig::default()
    }
}

/// Width of each constant-parameter plateau in the band-varying schedules.
pub const SCHEDULE_PLATEAU: usize = 42;

/// Table 1 layout with per-band parameters stepping every 42 bands: δ from
/// 0.5 by 0.05 and ξ from 0.5 by 0.04.
pub fn table2_config(seed: u64, scale: PresetScale) -> ExperimentConfig {
    let delta = stepped_schedule(scale.bands, 0.5, 0.05, SCHEDULE_PLATEAU);
    let xi = stepped_schedule(scale.bands, 0.5, 0.04, SCHEDULE_PLATEAU);
    let mut scenes = Vec::new();
    for (tag, model) in [
        (
            "pnmm",
            MixingModel::Pnmm {
                xi: BandParam::PerBand(xi),
            },
        ),
        (
            "gbm",
            MixingModel::Gbm {
                delta: BandParam::PerBand(delta),
            },
        ),
    ] {
        for r in [5, 8] {
            scenes.push(synthetic_scene(
                format!("{tag}_r{r}"),
                scale,
                r,
                model.clone(),
            ));
        }
    }
    ExperimentConfig {
        scenes,
        methods: table_methods(),
        seed,
        ..ExperimentConfig::default()
    }
}

/// One PNMM scene; kernel k-means and random selection at 10 and 100 bands.
pub fn fig2_config(seed: u64, scale: PresetScale, trials: usize) -> ExperimentConfig {
    let scene = synthetic_scene("pnmm_r5".into(), scale, 5, MixingModel::pnmm(0.7));
    let mut methods = vec![MethodSpec::Fcls];
    for n_b in [10, 100] {
        methods.push(MethodSpec::SkhypeReduced { n_b });
        methods.push(MethodSpec::SkhypeRandom { n_b, trials });
    }
    ExperimentConfig {
        scenes: vec![scene],
        methods,
        seed,
        timed: false,
        ..ExperimentConfig::default()
    }
}
