//! Command-line front end.
//!
//! Every subcommand resolves a typed config in four layers: built-in
//! defaults, then `--config FILE` (deep-merged JSON), then flags, then
//! trailing `key=value` overrides addressed by dotted path. Unknown keys are
//! rejected at every layer. The resolved config is written as `config.json`
//! in the output directory. A relative output directory is placed under
//! `$NLUNMIX_OUTPUT_ROOT` when that variable is set.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use nlunmix_core::synth::stepped_schedule;
use nlunmix_core::{
    generate_synthetic_endmembers, rmse_with, select_bands, select_bands_random, BandParam,
    BandSelection, KernelSpec, Method, MixingModel, RmseConvention, SkHypeConfig, UUpdate,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::harness::{
    config_hash, fig2_config, run_experiment, table1_config, table2_config, EndmemberSource,
    ExperimentConfig, PresetScale, ResultTable, SceneSpec, SCHEDULE_PLATEAU,
};
use crate::io::{
    load_endmembers_csv, load_scene, read_json, save_endmembers_csv, save_scene, write_json,
    write_matrix_csv,
};
use crate::runner::{available_workers, unmix_scene};

pub const OUTPUT_ROOT_ENV: &str = "NLUNMIX_OUTPUT_ROOT";
pub const CONFIG_FILE: &str = "config.json";
/// Marker left in an output directory whose run failed part-way.
pub const INCOMPLETE_FILE: &str = "INCOMPLETE";

#[derive(Debug, Parser)]
#[command(
    name = "nlunmix",
    version,
    about = "Kernel nonlinear unmixing with band selection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic endmember spectra.
    GenEndmembers(GenEndmembersArgs),
    /// Generate a mixed scene with ground-truth abundances.
    GenScene(GenSceneArgs),
    /// Select bands by kernel k-means (or at random).
    SelectBands(SelectBandsArgs),
    /// Unmix a scene directory.
    Unmix(UnmixArgs),
    /// Run an experiment described by a config file.
    Evaluate(EvaluateArgs),
    /// Fixed-nonlinearity table: PNMM and GBM, 5 and 8 endmembers, 5 methods.
    ReplicateTable1(ReplicateArgs),
    /// Band-varying nonlinearity table.
    ReplicateTable2(ReplicateArgs),
    /// Kernel k-means selection against random selections.
    ReplicateFig2(Fig2Args),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON config file, layered over the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for unmixing; defaults to all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Report the RMSE with the Frobenius norm divided by N·R.
    #[arg(long)]
    pub rmse_literal: bool,
    /// Form of the `u` update.
    #[arg(long, value_enum)]
    pub u_update: Option<UUpdateArg>,
    /// Dotted-path overrides applied last, e.g. `skhype.mu=0.1`.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UUpdateArg {
    Reciprocal,
    Literal,
}

impl From<UUpdateArg> for UUpdate {
    fn from(a: UUpdateArg) -> Self {
        match a {
            UUpdateArg::Reciprocal => UUpdate::Reciprocal,
            UUpdateArg::Literal => UUpdate::Literal,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Polynomial,
    Linear,
}

#[derive(Debug, Clone, Args)]
pub struct KernelFlags {
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Gaussian bandwidth σ².
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub degree: Option<u32>,
}

impl KernelFlags {
    fn apply(&self, k: &mut KernelSpec) {
        match self.kernel {
            Some(KernelArg::Gaussian) if !matches!(k, KernelSpec::Gaussian { .. }) => {
                *k = KernelSpec::gaussian(0.3)
            }
            Some(KernelArg::Polynomial) if !matches!(k, KernelSpec::Polynomial { .. }) => {
                *k = KernelSpec::Polynomial {
                    degree: 2,
                    offset: 1.0,
                }
            }
            Some(KernelArg::Linear) => *k = KernelSpec::linear(),
            _ => {}
        }
        match k {
            KernelSpec::Gaussian { sigma2, .. } => {
                if let Some(s) = self.sigma2 {
                    *sigma2 = s;
                }
            }
            KernelSpec::Polynomial { degree, .. } => {
                if let Some(d) = self.degree {
                    *degree = d;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenEndmembersArgs {
    #[arg(long)]
    pub bands: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Lmm,
    Gbm,
    Pnmm,
}

#[derive(Debug, Clone, Args)]
pub struct GenSceneArgs {
    /// Endmember CSV; synthetic spectra are generated when absent.
    #[arg(long)]
    pub endmembers: Option<PathBuf>,
    #[arg(long)]
    pub bands: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub pixels: Option<usize>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// GBM δ or PNMM ξ for every band.
    #[arg(long)]
    pub param: Option<f64>,
    /// Per-band parameter `START:STEP`, constant over 42-band plateaus.
    #[arg(long, conflicts_with = "param")]
    pub schedule: Option<String>,
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long, conflicts_with = "snr")]
    pub noiseless: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct SelectBandsArgs {
    #[arg(long)]
    pub endmembers: Option<PathBuf>,
    #[arg(long)]
    pub nb: Option<usize>,
    #[command(flatten)]
    pub kernel: KernelFlags,
    /// Uniform random selection instead of kernel k-means.
    #[arg(long)]
    pub random: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Fcls,
    Skhype,
}

#[derive(Debug, Clone, Args)]
pub struct UnmixArgs {
    /// Scene directory holding `pixels.csv`.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub endmembers: Option<PathBuf>,
    /// `bands.json` from `select-bands`; all bands are used when absent.
    #[arg(long)]
    pub bands: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[command(flatten)]
    pub kernel: KernelFlags,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct ReplicateArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub pixels: Option<usize>,
    #[arg(long)]
    pub bands: Option<usize>,
    #[arg(long)]
    pub snr: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Fig2Args {
    #[command(flatten)]
    pub preset: ReplicateArgs,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
}

impl ReplicateArgs {
    fn scale(&self) -> PresetScale {
        let d = PresetScale::default();
        PresetScale {
            pixels: self.pixels.unwrap_or(d.pixels),
            bands: self.bands.unwrap_or(d.bands),
            snr_db: self.snr.unwrap_or(d.snr_db),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenEndmembersConfig {
    pub bands: usize,
    pub count: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for GenEndmembersConfig {
    fn default() -> Self {
        Self {
            bands: 420,
            count: 5,
            seed: 42,
            output_dir: "endmembers".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSceneConfig {
    pub endmembers: EndmemberSource,
    pub pixels: usize,
    pub model: MixingModel,
    pub snr_db: Option<f64>,
    /// Replaces the model parameter with a per-band stepped schedule.
    pub schedule: Option<Schedule>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// `start + k·step` on the `k`-th plateau of `plateau` bands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub start: f64,
    pub step: f64,
    pub plateau: usize,
}

impl Default for GenSceneConfig {
    fn default() -> Self {
        Self {
            endmembers: EndmemberSource::Synthetic {
                bands: 420,
                count: 5,
            },
            pixels: 2000,
            model: MixingModel::pnmm(0.7),
            snr_db: Some(21.0),
            schedule: None,
            seed: 42,
            output_dir: "scene".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectBandsConfig {
    pub endmembers: PathBuf,
    pub n_b: usize,
    pub kernel: KernelSpec,
    pub random: bool,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for SelectBandsConfig {
    fn default() -> Self {
        Self {
            endmembers: PathBuf::new(),
            n_b: 10,
            kernel: KernelSpec::gaussian(0.3),
            random: false,
            seed: 42,
            output_dir: "bands".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnmixConfig {
    pub scene: PathBuf,
    pub endmembers: PathBuf,
    pub bands: Option<PathBuf>,
    pub method: Method,
    /// `0` means all available cores.
    pub workers: usize,
    pub rmse: RmseConvention,
    pub output_dir: PathBuf,
}

impl Default for UnmixConfig {
    fn default() -> Self {
        Self {
            scene: PathBuf::new(),
            endmembers: PathBuf::new(),
            bands: None,
            method: Method::Fcls {
                qp: Default::default(),
            },
            workers: 0,
            rmse: RmseConvention::RootMean,
            output_dir: "unmix".into(),
        }
    }
}

/// Written by `unmix` next to `abundances.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnmixManifest {
    pub method: Method,
    pub config_hash: String,
    pub bands: Option<Vec<usize>>,
    pub pixels: usize,
    pub rmse: Option<f64>,
    pub rmse_convention: RmseConvention,
    pub wall_time_s: f64,
    pub failed_pixels: Vec<usize>,
    pub u_values: Vec<f64>,
    pub iterations: Vec<usize>,
}

/// Access to the fields every config shares with the common flags.
trait Stage: Serialize + DeserializeOwned {
    fn output_dir(&mut self) -> &mut PathBuf;
    fn apply_common(&mut self, _c: &Common) {}
    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

impl Stage for GenEndmembersConfig {
    fn output_dir(&mut self) -> &mut PathBuf {
        &mut self.output_dir
    }
}

impl Stage for GenSceneConfig {
    fn output_dir(&mut self) -> &mut PathBuf {
        &mut self.output_dir
    }

    fn validate(&self) -> Result<()> {
        if self.pixels == 0 {
            return Err(Error::Config("pixels must be positive".into()));
        }
        if let Some(s) = self.schedule {
            if s.plateau == 0 || matches!(self.model, MixingModel::Lmm) {
                return Err(Error::Config(
                    "a schedule needs a positive plateau and a gbm or pnmm model".into(),
                ));
            }
        }
        Ok(())
    }
}

impl Stage for SelectBandsConfig {
    fn output_dir(&mut self) -> &mut PathBuf {
        &mut self.output_dir
    }

    fn validate(&self) -> Result<()> {
        if self.endmembers.as_os_str().is_empty() {
            return Err(Error::Config(
                "no endmember file given (--endmembers)".into(),
            ));
        }
        self.kernel
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }
}

impl Stage for UnmixConfig {
    fn output_dir(&mut self) -> &mut PathBuf {
        &mut self.output_dir
    }

    fn apply_common(&mut self, c: &Common) {
        if let Some(w) = c.workers {
            self.workers = w;
        }
        if c.rmse_literal {
            self.rmse = RmseConvention::Literal;
        }
        if let (Some(u), Method::SkHype(cfg)) = (c.u_update, &mut self.method) {
            cfg.u_update = u.into();
        }
    }

    fn validate(&self) -> Result<()> {
        if self.scene.as_os_str().is_empty() {
            return Err(Error::Config("no scene directory given (--scene)".into()));
        }
        if self.endmembers.as_os_str().is_empty() {
            return Err(Error::Config(
                "no endmember file given (--endmembers)".into(),
            ));
        }
        if let Method::SkHype(cfg) = &self.method {
            cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

impl Stage for ExperimentConfig {
    fn output_dir(&mut self) -> &mut PathBuf {
        &mut self.output_dir
    }

    fn apply_common(&mut self, c: &Common) {
        if let Some(w) = c.workers {
            self.workers = w;
        }
        if c.rmse_literal {
            self.rmse = RmseConvention::Literal;
        }
        if let Some(u) = c.u_update {
            self.skhype.u_update = u.into();
        }
    }

    fn validate(&self) -> Result<()> {
        ExperimentConfig::validate(self).map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }
}

fn config_error(what: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{what}: {e}"))
}

/// Recursively merges `patch` into `base`; objects merge, everything else
/// replaces.
pub fn merge_json(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Applies one `a.b.c=value` override. The value is read as JSON when it
/// parses, as a plain string otherwise.
pub fn apply_override<T: Serialize + DeserializeOwned>(cfg: &T, spec: &str) -> Result<T> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
    let mut root = serde_json::to_value(cfg).map_err(|e| config_error("serialising config", e))?;
    let parts: Vec<&str> = key.split('.').collect();
    let unknown = || Error::Config(format!("unknown config key {key:?}"));
    let mut slot = &mut root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        slot = match slot {
            Value::Object(map) => {
                if last {
                    map.entry(*part).or_insert(Value::Null)
                } else {
                    map.get_mut(*part).ok_or_else(unknown)?
                }
            }
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| unknown())?;
                items.get_mut(idx).ok_or_else(unknown)?
            }
            _ => return Err(unknown()),
        };
    }
    *slot = value.clone();
    let out: T = serde_json::from_value(root).map_err(|e| config_error(key, e))?;
    // A key the target type ignores does not survive the round trip.
    let check = serde_json::to_value(&out).map_err(|e| config_error("serialising config", e))?;
    let pointer = format!("/{}", parts.join("/"));
    if check.pointer(&pointer).is_none() {
        return Err(unknown());
    }
    Ok(out)
}

fn output_root() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn resolve<T: Stage>(defaults: T, common: &Common, flags: impl FnOnce(&mut T)) -> Result<T> {
    let mut cfg = match &common.config {
        Some(path) => {
            let mut base = serde_json::to_value(&defaults)
                .map_err(|e| config_error("serialising config", e))?;
            let file: Value = read_json(path).map_err(|e| match e {
                Error::Json { path, source } => config_error(&path.display().to_string(), source),
                other => other,
            })?;
            merge_json(&mut base, file);
            serde_json::from_value(base)
                .map_err(|e| config_error(&path.display().to_string(), e))?
        }
        None => defaults,
    };
    flags(&mut cfg);
    cfg.apply_common(common);
    if let Some(out) = &common.out {
        *cfg.output_dir() = out.clone();
    }
    for spec in &common.overrides {
        cfg = apply_override(&cfg, spec)?;
    }
    if let Some(root) = output_root() {
        let dir = cfg.output_dir();
        if dir.is_relative() {
            *dir = root.join(&*dir);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `body` with `dir` as its output directory, writing the resolved
/// config first and leaving an `INCOMPLETE` marker if `body` fails.
fn run_stage<T: Stage>(mut cfg: T, body: impl FnOnce(&T, &Path) -> Result<()>) -> Result<()> {
    let dir = cfg.output_dir().clone();
    let marker = dir.join(INCOMPLETE_FILE);
    write_json(&dir.join(CONFIG_FILE), &cfg)?;
    std::fs::write(&marker, b"").map_err(|e| Error::io(&marker, e))?;
    match body(&cfg, &dir) {
        Ok(()) => std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e)),
        Err(e) => {
            let _ = std::fs::write(&marker, format!("error[{}]: {e}\n", e.code()));
            Err(e)
        }
    }
}

fn model_from(arg: ModelArg, param: Option<f64>) -> MixingModel {
    let p = |default: f64| BandParam::Constant(param.unwrap_or(default));
    match arg {
        ModelArg::Lmm => MixingModel::Lmm,
        ModelArg::Gbm => MixingModel::Gbm { delta: p(1.0) },
        ModelArg::Pnmm => MixingModel::Pnmm { xi: p(0.7) },
    }
}

fn parse_schedule(spec: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("schedule {spec:?} is not START:STEP"));
    let (a, b) = spec.split_once(':').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

fn summarize(table: &ResultTable) {
    for r in &table.rows {
        info!(
            "{:<10} {:<20} rmse {:>8} ret {:>9} ({})",
            r.scene,
            r.method,
            r.rmse.map_or("-".into(), |v| format!("{v:.4}")),
            r.ret_unmix.map_or("-".into(), |v| format!("{v:.1}")),
            r.ret_total.map_or("-".into(), |v| format!("{v:.1}")),
        );
    }
}

fn experiment(cfg: ExperimentConfig) -> Result<()> {
    run_stage(cfg, |cfg, _| {
        let table = run_experiment(cfg)?;
        summarize(&table);
        Ok(())
    })
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenEndmembers(a) => {
            let cfg = resolve(GenEndmembersConfig::default(), &a.common, |c| {
                if let Some(v) = a.bands {
                    c.bands = v;
                }
                if let Some(v) = a.count {
                    c.count = v;
                }
                if let Some(v) = a.seed {
                    c.seed = v;
                }
            })?;
            run_stage(cfg, |cfg, dir| {
                let m = generate_synthetic_endmembers(cfg.bands, cfg.count, cfg.seed)?;
                save_endmembers_csv(&dir.join("endmembers.csv"), &m)
            })
        }
        Command::GenScene(a) => {
            let schedule = a.schedule.as_deref().map(parse_schedule).transpose()?;
            let cfg = resolve(GenSceneConfig::default(), &a.common, |c| {
                if let Some(path) = &a.endmembers {
                    c.endmembers = EndmemberSource::Csv { path: path.clone() };
                } else if let EndmemberSource::Synthetic { bands, count } = &mut c.endmembers {
                    *bands = a.bands.unwrap_or(*bands);
                    *count = a.count.unwrap_or(*count);
                }
                if let Some(v) = a.pixels {
                    c.pixels = v;
                }
                if a.model.is_some() || a.param.is_some() {
                    let arg = a.model.unwrap_or(match c.model {
                        MixingModel::Lmm => ModelArg::Lmm,
                        MixingModel::Gbm { .. } => ModelArg::Gbm,
                        MixingModel::Pnmm { .. } => ModelArg::Pnmm,
                    });
                    c.model = model_from(arg, a.param);
                }
                if let Some((start, step)) = schedule {
                    c.schedule = Some(Schedule {
                        start,
                        step,
                        plateau: SCHEDULE_PLATEAU,
                    });
                }
                if let Some(v) = a.snr {
                    c.snr_db = Some(v);
                }
                if a.noiseless {
                    c.snr_db = None;
                }
                if let Some(v) = a.seed {
                    c.seed = v;
                }
            })?;
            run_stage(cfg, |cfg, dir| {
                let mut model = cfg.model.clone();
                if let Some(s) = cfg.schedule {
                    let bands = match &cfg.endmembers {
                        EndmemberSource::Synthetic { bands, .. } => *bands,
                        EndmemberSource::Csv { path } => load_endmembers_csv(path)?.bands(),
                    };
                    let values =
                        BandParam::PerBand(stepped_schedule(bands, s.start, s.step, s.plateau));
                    model = match model {
                        MixingModel::Gbm { .. } => MixingModel::Gbm { delta: values },
                        MixingModel::Pnmm { .. } => MixingModel::Pnmm { xi: values },
                        MixingModel::Lmm => MixingModel::Lmm,
                    };
                }
                let spec = SceneSpec {
                    name: "scene".into(),
                    endmembers: cfg.endmembers.clone(),
                    pixels: cfg.pixels,
                    model,
                    snr_db: cfg.snr_db,
                    seed: Some(cfg.seed),
                };
                let (m, scene) = spec.build(cfg.seed)?;
                save_endmembers_csv(&dir.join("endmembers.csv"), &m)?;
                save_scene(dir, &scene)
            })
        }
        Command::SelectBands(a) => {
            let cfg = resolve(SelectBandsConfig::default(), &a.common, |c| {
                if let Some(p) = &a.endmembers {
                    c.endmembers = p.clone();
                }
                if let Some(v) = a.nb {
                    c.n_b = v;
                }
                a.kernel.apply(&mut c.kernel);
                c.random |= a.random;
                if let Some(v) = a.seed {
                    c.seed = v;
                }
            })?;
            run_stage(cfg, |cfg, dir| {
                let m = load_endmembers_csv(&cfg.endmembers)?;
                let sel = if cfg.random {
                    select_bands_random(m.bands(), cfg.n_b, cfg.seed)?
                } else {
                    select_bands(&m, cfg.n_b, &cfg.kernel)?
                };
                info!("selected bands {:?}", sel.indices);
                write_json(&dir.join("bands.json"), &sel)
            })
        }
        Command::Unmix(a) => {
            let cfg = resolve(UnmixConfig::default(), &a.common, |c| {
                if let Some(p) = &a.scene {
                    c.scene = p.clone();
                }
                if let Some(p) = &a.endmembers {
                    c.endmembers = p.clone();
                }
                if let Some(p) = &a.bands {
                    c.bands = Some(p.clone());
                }
                match (a.method, &c.method) {
                    (Some(MethodArg::Fcls), Method::SkHype(s)) => {
                        c.method = Method::Fcls { qp: s.qp }
                    }
                    (Some(MethodArg::Skhype), Method::Fcls { .. }) => {
                        c.method = Method::SkHype(SkHypeConfig::default())
                    }
                    _ => {}
                }
                if let Method::SkHype(s) = &mut c.method {
                    if let Some(mu) = a.mu {
                        s.mu = mu;
                    }
                    a.kernel.apply(&mut s.kernel);
                }
            })?;
            run_stage(cfg, |cfg, dir| {
                let mut scene = load_scene(&cfg.scene)?;
                let mut m = load_endmembers_csv(&cfg.endmembers)?;
                let mut bands = None;
                if let Some(path) = &cfg.bands {
                    let sel: BandSelection = read_json(path)?;
                    scene = scene.restrict_bands(&sel)?;
                    m = m.restrict_bands(&sel)?;
                    bands = Some(sel.indices);
                }
                let workers = if cfg.workers == 0 {
                    available_workers()
                } else {
                    cfg.workers
                };
                let res = unmix_scene(&scene, &m, &cfg.method, workers)?;
                let rmse = scene
                    .abundances()
                    .map(|t| rmse_with(t, &res.abundances, cfg.rmse))
                    .transpose()?;
                write_matrix_csv(&dir.join("abundances.csv"), &res.abundances)?;
                let manifest = UnmixManifest {
                    method: cfg.method.clone(),
                    config_hash: config_hash(&(&cfg.method, &bands, cfg.rmse)),
                    bands,
                    pixels: scene.len(),
                    rmse,
                    rmse_convention: cfg.rmse,
                    wall_time_s: res.wall_time,
                    failed_pixels: res
                        .failed
                        .iter()
                        .enumerate()
                        .filter(|(_, &f)| f)
                        .map(|(j, _)| j)
                        .collect(),
                    u_values: res.u_values,
                    iterations: res.iterations,
                };
                if let Some(r) = rmse {
                    info!("rmse {r:.6}");
                }
                write_json(&dir.join("manifest.json"), &manifest)
            })
        }
        Command::Evaluate(a) => {
            let cfg = resolve(ExperimentConfig::default(), &a.common, |c| {
                if let Some(s) = a.seed {
                    c.seed = s;
                }
            })?;
            experiment(cfg)
        }
        Command::ReplicateTable1(a) => {
            let preset = table1_config(a.seed.unwrap_or(42), a.scale());
            experiment(resolve(preset, &a.common, |_| {})?)
        }
        Command::ReplicateTable2(a) => {
            let preset = table2_config(a.seed.unwrap_or(42), a.scale());
            experiment(resolve(preset, &a.common, |_| {})?)
        }
        Command::ReplicateFig2(a) => {
            let preset = fig2_config(a.preset.seed.unwrap_or(42), a.preset.scale(), a.trials);
            experiment(resolve(preset, &a.preset.common, |_| {})?)
        }
    }
}
