//! Sweep evaluation and the on-disk run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cavity::CavityParams;
use crate::crib::{self, CribConfig, CribMedium};
use crate::error::{Error, Result};
use crate::free_space::{FreeSpaceParams, RetrievalKernel};
use crate::numerics::{SpaceGrid, TimeGrid, C64};
use crate::optimizer::{ascend_multi_start, best_constant_control, ControlProblem};
use crate::problems::{CavityStorage, FreeSpaceCompleteRetrieval};
use crate::profile::InhomProfile;
use crate::scenario::config::{
    CompareConfig, GridSettings, InitScale, Method, ModelKind, ProfileKind, ScenarioConfig, ScenarioFile,
    WidthSearch, MAX_TIME_NODES,
};
use crate::scenario::input::make_input_mode;
use crate::scenario::output;
use crate::signal::ControlField;

/// Environment variable overriding the output root.
pub const OUT_ENV: &str = "PHOTON_MEMORY_OUT";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Output root; the run writes to `root/<name>/`.
    pub out_root: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid_scale: f64,
    pub jobs: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { out_root: None, seed: None, grid_scale: 1.0, jobs: None }
    }
}

/// Grids actually used at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointGrid {
    pub time_nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crib_storage_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crib_retrieval_step: Option<f64>,
}

/// Optimized controls at one sweep point, one per start.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub t: Vec<f64>,
    pub input: Vec<C64>,
    pub controls: Vec<Vec<f64>>,
    pub best: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub strength: f64,
    pub duration: f64,
    pub scaled_duration: f64,
    /// Aligned with [`Table::columns`]; `None` where a method failed.
    pub values: Vec<Option<f64>>,
    pub converged: bool,
    pub grid: PointGrid,
    pub waveform: Option<Waveform>,
    pub notes: Vec<String>,
}

/// One output table: key columns, then per-method columns, then the flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub cavity: bool,
    /// Value columns after `strength, duration, scaled_duration`.
    pub columns: Vec<String>,
    pub rows: Vec<PointResult>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of column `name` for every row.
    pub fn values(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.column(name)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }
}

pub fn columns_for(cfg: &ScenarioConfig) -> Vec<String> {
    let mut c = vec!["bound".to_string()];
    for m in cfg.methods() {
        let names: &[&str] = match m {
            Method::Optimal => &["eta_optimal", "eta_storage_optimal", "iterations_optimal", "spread_optimal"],
            Method::Constant => &["eta_constant", "omega_constant"],
            Method::Fast => &["eta_fast"],
            Method::Crib => &["eta_crib", "width_crib"],
        };
        c.extend(names.iter().map(|s| s.to_string()));
    }
    c
}

/// Time grid for a point: fixed density per `1/γ` (and per `1/((1+C)γ)`
/// for the cavity), never fewer than `min_time_nodes`.
pub fn time_grid(model: ModelKind, strength: f64, duration: f64, grid: &GridSettings) -> Result<TimeGrid> {
    let per_unit = if model.is_cavity() {
        grid.nodes_per_unit_time.max(grid.steps_per_decay * (1.0 + strength))
    } else {
        grid.nodes_per_unit_time
    };
    let n = ((duration * per_unit).ceil() as usize + 1).max(grid.min_time_nodes);
    if n > MAX_TIME_NODES {
        return Err(Error::Config(format!(
            "T = {duration} needs {n} time nodes (limit {MAX_TIME_NODES}); lower the density or T"
        )));
    }
    TimeGrid::new(0.0, duration, n)
}

fn profile(kind: ProfileKind, classes: usize, width: f64) -> Result<InhomProfile> {
    match kind {
        ProfileKind::TwoClass => InhomProfile::two_class(width),
        ProfileKind::Gaussian => InhomProfile::gaussian(width, classes),
        ProfileKind::Lorentzian => InhomProfile::lorentzian(width, classes),
    }
}

fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct PointJob {
    index: usize,
    strength: f64,
    duration: f64,
}

/// Evaluates every sweep point of `cfg` (no I/O besides input files).
pub fn evaluate(cfg: &ScenarioConfig, grid_scale: f64) -> Result<Table> {
    cfg.validate()?;
    if !(grid_scale > 0.0) || !grid_scale.is_finite() {
        return Err(Error::Config(format!("grid scale must be positive (got {grid_scale})")));
    }
    let grid = cfg.grid.scaled(grid_scale);
    let mut jobs = Vec::new();
    for &s in &cfg.strengths {
        for t in cfg.durations(s)? {
            jobs.push(PointJob { index: jobs.len(), strength: s, duration: t });
        }
    }
    let columns = columns_for(cfg);
    let rows: Vec<PointResult> =
        jobs.par_iter().map(|j| evaluate_point(cfg, &grid, &columns, j)).collect::<Result<_>>()?;
    Ok(Table { name: cfg.name.clone(), cavity: cfg.model.is_cavity(), columns, rows })
}

fn evaluate_point(cfg: &ScenarioConfig, grid: &GridSettings, columns: &[String], job: &PointJob) -> Result<PointResult> {
    let (s, t) = (job.strength, job.duration);
    let tg = time_grid(cfg.model, s, t, grid)?;
    let input = make_input_mode(&cfg.input, tg)?;
    let mut values: Vec<Option<f64>> = vec![None; columns.len()];
    let mut set = |name: &str, v: f64| {
        let k = columns.iter().position(|c| c == name).expect("column declared");
        values[k] = Some(v);
    };
    let mut notes = Vec::new();
    let mut converged = true;
    let mut waveform = None;
    let mut point_grid = PointGrid {
        time_nodes: tg.len(),
        space_nodes: (!cfg.model.is_cavity()).then_some(grid.space_nodes),
        crib_storage_nodes: None,
        crib_retrieval_step: None,
    };

    let space = SpaceGrid::new(grid.space_nodes)?;
    let problem: Box<dyn ControlProblem> = if cfg.model.is_cavity() {
        Box::new(CavityStorage { input: input.clone(), params: CavityParams::resonant(s) })
    } else {
        Box::new(FreeSpaceCompleteRetrieval::new(input.clone(), FreeSpaceParams::new(s)?, space, cfg.retrieval))
    };
    // Storage efficiency to total efficiency: optimal retrieval in the cavity,
    // the complete-retrieval kernel already in free space.
    let retrieval_factor = if cfg.model.is_cavity() { s / (1.0 + s) } else { 1.0 };
    let bound = if cfg.model.is_cavity() {
        s * s / ((1.0 + s) * (1.0 + s))
    } else {
        RetrievalKernel::new(&FreeSpaceParams::new(s)?, &space, cfg.retrieval).max_efficiency()
    };
    set("bound", bound);

    for method in cfg.methods() {
        let outcome: Result<()> = (|| {
            match method {
                Method::Optimal => {
                    let scale = match cfg.init_scale {
                        InitScale::Absolute => 1.0,
                        InitScale::InverseSqrtDuration => 1.0 / t.sqrt(),
                    };
                    let mut rng = ChaCha8Rng::seed_from_u64(point_seed(cfg.seed, job.index));
                    let inits: Vec<ControlField> = cfg
                        .initial_controls()
                        .iter()
                        .map(|v| {
                            let j = if cfg.init_jitter > 0.0 { rng.gen_range(-cfg.init_jitter..cfg.init_jitter) } else { 0.0 };
                            ControlField::constant(v * scale * (1.0 + j), tg)
                        })
                        .collect();
                    let ms = ascend_multi_start(problem.as_ref(), &inits, &cfg.optimizer)?;
                    let best = ms.best();
                    set("eta_optimal", best.efficiency() * retrieval_factor);
                    let stored = if cfg.model.is_cavity() {
                        best.efficiency()
                    } else {
                        crate::free_space::storage_forward(&best.control, &input, &FreeSpaceParams::new(s)?, &space)?
                            .storage_efficiency()
                    };
                    set("eta_storage_optimal", stored);
                    set("iterations_optimal", best.iterations_used as f64);
                    set("spread_optimal", ms.spread() * retrieval_factor);
                    if !best.converged {
                        converged = false;
                        notes.push(format!("optimal: stopped by {:?}", best.stop_reason));
                    }
                    if let Some(d) = &best.diagnostic {
                        notes.push(format!("optimal: {d}"));
                    }
                    if cfg.waveforms {
                        waveform = Some(Waveform {
                            t: tg.nodes(),
                            input: input.values().to_vec(),
                            controls: ms.starts.iter().map(|r| r.control.values().iter().map(|v| v.re).collect()).collect(),
                            best: ms.best,
                        });
                    }
                }
                Method::Constant => {
                    let scale = 1.0 / t.sqrt();
                    let (v, e) = best_constant_control(problem.as_ref(), tg, 1e-3 * scale, 1e3 * scale, 8)?;
                    set("eta_constant", e * retrieval_factor);
                    set("omega_constant", v);
                }
                Method::Fast | Method::Crib => {
                    let (cfg_c, scan) = crib_config(cfg, s, t, space, grid)?;
                    point_grid.crib_storage_nodes = Some(cfg_c.storage.len());
                    point_grid.crib_retrieval_step = Some(cfg_c.retrieval_step);
                    let input_c = make_input_mode(&cfg.input, cfg_c.storage)?;
                    if method == Method::Fast {
                        set("eta_fast", crib::crib_efficiency(&input_c, &cfg_c.with_width(0.0)?)?);
                    } else {
                        match scan {
                            Some(widths) => {
                                let r = crib::optimize_width(&input_c, &cfg_c, &widths)?;
                                set("eta_crib", r.efficiency);
                                set("width_crib", r.width);
                            }
                            None => {
                                let r = crib::ascend_width(&input_c, &cfg_c, &cfg.optimizer)?;
                                set("eta_crib", r.efficiency());
                                set("width_crib", r.width());
                                if !r.converged {
                                    converged = false;
                                    notes.push("crib: width ascent did not converge".into());
                                }
                            }
                        }
                    }
                }
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            match e {
                Error::Numerical { .. } | Error::Degenerate(_) => {
                    log::warn!("{}: {} at {}={s}, T={t}: {e}", cfg.name, method.label(), cfg.model.strength_name());
                    notes.push(format!("{}: {e}", method.label()));
                    converged = false;
                }
                other => return Err(other),
            }
        }
    }
    if values.iter().any(|v| v.is_none_or(|x| !x.is_finite())) {
        converged = false;
    }
    Ok(PointResult {
        strength: s,
        duration: t,
        scaled_duration: t * s,
        values,
        converged,
        grid: point_grid,
        waveform,
        notes,
    })
}

/// CRIB config at width 0 with grids for the largest width searched, and the
/// absolute widths to scan (`None` for ascent).
fn crib_config(
    cfg: &ScenarioConfig,
    s: f64,
    t: f64,
    space: SpaceGrid,
    grid: &GridSettings,
) -> Result<(CribConfig, Option<Vec<f64>>)> {
    let medium = if cfg.model.is_cavity() {
        CribMedium::Cavity { cooperativity: s }
    } else {
        CribMedium::FreeSpace { optical_depth: s, space }
    };
    let unit = profile(cfg.crib.profile, cfg.crib.classes, 1.0)?;
    let reach = unit.deltas().iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let (max_width, scan) = match &cfg.crib.width_search {
        WidthSearch::Scan { multipliers } => {
            let w: Vec<f64> = multipliers.iter().map(|m| m / t).collect();
            (w.iter().cloned().fold(0.0, f64::max), Some(w))
        }
        WidthSearch::Ascent { max_width, .. } => (max_width / t, None),
    };
    let resolution = grid.steps_per_decay / GridSettings::default().steps_per_decay;
    let start = match cfg.crib.width_search {
        WidthSearch::Ascent { start, .. } => start / t,
        WidthSearch::Scan { .. } => 0.0,
    };
    let c = CribConfig::with_resolution(
        profile(cfg.crib.profile, cfg.crib.classes, start)?,
        medium,
        t,
        max_width * reach,
        resolution,
    )?;
    let c = c.with_width(start)?;
    Ok((c, scan))
}

/// Runs the sub-scenarios of `cmp` and joins their tables column-wise.
pub fn evaluate_compare(cmp: &CompareConfig, grid_scale: f64) -> Result<Table> {
    cmp.validate()?;
    let tables: Vec<Table> = cmp.compare.iter().map(|c| evaluate(c, grid_scale)).collect::<Result<_>>()?;
    join_tables(&cmp.name, &tables)
}

pub fn join_tables(name: &str, tables: &[Table]) -> Result<Table> {
    let first = tables.first().ok_or_else(|| Error::Config("nothing to compare".into()))?;
    let mut columns = Vec::new();
    for t in tables {
        if t.rows.len() != first.rows.len()
            || t.rows.iter().zip(&first.rows).any(|(a, b)| a.strength != b.strength || a.duration != b.duration)
        {
            return Err(Error::Config(format!("mismatched sweep axes: {} vs {}", first.name, t.name)));
        }
        columns.extend(t.columns.iter().map(|c| format!("{}_{c}", t.name)));
    }
    let rows = (0..first.rows.len())
        .map(|k| {
            let base = &first.rows[k];
            PointResult {
                strength: base.strength,
                duration: base.duration,
                scaled_duration: base.scaled_duration,
                values: tables.iter().flat_map(|t| t.rows[k].values.clone()).collect(),
                converged: tables.iter().all(|t| t.rows[k].converged),
                grid: base.grid.clone(),
                waveform: None,
                notes: tables
                    .iter()
                    .flat_map(|t| t.rows[k].notes.iter().map(move |n| format!("{}: {n}", t.name)))
                    .collect(),
            }
        })
        .collect();
    Ok(Table { name: name.to_string(), cavity: first.cavity, columns, rows })
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub table: Table,
}

/// Output directory: `opts.out_root`, else the config's `output_dir`, else
/// `./out`, joined with the scenario name.
pub fn output_dir(file: &ScenarioFile, opts: &RunOptions) -> PathBuf {
    let root = opts
        .out_root
        .clone()
        .or_else(|| file.output_dir().cloned())
        .unwrap_or_else(|| PathBuf::from("out"));
    root.join(file.name())
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(f),
    }
}

/// Evaluates `file` and writes CSV, plot scripts and the manifest.
pub fn run_file(file: &ScenarioFile, opts: &RunOptions) -> Result<RunReport> {
    let mut file = file.clone();
    if let Some(seed) = opts.seed {
        match &mut file {
            ScenarioFile::Single(c) => c.seed = seed,
            ScenarioFile::Compare(c) => c.compare.iter_mut().for_each(|s| s.seed = seed),
        }
    }
    file.validate()?;
    let dir = output_dir(&file, opts);
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
    let start = Instant::now();
    let table = with_pool(opts.jobs, || match &file {
        ScenarioFile::Single(c) => evaluate(c, opts.grid_scale),
        ScenarioFile::Compare(c) => evaluate_compare(c, opts.grid_scale),
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    let files = write_outputs(&dir, &file, &table, opts, elapsed)?;
    Ok(RunReport { dir, files, table })
}

pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunReport> {
    run_file(&ScenarioFile::Single(cfg.clone()), opts)
}

pub fn sweep_compare(cmp: &CompareConfig, opts: &RunOptions) -> Result<RunReport> {
    run_file(&ScenarioFile::Compare(cmp.clone()), opts)
}

fn write_outputs(dir: &Path, file: &ScenarioFile, table: &Table, opts: &RunOptions, elapsed: f64) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let csv_path = dir.join(format!("{}.csv", table.name));
    output::write_table(&csv_path, table)?;
    files.push(csv_path);
    let strengths: Vec<f64> = match file {
        ScenarioFile::Single(c) => c.strengths.clone(),
        ScenarioFile::Compare(c) => c.compare[0].strengths.clone(),
    };
    let gp = dir.join(format!("{}.gp", table.name));
    output::write_plot_script(&gp, table, &strengths)?;
    files.push(gp);
    let waves: Vec<(usize, &PointResult)> =
        table.rows.iter().enumerate().filter(|(_, r)| r.waveform.is_some()).collect();
    if !waves.is_empty() {
        let wdir = dir.join("waveforms");
        std::fs::create_dir_all(&wdir)?;
        let mut wave_files = Vec::new();
        for (k, row) in waves {
            let p = wdir.join(format!("{}_{k:03}.csv", table.name));
            output::write_waveform(&p, row, table.cavity)?;
            wave_files.push(p);
        }
        let gpw = dir.join(format!("{}_waveforms.gp", table.name));
        output::write_waveform_script(&gpw, &wave_files, dir)?;
        files.extend(wave_files);
        files.push(gpw);
    }
    let manifest = dir.join("manifest.json");
    output::write_manifest(&manifest, file, table, opts, elapsed, &files, dir)?;
    files.push(manifest);
    Ok(files)
}
