//! Fast storage and retrieval with controlled reversible inhomogeneous
//! broadening (CRIB), and gradients over the class weights and the width.
//!
//! The control is an ideal π pulse at `T` and another at `T_r`, so neither
//! window carries a spin wave: the two pulses amount to the handoff
//! `P_j(T_r) = −P_j(T)`, and the broadening is reversed for retrieval.
//!
//! Cavity:
//!
//! ```text
//! storage    Ṗ_j = −(1 + iΔ_j) P_j − C x_j P + i√(2C) x_j E_in,   P = Σ x_k P_k
//! retrieval  Ṗ_j = −(1 − iΔ_j) P_j − C x_j P,   η_tot = 2C ∫ |P|² dt
//! ```
//!
//! Free space (backward retrieval, run in the mirrored coordinate `1 − z`):
//!
//! ```text
//! ∂_z E = i√d Σ x_j P_j,   ∂_t P_j = −(1 ± iΔ_j) P_j + i√d x_j E
//! P_j^ret(z, T_r) = −P_j(1 − z, T),   η_tot = ∫ |E(1, t)|² dt
//! ```
//!
//! The free-space system is the direct analogue of the cavity one; only its
//! gradient formulas are standard, so it is checked here by reduction to the
//! homogeneous model and by finite differences.
//!
//! Arrays are indexed `[time node, class, space node]`; the cavity has one
//! space node.

use ndarray::{concatenate, Array2, Array3, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, usage, Error, Result};
use crate::free_space::MAX_OPTICAL_DEPTH;
use crate::optimizer::AscentConfig;
use crate::numerics::{
    check_finite, cumulative_trapezoid_into, max_abs, reverse_cumulative_trapezoid_into,
    stage_value, trapezoid, Rk4, SpaceGrid, TimeGrid, C64, I, ZERO,
};
use crate::profile::{normalize_amplitudes, InhomProfile};
use crate::signal::InputMode;

const BLOWUP: f64 = 1e100;
/// Retrieval chunks tried before giving up on emptying the medium.
const MAX_CHUNKS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CribMedium {
    Cavity { cooperativity: f64 },
    FreeSpace { optical_depth: f64, space: SpaceGrid },
}

impl CribMedium {
    fn validate(&self) -> Result<()> {
        match *self {
            CribMedium::Cavity { cooperativity } => {
                if !(cooperativity >= 0.0) || !cooperativity.is_finite() {
                    return usage(format!("cooperativity must be nonnegative (got {cooperativity})"));
                }
            }
            CribMedium::FreeSpace { optical_depth, .. } => {
                if !(optical_depth > 0.0) || optical_depth > MAX_OPTICAL_DEPTH {
                    return usage(format!(
                        "optical depth must lie in (0, {MAX_OPTICAL_DEPTH}] (got {optical_depth})"
                    ));
                }
            }
        }
        Ok(())
    }

    fn space_len(&self) -> usize {
        match self {
            CribMedium::Cavity { .. } => 1,
            CribMedium::FreeSpace { space, .. } => space.len(),
        }
    }

    /// Fastest collective rate, used to pick time steps.
    fn rate(&self) -> f64 {
        match *self {
            CribMedium::Cavity { cooperativity } => 1.0 + cooperativity,
            CribMedium::FreeSpace { optical_depth, .. } => optical_depth.max(1.0),
        }
    }

    /// Trapezoid weights along `z` (a single unit weight for the cavity).
    fn space_weights(&self) -> Vec<f64> {
        match self {
            CribMedium::Cavity { .. } => vec![1.0],
            CribMedium::FreeSpace { space, .. } => space.weights(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CribConfig {
    pub profile: InhomProfile,
    pub medium: CribMedium,
    /// Storage window `[0, T]`; the input mode lives on this grid.
    pub storage: TimeGrid,
    /// `T_r ≥ T`.
    pub retrieval_start: f64,
    pub retrieval_step: f64,
    /// Initial retrieval window length, also the extension chunk.
    pub retrieval_length: f64,
    /// Keep extending the window until the atomic excitation left is below
    /// this fraction of the stored excitation; `None` fixes the window.
    pub residual_tol: Option<f64>,
    /// Multiplies the default step densities.
    #[serde(default = "unit")]
    pub resolution: f64,
}

fn unit() -> f64 {
    1.0
}

impl CribConfig {
    /// Grids resolved for detunings up to `max_detuning` and the input
    /// duration `duration`; immediate retrieval, residual tolerance `1e-4`.
    pub fn new(
        profile: InhomProfile,
        medium: CribMedium,
        duration: f64,
        max_detuning: f64,
    ) -> Result<Self> {
        Self::with_resolution(profile, medium, duration, max_detuning, 1.0)
    }

    /// [`CribConfig::new`] with all step densities multiplied by `resolution`.
    pub fn with_resolution(
        profile: InhomProfile,
        medium: CribMedium,
        duration: f64,
        max_detuning: f64,
        resolution: f64,
    ) -> Result<Self> {
        medium.validate()?;
        if !(duration > 0.0) || !duration.is_finite() {
            return usage(format!("storage duration must be positive (got {duration})"));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return usage(format!("resolution must be positive (got {resolution})"));
        }
        let rate = medium.rate().max(max_detuning.abs()) * resolution;
        let min_nodes = (400.0 * resolution).ceil() as usize + 1;
        let storage = TimeGrid::with_max_step(duration, (0.05 / rate).min(duration / 400.0 / resolution), min_nodes)?;
        Ok(Self {
            profile,
            medium,
            storage,
            retrieval_start: duration,
            retrieval_step: (0.05 / rate).min(duration / 50.0 / resolution),
            retrieval_length: 2.0 * duration + 1.0,
            residual_tol: Some(1e-4),
            resolution,
        })
    }

    pub fn with_profile(&self, profile: InhomProfile) -> Self {
        Self { profile, ..self.clone() }
    }

    /// Same grids except the retrieval step, which is re-resolved for the
    /// detunings of width `w` (never coarser than `T/50`).
    pub fn with_width(&self, w: f64) -> Result<Self> {
        let profile = self.profile.with_width(w)?;
        let max_detuning = profile.deltas().iter().fold(0.0f64, |a, d| a.max(d.abs()));
        if self.storage.spacing() * max_detuning > 0.5 {
            return usage(format!(
                "storage grid (step {:.3e}) too coarse for detunings up to {max_detuning}",
                self.storage.spacing()
            ));
        }
        let rate = self.medium.rate().max(max_detuning) * self.resolution;
        Ok(Self {
            profile,
            retrieval_step: (0.05 / rate).min(self.duration() / 50.0 / self.resolution),
            ..self.clone()
        })
    }

    pub fn duration(&self) -> f64 {
        self.storage.t_end()
    }

    pub fn validate(&self) -> Result<()> {
        self.medium.validate()?;
        if self.storage.t_start() != 0.0 {
            return usage("storage window must start at t = 0");
        }
        if self.retrieval_start < self.duration() - 1e-12 {
            return usage(format!(
                "retrieval must start after storage (T_r = {} < T = {})",
                self.retrieval_start,
                self.duration()
            ));
        }
        if !(self.retrieval_step > 0.0) || !(self.retrieval_length > 0.0) {
            return usage("retrieval step and length must be positive");
        }
        Ok(())
    }

    fn chunk_grid(&self, start: f64) -> Result<TimeGrid> {
        let steps = (self.retrieval_length / self.retrieval_step).ceil().max(1.0) as usize;
        TimeGrid::new(start, start + steps as f64 * self.retrieval_step, steps + 1)
    }
}

/// One window of a CRIB run.
#[derive(Debug, Clone, PartialEq)]
pub struct CribWindow {
    pub grid: TimeGrid,
    /// `P_j` (or `P̄_j`) as `[t, class, z]`, when recorded.
    pub classes: Option<Array3<C64>>,
    /// Free space: `E` (or `Ē`) as `[t, z]`. Cavity: the collective `P`
    /// (or `P̄`) in a single column.
    pub field: Option<Array2<C64>>,
    /// `E_out(t)`: `E(1, t)` in free space, `i√(2C) P(t)` in the cavity.
    pub output: Vec<C64>,
    /// State at the last node, class-major (`j · n_z + k`).
    pub final_state: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CribRetrieval {
    pub window: CribWindow,
    pub total_efficiency: f64,
    pub residual_fraction: f64,
    pub window_too_short: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CribTrajectory {
    pub storage: CribWindow,
    pub retrieval: CribRetrieval,
    /// `Σ_j ∫ |P_j(T)|² dz`.
    pub stored_excitation: f64,
    pub input: InputMode,
}

impl CribTrajectory {
    pub fn total_efficiency(&self) -> f64 {
        self.retrieval.total_efficiency
    }
}

/// Costates on both windows, indexed by forward time.
#[derive(Debug, Clone, PartialEq)]
pub struct CribAdjoint {
    pub storage: CribWindow,
    pub retrieval: CribWindow,
}

#[derive(Clone, Copy, PartialEq)]
enum Window {
    Storage,
    Retrieval,
}

impl Window {
    /// `+1` for storage, `−1` once the broadening is reversed.
    fn sign(self) -> f64 {
        match self {
            Window::Storage => 1.0,
            Window::Retrieval => -1.0,
        }
    }
}

struct Engine {
    m: usize,
    nz: usize,
    x: Vec<f64>,
    deltas: Vec<f64>,
    medium: CribMedium,
    wz: Vec<f64>,
}

impl Engine {
    fn new(cfg: &CribConfig) -> Self {
        Self {
            m: cfg.profile.len(),
            nz: cfg.medium.space_len(),
            x: cfg.profile.amplitudes().to_vec(),
            deltas: cfg.profile.deltas().to_vec(),
            medium: cfg.medium,
            wz: cfg.medium.space_weights(),
        }
    }

    fn rates(&self, window: Window) -> Vec<C64> {
        self.deltas.iter().map(|d| C64::new(1.0, window.sign() * d)).collect()
    }

    fn excitation(&self, state: &[C64]) -> f64 {
        state
            .chunks(self.nz)
            .map(|c| c.iter().zip(&self.wz).map(|(v, w)| v.norm_sqr() * w).sum::<f64>())
            .sum()
    }

    fn collective(&self, y: &[C64], k: usize) -> C64 {
        (0..self.m).map(|j| y[j * self.nz + k] * self.x[j]).sum()
    }

    /// Mirror `z → 1 − z` and negate: the π-pulse handoff.
    fn handoff(&self, state: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; state.len()];
        for j in 0..self.m {
            for k in 0..self.nz {
                out[j * self.nz + k] = -state[j * self.nz + (self.nz - 1 - k)];
            }
        }
        out
    }

    /// Forward run on `grid` from `y0`; `boundary` is `E_in` at the nodes
    /// (`None` for no input).
    fn forward(
        &self,
        grid: TimeGrid,
        window: Window,
        y0: Vec<C64>,
        boundary: Option<&[C64]>,
        record: bool,
    ) -> Result<CribWindow> {
        let (m, nz) = (self.m, self.nz);
        let nt = grid.len();
        let h = grid.spacing();
        let rates = self.rates(window);
        let zeros;
        let e_in = match boundary {
            Some(b) => b,
            None => {
                zeros = vec![ZERO; nt];
                &zeros
            }
        };
        let mut classes = record.then(|| Array3::<C64>::zeros((nt, m, nz)));
        let mut field = record.then(|| Array2::<C64>::zeros((nt, nz)));
        let mut output = Vec::with_capacity(nt);
        let mut state = y0;
        check_finite("CRIB initial state", &state)?;
        let mut e = vec![ZERO; nz];
        let mut src = vec![ZERO; nz];

        let fill = |y: &[C64], b: C64, e: &mut [C64], src: &mut [C64]| match self.medium {
            CribMedium::Cavity { .. } => e[0] = self.collective(y, 0),
            CribMedium::FreeSpace { optical_depth, space } => {
                let sd = optical_depth.sqrt();
                for (k, s) in src.iter_mut().enumerate() {
                    *s = I * sd * self.collective(y, k);
                }
                cumulative_trapezoid_into(src, space.spacing(), b, e);
            }
        };
        let out_of = |e: &[C64]| match self.medium {
            CribMedium::Cavity { cooperativity } => I * (2.0 * cooperativity).sqrt() * e[0],
            CribMedium::FreeSpace { .. } => e[nz - 1],
        };
        let store = |k: usize,
                         y: &[C64],
                         e: &[C64],
                         classes: &mut Option<Array3<C64>>,
                         field: &mut Option<Array2<C64>>| {
            if let Some(c) = classes {
                for j in 0..m {
                    for z in 0..nz {
                        c[(k, j, z)] = y[j * nz + z];
                    }
                }
            }
            if let Some(f) = field {
                for z in 0..nz {
                    f[(k, z)] = e[z];
                }
            }
        };

        fill(&state, e_in[0], &mut e, &mut src);
        store(0, &state, &e, &mut classes, &mut field);
        output.push(out_of(&e));
        let mut rk = Rk4::new(m * nz);
        for k in 0..nt - 1 {
            rk.step(&mut state, h, |stage, y, dy| {
                let b = stage_value(e_in, k, stage);
                fill(y, b, &mut e, &mut src);
                match self.medium {
                    CribMedium::Cavity { cooperativity } => {
                        let p = e[0];
                        let drive = (2.0 * cooperativity).sqrt();
                        for j in 0..m {
                            let x = self.x[j];
                            dy[j] = -rates[j] * y[j] - p * (cooperativity * x) + I * (drive * x) * b;
                        }
                    }
                    CribMedium::FreeSpace { optical_depth, .. } => {
                        let sd = optical_depth.sqrt();
                        for j in 0..m {
                            let c = I * (sd * self.x[j]);
                            for z in 0..nz {
                                dy[j * nz + z] = -rates[j] * y[j * nz + z] + c * e[z];
                            }
                        }
                    }
                }
            });
            let mx = max_abs(&state);
            if !mx.is_finite() || mx > BLOWUP {
                return Err(Error::Numerical {
                    what: "CRIB forward: solution diverged; refine the time grid".into(),
                    max_abs: mx,
                });
            }
            fill(&state, e_in[k + 1], &mut e, &mut src);
            store(k + 1, &state, &e, &mut classes, &mut field);
            output.push(out_of(&e));
        }
        Ok(CribWindow { grid, classes, field, output, final_state: state })
    }

    /// Backward costates from `terminal` at the end of `grid`. `drive` holds,
    /// at the nodes in forward time, `E_out` (free space, the boundary
    /// `Ē(1, t)`) or the forward collective `P` (cavity retrieval source);
    /// `None` means no drive.
    fn adjoint(
        &self,
        grid: TimeGrid,
        window: Window,
        terminal: Vec<C64>,
        drive: Option<&[C64]>,
    ) -> Result<CribWindow> {
        let (m, nz) = (self.m, self.nz);
        let nt = grid.len();
        let h = grid.spacing();
        let rates: Vec<C64> = self.rates(window).iter().map(|r| r.conj()).collect();
        let rev: Vec<C64> = match drive {
            Some(d) => d.iter().rev().copied().collect(),
            None => vec![ZERO; nt],
        };
        let mut classes = Array3::<C64>::zeros((nt, m, nz));
        let mut field = Array2::<C64>::zeros((nt, nz));
        let mut state = terminal;
        check_finite("CRIB adjoint terminal state", &state)?;
        let mut e = vec![ZERO; nz];
        let mut src = vec![ZERO; nz];

        let fill = |y: &[C64], b: C64, e: &mut [C64], src: &mut [C64]| match self.medium {
            CribMedium::Cavity { .. } => e[0] = self.collective(y, 0),
            CribMedium::FreeSpace { optical_depth, space } => {
                let sd = optical_depth.sqrt();
                for (k, s) in src.iter_mut().enumerate() {
                    *s = I * sd * self.collective(y, k);
                }
                reverse_cumulative_trapezoid_into(src, space.spacing(), b, e);
            }
        };
        let store = |row: usize, y: &[C64], e: &[C64], classes: &mut Array3<C64>, field: &mut Array2<C64>| {
            for j in 0..m {
                for z in 0..nz {
                    classes[(row, j, z)] = y[j * nz + z];
                }
            }
            for z in 0..nz {
                field[(row, z)] = e[z];
            }
        };

        fill(&state, rev[0], &mut e, &mut src);
        store(nt - 1, &state, &e, &mut classes, &mut field);
        let mut rk = Rk4::new(m * nz);
        // In τ = t_end − t:
        //   cavity      dP̄_j/dτ = −(1 ∓ iΔ_j)* P̄_j − C x_j P̄ + 2C x_j P   (source on retrieval only)
        //   free space  dP̄_j/dτ = −(1 ∓ iΔ_j)* P̄_j − i√d x_j Ē,  Ē(1) = E_out
        for k in 0..nt - 1 {
            rk.step(&mut state, h, |stage, y, dy| {
                let b = stage_value(&rev, k, stage);
                fill(y, b, &mut e, &mut src);
                match self.medium {
                    CribMedium::Cavity { cooperativity } => {
                        let pbar = e[0];
                        for j in 0..m {
                            let x = self.x[j];
                            dy[j] = -rates[j] * y[j] - pbar * (cooperativity * x)
                                + b * (2.0 * cooperativity * x);
                        }
                    }
                    CribMedium::FreeSpace { optical_depth, .. } => {
                        let sd = optical_depth.sqrt();
                        for j in 0..m {
                            let c = I * (sd * self.x[j]);
                            for z in 0..nz {
                                dy[j * nz + z] = -rates[j] * y[j * nz + z] - c * e[z];
                            }
                        }
                    }
                }
            });
            let mx = max_abs(&state);
            if !mx.is_finite() || mx > BLOWUP {
                return Err(Error::Numerical {
                    what: "CRIB adjoint: solution diverged".into(),
                    max_abs: mx,
                });
            }
            fill(&state, rev[k + 1], &mut e, &mut src);
            store(nt - 2 - k, &state, &e, &mut classes, &mut field);
        }
        let first: Vec<C64> = classes.index_axis(Axis(0), 0).iter().copied().collect();
        Ok(CribWindow {
            grid,
            classes: Some(classes),
            field: Some(field),
            output: vec![],
            final_state: first,
        })
    }
}

fn check_input(input: &InputMode, cfg: &CribConfig) -> Result<()> {
    cfg.validate()?;
    if input.grid() != &cfg.storage {
        return usage("input mode must live on the CRIB storage grid");
    }
    Ok(())
}

/// Storage with the control off; returns the storage window, whose
/// `final_state` is `P_j(T)`.
pub fn fast_storage(input: &InputMode, cfg: &CribConfig) -> Result<CribWindow> {
    check_input(input, cfg)?;
    let eng = Engine::new(cfg);
    eng.forward(cfg.storage, Window::Storage, vec![ZERO; eng.m * eng.nz], Some(input.values()), true)
}

fn retrieve(eng: &Engine, p_at_t: &[C64], cfg: &CribConfig, record: bool) -> Result<CribRetrieval> {
    ensure_len("stored P_j", p_at_t.len(), eng.m * eng.nz)?;
    let stored = eng.excitation(p_at_t);
    let mut state = eng.handoff(p_at_t);
    let mut start = cfg.retrieval_start;
    let mut chunks: Vec<CribWindow> = Vec::new();
    let mut residual_fraction = 0.0;
    for _ in 0..MAX_CHUNKS {
        let grid = cfg.chunk_grid(start)?;
        let w = eng.forward(grid, Window::Retrieval, state, None, record)?;
        state = w.final_state.clone();
        start = grid.t_end();
        chunks.push(w);
        residual_fraction = if stored > 0.0 { eng.excitation(&state) / stored } else { 0.0 };
        match cfg.residual_tol {
            Some(tol) if residual_fraction > tol => continue,
            _ => break,
        }
    }
    let window = join(chunks)?;
    let eta = trapezoid(
        &window.output.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>(),
        window.grid.spacing(),
    );
    Ok(CribRetrieval {
        window,
        total_efficiency: eta,
        residual_fraction,
        window_too_short: residual_fraction > 1e-3,
    })
}

fn join(chunks: Vec<CribWindow>) -> Result<CribWindow> {
    let mut it = chunks.into_iter();
    let mut acc = it.next().expect("at least one chunk");
    for w in it {
        let n = acc.grid.len() + w.grid.len() - 1;
        let grid = TimeGrid::new(acc.grid.t_start(), w.grid.t_end(), n)?;
        acc.output.extend_from_slice(&w.output[1..]);
        acc.classes = match (acc.classes, w.classes) {
            (Some(a), Some(b)) => Some(concatenate(Axis(0), &[a.view(), b.slice(ndarray::s![1.., .., ..])]).expect("shapes agree")),
            _ => None,
        };
        acc.field = match (acc.field, w.field) {
            (Some(a), Some(b)) => Some(concatenate(Axis(0), &[a.view(), b.slice(ndarray::s![1.., ..])]).expect("shapes agree")),
            _ => None,
        };
        acc.grid = grid;
        acc.final_state = w.final_state;
    }
    Ok(acc)
}

/// Retrieval with reversed broadening after the handoff `P_j(T_r) = −P_j(T)`
/// (mirrored in `z` for free space).
pub fn fast_retrieval(p_at_t: &[C64], cfg: &CribConfig) -> Result<CribRetrieval> {
    cfg.validate()?;
    retrieve(&Engine::new(cfg), p_at_t, cfg, true)
}

/// Full recorded storage and retrieval, ready for [`crib_adjoint`].
pub fn crib_forward(input: &InputMode, cfg: &CribConfig) -> Result<CribTrajectory> {
    let storage = fast_storage(input, cfg)?;
    let eng = Engine::new(cfg);
    let stored_excitation = eng.excitation(&storage.final_state);
    let retrieval = retrieve(&eng, &storage.final_state, cfg, true)?;
    Ok(CribTrajectory { storage, retrieval, stored_excitation, input: input.clone() })
}

/// `η_tot` without recording trajectories (cheap in memory).
pub fn crib_efficiency(input: &InputMode, cfg: &CribConfig) -> Result<f64> {
    check_input(input, cfg)?;
    let eng = Engine::new(cfg);
    let storage =
        eng.forward(cfg.storage, Window::Storage, vec![ZERO; eng.m * eng.nz], Some(input.values()), false)?;
    Ok(retrieve(&eng, &storage.final_state, cfg, false)?.total_efficiency)
}

/// Costates: retrieval window from `P̄_j(T_f) = 0` driven by the output,
/// storage window from `P̄_j(T) = −P̄_j(T_r)`.
pub fn crib_adjoint(traj: &CribTrajectory, cfg: &CribConfig) -> Result<CribAdjoint> {
    let eng = Engine::new(cfg);
    let ret = &traj.retrieval.window;
    let drive: Vec<C64> = match cfg.medium {
        CribMedium::Cavity { .. } => {
            let f = ret.field.as_ref().ok_or_else(|| Error::Usage("trajectory not recorded".into()))?;
            f.column(0).to_vec()
        }
        CribMedium::FreeSpace { .. } => ret.output.clone(),
    };
    let retrieval = eng.adjoint(ret.grid, Window::Retrieval, vec![ZERO; eng.m * eng.nz], Some(&drive))?;
    let terminal = eng.handoff(&retrieval.final_state);
    let storage = eng.adjoint(traj.storage.grid, Window::Storage, terminal, None)?;
    Ok(CribAdjoint { storage, retrieval })
}

fn recorded(w: &CribWindow) -> Result<(&Array3<C64>, &Array2<C64>)> {
    match (&w.classes, &w.field) {
        (Some(c), Some(f)) => Ok((c, f)),
        _ => usage("CRIB window was not recorded"),
    }
}

/// `∂η_tot/∂x_j` at fixed `x_k` (k ≠ j), before renormalization.
pub fn weight_gradient(traj: &CribTrajectory, adj: &CribAdjoint, cfg: &CribConfig) -> Result<Vec<f64>> {
    let eng = Engine::new(cfg);
    let (m, nz) = (eng.m, eng.nz);
    let mut grad = vec![0.0; m];
    for (fw, bw, window) in [
        (&traj.storage, &adj.storage, Window::Storage),
        (&traj.retrieval.window, &adj.retrieval, Window::Retrieval),
    ] {
        let (pf, ef) = recorded(fw)?;
        let (pb, eb) = recorded(bw)?;
        let wt = fw.grid.weights();
        match cfg.medium {
            CribMedium::Cavity { cooperativity: c } => {
                // 2Re[−C(P̄_j* P + P̄* P_j) + i√(2C) P̄_j* E_in] (+ 4C Re P* P_j on retrieval)
                let drive = (2.0 * c).sqrt();
                for (k, w) in wt.iter().enumerate() {
                    let (p, pbar) = (ef[(k, 0)], eb[(k, 0)]);
                    let e_in = match window {
                        Window::Storage => traj.input.values()[k],
                        Window::Retrieval => ZERO,
                    };
                    for (j, g) in grad.iter_mut().enumerate() {
                        let (pj, pbj) = (pf[(k, j, 0)], pb[(k, j, 0)]);
                        let mut v = 2.0 * (-(pbj.conj() * p + pbar.conj() * pj) * c + I * drive * pbj.conj() * e_in).re;
                        if window == Window::Retrieval {
                            v += 4.0 * c * (p.conj() * pj).re;
                        }
                        *g += w * v;
                    }
                }
            }
            CribMedium::FreeSpace { optical_depth, .. } => {
                // −2√d Im ∫∫ (P̄_j* E + Ē* P_j)
                let sd = optical_depth.sqrt();
                for (k, w) in wt.iter().enumerate() {
                    for (j, g) in grad.iter_mut().enumerate() {
                        let mut acc = ZERO;
                        for z in 0..nz {
                            acc += (pb[(k, j, z)].conj() * ef[(k, z)] + eb[(k, z)].conj() * pf[(k, j, z)]) * eng.wz[z];
                        }
                        *g += -2.0 * sd * w * acc.im;
                    }
                }
            }
        }
    }
    Ok(grad)
}

/// `dη_tot/dΔ_I` for `Δ_j = Δ_I f_j`:
/// `2 Im Σ_j f_j [∫_0^T − ∫_{T_r}^{T_f}] P̄_j* P_j`.
pub fn width_gradient(traj: &CribTrajectory, adj: &CribAdjoint, cfg: &CribConfig) -> Result<f64> {
    let shape = cfg
        .profile
        .shape()
        .ok_or_else(|| Error::Usage("profile has no width parameterization".into()))?;
    let eng = Engine::new(cfg);
    let mut total = 0.0;
    for (fw, bw, sign) in [
        (&traj.storage, &adj.storage, 1.0),
        (&traj.retrieval.window, &adj.retrieval, -1.0),
    ] {
        let (pf, _) = recorded(fw)?;
        let (pb, _) = recorded(bw)?;
        let wt = fw.grid.weights();
        let mut acc = ZERO;
        for (k, w) in wt.iter().enumerate() {
            for (j, f) in shape.factors.iter().enumerate() {
                for z in 0..eng.nz {
                    acc += pb[(k, j, z)].conj() * pf[(k, j, z)] * (f * w * eng.wz[z]);
                }
            }
        }
        total += sign * 2.0 * acc.im;
    }
    Ok(total)
}

/// `Δ_I → max(0, Δ_I + (1/2λ) dη/dΔ_I)`.
pub fn width_update(traj: &CribTrajectory, adj: &CribAdjoint, cfg: &CribConfig, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return usage(format!("λ must be positive (got {lambda})"));
    }
    let width = cfg.profile.width().unwrap_or(0.0);
    Ok((width + 0.5 / lambda * width_gradient(traj, adj, cfg)?).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightUpdate {
    /// `x_j → x_j + (1/2λ) ∂η/∂x_j`, then renormalize.
    Step { lambda: f64 },
    /// `x_j → ∂η/∂x_j`, then renormalize (the `λ → 0` limit).
    Replace,
}

/// Applies one weight update and projects back onto `Σ x_j² = 1`. Signs are
/// dropped: flipping `x_j` only flips `P_j`.
pub fn weight_update(x: &[f64], grad: &[f64], mode: WeightUpdate) -> Result<Vec<f64>> {
    ensure_len("weight gradient", grad.len(), x.len())?;
    let raw: Vec<f64> = match mode {
        WeightUpdate::Step { lambda } => {
            if !(lambda > 0.0) {
                return usage(format!("λ must be positive (got {lambda})"));
            }
            x.iter().zip(grad).map(|(x, g)| (x + 0.5 / lambda * g).abs()).collect()
        }
        WeightUpdate::Replace => grad.iter().map(|g| g.abs()).collect(),
    };
    normalize_amplitudes(&raw)
        .map_err(|_| Error::Degenerate("weight update vanished: all A_j are zero".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightOptimization {
    pub efficiency_history: Vec<f64>,
    pub profile: InhomProfile,
}

/// Iterated weight updates. In step mode a step that lowers `η_tot` is
/// halved until it does not.
pub fn optimize_weights(
    input: &InputMode,
    cfg: &CribConfig,
    mode: WeightUpdate,
    iterations: usize,
) -> Result<WeightOptimization> {
    let mut cfg = cfg.clone();
    let mut traj = crib_forward(input, &cfg)?;
    let mut history = vec![traj.total_efficiency()];
    for _ in 0..iterations {
        let adj = crib_adjoint(&traj, &cfg)?;
        let grad = weight_gradient(&traj, &adj, &cfg)?;
        let mut current = mode;
        let mut accepted = None;
        for _ in 0..40 {
            let x = weight_update(cfg.profile.amplitudes(), &grad, current)?;
            let trial = cfg.with_profile(cfg.profile.with_weights(&x)?);
            let t = crib_forward(input, &trial)?;
            match current {
                WeightUpdate::Step { lambda } if t.total_efficiency() < traj.total_efficiency() => {
                    current = WeightUpdate::Step { lambda: 2.0 * lambda };
                }
                _ => {
                    accepted = Some((trial, t));
                    break;
                }
            }
        }
        let Some((next_cfg, next)) = accepted else { break };
        cfg = next_cfg;
        traj = next;
        history.push(traj.total_efficiency());
    }
    Ok(WeightOptimization { efficiency_history: history, profile: cfg.profile })
}

/// Width ascent by repeated [`width_update`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthAscent {
    pub width_history: Vec<f64>,
    pub efficiency_history: Vec<f64>,
    pub converged: bool,
}

impl WidthAscent {
    pub fn width(&self) -> f64 {
        *self.width_history.last().expect("nonempty")
    }

    pub fn efficiency(&self) -> f64 {
        *self.efficiency_history.last().expect("nonempty")
    }
}

/// Gradient ascent on `Δ_I` from `cfg`'s current width. Uses `cfg.lambda`,
/// `max_iters`, `tol`, `patience` and `step_growth`; steps that lower `η_tot`
/// are always halved. A start at exactly zero width is stationary for
/// symmetric profiles, so start slightly above it.
pub fn ascend_width(input: &InputMode, cfg: &CribConfig, ascent: &AscentConfig) -> Result<WidthAscent> {
    ascent.validate()?;
    let mut cfg = cfg.clone();
    let mut traj = crib_forward(input, &cfg)?;
    let mut widths = vec![cfg.profile.width().unwrap_or(0.0)];
    let mut effs = vec![traj.total_efficiency()];
    let mut step = 0.5 / ascent.lambda;
    let mut stalled = 0;
    let mut converged = false;
    for _ in 0..ascent.max_iters {
        let adj = crib_adjoint(&traj, &cfg)?;
        let g = width_gradient(&traj, &adj, &cfg)?;
        let w0 = *widths.last().expect("nonempty");
        let mut next = None;
        for _ in 0..60 {
            let w = (w0 + step * g).max(0.0);
            let trial = cfg.with_width(w)?;
            let t = crib_forward(input, &trial)?;
            if t.total_efficiency() >= traj.total_efficiency() {
                next = Some((w, trial, t));
                break;
            }
            step *= 0.5;
        }
        let Some((w, trial, t)) = next else {
            converged = true;
            break;
        };
        let change = t.total_efficiency() - traj.total_efficiency();
        cfg = trial;
        traj = t;
        widths.push(w);
        effs.push(traj.total_efficiency());
        step *= ascent.step_growth;
        if change.abs() < ascent.tol && (w - w0).abs() < 1e-9 * w0.max(1.0) + ascent.tol {
            stalled += 1;
            if stalled >= ascent.patience {
                converged = true;
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok(WidthAscent { width_history: widths, efficiency_history: effs, converged })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthOptimization {
    pub width: f64,
    pub efficiency: f64,
    /// `(width, η_tot)` at every scanned width.
    pub scan: Vec<(f64, f64)>,
}

/// Scans `widths` (in parallel), then refines around the best by golden
/// section between its neighbours. Include `0` in the scan to compare
/// against the homogeneous line.
pub fn optimize_width(input: &InputMode, cfg: &CribConfig, widths: &[f64]) -> Result<WidthOptimization> {
    if widths.is_empty() {
        return usage("width scan is empty");
    }
    let mut sorted: Vec<f64> = widths.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted[0] < 0.0 {
        return usage("widths must be nonnegative");
    }
    let eval = |w: f64| -> Result<f64> { crib_efficiency(input, &cfg.with_width(w)?) };
    let scan: Vec<(f64, f64)> = sorted
        .par_iter()
        .map(|&w| eval(w).map(|e| (w, e)))
        .collect::<Result<_>>()?;
    let best = scan
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .expect("nonempty");
    let (mut width, mut efficiency) = scan[best];
    if scan.len() >= 2 {
        let lo = scan[best.saturating_sub(1)].0;
        let hi = scan[(best + 1).min(scan.len() - 1)].0;
        let (w, e) = golden_max(&eval, lo, hi, 1e-2 * (hi - lo).max(1e-12), 40)?;
        if e > efficiency {
            width = w;
            efficiency = e;
        }
    }
    Ok(WidthOptimization { width, efficiency, scan })
}

fn golden_max<F: Fn(f64) -> Result<f64>>(f: &F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..max_iter {
        if (b - a).abs() < tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}
