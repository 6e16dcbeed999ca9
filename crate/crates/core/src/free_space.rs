//! Free-space storage in the co-moving frame, its adjoint, and storage
//! followed by retrieval.
//!
//! ```text
//! ∂_z E = i√d P,    ∂_t P = −P + i√d E + iΩ S,    ∂_t S = iΩ P
//! E(0, t) = E_in(t),  P(z, 0) = S(z, 0) = 0
//! ```
//!
//! `E` has no time derivative, so it is rebuilt from `P` by trapezoid
//! quadrature along `z` at every RK4 stage (a differential-algebraic
//! treatment). `d` is the halved optical depth: with `Ω = 0` the steady-state
//! intensity transmission is `e^{−2d}`.
//!
//! Arrays are indexed `[time node, space node]`.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, usage, Error, Result};
use crate::numerics::{
    check_finite, cumulative_trapezoid_into, max_abs, reverse_cumulative_trapezoid_into,
    simpson, stage_value, trapezoid, Rk4, SpaceGrid, TimeGrid, C64, I, ZERO,
};
use crate::signal::{ControlField, InputMode};

const BLOWUP: f64 = 1e100;

/// Largest optical depth accepted by default.
pub const MAX_OPTICAL_DEPTH: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeSpaceParams {
    /// Optical depth `d` (halved convention).
    pub optical_depth: f64,
}

impl FreeSpaceParams {
    pub fn new(optical_depth: f64) -> Result<Self> {
        let p = Self { optical_depth };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.optical_depth > 0.0) || !self.optical_depth.is_finite() {
            return usage(format!("optical depth must be positive (got {})", self.optical_depth));
        }
        if self.optical_depth > MAX_OPTICAL_DEPTH {
            return usage(format!(
                "optical depth {} exceeds the supported maximum {MAX_OPTICAL_DEPTH}",
                self.optical_depth
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeSpaceFields {
    pub time: TimeGrid,
    pub space: SpaceGrid,
    pub e: Array2<C64>,
    pub p: Array2<C64>,
    pub s: Array2<C64>,
}

impl FreeSpaceFields {
    pub fn final_spin(&self) -> Vec<C64> {
        self.s.row(self.time.len() - 1).to_vec()
    }

    pub fn final_polarization(&self) -> Vec<C64> {
        self.p.row(self.time.len() - 1).to_vec()
    }

    /// `η_s = ∫₀¹ |S(z, T)|² dz`.
    pub fn storage_efficiency(&self) -> f64 {
        storage_efficiency(self)
    }

    /// `∫|E(1, t)|² dt` over the run.
    pub fn transmitted_energy(&self) -> f64 {
        let col: Vec<f64> = self.e.column(self.space.len() - 1).iter().map(|v| v.norm_sqr()).collect();
        trapezoid(&col, self.time.spacing())
    }

    /// `∫₀¹ (|P|² + |S|²) dz` at time node `k`.
    pub fn atomic_excitation(&self, k: usize) -> f64 {
        let v: Vec<f64> = self
            .p
            .row(k)
            .iter()
            .zip(self.s.row(k))
            .map(|(p, s)| p.norm_sqr() + s.norm_sqr())
            .collect();
        trapezoid(&v, self.space.spacing())
    }

    /// Output envelope `E(1, t)`.
    pub fn output(&self) -> Vec<C64> {
        self.e.column(self.space.len() - 1).to_vec()
    }
}

/// Integrated flux balance of a run,
/// `∫|E(0,t)|² + N(t₀) − ∫|E(1,t)|² − N(t_end) − 2∫∫|P|²`, where
/// `N = ∫(|P|² + |S|²) dz`. The balance terms use Simpson's rule in both `t`
/// and `z`; with trapezoid measures their own quadrature error dominates.
pub fn flux_residual(fields: &FreeSpaceFields) -> f64 {
    let nt = fields.time.len();
    let hz = fields.space.spacing();
    let nz = fields.space.len();
    let col = |j: usize| -> Vec<f64> { fields.e.column(j).iter().map(|v| v.norm_sqr()).collect() };
    let along_z = |k: usize, with_spin: bool| -> f64 {
        let v: Vec<f64> = (0..nz)
            .map(|j| fields.p[(k, j)].norm_sqr() + if with_spin { fields.s[(k, j)].norm_sqr() } else { 0.0 })
            .collect();
        simpson(&v, hz)
    };
    let loss: Vec<f64> = (0..nt).map(|k| 2.0 * along_z(k, false)).collect();
    let h = fields.time.spacing();
    simpson(&col(0), h) + along_z(0, true) - simpson(&col(nz - 1), h) - along_z(nt - 1, true) - simpson(&loss, h)
}

/// `η_s = ∫₀¹ |S(z, T)|² dz` by trapezoid.
pub fn storage_efficiency(fields: &FreeSpaceFields) -> f64 {
    spatial_norm_sq(&fields.final_spin(), &fields.space)
}

pub fn spatial_norm_sq(f: &[C64], space: &SpaceGrid) -> f64 {
    let v: Vec<f64> = f.iter().map(|x| x.norm_sqr()).collect();
    trapezoid(&v, space.spacing())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeSpaceAdjoint {
    pub time: TimeGrid,
    pub space: SpaceGrid,
    pub e: Array2<C64>,
    pub p: Array2<C64>,
    pub s: Array2<C64>,
}

fn blowup(what: &str, state: &[C64]) -> Result<()> {
    let m = max_abs(state);
    if !m.is_finite() || m > BLOWUP {
        return Err(Error::Numerical {
            what: format!("{what}: solution diverged; refine the time grid"),
            max_abs: m,
        });
    }
    Ok(())
}

/// Integrates the free-space equations from arbitrary `P(z, t₀)`, `S(z, t₀)`.
/// `input = None` means `E(0, t) = 0`.
pub fn integrate(
    control: &ControlField,
    input: Option<&InputMode>,
    params: &FreeSpaceParams,
    space: &SpaceGrid,
    p0: &[C64],
    s0: &[C64],
) -> Result<FreeSpaceFields> {
    params.validate()?;
    let time = *control.grid();
    if let Some(e) = input {
        if e.grid() != &time {
            return usage("control and input mode live on different grids");
        }
    }
    let nz = space.len();
    ensure_len("initial P(z)", p0.len(), nz)?;
    ensure_len("initial S(z)", s0.len(), nz)?;
    let nt = time.len();
    let h = time.spacing();
    let hz = space.spacing();
    let sd = params.optical_depth.sqrt();
    let omega = control.values();
    let zero_input;
    let e_in = match input {
        Some(e) => e.values(),
        None => {
            zero_input = vec![ZERO; nt];
            &zero_input
        }
    };

    let mut e = Array2::<C64>::zeros((nt, nz));
    let mut p = Array2::<C64>::zeros((nt, nz));
    let mut s = Array2::<C64>::zeros((nt, nz));
    let mut state: Vec<C64> = p0.iter().chain(s0).copied().collect();
    check_finite("free-space initial state", &state)?;
    let mut field = vec![ZERO; nz];
    let mut source = vec![ZERO; nz];

    let mut record = |k: usize, state: &[C64], field: &mut [C64], source: &mut [C64]| {
        for (src, pv) in source.iter_mut().zip(&state[..nz]) {
            *src = I * sd * pv;
        }
        cumulative_trapezoid_into(source, hz, e_in[k], field);
        for j in 0..nz {
            e[(k, j)] = field[j];
            p[(k, j)] = state[j];
            s[(k, j)] = state[nz + j];
        }
    };
    record(0, &state, &mut field, &mut source);

    let mut rk = Rk4::new(2 * nz);
    for k in 0..nt - 1 {
        rk.step(&mut state, h, |stage, y, dy| {
            let om = stage_value(omega, k, stage);
            let boundary = stage_value(e_in, k, stage);
            let (yp, ys) = y.split_at(nz);
            for (src, pv) in source.iter_mut().zip(yp) {
                *src = I * sd * pv;
            }
            cumulative_trapezoid_into(&source, hz, boundary, &mut field);
            let (dp, ds) = dy.split_at_mut(nz);
            for j in 0..nz {
                dp[j] = -yp[j] + I * sd * field[j] + I * om * ys[j];
                ds[j] = I * om * yp[j];
            }
        });
        blowup("free-space forward", &state)?;
        record(k + 1, &state, &mut field, &mut source);
    }
    Ok(FreeSpaceFields { time, space: *space, e, p, s })
}

/// Storage run from zero atomic excitation.
pub fn storage_forward(
    control: &ControlField,
    input: &InputMode,
    params: &FreeSpaceParams,
    space: &SpaceGrid,
) -> Result<FreeSpaceFields> {
    let zeros = vec![ZERO; space.len()];
    integrate(control, Some(input), params, space, &zeros, &zeros)
}

/// Backward costates:
///
/// ```text
/// ∂_z Ē = i√d P̄,   ∂_t P̄ = P̄ + i√d Ē + iΩ S̄,   ∂_t S̄ = iΩ P̄
/// Ē(1, t) = boundary(t) (zero unless given),  P̄(z, T) = p_final,  S̄(z, T) = s_final
/// ```
///
/// integrated as forward RK4 in `τ = T − t`.
pub fn adjoint_general(
    control: &ControlField,
    params: &FreeSpaceParams,
    space: &SpaceGrid,
    p_final: &[C64],
    s_final: &[C64],
    boundary: Option<&[C64]>,
) -> Result<FreeSpaceAdjoint> {
    params.validate()?;
    let time = *control.grid();
    let nz = space.len();
    let nt = time.len();
    ensure_len("terminal P̄(z)", p_final.len(), nz)?;
    ensure_len("terminal S̄(z)", s_final.len(), nz)?;
    if let Some(b) = boundary {
        ensure_len("adjoint boundary Ē(1, t)", b.len(), nt)?;
    }
    let h = time.spacing();
    let hz = space.spacing();
    let sd = params.optical_depth.sqrt();
    let reversed: Vec<C64> = control.values().iter().rev().copied().collect();
    let boundary_rev: Vec<C64> = match boundary {
        Some(b) => b.iter().rev().copied().collect(),
        None => vec![ZERO; nt],
    };

    let mut e = Array2::<C64>::zeros((nt, nz));
    let mut p = Array2::<C64>::zeros((nt, nz));
    let mut s = Array2::<C64>::zeros((nt, nz));
    let mut state: Vec<C64> = p_final.iter().chain(s_final).copied().collect();
    check_finite("free-space adjoint terminal state", &state)?;
    let mut field = vec![ZERO; nz];
    let mut source = vec![ZERO; nz];

    let mut record = |k: usize, state: &[C64], field: &mut [C64], source: &mut [C64]| {
        let row = nt - 1 - k;
        for (src, pv) in source.iter_mut().zip(&state[..nz]) {
            *src = I * sd * pv;
        }
        reverse_cumulative_trapezoid_into(source, hz, boundary_rev[k], field);
        for j in 0..nz {
            e[(row, j)] = field[j];
            p[(row, j)] = state[j];
            s[(row, j)] = state[nz + j];
        }
    };
    record(0, &state, &mut field, &mut source);

    let mut rk = Rk4::new(2 * nz);
    for k in 0..nt - 1 {
        rk.step(&mut state, h, |stage, y, dy| {
            let om = stage_value(&reversed, k, stage);
            let b = stage_value(&boundary_rev, k, stage);
            let (yp, ys) = y.split_at(nz);
            for (src, pv) in source.iter_mut().zip(yp) {
                *src = I * sd * pv;
            }
            reverse_cumulative_trapezoid_into(&source, hz, b, &mut field);
            let (dp, ds) = dy.split_at_mut(nz);
            for j in 0..nz {
                dp[j] = -yp[j] - I * sd * field[j] - I * om * ys[j];
                ds[j] = -I * om * yp[j];
            }
        });
        blowup("free-space adjoint", &state)?;
        record(k + 1, &state, &mut field, &mut source);
    }
    Ok(FreeSpaceAdjoint { time, space: *space, e, p, s })
}

/// Adjoint of storage alone: `Ē(1, t) = 0`, `P̄(z, T) = 0`, `S̄(z, T) = s_final`.
pub fn adjoint_backward(
    control: &ControlField,
    s_final: &[C64],
    params: &FreeSpaceParams,
    space: &SpaceGrid,
) -> Result<FreeSpaceAdjoint> {
    adjoint_general(control, params, space, &vec![ZERO; space.len()], s_final, None)
}

/// `δη/δΩ(t) = −2 ∫₀¹ dz Im[S̄* P − P̄ S*]` for a real control.
pub fn control_gradient(fields: &FreeSpaceFields, adj: &FreeSpaceAdjoint) -> Result<Vec<f64>> {
    if fields.time != adj.time || fields.space != adj.space {
        return usage("fields and adjoint are not aligned");
    }
    let nt = fields.time.len();
    let hz = fields.space.spacing();
    let mut integrand = vec![0.0; fields.space.len()];
    Ok((0..nt)
        .map(|k| {
            let (p, s) = (fields.p.row(k), fields.s.row(k));
            let (pb, sb) = (adj.p.row(k), adj.s.row(k));
            for (j, v) in integrand.iter_mut().enumerate() {
                *v = (sb[j].conj() * p[j] - pb[j] * s[j].conj()).im;
            }
            -2.0 * trapezoid(&integrand, hz)
        })
        .collect())
}

/// Storage efficiency and its control gradient in one call.
pub fn efficiency_and_gradient(
    control: &ControlField,
    input: &InputMode,
    params: &FreeSpaceParams,
    space: &SpaceGrid,
) -> Result<(f64, Vec<f64>)> {
    let fields = storage_forward(control, input, params, space)?;
    let adj = adjoint_backward(control, &fields.final_spin(), params, space)?;
    Ok((fields.storage_efficiency(), control_gradient(&fields, &adj)?))
}

/// Direction of retrieval relative to storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalDirection {
    /// Output leaves at `z = 1`, the far end from the input.
    Forward,
    /// Retrieval control enters from the far end; implemented by mirroring the
    /// spin wave `z → 1 − z` and running the forward solver.
    Backward,
}

/// Retrieval control on `[T_r, T_f]`; `T ≤ T_r < T_f` is checked against the
/// storage grid when used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalWindow {
    pub control: ControlField,
    pub direction: RetrievalDirection,
}

impl RetrievalWindow {
    pub fn new(control: ControlField, direction: RetrievalDirection) -> Self {
        Self { control, direction }
    }

    /// Constant control `amplitude` on `[t_r, t_r + length]` with at most
    /// `max_step` between nodes.
    pub fn constant(
        amplitude: f64,
        t_r: f64,
        length: f64,
        max_step: f64,
        direction: RetrievalDirection,
    ) -> Result<Self> {
        let steps = (length / max_step).ceil().max(1.0) as usize;
        let grid = TimeGrid::new(t_r, t_r + length, steps + 1)?;
        Ok(Self::new(ControlField::constant(amplitude, grid), direction))
    }

    pub fn t_r(&self) -> f64 {
        self.control.grid().t_start()
    }

    pub fn t_f(&self) -> f64 {
        self.control.grid().t_end()
    }

    fn validate(&self, storage_end: f64) -> Result<()> {
        if self.t_r() < storage_end - 1e-12 {
            return usage(format!(
                "retrieval must start after storage ends (T_r = {} < T = {storage_end})",
                self.t_r()
            ));
        }
        Ok(())
    }

    /// Same window with the duration doubled at the same node spacing.
    pub fn doubled(&self) -> Result<Self> {
        let g = self.control.grid();
        let grid = TimeGrid::new(g.t_start(), g.t_start() + 2.0 * g.duration(), 2 * g.len() - 1)?;
        let v = self.control.values();
        let ext: Vec<C64> = v.iter().copied().chain(std::iter::repeat(v[v.len() - 1]).take(g.len() - 1)).collect();
        Ok(Self::new(ControlField::new(ext, grid)?, self.direction))
    }
}

fn mirror(v: &[C64]) -> Vec<C64> {
    v.iter().rev().copied().collect()
}

/// Storage on `[0, T]` followed by retrieval on `[T_r, T_f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageRetrievalRun {
    pub storage: FreeSpaceFields,
    pub retrieval: FreeSpaceFields,
    /// `η_tot = ∫_{T_r}^{T_f} |E(1, t)|² dt`.
    pub total_efficiency: f64,
    /// Atomic excitation left at `T_f`, relative to the stored excitation.
    pub residual_fraction: f64,
    /// Residual above `1e-3` of the stored excitation.
    pub window_too_short: bool,
}

/// Hands the spin wave over to the retrieval window (`P` zeroed; no decay in
/// between) and retrieves.
pub fn storage_then_retrieval(
    storage_control: &ControlField,
    window: &RetrievalWindow,
    input: &InputMode,
    params: &FreeSpaceParams,
    space: &SpaceGrid,
) -> Result<StorageRetrievalRun> {
    window.validate(storage_control.grid().t_end())?;
    let storage = storage_forward(storage_control, input, params, space)?;
    let stored = storage.final_spin();
    let handoff = match window.direction {
        RetrievalDirection::Forward => stored,
        RetrievalDirection::Backward => mirror(&stored),
    };
    let retrieval = integrate(&window.control, None, params, space, &vec![ZERO; space.len()], &handoff)?;
    let total_efficiency = retrieval.transmitted_energy();
    let stored_norm = storage.storage_efficiency();
    let residual = retrieval.atomic_excitation(retrieval.time.len() - 1);
    let residual_fraction = if stored_norm > 0.0 { residual / stored_norm } else { 0.0 };
    Ok(StorageRetrievalRun {
        storage,
        retrieval,
        total_efficiency,
        residual_fraction,
        window_too_short: residual_fraction > 1e-3,
    })
}

/// Storage followed by forward retrieval (the retrieval control given).
pub fn storage_then_forward_retrieval(
    storage_control: &ControlField,
    window: &RetrievalWindow,
    input: &InputMode,
    params: &FreeSpaceParams,
    space: &SpaceGrid,
) -> Result<StorageRetrievalRun> {
    if window.direction != RetrievalDirection::Forward {
        return usage("storage_then_forward_retrieval needs a forward retrieval window");
    }
    storage_then_retrieval(storage_control, window, input, params, space)
}

/// Costates of storage followed by retrieval: retrieval window from
/// `Ē(1, t) = E(1, t)`, zero terminal state; storage window from `Ē(1, t) = 0`,
/// `P̄(z, T) = 0`, `S̄(z, T) = S̄(z, T_r)` (mirrored for backward retrieval).
pub fn storage_retrieval_adjoint(
    run: &StorageRetrievalRun,
    storage_control: &ControlField,
    window: &RetrievalWindow,
    params: &FreeSpaceParams,
) -> Result<(FreeSpaceAdjoint, FreeSpaceAdjoint)> {
    let space = run.storage.space;
    let zeros = vec![ZERO; space.len()];
    let out = run.retrieval.output();
    let retrieval_adj =
        adjoint_general(&window.control, params, &space, &zeros, &zeros, Some(&out))?;
    let at_tr = retrieval_adj.s.row(0).to_vec();
    let terminal = match window.direction {
        RetrievalDirection::Forward => at_tr,
        RetrievalDirection::Backward => mirror(&at_tr),
    };
    let storage_adj = adjoint_backward(storage_control, &terminal, params, &space)?;
    Ok((storage_adj, retrieval_adj))
}

/// Total efficiency and its gradient with respect to the storage control.
pub fn total_efficiency_and_gradient(
    storage_control: &ControlField,
    window: &RetrievalWindow,
    input: &InputMode,
    params: &FreeSpaceParams,
    space: &SpaceGrid,
) -> Result<(StorageRetrievalRun, Vec<f64>)> {
    let run = storage_then_retrieval(storage_control, window, input, params, space)?;
    let (adj, _) = storage_retrieval_adjoint(&run, storage_control, window, params)?;
    let g = control_gradient(&run.storage, &adj)?;
    Ok((run, g))
}

/// Modified Bessel function `I₀(x)` for `x ≥ 0` by its power series; all
/// terms are positive so there is no cancellation.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < 1e-17 * sum {
            return sum;
        }
        k += 1.0;
    }
}

/// Efficiency of complete retrieval from a spin wave, as a quadratic form
/// `η = ∫∫ k(z, z') S*(z) S(z') dz dz'` with
/// `k_fwd(z, z') = (d/2) e^{−d(2−z−z')/2} I₀(d√((1−z)(1−z')))`
/// and `k_bwd(z, z') = k_fwd(1−z, 1−z')`.
#[derive(Debug, Clone)]
pub struct RetrievalKernel {
    space: SpaceGrid,
    /// Kernel values pre-multiplied by the trapezoid weight of the column.
    weighted: Array2<f64>,
    weights: Vec<f64>,
}

impl RetrievalKernel {
    pub fn new(params: &FreeSpaceParams, space: &SpaceGrid, direction: RetrievalDirection) -> Self {
        let d = params.optical_depth;
        let n = space.len();
        let weights = space.weights();
        let mut weighted = Array2::<f64>::zeros((n, n));
        let dist = |k: usize| match direction {
            RetrievalDirection::Forward => 1.0 - space.node(k),
            RetrievalDirection::Backward => space.node(k),
        };
        for a in 0..n {
            for b in 0..=a {
                let (u, v) = (dist(a), dist(b));
                let k = 0.5 * d * (-0.5 * d * (u + v)).exp() * bessel_i0(d * (u * v).sqrt());
                weighted[(a, b)] = k * weights[b];
                weighted[(b, a)] = k * weights[a];
            }
        }
        Self { space: *space, weighted, weights }
    }

    /// `(K S)(z) = ∫ k(z, z') S(z') dz'`, the adjoint terminal condition for
    /// the complete-retrieval objective.
    pub fn apply(&self, spin: &[C64]) -> Vec<C64> {
        let n = self.space.len();
        (0..n)
            .map(|a| {
                let row = self.weighted.slice(s![a, ..]);
                row.iter().zip(spin).map(|(k, v)| v * *k).sum()
            })
            .collect()
    }

    pub fn efficiency(&self, spin: &[C64]) -> f64 {
        let ks = self.apply(spin);
        spin.iter()
            .zip(&ks)
            .zip(&self.weights)
            .map(|((s, k), w)| (s.conj() * k).re * w)
            .sum()
    }

    /// Largest retrieval efficiency over unit-norm spin waves (power iteration).
    pub fn max_efficiency(&self) -> f64 {
        let n = self.space.len();
        let mut v = vec![C64::new(1.0, 0.0); n];
        let mut lambda = 0.0;
        for _ in 0..500 {
            let norm = spatial_norm_sq(&v, &self.space).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            let next = self.apply(&v);
            let new_lambda = self.efficiency(&v);
            v = next;
            if (new_lambda - lambda).abs() < 1e-14 {
                return new_lambda;
            }
            lambda = new_lambda;
        }
        lambda
    }
}
