//! Gradient ascent over control fields, and finite-step input-mode updates.
//!
//! Problems report the true functional derivative `δη/δΩ(t)` (for complex
//! controls packed as `∂η/∂Re Ω + i ∂η/∂Im Ω`). The update follows the usual
//! convention for these storage problems,
//!
//! ```text
//! Ω(t) → Ω(t) − (1/λ) Im[S̄* P − P̄ S*] = Ω(t) + (1/2λ) δη/δΩ(t),
//! ```
//!
//! so `λ` has the same meaning for the cavity and free-space models: too small
//! a `λ` overshoots and the efficiency oscillates instead of climbing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::CavityAdjoint;
use crate::error::{usage, Error, Result};
use crate::free_space::FreeSpaceAdjoint;
use crate::numerics::{TimeGrid, C64, I};
use crate::signal::{ControlField, InputMode};

/// Efficiency and gradient at one control.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub efficiency: f64,
    pub gradient: Vec<C64>,
}

/// A forward/adjoint/gradient pipeline for one objective. Implementations
/// must be pure so that starts can run in parallel.
pub trait ControlProblem: Sync {
    fn evaluate(&self, control: &ControlField) -> Result<Evaluation>;

    /// Forward pass only.
    fn efficiency(&self, control: &ControlField) -> Result<f64> {
        Ok(self.evaluate(control)?.efficiency)
    }

    /// Restrict updates to real controls (the gradient's imaginary part is dropped).
    fn real_control(&self) -> bool {
        true
    }
}

/// How to enforce `∫|Ω|² dt ≤ E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Gradient step, then rescale onto the bound when it is exceeded.
    #[default]
    Project,
    /// Replace `Ω` by the gradient, rescaled to the bound.
    ReplaceWithGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AscentConfig {
    /// Step parameter `λ`; the step along `δη/δΩ` is `1/(2λ)`.
    pub lambda: f64,
    pub max_iters: usize,
    /// Efficiency change regarded as stalled.
    pub tol: f64,
    /// Consecutive stalled iterations before stopping.
    pub patience: usize,
    /// Halve the step whenever a step would lower the efficiency.
    pub backtracking: bool,
    /// Factor applied to the step after every accepted iteration; `1` keeps
    /// the step constant. Values above one only make sense with backtracking
    /// and help starts far from the optimum, where the gradient is tiny.
    #[serde(default = "one")]
    pub step_growth: f64,
    /// Constant initial controls for multi-start runs.
    #[serde(default)]
    pub multi_start: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            max_iters: 500,
            tol: 1e-7,
            patience: 5,
            backtracking: true,
            step_growth: 1.0,
            multi_start: vec![],
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return usage(format!("λ must be positive (got {})", self.lambda));
        }
        if self.max_iters == 0 || self.patience == 0 {
            return usage("max_iters and patience must be at least 1");
        }
        if !(self.tol > 0.0) {
            return usage("tol must be positive");
        }
        if !(self.step_growth >= 1.0) || !self.step_growth.is_finite() {
            return usage(format!("step_growth must be at least 1 (got {})", self.step_growth));
        }
        if self.multi_start.iter().any(|v| !v.is_finite()) {
            return usage("multi-start controls must be finite");
        }
        Ok(())
    }

    fn step(&self) -> f64 {
        0.5 / self.lambda
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `|Δη| < tol` for `patience` consecutive iterations.
    Converged,
    /// Backtracking could not find an improving step.
    Stationary,
    MaxIterations,
    /// The efficiency went down repeatedly without backtracking.
    Oscillating,
    /// Efficiency stayed below `1e-6` under an energy bound.
    BelowThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// Efficiency of the initial control followed by every accepted iterate.
    pub efficiency_history: Vec<f64>,
    /// Max-norm of the gradient at the same controls.
    pub gradient_norm_history: Vec<f64>,
    pub control: ControlField,
    pub converged: bool,
    pub iterations_used: usize,
    pub stop_reason: StopReason,
    pub diagnostic: Option<String>,
}

impl OptimizationResult {
    pub fn efficiency(&self) -> f64 {
        *self.efficiency_history.last().expect("history is never empty")
    }

    /// First iteration whose efficiency is within `tol` of `target`, if any.
    pub fn iterations_to_reach(&self, target: f64, tol: f64) -> Option<usize> {
        self.efficiency_history.iter().position(|&e| (e - target).abs() <= tol)
    }
}

fn direction(eval: &Evaluation, real: bool) -> Vec<C64> {
    if real {
        eval.gradient.iter().map(|g| C64::new(g.re, 0.0)).collect()
    } else {
        eval.gradient.clone()
    }
}

fn max_norm(g: &[C64]) -> f64 {
    g.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Efficiency decreases larger than this count as oscillation.
const DROP_TOL: f64 = 1e-9;

/// Cap on the grown step relative to `1/(2λ)`.
const MAX_STEP_FACTOR: f64 = 1e30;

/// Below this efficiency nothing has been stored yet and a stall is not
/// taken as convergence.
const EMPTY: f64 = 1e-6;

struct Ascent<'a, P: ControlProblem + ?Sized> {
    problem: &'a P,
    cfg: &'a AscentConfig,
    bound: Option<(f64, ConstraintMode)>,
}

impl<P: ControlProblem + ?Sized> Ascent<'_, P> {
    fn project(&self, control: ControlField) -> ControlField {
        match self.bound {
            Some((bound, _)) => {
                let energy = control.energy();
                if energy > bound && energy > 0.0 {
                    control.scaled((bound / energy).sqrt())
                } else {
                    control
                }
            }
            None => control,
        }
    }

    fn propose(&self, control: &ControlField, dir: &[C64], step: f64) -> Result<ControlField> {
        match self.bound {
            Some((bound, ConstraintMode::ReplaceWithGradient)) => {
                let g = ControlField::new(dir.to_vec(), *control.grid())?;
                let e = g.energy();
                if !(e > 0.0) {
                    return Err(Error::Degenerate("gradient vanished".into()));
                }
                Ok(g.scaled((bound / e).sqrt()))
            }
            _ => Ok(self.project(control.stepped(dir, step)?)),
        }
    }

    fn run(&self, init: &ControlField) -> Result<OptimizationResult> {
        self.cfg.validate()?;
        let real = self.problem.real_control();
        let mut control = self.project(init.clone());
        let mut eval = self.problem.evaluate(&control)?;
        let mut eff_hist = vec![eval.efficiency];
        let mut grad_hist = vec![max_norm(&direction(&eval, real))];
        let mut step = self.cfg.step();
        let mut stalled = 0;
        let mut drops = 0;
        // A growing step is still searching for its scale until it first
        // overshoots; stalls before that are not convergence.
        let mut calibrated = self.cfg.step_growth == 1.0;
        let mut stop = StopReason::MaxIterations;

        if grad_hist[0] == 0.0 {
            // Nothing to climb: zero input or an exactly stationary start.
            stop = StopReason::Converged;
        } else {
            for _ in 0..self.cfg.max_iters {
                let dir = direction(&eval, real);
                let (candidate, cand_eval) = if self.cfg.backtracking {
                    let mut halvings = 0;
                    loop {
                        let candidate = self.propose(&control, &dir, step)?;
                        // A step large enough to blow up the solver counts as a failed step.
                        let tried = match self.problem.evaluate(&candidate) {
                            Err(Error::Numerical { .. }) => None,
                            other => Some(other?),
                        };
                        match tried {
                            Some(e) if e.efficiency >= eval.efficiency => break (Some(candidate), Some(e)),
                            _ if halvings >= 60 => break (None, None),
                            _ => {
                                step *= 0.5;
                                halvings += 1;
                                calibrated = true;
                            }
                        }
                    }
                } else {
                    let candidate = self.propose(&control, &dir, step)?;
                    let e = self.problem.evaluate(&candidate)?;
                    (Some(candidate), Some(e))
                };
                let (Some(candidate), Some(cand_eval)) = (candidate, cand_eval) else {
                    stop = StopReason::Stationary;
                    break;
                };
                let change = cand_eval.efficiency - eval.efficiency;
                if change < -DROP_TOL {
                    drops += 1;
                }
                control = candidate;
                eval = cand_eval;
                step = (step * self.cfg.step_growth).min(MAX_STEP_FACTOR * self.cfg.step());
                eff_hist.push(eval.efficiency);
                grad_hist.push(max_norm(&direction(&eval, real)));
                if !eval.efficiency.is_finite() {
                    return Err(Error::Numerical {
                        what: "efficiency became non-finite".into(),
                        max_abs: f64::INFINITY,
                    });
                }
                if change.abs() < self.cfg.tol && eval.efficiency >= EMPTY && calibrated {
                    stalled += 1;
                    if stalled >= self.cfg.patience {
                        stop = StopReason::Converged;
                        break;
                    }
                } else {
                    stalled = 0;
                }
            }
        }

        let iterations_used = eff_hist.len() - 1;
        let mut diagnostic = None;
        if !self.cfg.backtracking && drops >= 3 && drops * 5 >= iterations_used {
            stop = StopReason::Oscillating;
            diagnostic = Some(format!(
                "efficiency decreased on {drops} of {iterations_used} iterations; \
                 the step 1/λ is too large (λ = {}), increase λ or enable backtracking",
                self.cfg.lambda
            ));
        }
        if self.bound.is_some() && eval.efficiency < 1e-6 {
            stop = StopReason::BelowThreshold;
            diagnostic = Some("energy bound too small: efficiency stays below 1e-6".into());
        }
        let converged = matches!(stop, StopReason::Converged | StopReason::Stationary);
        Ok(OptimizationResult {
            efficiency_history: eff_hist,
            gradient_norm_history: grad_hist,
            control,
            converged,
            iterations_used,
            stop_reason: stop,
            diagnostic,
        })
    }
}

/// Gradient ascent `Ω ← Ω + (1/2λ) δη/δΩ` from `init`.
pub fn ascend_control<P: ControlProblem + ?Sized>(
    problem: &P,
    init: &ControlField,
    cfg: &AscentConfig,
) -> Result<OptimizationResult> {
    Ascent { problem, cfg, bound: None }.run(init)
}

/// Gradient ascent subject to `∫|Ω|² dt ≤ energy_bound`.
pub fn ascend_control_energy_constrained<P: ControlProblem + ?Sized>(
    problem: &P,
    init: &ControlField,
    cfg: &AscentConfig,
    energy_bound: f64,
    mode: ConstraintMode,
) -> Result<OptimizationResult> {
    if !(energy_bound > 0.0) || !energy_bound.is_finite() {
        return usage(format!("energy bound must be positive (got {energy_bound})"));
    }
    Ascent { problem, cfg, bound: Some((energy_bound, mode)) }.run(init)
}

/// Results of several starts, best first by final efficiency.
#[derive(Debug, Clone)]
pub struct MultiStartResult {
    pub starts: Vec<OptimizationResult>,
    pub best: usize,
}

impl MultiStartResult {
    pub fn best(&self) -> &OptimizationResult {
        &self.starts[self.best]
    }

    /// Max minus min final efficiency over starts.
    pub fn spread(&self) -> f64 {
        let effs: Vec<f64> = self.starts.iter().map(|r| r.efficiency()).collect();
        effs.iter().cloned().fold(f64::MIN, f64::max) - effs.iter().cloned().fold(f64::MAX, f64::min)
    }
}

/// Runs [`ascend_control`] from each initial control in parallel.
pub fn ascend_multi_start<P: ControlProblem + ?Sized>(
    problem: &P,
    inits: &[ControlField],
    cfg: &AscentConfig,
) -> Result<MultiStartResult> {
    if inits.is_empty() {
        return usage("multi-start needs at least one initial control");
    }
    let starts: Vec<OptimizationResult> = inits
        .par_iter()
        .map(|c| ascend_control(problem, c, cfg))
        .collect::<Result<_>>()?;
    let best = starts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.efficiency().total_cmp(&b.1.efficiency()))
        .map(|(i, _)| i)
        .expect("nonempty");
    Ok(MultiStartResult { starts, best })
}

/// Best constant real control `Ω(t) ≡ v` for `v` in `[lo, hi]`: a log scan
/// with `per_decade` points, then golden-section refinement around the best.
/// Returns `(v, η)`.
pub fn best_constant_control<P: ControlProblem + ?Sized>(
    problem: &P,
    grid: TimeGrid,
    lo: f64,
    hi: f64,
    per_decade: usize,
) -> Result<(f64, f64)> {
    if !(lo > 0.0) || !(hi > lo) || per_decade == 0 {
        return usage(format!("constant-control search needs 0 < lo < hi (got {lo}..{hi})"));
    }
    let eval = |ln_v: f64| -> Result<f64> {
        match problem.efficiency(&ControlField::constant(ln_v.exp(), grid)) {
            Err(Error::Numerical { .. }) => Ok(f64::NEG_INFINITY),
            other => other,
        }
    };
    let n = ((hi / lo).log10() * per_decade as f64).ceil() as usize;
    let h = (hi / lo).ln() / n as f64;
    let scan: Vec<(f64, f64)> = (0..=n)
        .into_par_iter()
        .map(|k| {
            let x = lo.ln() + k as f64 * h;
            eval(x).map(|e| (x, e))
        })
        .collect::<Result<_>>()?;
    let (mut best_x, mut best_e) = scan.iter().copied().fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let (mut a, mut b) = (best_x - h, best_x + h);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (eval(c)?, eval(d)?);
    while b - a > 1e-6 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = eval(d)?;
        }
    }
    for (x, e) in [(c, fc), (d, fd)] {
        if e > best_e {
            best_x = x;
            best_e = e;
        }
    }
    if !best_e.is_finite() {
        return Err(Error::Numerical { what: "every constant control diverged".into(), max_abs: f64::INFINITY });
    }
    Ok((best_x.exp(), best_e))
}

/// Cavity input-mode update `E_in(t) → −i P̄(t)`, renormalized.
pub fn input_mode_step_cavity(adj: &CavityAdjoint) -> Result<InputMode> {
    let values: Vec<C64> = adj.p.iter().map(|p| -I * p).collect();
    InputMode::normalized(values, adj.grid).map(|(m, _)| m).map_err(|_| {
        Error::Degenerate("adjoint polarization vanishes (S(T) = 0?): no input-mode update".into())
    })
}

/// Free-space input-mode update `E_in(t) → Ē(0, t)`, renormalized.
pub fn input_mode_step_free(adj: &FreeSpaceAdjoint) -> Result<InputMode> {
    let values: Vec<C64> = adj.e.column(0).to_vec();
    InputMode::normalized(values, adj.time).map(|(m, _)| m).map_err(|_| {
        Error::Degenerate("backward-retrieval output Ē(0, t) vanishes: no input-mode update".into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::TimeGrid;

    /// η = 1 − ∫(Ω − target)² dt on a real control.
    struct Quadratic {
        target: f64,
    }

    impl ControlProblem for Quadratic {
        fn evaluate(&self, c: &ControlField) -> Result<Evaluation> {
            let g = c.grid();
            let w = g.weights();
            let mut eff = 1.0;
            let mut grad = Vec::new();
            for (v, wk) in c.values().iter().zip(&w) {
                let d = v.re - self.target;
                eff -= wk * d * d;
                grad.push(C64::new(-2.0 * d, 0.0));
            }
            Ok(Evaluation { efficiency: eff, gradient: grad })
        }
    }

    fn grid() -> TimeGrid {
        TimeGrid::new(0.0, 1.0, 11).unwrap()
    }

    #[test]
    fn climbs_a_quadratic() {
        let cfg = AscentConfig { lambda: 2.0, ..Default::default() };
        let r = ascend_control(&Quadratic { target: 1.0 }, &ControlField::zero(grid()), &cfg).unwrap();
        assert!(r.converged);
        assert!((r.efficiency() - 1.0).abs() < 1e-6);
        assert_eq!(r.efficiency_history.len(), r.gradient_norm_history.len());
        assert!(r.efficiency_history.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn overshooting_without_backtracking_is_diagnosed() {
        // step 1/(2λ) = 5 along −2(Ω−1) overshoots by a factor 9 each iteration.
        let cfg = AscentConfig { lambda: 0.1, backtracking: false, max_iters: 20, ..Default::default() };
        let r = ascend_control(&Quadratic { target: 1.0 }, &ControlField::zero(grid()), &cfg).unwrap();
        assert_eq!(r.stop_reason, StopReason::Oscillating);
        assert!(r.diagnostic.unwrap().contains("increase λ"));
        assert!(!r.converged);
    }

    #[test]
    fn energy_bound_is_respected() {
        let cfg = AscentConfig { lambda: 2.0, ..Default::default() };
        let r = ascend_control_energy_constrained(
            &Quadratic { target: 1.0 },
            &ControlField::zero(grid()),
            &cfg,
            0.25,
            ConstraintMode::Project,
        )
        .unwrap();
        assert!(r.control.energy() <= 0.25 + 1e-12);
        assert!((r.control.values()[3].re - 0.5).abs() < 1e-6);
        assert!(ascend_control_energy_constrained(
            &Quadratic { target: 1.0 },
            &ControlField::zero(grid()),
            &cfg,
            0.0,
            ConstraintMode::Project
        )
        .is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AscentConfig { lambda: 0.0, ..Default::default() }.validate().is_err());
        assert!(AscentConfig { patience: 0, ..Default::default() }.validate().is_err());
        assert!(AscentConfig::default().validate().is_ok());
    }

    #[test]
    fn multi_start_picks_best() {
        let cfg = AscentConfig { lambda: 2.0, max_iters: 3, ..Default::default() };
        let inits = vec![ControlField::constant(-3.0, grid()), ControlField::constant(0.9, grid())];
        let r = ascend_multi_start(&Quadratic { target: 1.0 }, &inits, &cfg).unwrap();
        assert_eq!(r.best, 1);
        assert!(r.spread() > 0.0);
    }
}
