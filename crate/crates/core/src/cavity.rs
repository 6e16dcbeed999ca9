//! Cavity ("bad cavity") storage model and its adjoint.
//!
//! Simple resonant form, in units where `γ = 1`:
//!
//! ```text
//! Ṗ = −(1 + C) P + iΩ S + i√(2C) E_in,     Ṡ = iΩ P,     P(0) = S(0) = 0
//! ```
//!
//! with storage efficiency `|S(T)|²`. The generalized form adds complex
//! controls and inputs, a single-photon detuning `Δ`, spin decay `γ_s`,
//! frequency classes `(Δ_j, x_j)` and velocity-changing collisions `γ_c`.
//!
//! Adjoints are integrated as forward RK4 in `τ = T − t` on the same grid as
//! the forward run, so the adjoint of a storage run is, node for node, a
//! retrieval run with the time-reversed control.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, usage, Error, Result};
use crate::numerics::{check_finite, max_abs, stage_value, Rk4, TimeGrid, C64, I, ZERO};
use crate::profile::InhomProfile;
use crate::signal::{ControlField, InputMode};

/// Magnitude beyond which a run is declared to have blown up.
const BLOWUP: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Cooperativity `C`.
    pub cooperativity: f64,
    /// Single-photon detuning `Δ` in units of `γ`.
    #[serde(default)]
    pub detuning: f64,
    /// Spin-wave decay `γ_s`.
    #[serde(default)]
    pub spin_decay: f64,
    /// Velocity-changing collision rate `γ_c`.
    #[serde(default)]
    pub collision_rate: f64,
    /// Apply the collision term to the optical polarization as well as the
    /// spin wave. Dropping it is the usual approximation for `γ_c ≪ γ`.
    #[serde(default = "default_true")]
    pub collisions_in_polarization: bool,
}

fn default_true() -> bool {
    true
}

impl CavityParams {
    pub fn resonant(cooperativity: f64) -> Self {
        Self {
            cooperativity,
            detuning: 0.0,
            spin_decay: 0.0,
            collision_rate: 0.0,
            collisions_in_polarization: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.cooperativity, self.detuning, self.spin_decay, self.collision_rate]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return usage("cavity parameters must be finite");
        }
        if self.cooperativity < 0.0 || self.spin_decay < 0.0 || self.collision_rate < 0.0 {
            return usage("C, γ_s and γ_c must be nonnegative");
        }
        Ok(())
    }

    /// True when the simple resonant equations apply.
    pub fn is_simple(&self) -> bool {
        self.detuning == 0.0 && self.spin_decay == 0.0 && self.collision_rate == 0.0
    }

    /// Upper bound on storage efficiency, `C/(1+C)`.
    pub fn max_storage_efficiency(&self) -> f64 {
        self.cooperativity / (1.0 + self.cooperativity)
    }
}

/// Per-class polarizations, `n_t × n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFields {
    pub p: Array2<C64>,
    pub s: Array2<C64>,
}

/// Forward solution on the time grid. For the generalized model `p`, `s` are
/// the collective `Σ x_k P_k`, `Σ x_k S_k` and `classes` holds the per-class
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityTrajectory {
    pub grid: TimeGrid,
    pub p: Vec<C64>,
    pub s: Vec<C64>,
    pub classes: Option<ClassFields>,
}

impl CavityTrajectory {
    pub fn final_spin(&self) -> C64 {
        *self.s.last().expect("nonempty grid")
    }

    pub fn final_polarization(&self) -> C64 {
        *self.p.last().expect("nonempty grid")
    }

    /// `η_s = |S(T)|²`.
    pub fn storage_efficiency(&self) -> f64 {
        self.final_spin().norm_sqr()
    }
}

/// Costates `P̄`, `S̄` on the same grid, indexed by forward time.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityAdjoint {
    pub grid: TimeGrid,
    pub p: Vec<C64>,
    pub s: Vec<C64>,
    pub classes: Option<ClassFields>,
}

fn check_blowup(what: &str, state: &[C64]) -> Result<()> {
    let m = max_abs(state);
    if !m.is_finite() || m > BLOWUP {
        return Err(Error::Numerical {
            what: format!("{what}: solution diverged; control too strong for the time grid?"),
            max_abs: m,
        });
    }
    Ok(())
}

fn check_alignment(control: &ControlField, input: Option<&InputMode>) -> Result<()> {
    if let Some(e) = input {
        if e.grid() != control.grid() {
            return usage("control and input mode live on different grids");
        }
    }
    Ok(())
}

/// Integrates the simple model from arbitrary initial `(P, S)`.
///
/// `input = None` means no incoming light (retrieval).
pub fn integrate_simple(
    control: &ControlField,
    input: Option<&InputMode>,
    params: &CavityParams,
    initial: (C64, C64),
) -> Result<CavityTrajectory> {
    params.validate()?;
    check_alignment(control, input)?;
    let grid = *control.grid();
    let n = grid.len();
    let h = grid.spacing();
    let decay = 1.0 + params.cooperativity;
    let drive = (2.0 * params.cooperativity).sqrt();
    let omega = control.values();
    let zero_input;
    let e_in = match input {
        Some(e) => e.values(),
        None => {
            zero_input = vec![ZERO; n];
            &zero_input
        }
    };

    let mut p = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut state = [initial.0, initial.1];
    check_finite("cavity initial state", &state)?;
    p.push(state[0]);
    s.push(state[1]);
    let mut rk = Rk4::new(2);
    for k in 0..n - 1 {
        rk.step(&mut state, h, |stage, y, dy| {
            let om = stage_value(omega, k, stage);
            let e = stage_value(e_in, k, stage);
            dy[0] = -y[0] * decay + I * om * y[1] + I * drive * e;
            dy[1] = I * om * y[0];
        });
        check_blowup("cavity forward", &state)?;
        p.push(state[0]);
        s.push(state[1]);
    }
    Ok(CavityTrajectory { grid, p, s, classes: None })
}

/// Storage run of the simple resonant model from zero atomic excitation.
pub fn storage_forward(
    control: &ControlField,
    input: &InputMode,
    params: &CavityParams,
) -> Result<CavityTrajectory> {
    if !params.is_simple() {
        return usage("storage_forward is the resonant model; use generalized_forward");
    }
    integrate_simple(control, Some(input), params, (ZERO, ZERO))
}

/// Retrieval run: no input, spin wave `s0` at the start of the window.
pub fn retrieval_forward(
    control: &ControlField,
    params: &CavityParams,
    s0: C64,
) -> Result<CavityTrajectory> {
    integrate_simple(control, None, params, (ZERO, s0))
}

/// Backward solution of `dP̄/dt = (1+C)P̄ + iΩS̄`, `dS̄/dt = iΩP̄` from
/// `P̄(T) = 0`, `S̄(T) = s_final`.
pub fn adjoint_backward(
    control: &ControlField,
    s_final: C64,
    params: &CavityParams,
) -> Result<CavityAdjoint> {
    params.validate()?;
    let grid = *control.grid();
    let n = grid.len();
    let h = grid.spacing();
    let decay = 1.0 + params.cooperativity;
    let reversed: Vec<C64> = control.values().iter().rev().copied().collect();

    let mut p = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut state = [ZERO, s_final];
    check_finite("cavity adjoint terminal state", &state)?;
    p.push(state[0]);
    s.push(state[1]);
    let mut rk = Rk4::new(2);
    // In τ = T − t: dP̄/dτ = −(1+C)P̄ − iΩS̄, dS̄/dτ = −iΩP̄.
    for k in 0..n - 1 {
        rk.step(&mut state, h, |stage, y, dy| {
            let om = stage_value(&reversed, k, stage);
            dy[0] = -y[0] * decay - I * om * y[1];
            dy[1] = -I * om * y[0];
        });
        check_blowup("cavity adjoint", &state)?;
        p.push(state[0]);
        s.push(state[1]);
    }
    p.reverse();
    s.reverse();
    Ok(CavityAdjoint { grid, p, s, classes: None })
}

/// `δη/δΩ(t) = −2 Im[S̄* P − P̄ S*]` for a real control.
pub fn control_gradient(traj: &CavityTrajectory, adj: &CavityAdjoint) -> Result<Vec<f64>> {
    if traj.grid != adj.grid {
        return usage("trajectory and adjoint live on different grids");
    }
    ensure_len("adjoint", adj.p.len(), traj.p.len())?;
    Ok(traj
        .p
        .iter()
        .zip(&traj.s)
        .zip(adj.p.iter().zip(&adj.s))
        .map(|((p, s), (pb, sb))| -2.0 * (sb.conj() * p - pb * s.conj()).im)
        .collect())
}

/// Efficiency and gradient for the simple model in one call.
pub fn efficiency_and_gradient(
    control: &ControlField,
    input: &InputMode,
    params: &CavityParams,
) -> Result<(f64, Vec<f64>, CavityTrajectory, CavityAdjoint)> {
    let traj = storage_forward(control, input, params)?;
    let adj = adjoint_backward(control, traj.final_spin(), params)?;
    let g = control_gradient(&traj, &adj)?;
    Ok((traj.storage_efficiency(), g, traj, adj))
}

struct ClassCoefficients {
    /// `1 + i(Δ + Δ_j)`
    rates: Vec<C64>,
    x: Vec<f64>,
    coop: f64,
    drive: f64,
    gamma_s: f64,
    gamma_c_p: f64,
    gamma_c_s: f64,
}

impl ClassCoefficients {
    fn new(params: &CavityParams, profile: &InhomProfile) -> Self {
        Self {
            rates: profile
                .deltas()
                .iter()
                .map(|dj| C64::new(1.0, params.detuning + dj))
                .collect(),
            x: profile.amplitudes().to_vec(),
            coop: params.cooperativity,
            drive: (2.0 * params.cooperativity).sqrt(),
            gamma_s: params.spin_decay,
            gamma_c_p: if params.collisions_in_polarization {
                params.collision_rate
            } else {
                0.0
            },
            gamma_c_s: params.collision_rate,
        }
    }

    fn collective(&self, v: &[C64]) -> C64 {
        self.x.iter().zip(v).map(|(x, v)| v * *x).sum()
    }
}

/// Generalized model with frequency classes, detuning, spin decay and collisions:
///
/// ```text
/// Ṗ_j = −[1 + i(Δ+Δ_j)]P_j − C x_j P + iΩ S_j + i√(2C) x_j E_in + γ_c (x_j P − P_j)
/// Ṡ_j = −γ_s S_j + iΩ* P_j + γ_c (x_j S − S_j)
/// ```
pub fn generalized_forward(
    control: &ControlField,
    input: &InputMode,
    params: &CavityParams,
    profile: &InhomProfile,
) -> Result<CavityTrajectory> {
    let m = profile.len();
    integrate_generalized(control, Some(input), params, profile, &vec![ZERO; m], &vec![ZERO; m])
}

/// Generalized model from arbitrary per-class initial values.
pub fn integrate_generalized(
    control: &ControlField,
    input: Option<&InputMode>,
    params: &CavityParams,
    profile: &InhomProfile,
    p0: &[C64],
    s0: &[C64],
) -> Result<CavityTrajectory> {
    params.validate()?;
    check_alignment(control, input)?;
    let m = profile.len();
    ensure_len("initial P_j", p0.len(), m)?;
    ensure_len("initial S_j", s0.len(), m)?;
    let grid = *control.grid();
    let n = grid.len();
    let h = grid.spacing();
    let cf = ClassCoefficients::new(params, profile);
    let omega = control.values();
    let zero_input;
    let e_in = match input {
        Some(e) => e.values(),
        None => {
            zero_input = vec![ZERO; n];
            &zero_input
        }
    };

    let mut state: Vec<C64> = p0.iter().chain(s0).copied().collect();
    check_finite("generalized initial state", &state)?;
    let mut cp = Array2::<C64>::zeros((n, m));
    let mut cs = Array2::<C64>::zeros((n, m));
    let mut p = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let record = |k: usize, state: &[C64], cp: &mut Array2<C64>, cs: &mut Array2<C64>| {
        for j in 0..m {
            cp[(k, j)] = state[j];
            cs[(k, j)] = state[m + j];
        }
    };
    record(0, &state, &mut cp, &mut cs);
    p.push(cf.collective(&state[..m]));
    s.push(cf.collective(&state[m..]));
    let mut rk = Rk4::new(2 * m);
    for k in 0..n - 1 {
        rk.step(&mut state, h, |stage, y, dy| {
            let om = stage_value(omega, k, stage);
            let e = stage_value(e_in, k, stage);
            let (yp, ys) = y.split_at(m);
            let big_p = cf.collective(yp);
            let big_s = cf.collective(ys);
            for j in 0..m {
                let x = cf.x[j];
                dy[j] = -cf.rates[j] * yp[j] - big_p * (cf.coop * x)
                    + I * om * ys[j]
                    + I * (cf.drive * x) * e
                    + (big_p * x - yp[j]) * cf.gamma_c_p;
                dy[m + j] = -ys[j] * cf.gamma_s
                    + I * om.conj() * yp[j]
                    + (big_s * x - ys[j]) * cf.gamma_c_s;
            }
        });
        check_blowup("generalized forward", &state)?;
        record(k + 1, &state, &mut cp, &mut cs);
        p.push(cf.collective(&state[..m]));
        s.push(cf.collective(&state[m..]));
    }
    Ok(CavityTrajectory {
        grid,
        p,
        s,
        classes: Some(ClassFields { p: cp, s: cs }),
    })
}

/// Backward costates of the generalized model from `P̄_j(T) = 0`,
/// `S̄_j(T) = x_j s_final`.
pub fn generalized_adjoint(
    control: &ControlField,
    s_final: C64,
    params: &CavityParams,
    profile: &InhomProfile,
) -> Result<CavityAdjoint> {
    params.validate()?;
    let m = profile.len();
    let grid = *control.grid();
    let n = grid.len();
    let h = grid.spacing();
    let cf = ClassCoefficients::new(params, profile);
    let reversed: Vec<C64> = control.values().iter().rev().copied().collect();

    let mut state: Vec<C64> = vec![ZERO; m];
    state.extend(cf.x.iter().map(|x| s_final * *x));
    check_finite("generalized adjoint terminal state", &state)?;
    let mut cp = Array2::<C64>::zeros((n, m));
    let mut cs = Array2::<C64>::zeros((n, m));
    let mut p = vec![ZERO; n];
    let mut s = vec![ZERO; n];
    let record = |k: usize,
                  state: &[C64],
                  cp: &mut Array2<C64>,
                  cs: &mut Array2<C64>,
                  p: &mut [C64],
                  s: &mut [C64]| {
        let row = n - 1 - k;
        for j in 0..m {
            cp[(row, j)] = state[j];
            cs[(row, j)] = state[m + j];
        }
        p[row] = cf.collective(&state[..m]);
        s[row] = cf.collective(&state[m..]);
    };
    record(0, &state, &mut cp, &mut cs, &mut p, &mut s);
    let mut rk = Rk4::new(2 * m);
    // In τ = T − t:
    //   dP̄_j/dτ = −[1 − i(Δ+Δ_j)]P̄_j − C x_j P̄ − iΩ S̄_j + γ_c (x_j P̄ − P̄_j)
    //   dS̄_j/dτ = −γ_s S̄_j − iΩ* P̄_j + γ_c (x_j S̄ − S̄_j)
    for k in 0..n - 1 {
        rk.step(&mut state, h, |stage, y, dy| {
            let om = stage_value(&reversed, k, stage);
            let (yp, ys) = y.split_at(m);
            let big_p = cf.collective(yp);
            let big_s = cf.collective(ys);
            for j in 0..m {
                let x = cf.x[j];
                dy[j] = -cf.rates[j].conj() * yp[j] - big_p * (cf.coop * x) - I * om * ys[j]
                    + (big_p * x - yp[j]) * cf.gamma_c_p;
                dy[m + j] = -ys[j] * cf.gamma_s - I * om.conj() * yp[j]
                    + (big_s * x - ys[j]) * cf.gamma_c_s;
            }
        });
        check_blowup("generalized adjoint", &state)?;
        record(k + 1, &state, &mut cp, &mut cs, &mut p, &mut s);
    }
    Ok(CavityAdjoint {
        grid,
        p,
        s,
        classes: Some(ClassFields { p: cp, s: cs }),
    })
}

/// Complex gradient `∂η/∂Re Ω + i ∂η/∂Im Ω = 2i Σ_j (S̄_j* P_j − P̄_j S_j*)`.
pub fn generalized_gradient(traj: &CavityTrajectory, adj: &CavityAdjoint) -> Result<Vec<C64>> {
    let (Some(f), Some(b)) = (&traj.classes, &adj.classes) else {
        return usage("generalized_gradient needs per-class trajectories");
    };
    if traj.grid != adj.grid || f.p.dim() != b.p.dim() {
        return usage("trajectory and adjoint are not aligned");
    }
    let (n, m) = f.p.dim();
    Ok((0..n)
        .map(|k| {
            let mut acc = ZERO;
            for j in 0..m {
                acc += b.s[(k, j)].conj() * f.p[(k, j)] - b.p[(k, j)] * f.s[(k, j)].conj();
            }
            I * acc * 2.0
        })
        .collect())
}

/// `Ω(t) = Ω₂ e^{−iΔ₂t} + Ω₀(t) e^{iΔt}` with `Ω₂ = √(ΔΔ₂)`: a far-detuned
/// Stark-shifting component plus the resonant envelope `Ω₀`. Feed the result
/// to [`generalized_forward`] with detuning `Δ`.
pub fn composite_offresonant_control(
    resonant: &ControlField,
    detuning: f64,
    shift_detuning: f64,
) -> Result<ControlField> {
    if !(detuning >= 0.0) {
        return usage(format!("detuning Δ must be nonnegative (got {detuning})"));
    }
    if !(shift_detuning > 0.0) {
        return usage(format!("Δ₂ must be positive (got {shift_detuning})"));
    }
    if shift_detuning < 10.0 * detuning {
        return usage(format!(
            "composite control needs Δ₂ ≥ 10Δ (got Δ₂ = {shift_detuning}, Δ = {detuning})"
        ));
    }
    let grid = *resonant.grid();
    let period = 2.0 * std::f64::consts::PI / shift_detuning;
    if grid.spacing() > period / 20.0 {
        return usage(format!(
            "time grid too coarse for Δ₂ = {shift_detuning}: need spacing ≤ {:.3e}, have {:.3e}",
            period / 20.0,
            grid.spacing()
        ));
    }
    let omega2 = (detuning * shift_detuning).sqrt();
    let values = grid
        .nodes()
        .iter()
        .zip(resonant.values())
        .map(|(&t, &w0)| {
            C64::from_polar(omega2, -shift_detuning * t) + w0 * C64::from_polar(1.0, detuning * t)
        })
        .collect();
    ControlField::new(values, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::InputMode;

    fn grid(t: f64, n: usize) -> TimeGrid {
        TimeGrid::new(0.0, t, n).unwrap()
    }

    #[test]
    fn zero_input_gives_zero_trajectory() {
        let g = grid(10.0, 401);
        let traj = storage_forward(
            &ControlField::constant(0.7, g),
            &InputMode::zero(g),
            &CavityParams::resonant(1.0),
        )
        .unwrap();
        assert!(traj.p.iter().chain(&traj.s).all(|v| *v == ZERO));
        assert_eq!(traj.storage_efficiency(), 0.0);
    }

    #[test]
    fn zero_control_never_writes_spin() {
        let g = grid(10.0, 401);
        let e = InputMode::gaussian_like(g).unwrap();
        let traj =
            storage_forward(&ControlField::zero(g), &e, &CavityParams::resonant(1.0)).unwrap();
        assert!(traj.s.iter().all(|v| *v == ZERO));
        assert!(traj.p.iter().any(|v| v.norm() > 1e-3));
    }

    #[test]
    fn zero_terminal_gives_zero_adjoint() {
        let g = grid(5.0, 201);
        let adj =
            adjoint_backward(&ControlField::constant(1.0, g), ZERO, &CavityParams::resonant(3.0))
                .unwrap();
        assert!(adj.p.iter().chain(&adj.s).all(|v| *v == ZERO));
        let traj = CavityTrajectory {
            grid: g,
            p: vec![ZERO; 201],
            s: vec![ZERO; 201],
            classes: None,
        };
        assert!(control_gradient(&traj, &adj).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn adjoint_terminal_conditions() {
        let g = grid(5.0, 201);
        let sf = C64::new(0.3, -0.2);
        let adj =
            adjoint_backward(&ControlField::constant(1.0, g), sf, &CavityParams::resonant(3.0))
                .unwrap();
        assert_eq!(adj.p[200], ZERO);
        assert_eq!(adj.s[200], sf);
    }

    #[test]
    fn simple_model_requires_simple_params() {
        let g = grid(5.0, 101);
        let mut params = CavityParams::resonant(1.0);
        params.detuning = 1.0;
        assert!(storage_forward(&ControlField::zero(g), &InputMode::square(g).unwrap(), &params)
            .is_err());
        params.detuning = 0.0;
        params.cooperativity = -1.0;
        assert!(storage_forward(&ControlField::zero(g), &InputMode::square(g).unwrap(), &params)
            .is_err());
    }

    #[test]
    fn blowup_is_reported() {
        let g = grid(10.0, 11);
        let err = storage_forward(
            &ControlField::constant(1e4, g),
            &InputMode::square(g).unwrap(),
            &CavityParams::resonant(1.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }), "{err}");
    }

    #[test]
    fn generalized_reduces_to_simple() {
        let g = grid(10.0, 801);
        let e = InputMode::gaussian_like(g).unwrap();
        let omega = ControlField::from_real(
            &g.nodes().iter().map(|t| 0.3 + 0.05 * t).collect::<Vec<_>>(),
            g,
        )
        .unwrap();
        let params = CavityParams::resonant(1.0);
        let simple = storage_forward(&omega, &e, &params).unwrap();
        let general =
            generalized_forward(&omega, &e, &params, &InhomProfile::homogeneous()).unwrap();
        for k in 0..g.len() {
            assert!((simple.p[k] - general.p[k]).norm() < 1e-13);
            assert!((simple.s[k] - general.s[k]).norm() < 1e-13);
        }
        let a = adjoint_backward(&omega, simple.final_spin(), &params).unwrap();
        let b = generalized_adjoint(&omega, general.final_spin(), &params, &InhomProfile::homogeneous())
            .unwrap();
        for k in 0..g.len() {
            assert!((a.p[k] - b.p[k]).norm() < 1e-13);
            assert!((a.s[k] - b.s[k]).norm() < 1e-13);
        }
        let g1 = control_gradient(&simple, &a).unwrap();
        let g2 = generalized_gradient(&general, &b).unwrap();
        for k in 0..g.len() {
            assert!((g1[k] - g2[k].re).abs() < 1e-12);
            assert!(g2[k].im.abs() < 1e-12);
        }
    }

    #[test]
    fn generalized_zero_input() {
        let g = grid(4.0, 201);
        let profile = InhomProfile::two_class(2.0).unwrap();
        let traj = generalized_forward(
            &ControlField::constant(1.0, g),
            &InputMode::zero(g),
            &CavityParams::resonant(2.0),
            &profile,
        )
        .unwrap();
        assert!(traj.classes.unwrap().p.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn composite_control_guards() {
        let g = grid(10.0, 2001);
        let w0 = ControlField::constant(1.0, g);
        assert!(composite_offresonant_control(&w0, -1.0, 50.0).is_err());
        assert!(composite_offresonant_control(&w0, 1.0, 0.0).is_err());
        assert!(composite_offresonant_control(&w0, 1.0, 5.0).is_err());
        // 2π/Δ₂ / 20 = 0.0031 < spacing 0.005
        assert!(composite_offresonant_control(&w0, 1.0, 100.0).is_err());
        let same = composite_offresonant_control(&w0, 0.0, 20.0).unwrap();
        for (a, b) in same.values().iter().zip(w0.values()) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
