//! Grids, trapezoid quadrature and the classical RK4 stepper shared by all models.
//!
//! Every integral in the toolkit (norms, efficiencies, gradients, field
//! slaving along z) uses the trapezoid rule on uniform grids (Simpson's rule
//! only in the flux-balance diagnostic), and every time integration uses the
//! same RK4 step. Controls and inputs are stored at grid
//! nodes; RK4 stages at half steps read them by linear interpolation, which
//! gives each node an effective quadrature weight equal to its trapezoid
//! weight.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, usage, Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Uniform grid over dimensionless time `t = γ·t_phys`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_nodes: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_nodes: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
            return usage(format!("time grid needs t_end > t_start (got [{t_start}, {t_end}])"));
        }
        if n_nodes < 2 {
            return usage(format!("time grid needs at least 2 nodes (got {n_nodes})"));
        }
        Ok(Self { t_start, t_end, n_nodes })
    }

    /// Grid on `[0, duration]` whose spacing does not exceed `max_step`.
    pub fn with_max_step(duration: f64, max_step: f64, min_nodes: usize) -> Result<Self> {
        if !(max_step > 0.0) {
            return usage("max_step must be positive");
        }
        let steps = (duration / max_step).ceil() as usize;
        Self::new(0.0, duration, (steps + 1).max(min_nodes).max(2))
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn len(&self) -> usize {
        self.n_nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn spacing(&self) -> f64 {
        self.duration() / (self.n_nodes - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n_nodes {
            self.t_end
        } else {
            self.t_start + k as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|k| self.node(k)).collect()
    }

    /// Same interval with the step divided by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_nodes: (self.n_nodes - 1) * factor.max(1) + 1,
            ..*self
        }
    }

    /// Trapezoid weights `h/2, h, …, h, h/2`.
    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(self.n_nodes, self.spacing())
    }
}

/// Uniform grid over the rescaled position `z ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceGrid {
    n_nodes: usize,
}

impl SpaceGrid {
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 2 {
            return usage(format!("space grid needs at least 2 nodes (got {n_nodes})"));
        }
        Ok(Self { n_nodes })
    }

    pub fn len(&self) -> usize {
        self.n_nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n_nodes - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n_nodes {
            1.0
        } else {
            k as f64 * self.spacing()
        }
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_nodes: (self.n_nodes - 1) * factor.max(1) + 1,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(self.n_nodes, self.spacing())
    }
}

pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Trapezoid rule for real samples with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Composite Simpson rule; falls back to the trapezoid rule on an even
/// number of samples.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 3 || n % 2 == 0 {
        return trapezoid(values, h);
    }
    let inner: f64 = values[1..n - 1].iter().enumerate().map(|(i, v)| if i % 2 == 0 { 4.0 * v } else { 2.0 * v }).sum();
    h / 3.0 * (values[0] + values[n - 1] + inner)
}

/// Trapezoid rule for complex samples with spacing `h`.
pub fn trapezoid_c(values: &[C64], h: f64) -> C64 {
    match values.len() {
        0 | 1 => ZERO,
        n => (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<C64>()) * h,
    }
}

/// Trapezoid approximation of `∫|f|² dt` over `grid`.
pub fn l2_norm_sq(f: &[C64], grid: &TimeGrid) -> Result<f64> {
    ensure_len("l2_norm_sq", f.len(), grid.len())?;
    let sq: Vec<f64> = f.iter().map(|v| v.norm_sqr()).collect();
    Ok(trapezoid(&sq, grid.spacing()))
}

/// `F(z) = initial + ∫₀^z f`, trapezoid rule, written into `out`.
pub fn cumulative_trapezoid_into(f: &[C64], h: f64, initial: C64, out: &mut [C64]) {
    debug_assert_eq!(f.len(), out.len());
    if out.is_empty() {
        return;
    }
    let half = 0.5 * h;
    let mut acc = initial;
    out[0] = acc;
    for k in 1..f.len() {
        acc += (f[k - 1] + f[k]) * half;
        out[k] = acc;
    }
}

/// `F(z) = terminal − ∫_z^1 f`, i.e. the antiderivative pinned at the last node.
pub fn reverse_cumulative_trapezoid_into(f: &[C64], h: f64, terminal: C64, out: &mut [C64]) {
    debug_assert_eq!(f.len(), out.len());
    let n = f.len();
    if n == 0 {
        return;
    }
    let half = 0.5 * h;
    let mut acc = terminal;
    out[n - 1] = acc;
    for k in (0..n - 1).rev() {
        acc -= (f[k] + f[k + 1]) * half;
        out[k] = acc;
    }
}

/// Cumulative trapezoid over a space grid. `F(0) = initial` exactly.
pub fn cumulative_trapezoid(f: &[C64], grid: &SpaceGrid, initial: C64) -> Result<Vec<C64>> {
    ensure_len("cumulative_trapezoid", f.len(), grid.len())?;
    let mut out = vec![ZERO; f.len()];
    cumulative_trapezoid_into(f, grid.spacing(), initial, &mut out);
    Ok(out)
}

/// Linear interpolation of node samples at time `t` (clamped to the grid).
pub fn interpolate(values: &[C64], grid: &TimeGrid, t: f64) -> C64 {
    let n = values.len();
    let x = (t - grid.t_start()) / grid.spacing();
    if x <= 0.0 {
        return values[0];
    }
    let k = x.floor() as usize;
    if k + 1 >= n {
        return values[n - 1];
    }
    let frac = x - k as f64;
    if frac < 1e-12 {
        values[k]
    } else if frac > 1.0 - 1e-12 {
        values[k + 1]
    } else if (frac - 0.5).abs() < 1e-12 {
        (values[k] + values[k + 1]) * 0.5
    } else {
        values[k] * (1.0 - frac) + values[k + 1] * frac
    }
}

/// Value of a node series at RK4 stage `stage ∈ {0, 1, 2}` (node, midpoint,
/// next node) of step `k`. Avoids float round-trip through `interpolate`.
#[inline]
pub(crate) fn stage_value(values: &[C64], k: usize, stage: usize) -> C64 {
    match stage {
        0 => values[k],
        1 => (values[k] + values[k + 1]) * 0.5,
        _ => values[k + 1],
    }
}

pub fn max_abs(values: &[C64]) -> f64 {
    values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn all_finite(values: &[C64]) -> bool {
    values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

pub(crate) fn check_finite(what: &str, values: &[C64]) -> Result<()> {
    if all_finite(values) {
        Ok(())
    } else {
        let max = values
            .iter()
            .filter(|v| v.re.is_finite() && v.im.is_finite())
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        Err(Error::Numerical {
            what: format!("{what}: non-finite values"),
            max_abs: max,
        })
    }
}

/// Reusable buffers for repeated RK4 steps on a fixed-size state.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Self {
            k1: vec![ZERO; n],
            k2: vec![ZERO; n],
            k3: vec![ZERO; n],
            k4: vec![ZERO; n],
            tmp: vec![ZERO; n],
        }
    }

    /// Advances `state` by one classical RK4 step of size `h`.
    ///
    /// `rhs(stage, state, out)` receives the stage index 0 (t), 1 (t + h/2,
    /// used twice) or 2 (t + h).
    pub fn step<F>(&mut self, state: &mut [C64], h: f64, mut rhs: F)
    where
        F: FnMut(usize, &[C64], &mut [C64]),
    {
        let n = state.len();
        rhs(0, state, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = state[i] + self.k1[i] * (0.5 * h);
        }
        rhs(1, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = state[i] + self.k2[i] * (0.5 * h);
        }
        rhs(1, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = state[i] + self.k3[i] * h;
        }
        rhs(2, &self.tmp, &mut self.k4);
        let w = h / 6.0;
        for i in 0..n {
            state[i] += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * w;
        }
    }
}

/// One classical RK4 step of `dy/dt = rhs(t, y)`. Negative `h` integrates backward.
pub fn rk4_step<F>(state: &[C64], t: f64, h: f64, mut rhs: F) -> Result<Vec<C64>>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    if h == 0.0 || !h.is_finite() {
        return usage("rk4_step needs a finite nonzero step");
    }
    check_finite("rk4_step input", state)?;
    let mut out = state.to_vec();
    let mut rk = Rk4::new(state.len());
    rk.step(&mut out, h, |stage, y, dy| {
        let ts = t + 0.5 * h * stage as f64;
        rhs(ts, y, dy)
    });
    check_finite("rk4_step output", &out)?;
    Ok(out)
}
