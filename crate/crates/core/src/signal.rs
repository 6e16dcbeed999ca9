//! Control fields and input modes sampled on a time grid.
//!
//! Convention: `Ω(t)` is half the usual Rabi frequency, so a resonant π pulse
//! of constant amplitude takes time `π/(2Ω)`. Times are in units of `1/γ`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{ensure_len, usage, Error, Result};
use crate::numerics::{check_finite, l2_norm_sq, TimeGrid, C64, ZERO};

/// Complex control envelope `Ω(t)` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    values: Vec<C64>,
    grid: TimeGrid,
}

impl ControlField {
    pub fn new(values: Vec<C64>, grid: TimeGrid) -> Result<Self> {
        ensure_len("control field", values.len(), grid.len())?;
        check_finite("control field", &values)?;
        Ok(Self { values, grid })
    }

    pub fn from_real(values: &[f64], grid: TimeGrid) -> Result<Self> {
        Self::new(values.iter().map(|&v| C64::new(v, 0.0)).collect(), grid)
    }

    pub fn constant(value: f64, grid: TimeGrid) -> Self {
        Self {
            values: vec![C64::new(value, 0.0); grid.len()],
            grid,
        }
    }

    pub fn zero(grid: TimeGrid) -> Self {
        Self::constant(0.0, grid)
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// Pulse energy `∫|Ω|² dt`.
    pub fn energy(&self) -> f64 {
        l2_norm_sq(&self.values, &self.grid).expect("aligned by construction")
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// `Ω(T − t)` on the same grid.
    pub fn time_reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { values, grid: self.grid }
    }

    /// Adds `step · direction` node by node.
    pub fn stepped(&self, direction: &[C64], step: f64) -> Result<Self> {
        ensure_len("control step", direction.len(), self.values.len())?;
        let values = self
            .values
            .iter()
            .zip(direction)
            .map(|(v, d)| v + d * step)
            .collect();
        Self::new(values, self.grid)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            grid: self.grid,
        }
    }
}

/// Normalization constant of the Gaussian-like mode, `A ≈ 2.09`.
pub fn gaussian_like_amplitude() -> f64 {
    // ∫₀¹ (e^{-30(u-½)²} − e^{-7.5})² du in closed form.
    let c = (-7.5f64).exp();
    let pi = std::f64::consts::PI;
    let g2 = (pi / 60.0).sqrt() * erf(60f64.sqrt() * 0.5);
    let g1 = (pi / 30.0).sqrt() * erf(30f64.sqrt() * 0.5);
    1.0 / (g2 - 2.0 * c * g1 + c * c).sqrt()
}

/// `A (e^{-30(t/T − ½)²} − e^{-7.5}) / √T`, which vanishes at `t = 0` and `t = T`.
pub fn gaussian_like_value(t: f64, duration: f64, amplitude: f64) -> f64 {
    let u = t / duration - 0.5;
    amplitude * ((-30.0 * u * u).exp() - (-7.5f64).exp()) / duration.sqrt()
}

/// Complex input envelope `E_in(t)`. Constructors that produce a mode for
/// storage return it unit-normalized; `InputMode::new` keeps values as given
/// so that degenerate (zero) inputs can be represented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputMode {
    values: Vec<C64>,
    grid: TimeGrid,
}

impl InputMode {
    pub fn new(values: Vec<C64>, grid: TimeGrid) -> Result<Self> {
        ensure_len("input mode", values.len(), grid.len())?;
        check_finite("input mode", &values)?;
        Ok(Self { values, grid })
    }

    pub fn zero(grid: TimeGrid) -> Self {
        Self {
            values: vec![ZERO; grid.len()],
            grid,
        }
    }

    /// Rescales `values` to unit norm; also returns the norm before rescaling.
    pub fn normalized(values: Vec<C64>, grid: TimeGrid) -> Result<(Self, f64)> {
        let mode = Self::new(values, grid)?;
        let norm = mode.norm_sq().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Degenerate("input mode has zero norm".into()));
        }
        let values = mode.values.iter().map(|v| v / norm).collect();
        Ok((Self { values, grid }, norm))
    }

    /// Gaussian-like pulse on `[0, T]` (a Gaussian of width T/√60 minus its edge value), unit norm.
    pub fn gaussian_like(grid: TimeGrid) -> Result<Self> {
        if grid.t_start() != 0.0 {
            return usage("gaussian_like mode expects a grid starting at t = 0");
        }
        let duration = grid.t_end();
        let a = gaussian_like_amplitude();
        let mut values: Vec<C64> = grid
            .nodes()
            .iter()
            .map(|&t| C64::new(gaussian_like_value(t, duration, a), 0.0))
            .collect();
        // The closed-form value at the endpoints is zero up to rounding.
        values[0] = ZERO;
        let last = values.len() - 1;
        values[last] = ZERO;
        Ok(Self::normalized(values, grid)?.0)
    }

    /// Square pulse `1/√T`.
    pub fn square(grid: TimeGrid) -> Result<Self> {
        let v = C64::new(1.0 / grid.duration().sqrt(), 0.0);
        Ok(Self::normalized(vec![v; grid.len()], grid)?.0)
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn norm_sq(&self) -> f64 {
        l2_norm_sq(&self.values, &self.grid).expect("aligned by construction")
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == ZERO)
    }
}
