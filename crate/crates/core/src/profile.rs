//! Discrete inhomogeneous profiles: frequency classes `(Δ_j, x_j)` with
//! population fractions `p_j = x_j²` summing to one.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InhomProfile {
    deltas: Vec<f64>,
    amplitudes: Vec<f64>,
    /// When present, `Δ_j = width · factors[j]`.
    shape: Option<WidthShape>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthShape {
    pub width: f64,
    pub factors: Vec<f64>,
}

fn validate(deltas: &[f64], amplitudes: &[f64]) -> Result<()> {
    if deltas.is_empty() || deltas.len() != amplitudes.len() {
        return usage(format!(
            "profile needs equal, nonzero numbers of detunings and amplitudes (got {} and {})",
            deltas.len(),
            amplitudes.len()
        ));
    }
    if deltas.iter().chain(amplitudes).any(|v| !v.is_finite()) {
        return usage("profile entries must be finite");
    }
    if amplitudes.iter().any(|&x| x < 0.0) {
        return usage("profile amplitudes must be nonnegative");
    }
    let total: f64 = amplitudes.iter().map(|x| x * x).sum();
    if (total - 1.0).abs() > NORM_TOL {
        return usage(format!("profile amplitudes must satisfy Σx² = 1 (got {total})"));
    }
    Ok(())
}

/// Rescales nonnegative weights so that `Σx² = 1`.
pub fn normalize_amplitudes(amplitudes: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = amplitudes.iter().map(|x| x * x).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Degenerate("all profile amplitudes vanish".into()));
    }
    let s = total.sqrt();
    Ok(amplitudes.iter().map(|x| x / s).collect())
}

impl InhomProfile {
    pub fn new(deltas: Vec<f64>, amplitudes: Vec<f64>) -> Result<Self> {
        validate(&deltas, &amplitudes)?;
        Ok(Self { deltas, amplitudes, shape: None })
    }

    /// Builds a profile from unnormalized nonnegative weights `x_j`.
    pub fn from_weights(deltas: Vec<f64>, weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|&x| x < 0.0) {
            return usage("profile weights must be nonnegative");
        }
        Self::new(deltas, normalize_amplitudes(weights)?)
    }

    /// `Δ_j = width · f_j` with fixed shape factors.
    pub fn shaped(width: f64, factors: Vec<f64>, weights: &[f64]) -> Result<Self> {
        if !(width >= 0.0) {
            return usage(format!("profile width must be nonnegative (got {width})"));
        }
        let deltas = factors.iter().map(|f| width * f).collect();
        let mut p = Self::from_weights(deltas, weights)?;
        p.shape = Some(WidthShape { width, factors });
        Ok(p)
    }

    /// Single class at zero detuning.
    pub fn homogeneous() -> Self {
        Self {
            deltas: vec![0.0],
            amplitudes: vec![1.0],
            shape: Some(WidthShape { width: 0.0, factors: vec![0.0] }),
        }
    }

    /// Two equally populated classes at `±width`.
    pub fn two_class(width: f64) -> Result<Self> {
        Self::shaped(width, vec![-1.0, 1.0], &[1.0, 1.0])
    }

    /// Gaussian `p ∝ exp(-Δ²/(2w²))` sampled with `n` classes on `±5w`.
    pub fn gaussian(width: f64, n: usize) -> Result<Self> {
        let factors = symmetric_factors(n, 5.0)?;
        let weights: Vec<f64> = factors.iter().map(|f| (-0.25 * f * f).exp()).collect();
        Self::shaped(width, factors, &weights)
    }

    /// Lorentzian `p ∝ 1/(1 + Δ²/w²)` sampled with `n` classes on `±5w`.
    pub fn lorentzian(width: f64, n: usize) -> Result<Self> {
        let factors = symmetric_factors(n, 5.0)?;
        let weights: Vec<f64> = factors.iter().map(|f| (1.0 / (1.0 + f * f)).sqrt()).collect();
        Self::shaped(width, factors, &weights)
    }

    /// Equal populations over `n` classes spread evenly on `±width`.
    pub fn uniform(width: f64, n: usize) -> Result<Self> {
        let factors = symmetric_factors(n, 1.0)?;
        Self::shaped(width, factors, &vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn shape(&self) -> Option<&WidthShape> {
        self.shape.as_ref()
    }

    pub fn width(&self) -> Option<f64> {
        self.shape.as_ref().map(|s| s.width)
    }

    /// Same shape factors and weights at a new width (clamped at zero).
    pub fn with_width(&self, width: f64) -> Result<Self> {
        let shape = self
            .shape
            .as_ref()
            .ok_or_else(|| Error::Usage("profile has no width parameterization".into()))?;
        let width = width.max(0.0);
        Ok(Self {
            deltas: shape.factors.iter().map(|f| width * f).collect(),
            amplitudes: self.amplitudes.clone(),
            shape: Some(WidthShape { width, factors: shape.factors.clone() }),
        })
    }

    /// Same detunings with new (renormalized) weights.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.len() {
            return usage("weight count does not match class count");
        }
        if weights.iter().any(|&x| x < 0.0) {
            return usage("profile weights must be nonnegative");
        }
        Ok(Self {
            deltas: self.deltas.clone(),
            amplitudes: normalize_amplitudes(weights)?,
            shape: self.shape.clone(),
        })
    }

    /// Same weights with every detuning negated (the reversed line).
    pub fn reversed(&self) -> Self {
        Self {
            deltas: self.deltas.iter().map(|d| -d).collect(),
            amplitudes: self.amplitudes.clone(),
            shape: self.shape.as_ref().map(|s| WidthShape {
                width: s.width,
                factors: s.factors.iter().map(|f| -f).collect(),
            }),
        }
    }

    /// Perturbed amplitudes without renormalization; only for gradient checks.
    #[doc(hidden)]
    pub fn with_raw_amplitudes_unchecked(&self, amplitudes: Vec<f64>) -> Self {
        Self {
            deltas: self.deltas.clone(),
            amplitudes,
            shape: self.shape.clone(),
        }
    }
}

fn symmetric_factors(n: usize, extent: f64) -> Result<Vec<f64>> {
    match n {
        0 => usage("profile needs at least one class"),
        1 => Ok(vec![0.0]),
        _ => Ok((0..n)
            .map(|j| -extent + 2.0 * extent * j as f64 / (n - 1) as f64)
            .collect()),
    }
}
