//! Problem definition: periodic potential, physical parameters and reference scales.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// A trigonometric polynomial potential
/// `V(q) = offset + Σ_k c_k cos(k ω₁ q) + s_k sin(k ω₁ q)` with `ω₁ = 2π/L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPotential {
    period: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
    offset: f64,
}

impl PeriodicPotential {
    /// `cos[k-1]` and `sin[k-1]` hold the coefficients of harmonic `k`.
    pub fn new(period: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "period must be positive and finite, got {period}"
            )));
        }
        if cos.iter().chain(&sin).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "potential coefficients must be finite".into(),
            ));
        }
        let mut pot = Self {
            period,
            cos,
            sin,
            offset: 0.0,
        };
        pot.trim();
        Ok(pot)
    }

    /// `V(q) = amplitude · cos(2π q / L)`
    pub fn cosine(amplitude: f64, period: f64) -> Result<Self> {
        Self::new(period, alloc::vec![amplitude], Vec::new())
    }

    pub fn flat(period: f64) -> Result<Self> {
        Self::new(period, Vec::new(), Vec::new())
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    fn trim(&mut self) {
        let k = self.cos.len().max(self.sin.len());
        self.cos.resize(k, 0.0);
        self.sin.resize(k, 0.0);
        while self.cos.last() == Some(&0.0) && self.sin.last() == Some(&0.0) {
            self.cos.pop();
            self.sin.pop();
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Fundamental wavenumber `ω₁ = 2π/L`.
    pub fn omega1(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Highest harmonic present, `K_V`.
    pub fn harmonics(&self) -> usize {
        self.cos.len()
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    pub fn is_symmetric(&self) -> bool {
        self.sin.iter().all(|&s| s == 0.0)
    }

    /// Amplitude `V₀` when the potential is a single cosine `V₀ cos(ω₁ q)`.
    pub fn cosine_amplitude(&self) -> Option<f64> {
        match (self.cos.as_slice(), self.is_symmetric()) {
            ([a], true) => Some(*a),
            ([], _) => Some(0.0),
            _ => None,
        }
    }

    pub fn evaluate(&self, q: f64) -> f64 {
        let w = self.omega1();
        self.offset
            + self
                .cos
                .iter()
                .zip(&self.sin)
                .enumerate()
                .map(|(i, (c, s))| {
                    let (sn, cs) = ((i + 1) as f64 * w * q).sin_cos();
                    c * cs + s * sn
                })
                .sum::<f64>()
    }

    pub fn derivative(&self, q: f64) -> f64 {
        let w = self.omega1();
        self.cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(i, (c, s))| {
                let k = (i + 1) as f64 * w;
                let (sn, cs) = (k * q).sin_cos();
                k * (s * cs - c * sn)
            })
            .sum()
    }

    /// `V(q) − F q`
    pub fn effective(&self, force: f64, q: f64) -> f64 {
        self.evaluate(q) - force * q
    }

    /// Mirror image `V(−q)`.
    pub fn reflected(&self) -> Self {
        Self {
            period: self.period,
            cos: self.cos.clone(),
            sin: self.sin.iter().map(|s| -s).collect(),
            offset: self.offset,
        }
    }

    /// Largest value of |V − offset| bound by the coefficient sum.
    pub fn amplitude_bound(&self) -> f64 {
        self.cos.iter().chain(&self.sin).map(|c| c.abs()).sum()
    }
}

/// Friction, inverse temperature, tilt and potential.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub gamma: f64,
    pub beta: f64,
    pub force: f64,
    pub potential: PeriodicPotential,
}

impl ModelParams {
    pub fn new(gamma: f64, beta: f64, force: f64, potential: PeriodicPotential) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {beta}"
            )));
        }
        if !force.is_finite() {
            return Err(Error::InvalidParameter("force must be finite".into()));
        }
        Ok(Self {
            gamma,
            beta,
            force,
            potential,
        })
    }

    pub fn with_force(&self, force: f64) -> Self {
        Self {
            force,
            ..self.clone()
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self {
            gamma,
            ..self.clone()
        }
    }

    pub fn period(&self) -> f64 {
        self.potential.period()
    }

    /// Image under `q → −q, p → −p`: the tilt and the odd part of V change sign.
    pub fn reflected(&self) -> Self {
        Self {
            force: -self.force,
            potential: self.potential.reflected(),
            ..self.clone()
        }
    }

    pub fn reference_scales(&self) -> ReferenceScales {
        ReferenceScales {
            critical_force: self
                .potential
                .cosine_amplitude()
                .map(|v0| CRITICAL_FORCE_FACTOR * self.gamma * v0.abs().sqrt()),
            free_drift: self.force / self.gamma,
            free_diffusion: 1.0 / (self.beta * self.gamma),
        }
    }
}

/// Prefactor in the axis-scaling convention `F_c = 3.36 γ √V₀`.
pub const CRITICAL_FORCE_FACTOR: f64 = 3.36;

/// Scales used to normalise sweep output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceScales {
    /// `3.36 γ √V₀`; `None` unless the potential is a single cosine.
    pub critical_force: Option<f64>,
    /// `U_L = F/γ`
    pub free_drift: f64,
    /// `D_L = 1/(βγ)`
    pub free_diffusion: f64,
}

impl ReferenceScales {
    pub fn critical_force(&self) -> Result<f64> {
        self.critical_force.ok_or(Error::CriticalForceUndefined)
    }
}
