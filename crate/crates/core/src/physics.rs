//! Amplitude decay along a ray, the angle-dependent plate reflection
//! coefficient, and Np/dB unit conversions.

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// dB/cm per Np/m: `20 / ln 10` dB per Np, and 100 cm per m.
pub const DB_CM_PER_NP_M: f64 = 20.0 / LN_10 / 100.0;

pub fn np_per_m_to_db_per_cm(alpha: f64) -> f64 {
    alpha * DB_CM_PER_NP_M
}

pub fn db_per_cm_to_np_per_m(alpha: f64) -> f64 {
    alpha / DB_CM_PER_NP_M
}

/// Acoustic constants of a homogeneous medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    /// m/s
    pub speed_of_sound: f64,
    /// kg/m³
    pub density: f64,
    /// Np/m
    pub attenuation: f64,
}

impl MediumSpec {
    pub fn new(speed_of_sound: f64, density: f64, attenuation: f64) -> Result<Self> {
        let medium = Self {
            speed_of_sound,
            density,
            attenuation,
        };
        medium.validate()?;
        Ok(medium)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed_of_sound > 0.0 && self.speed_of_sound.is_finite()) {
            return Err(Error::invalid(
                "medium",
                format!("speed of sound {}", self.speed_of_sound),
            ));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::invalid(
                "medium",
                format!("density {}", self.density),
            ));
        }
        if !(self.attenuation >= 0.0 && self.attenuation.is_finite()) {
            return Err(Error::invalid(
                "medium",
                format!("attenuation {}", self.attenuation),
            ));
        }
        Ok(())
    }

    /// Water at 20 °C, 5 MHz: 1482.5 m/s, 1000 kg/m³, 0.05 Np/cm.
    pub fn water() -> Self {
        Self {
            speed_of_sound: 1482.5,
            density: 1000.0,
            attenuation: 5.0,
        }
    }

    /// Plexiglas reflector plate: 2700 m/s, 1180 kg/m³.
    pub fn plexiglas() -> Self {
        Self {
            speed_of_sound: 2700.0,
            density: 1180.0,
            attenuation: 0.0,
        }
    }
}

/// A propagation medium facing the reflector plate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionPair {
    pub medium: MediumSpec,
    pub reflector: MediumSpec,
}

impl ReflectionPair {
    pub fn new(medium: MediumSpec, reflector: MediumSpec) -> Self {
        Self { medium, reflector }
    }

    /// `n = c_reflector / c_medium`
    pub fn speed_ratio(&self) -> f64 {
        self.reflector.speed_of_sound / self.medium.speed_of_sound
    }

    /// `m = ρ_reflector / ρ_medium`
    pub fn density_ratio(&self) -> f64 {
        self.reflector.density / self.medium.density
    }

    pub fn reflection_coefficient(&self, theta: f64) -> Result<f64> {
        reflection_coefficient(self.density_ratio(), self.speed_ratio(), theta)
    }
}

/// `R(θ) = (m cosθ − n √(1 − sin²θ/n²)) / (m cosθ + n √(1 − sin²θ/n²))`
///
/// Evaluated as written. Its normal-incidence sign is opposite to the
/// `(Z₂ − Z₁)/(Z₂ + Z₁)` convention; callers use `|R|`.
pub fn reflection_coefficient(m: f64, n: f64, theta: f64) -> Result<f64> {
    let sin = theta.sin();
    let radicand = 1.0 - sin * sin / (n * n);
    if radicand < 0.0 {
        return Err(Error::CriticalAngle { theta, radicand });
    }
    let cos_term = m * theta.cos();
    let root_term = n * radicand.sqrt();
    Ok((cos_term - root_term) / (cos_term + root_term))
}

/// `A = A0 · |R| · S · exp(−∫α dl)`.
pub fn forward_amplitude(path_integral: f64, reflection: f64, a0: f64, sensitivity: f64) -> f64 {
    a0 * reflection.abs() * sensitivity * (-path_integral).exp()
}
