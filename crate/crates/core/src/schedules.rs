//! Field amplitudes per kick for the constant, linear and periodic quench
//! protocols.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("kick period must be positive (got {0})")]
    NonPositivePeriod(f64),
    #[error("periodic protocol needs a positive angular frequency (got {0})")]
    NonPositiveFrequency(f64),
    #[error("periodic protocol needs a positive duration (got {0})")]
    NonPositiveDuration(f64),
    #[error("linear slope must be non-negative (got {0})")]
    NegativeSlope(f64),
    #[error("{name} must be finite")]
    NonFinite { name: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Constant,
    Linear,
    Periodic,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Constant => "constant",
            ProtocolKind::Linear => "linear",
            ProtocolKind::Periodic => "periodic",
        }
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" => Ok(ProtocolKind::Constant),
            "linear" => Ok(ProtocolKind::Linear),
            "periodic" => Ok(ProtocolKind::Periodic),
            other => Err(format!("unknown protocol '{other}' (expected constant, linear or periodic)")),
        }
    }
}

/// Time dependence of the longitudinal (`h_x`) and kicked transverse (`h_z`) fields.
///
/// * Linear: `h_z(t) = h_z0 + Γt`, `h_x = h_x0`.
/// * Constant: Linear with `Γ = 0`.
/// * Periodic: `h_x(t) = h_x0 sin(αt)`, `h_z(t) = h_z0 cos(αt)` over `0 ≤ t ≤ t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchProtocol {
    pub kind: ProtocolKind,
    pub hx0: f64,
    pub hz0: f64,
    /// `Γ`, field per unit time (Linear only).
    pub slope: f64,
    /// `α`, radians per unit time (Periodic only).
    pub frequency: f64,
    /// Evolution duration (Periodic only).
    pub t_max: f64,
}

/// Default duration of the periodic quench.
pub const PERIODIC_T_MAX: f64 = 16.0 * PI;

impl QuenchProtocol {
    pub fn constant(hx0: f64, hz0: f64) -> Self {
        Self { kind: ProtocolKind::Constant, hx0, hz0, slope: 0.0, frequency: 0.0, t_max: 0.0 }
    }

    pub fn linear(hx0: f64, hz0: f64, slope: f64) -> Self {
        Self { kind: ProtocolKind::Linear, hx0, hz0, slope, frequency: 0.0, t_max: 0.0 }
    }

    /// Periodic quench with the quarter-period envelope `α = π / (2 t_max)`.
    pub fn periodic(hx0: f64, hz0: f64, t_max: f64) -> Self {
        Self::periodic_with_frequency(hx0, hz0, PI / (2.0 * t_max), t_max)
    }

    pub fn periodic_with_frequency(hx0: f64, hz0: f64, frequency: f64, t_max: f64) -> Self {
        Self { kind: ProtocolKind::Periodic, hx0, hz0, slope: 0.0, frequency, t_max }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        for (name, v) in [("h_x0", self.hx0), ("h_z0", self.hz0), ("slope", self.slope)] {
            if !v.is_finite() {
                return Err(ScheduleError::NonFinite { name });
            }
        }
        match self.kind {
            ProtocolKind::Linear if self.slope < 0.0 => Err(ScheduleError::NegativeSlope(self.slope)),
            ProtocolKind::Periodic if !(self.frequency > 0.0) => {
                Err(ScheduleError::NonPositiveFrequency(self.frequency))
            }
            ProtocolKind::Periodic if !(self.t_max > 0.0) => {
                Err(ScheduleError::NonPositiveDuration(self.t_max))
            }
            _ => Ok(()),
        }
    }

    /// Number of kicks covering `t_max` for a Periodic protocol, `None` otherwise.
    pub fn kick_count(&self, period: f64) -> Option<usize> {
        (self.kind == ProtocolKind::Periodic).then(|| (self.t_max / period).round() as usize)
    }

    /// Transverse amplitude `h_z(t)`.
    pub fn hz_at(&self, t: f64) -> f64 {
        match self.kind {
            ProtocolKind::Constant => self.hz0,
            ProtocolKind::Linear => self.hz0 + self.slope * t,
            ProtocolKind::Periodic => self.hz0 * (self.frequency * t).cos(),
        }
    }

    /// Longitudinal amplitude `h_x(t)`.
    pub fn hx_at(&self, t: f64) -> f64 {
        match self.kind {
            ProtocolKind::Constant | ProtocolKind::Linear => self.hx0,
            ProtocolKind::Periodic => self.hx0 * (self.frequency * t).sin(),
        }
    }
}

/// Rotation angles entering one kick's exponentials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KickFields {
    /// `τ·h_z(nτ)`, multiplies `σ^z` in the kick.
    pub theta_z: f64,
    /// Longitudinal field integrated over the interval following the kick.
    pub theta_x: f64,
    /// `τ·J`, multiplies `σ^x σ^x`.
    pub theta_j: f64,
}

/// Angles for the `n`-th map: the kick at `t = nτ` followed by Ising and
/// longitudinal evolution over `[nτ, (n+1)τ]`. Kicks are numbered from 1;
/// `n = 0` is accepted as a plain evaluation.
pub fn fields_at_kick(
    protocol: &QuenchProtocol,
    coupling: f64,
    period: f64,
    n: usize,
) -> Result<KickFields, ScheduleError> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(ScheduleError::NonPositivePeriod(period));
    }
    if !coupling.is_finite() {
        return Err(ScheduleError::NonFinite { name: "J" });
    }
    protocol.validate()?;
    let t = n as f64 * period;
    let theta_x = match protocol.kind {
        ProtocolKind::Constant | ProtocolKind::Linear => period * protocol.hx0,
        ProtocolKind::Periodic => {
            let a = protocol.frequency;
            protocol.hx0 / a * ((a * t).cos() - (a * (t + period)).cos())
        }
    };
    Ok(KickFields { theta_z: period * protocol.hz_at(t), theta_x, theta_j: period * coupling })
}
