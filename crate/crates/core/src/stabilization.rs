use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// The four stabilized schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// pressure LPS plus global grad-div
    GradDiv,
    /// pressure LPS plus LPS of the velocity gradient, `tau ~ 1`
    GradientLps,
    /// pressure LPS plus LPS of the velocity divergence, `tau ~ 1`
    DivergenceLps,
    /// gradient LPS with `tau_p, tau_nu ~ h`, for `nu <= h`
    HalfRate,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::GradDiv, Method::GradientLps, Method::DivergenceLps, Method::HalfRate];

    pub fn name(self) -> &'static str {
        match self {
            Method::GradDiv => "GD",
            Method::GradientLps => "GRADLPS",
            Method::DivergenceLps => "DIVLPS",
            Method::HalfRate => "HALFRATE",
        }
    }

    pub fn velocity_lps(self) -> Option<VelocityLpsKind> {
        match self {
            Method::GradDiv => None,
            Method::GradientLps | Method::HalfRate => Some(VelocityLpsKind::Gradient),
            Method::DivergenceLps => Some(VelocityLpsKind::Divergence),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::config_key("method", format!("unknown method `{s}` (expected GD, GRADLPS, DIVLPS or HALFRATE)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityLpsKind {
    Gradient,
    Divergence,
}

/// Per-cell parameter `coeff * h_K^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterRule {
    pub coeff: f64,
    pub power: i32,
}

impl ParameterRule {
    pub const ZERO: ParameterRule = ParameterRule { coeff: 0.0, power: 0 };

    pub fn new(coeff: f64, power: i32) -> Self {
        ParameterRule { coeff, power }
    }

    pub fn eval(&self, h: f64) -> f64 {
        self.coeff * h.powi(self.power)
    }

    pub fn per_cell(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.cell_diameters().iter().map(|&h| self.eval(h)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeff == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationConfig {
    pub method: Method,
    /// pressure LPS
    pub tau_p: ParameterRule,
    /// velocity LPS (`tau_nu` for gradients, `tau_mu` for divergences)
    pub tau_u: ParameterRule,
    /// global grad-div
    pub mu: ParameterRule,
}

impl StabilizationConfig {
    /// Parameter choices used in the numerical study for each method.
    pub fn defaults(method: Method) -> Self {
        let h2 = ParameterRule::new(1.0, 2);
        match method {
            Method::GradDiv => {
                StabilizationConfig { method, tau_p: h2, tau_u: ParameterRule::ZERO, mu: ParameterRule::new(0.1, 0) }
            }
            Method::GradientLps | Method::DivergenceLps => {
                StabilizationConfig { method, tau_p: h2, tau_u: ParameterRule::new(1.0, 0), mu: ParameterRule::ZERO }
            }
            Method::HalfRate => StabilizationConfig {
                method,
                tau_p: ParameterRule::new(1e-4, 1),
                tau_u: ParameterRule::new(0.01, 1),
                mu: ParameterRule::ZERO,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, rule) in [("tau_p", self.tau_p), ("tau_u", self.tau_u), ("mu", self.mu)] {
            if !(rule.coeff.is_finite() && rule.coeff >= 0.0) {
                return Err(Error::config_key(key, format!("coefficient must be finite and nonnegative, got {}", rule.coeff)));
            }
        }
        if self.method == Method::HalfRate {
            if self.tau_p.power != 1 {
                return Err(Error::config_key("tau_p_power", "HALFRATE needs tau_p proportional to h_K"));
            }
            if self.tau_u.power != 1 {
                return Err(Error::config_key("tau_u_power", "HALFRATE needs tau_nu proportional to h_K"));
            }
        }
        Ok(())
    }
}
