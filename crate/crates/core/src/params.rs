//! Physical constants and numerical controls.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which reformulated system is being integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Gravity with the adiabatic exponent pinned to 2; prognostic ξ.
    GravityGamma2,
    /// No gravity, vacuum admissible; prognostic σ = ρ^{1/2}.
    VacuumNoGravity,
    /// Inviscid free-boundary problem in η-coordinates.
    FreeBoundary,
}

impl Regime {
    pub fn tag(self) -> u8 {
        match self {
            Regime::GravityGamma2 => 0,
            Regime::VacuumNoGravity => 1,
            Regime::FreeBoundary => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Regime> {
        match tag {
            0 => Some(Regime::GravityGamma2),
            1 => Some(Regime::VacuumNoGravity),
            2 => Some(Regime::FreeBoundary),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::GravityGamma2 => "gravity_gamma2",
            Regime::VacuumNoGravity => "vacuum_no_gravity",
            Regime::FreeBoundary => "free_boundary",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gravity_gamma2" | "gravity" => Ok(Regime::GravityGamma2),
            "vacuum_no_gravity" | "vacuum" => Ok(Regime::VacuumNoGravity),
            "free_boundary" | "fb" => Ok(Regime::FreeBoundary),
            other => Err(Error::InvalidParams(format!("unknown regime '{other}'"))),
        }
    }
}

/// Physical constants and numerical controls of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub mu: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub g: f64,
    pub dt: f64,
    pub t_end: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Coefficient of the optional ι Δ_h ξ regularization of the surface transport.
    pub iota: f64,
    /// Density floor ε; w is left undefined where the density does not exceed it.
    pub rho_floor: f64,
    pub regime: Regime,
}

/// Lower bound used to lift vanishing mass-matrix entries in the momentum solve.
pub const MASS_LIFT_MIN: f64 = 1e-10;

/// Courant limit on the vertically averaged horizontal velocity.
pub const CFL_LIMIT: f64 = 0.5;

impl SimParams {
    /// Reasonable viscous defaults for the given regime.
    pub fn new(regime: Regime) -> Self {
        let (mu, lambda, g, gamma) = match regime {
            Regime::GravityGamma2 => (1.0, 1.0, 9.8, 2.0),
            Regime::VacuumNoGravity => (1.0, 1.0, 0.0, 2.0),
            Regime::FreeBoundary => (0.0, 0.0, 9.8, 1.4),
        };
        SimParams {
            mu,
            lambda,
            gamma,
            g,
            dt: 1e-3,
            t_end: 0.1,
            picard_tol: 1e-10,
            picard_max_iter: 20,
            iota: 0.0,
            rho_floor: match regime {
                Regime::GravityGamma2 => 1e-6,
                _ => 0.0,
            },
            regime,
        }
    }

    /// Checks every invariant; the first violation is reported.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        let finite = [
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("g", self.g),
            ("dt", self.dt),
            ("t_end", self.t_end),
            ("picard_tol", self.picard_tol),
            ("iota", self.iota),
            ("rho_floor", self.rho_floor),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.gamma <= 1.0 {
            return bad(format!("gamma must exceed 1, got {}", self.gamma));
        }
        if self.regime == Regime::GravityGamma2 && self.gamma != 2.0 {
            return bad(format!(
                "the gravity regime is formulated only for gamma = 2 (got {})",
                self.gamma
            ));
        }
        if self.g < 0.0 {
            return bad(format!("g must be non-negative, got {}", self.g));
        }
        if self.dt <= 0.0 {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.t_end < 0.0 {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if self.picard_tol <= 0.0 {
            return bad(format!("picard_tol must be positive, got {}", self.picard_tol));
        }
        if self.iota < 0.0 {
            return bad(format!("iota must be non-negative, got {}", self.iota));
        }
        if self.rho_floor < 0.0 {
            return bad(format!("rho_floor must be non-negative, got {}", self.rho_floor));
        }
        match self.regime {
            Regime::GravityGamma2 | Regime::VacuumNoGravity => {
                if self.mu <= 0.0 {
                    return bad(format!("mu must be positive in viscous regimes, got {}", self.mu));
                }
                if self.mu + self.lambda <= 0.0 {
                    return bad(format!(
                        "mu + lambda must be positive, got {}",
                        self.mu + self.lambda
                    ));
                }
            }
            Regime::FreeBoundary => {
                if self.mu != 0.0 || self.lambda != 0.0 {
                    return bad("the free-boundary regime is inviscid: mu = lambda = 0".into());
                }
                if self.g <= 0.0 {
                    return bad("the free-boundary regime needs g > 0".into());
                }
            }
        }
        Ok(())
    }

    /// Floor applied to the mass-matrix diagonal of the momentum solve.
    pub fn mass_lift(&self) -> f64 {
        self.rho_floor.max(MASS_LIFT_MIN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for regime in [
            Regime::GravityGamma2,
            Regime::VacuumNoGravity,
            Regime::FreeBoundary,
        ] {
            SimParams::new(regime).validate().unwrap();
        }
    }

    #[test]
    fn gravity_rejects_general_gamma() {
        let mut p = SimParams::new(Regime::GravityGamma2);
        p.gamma = 1.4;
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("gamma = 2"), "{err}");
    }

    #[test]
    fn free_boundary_is_inviscid() {
        let mut p = SimParams::new(Regime::FreeBoundary);
        p.mu = 0.1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn viscous_regimes_need_positive_viscosity() {
        let mut p = SimParams::new(Regime::VacuumNoGravity);
        p.lambda = -1.5;
        assert!(p.validate().is_err());
        p.lambda = 0.0;
        p.mu = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn regime_tags_round_trip() {
        for tag in 0..3u8 {
            assert_eq!(Regime::from_tag(tag).unwrap().tag(), tag);
        }
        assert!(Regime::from_tag(3).is_none());
        assert_eq!("vacuum_no_gravity".parse::<Regime>().unwrap(), Regime::VacuumNoGravity);
    }
}
