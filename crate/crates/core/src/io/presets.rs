//! Named initial conditions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{Field2, VecField3};
use crate::free_boundary::FbState;
use crate::grid::Grid;
use crate::params::Regime;
use crate::state::{make_state, Context, PrimState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Surface variable 1 (or Z = 1), v = 0.
    Rest,
    /// Surface 1 + A cos2πx, v = (A sin2πy cos πz, 0).
    ShearWave,
    /// σ = max(0, cos2πx)³, vacuum on ¼ ≤ x ≤ ¾, with σ² times the shear velocity.
    VacuumCosine,
    /// Z = 1 + A cos2πx at rest.
    FbBump,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Rest => "rest",
            Preset::ShearWave => "shear_wave",
            Preset::VacuumCosine => "vacuum_cosine",
            Preset::FbBump => "fb_bump",
        }
    }

    /// Default preset of a regime.
    pub fn for_regime(regime: Regime) -> Preset {
        match regime {
            Regime::GravityGamma2 => Preset::ShearWave,
            Regime::VacuumNoGravity => Preset::VacuumCosine,
            Regime::FreeBoundary => Preset::FbBump,
        }
    }

    pub fn supports(self, regime: Regime) -> bool {
        match self {
            Preset::Rest => true,
            Preset::ShearWave => regime != Regime::FreeBoundary,
            Preset::VacuumCosine => regime == Regime::VacuumNoGravity,
            Preset::FbBump => regime == Regime::FreeBoundary,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rest" => Ok(Preset::Rest),
            "shear_wave" => Ok(Preset::ShearWave),
            "vacuum_cosine" => Ok(Preset::VacuumCosine),
            "fb_bump" => Ok(Preset::FbBump),
            other => Err(Error::InvalidParams(format!("unknown preset '{other}'"))),
        }
    }
}

/// Random horizontal field with modes |m| ≤ kmax, scaled to unit max norm.
pub fn random_band_limited2(grid: &Grid, seed: u64, kmax: i32) -> Field2 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for a in -kmax..=kmax {
        for b in -kmax..=kmax {
            modes.push((a as f64, b as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)));
        }
    }
    let f = Field2::from_fn(grid, |x, y| {
        modes
            .iter()
            .map(|&(a, b, c, ph)| c * (2.0 * PI * (a * x + b * y) + ph).cos())
            .sum()
    });
    let m = f.max_abs();
    if m > 0.0 {
        f.map(|v| v / m)
    } else {
        f
    }
}

fn shear_velocity(grid: &Grid, amp: f64) -> VecField3 {
    VecField3::from_fn(grid, |_, y, z| (amp * (2.0 * PI * y).sin() * (PI * z).cos(), 0.0))
}

/// Builds a viscous-regime state, adding `perturbation` times a seeded random
/// band-limited field to the surface variable.
pub fn prim_initial(ctx: &Context, preset: Preset, amplitude: f64, seed: u64, perturbation: f64) -> Result<PrimState> {
    let regime = ctx.regime();
    if regime == Regime::FreeBoundary || !preset.supports(regime) {
        return Err(Error::InvalidParams(format!(
            "preset {preset} does not apply to regime {regime}"
        )));
    }
    let g = &ctx.grid;
    let (surface, v) = match preset {
        Preset::Rest => (Field2::constant(g, 1.0), VecField3::zeros(g)),
        Preset::ShearWave => (
            Field2::from_fn(g, |x, _| 1.0 + amplitude * (2.0 * PI * x).cos()),
            shear_velocity(g, amplitude),
        ),
        Preset::VacuumCosine => {
            let sigma = Field2::from_fn(g, |x, _| (2.0 * PI * x).cos().max(0.0).powi(3));
            // The factor σ² makes Lv/σ bounded near the vacuum line.
            let w = sigma.map(|s| s * s);
            let v = shear_velocity(g, amplitude);
            let v = VecField3 {
                x: v.x.mul_plane(&w),
                y: v.y.mul_plane(&w),
            };
            (sigma, v)
        }
        Preset::FbBump => unreachable!(),
    };
    let surface = if perturbation != 0.0 {
        let r = random_band_limited2(g, seed, 2);
        surface.zip_map(&r, |a, b| a + perturbation * b)
    } else {
        surface
    };
    make_state(ctx, surface, v)
}

/// Builds a free-boundary state.
pub fn fb_initial(ctx: &Context, preset: Preset, amplitude: f64, seed: u64, perturbation: f64) -> Result<FbState> {
    if ctx.regime() != Regime::FreeBoundary || !preset.supports(Regime::FreeBoundary) {
        return Err(Error::InvalidParams(format!(
            "preset {preset} does not apply to regime {}",
            ctx.regime()
        )));
    }
    let g = &ctx.grid;
    let mut height = match preset {
        Preset::FbBump => Field2::from_fn(g, |x, _| 1.0 + amplitude * (2.0 * PI * x).cos()),
        _ => Field2::constant(g, 1.0),
    };
    if perturbation != 0.0 {
        let r = random_band_limited2(g, seed, 2);
        height = height.zip_map(&r, |a, b| a + perturbation * b);
    }
    if let Some((index, &value)) = height.data.iter().enumerate().find(|(_, z)| !(**z > 0.0)) {
        return Err(Error::InterfaceCollapse { value, index });
    }
    Ok(FbState {
        height,
        v: VecField3::zeros(g),
        time: 0.0,
    })
}

/// Copy of `state` with the surface variable shifted by `scale` times a seeded
/// random band-limited field, re-validated through [`make_state`].
pub fn perturb(ctx: &Context, state: &PrimState, scale: f64, seed: u64) -> Result<PrimState> {
    let r = random_band_limited2(&ctx.grid, seed, 2);
    let surface = state.surface_var.zip_map(&r, |a, b| a + scale * b);
    let mut out = make_state(ctx, surface, state.v.clone())?;
    out.time = state.time;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SimParams;

    #[test]
    fn names_round_trip() {
        for p in [Preset::Rest, Preset::ShearWave, Preset::VacuumCosine, Preset::FbBump] {
            assert_eq!(p.as_str().parse::<Preset>().unwrap(), p);
        }
        assert!("vortex".parse::<Preset>().is_err());
    }

    #[test]
    fn seeded_fields_are_reproducible() {
        let g = Grid::new(8, 8, 3).unwrap();
        assert_eq!(random_band_limited2(&g, 7, 2), random_band_limited2(&g, 7, 2));
        assert_ne!(random_band_limited2(&g, 7, 2), random_band_limited2(&g, 8, 2));
        assert!((random_band_limited2(&g, 1, 2).max_abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vacuum_preset_has_a_zero_set() {
        let ctx = Context::new(Grid::new(16, 8, 5).unwrap(), SimParams::new(Regime::VacuumNoGravity)).unwrap();
        let s = prim_initial(&ctx, Preset::VacuumCosine, 0.1, 0, 0.0).unwrap();
        assert!((5..=11).all(|i| s.surface_var.data[i] == 0.0));
        assert!(s.v.x.data[8] == 0.0 && s.surface_var.data[0] == 1.0);
        assert!(s.surface_var.min() >= 0.0);
    }

    #[test]
    fn presets_are_checked_against_regime() {
        let ctx = Context::new(Grid::new(8, 8, 5).unwrap(), SimParams::new(Regime::GravityGamma2)).unwrap();
        assert!(prim_initial(&ctx, Preset::FbBump, 0.1, 0, 0.0).is_err());
        assert!(prim_initial(&ctx, Preset::VacuumCosine, 0.1, 0, 0.0).is_err());
        let fb = Context::new(Grid::new(8, 8, 5).unwrap(), SimParams::new(Regime::FreeBoundary)).unwrap();
        assert!(fb_initial(&fb, Preset::FbBump, 2.0, 0, 0.0).is_err());
        assert!(fb_initial(&fb, Preset::FbBump, 0.1, 0, 0.0).is_ok());
    }
}
