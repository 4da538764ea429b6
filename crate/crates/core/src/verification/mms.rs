//! Manufactured solutions: analytic specs, their exact residual forcing, and
//! the refinement studies built on them.

use crate::error::{Error, Result};
use crate::field::{Field2, VecField3};
use crate::grid::Grid;
use crate::params::{Regime, SimParams};
use crate::state::{make_state, Context, PrimState};
use crate::stepper::{self, SourceTerms};

use super::convergence::{convergence_order, ConvergenceReport};
use super::symbolic::{Expr, Factor};

/// Exact solution: surface variable (ξ or σ, z-independent) and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsSpec {
    pub surface: Expr,
    pub vx: Expr,
    pub vy: Expr,
}

impl MmsSpec {
    pub fn rest(level: f64) -> MmsSpec {
        MmsSpec {
            surface: Expr::constant(level),
            vx: Expr::zero(),
            vy: Expr::zero(),
        }
    }

    /// Rejects a z-dependent surface variable or a velocity whose vertical
    /// derivative does not vanish at z = 0 and z = 1.
    pub fn validate(&self) -> Result<()> {
        if !self.surface.is_z_independent() {
            return Err(Error::InvalidManufactured("surface variable depends on z".into()));
        }
        for (name, v) in [("vx", &self.vx), ("vy", &self.vy)] {
            let dz = v.d_z();
            for z in [0.0, 1.0] {
                let r = dz.at_z(z).max_coeff();
                if r > 1e-12 * (1.0 + v.max_coeff()) {
                    return Err(Error::InvalidManufactured(format!(
                        "d{name}/dz = {r:.3e} at z = {z}; the spec must satisfy the Neumann condition"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn surface_at(&self, grid: &Grid, t: f64) -> Field2 {
        self.surface.sample2(grid, t)
    }

    pub fn velocity_at(&self, grid: &Grid, t: f64) -> VecField3 {
        VecField3 {
            x: self.vx.sample3(grid, t),
            y: self.vy.sample3(grid, t),
        }
    }

    /// Exact state at time t, with the velocity sampled unprojected.
    pub fn state_at(&self, grid: &Grid, t: f64) -> PrimState {
        PrimState {
            surface_var: self.surface_at(grid, t),
            v: self.velocity_at(grid, t),
            time: t,
        }
    }
}

/// Residual sources that make an [`MmsSpec`] an exact solution.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsForcing {
    pub surface: Expr,
    pub momentum_x: Expr,
    pub momentum_y: Expr,
}

impl SourceTerms for MmsForcing {
    fn surface(&self, ctx: &Context, t: f64) -> Option<Field2> {
        (!self.surface.is_empty()).then(|| self.surface.sample2(&ctx.grid, t))
    }

    fn momentum(&self, ctx: &Context, t: f64) -> Option<VecField3> {
        if self.momentum_x.is_empty() && self.momentum_y.is_empty() {
            return None;
        }
        Some(VecField3 {
            x: self.momentum_x.sample3(&ctx.grid, t),
            y: self.momentum_y.sample3(&ctx.grid, t),
        })
    }
}

/// Differentiates the spec through the exact equations.
///
/// Continuity sources are written for the prognostic variable; the momentum
/// source is ρ∂_t v + ρv·∇_h v + (ρw)∂_z v + ∇_h P − Lv with ρw from the
/// source-free continuity equation.
pub fn mms_forcing(spec: &MmsSpec, params: &SimParams) -> Result<MmsForcing> {
    params.validate()?;
    spec.validate()?;
    let s = &spec.surface;
    let (vx, vy) = (&spec.vx, &spec.vy);
    let div = vx.d_x() + vy.d_y();
    let (rho, q, surface_src, pressure) = match params.regime {
        Regime::GravityGamma2 => {
            let half_g = 0.5 * params.g;
            let rho = s + &Expr::z_power(half_g, 1);
            let q = (s * vx).d_x() + (s * vy).d_y() + Expr::z_power(half_g, 1) * &div;
            let src = s.d_t() + q.z_average();
            let p = &rho * &rho;
            (rho, q, src, p)
        }
        Regime::VacuumNoGravity => {
            let twice = 2.0 * params.gamma;
            if twice.fract() != 0.0 {
                return Err(Error::InvalidManufactured(format!(
                    "vacuum specs need 2γ integral, got γ = {}",
                    params.gamma
                )));
            }
            let rho = s * s;
            let q = (&rho * vx).d_x() + (&rho * vy).d_y();
            let (ux, uy) = (vx.z_average(), vy.z_average());
            let src = s.d_t() + &ux * s.d_x() + &uy * s.d_y() + (s * (ux.d_x() + uy.d_y())).scale(0.5);
            let p = s.pow(twice as u32);
            (rho, q, src, p)
        }
        Regime::FreeBoundary => {
            return Err(Error::InvalidManufactured(
                "manufactured forcing covers the viscous regimes".into(),
            ))
        }
    };
    let flux = -(&q - &q.z_average()).integrate_z();
    let mu = params.mu;
    let ml = params.mu + params.lambda;
    let momentum = |v: &Expr, dp: Expr, ddiv: Expr| -> Expr {
        let adv = vx * v.d_x() + vy * v.d_y();
        let visc = (v.d_x().d_x() + v.d_y().d_y() + v.d_z().d_z()).scale(mu) + ddiv.scale(ml);
        &rho * (v.d_t() + adv) + &flux * v.d_z() + dp - visc
    };
    Ok(MmsForcing {
        surface: surface_src,
        momentum_x: momentum(vx, pressure.d_x(), div.d_x()),
        momentum_y: momentum(vy, pressure.d_y(), div.d_y()),
    })
}

/// Refinement family with its observed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub hs: Vec<f64>,
    pub errors: Vec<f64>,
    pub report: ConvergenceReport,
}

fn max_error(spec: &MmsSpec, grid: &Grid, state: &PrimState) -> f64 {
    let exact = spec.state_at(grid, state.time);
    let es = state
        .surface_var
        .zip_map(&exact.surface_var, |a, b| a - b)
        .max_abs();
    es + state.v.lincomb(1.0, &exact.v, -1.0).max_abs()
}

fn run_spec(ctx: &Context, spec: &MmsSpec, steps: usize) -> Result<f64> {
    let forcing = mms_forcing(spec, &ctx.params)?;
    let init = spec.state_at(&ctx.grid, 0.0);
    let state = make_state(ctx, init.surface_var, init.v)?;
    let out = stepper::run_with(ctx, state, steps, Some(&forcing), &mut |_| {}, &mut |_, _| {})?;
    Ok(max_error(spec, &ctx.grid, &out))
}

/// Steady shear ξ = 1, v = (ε sin2πy cos πz, 0) held by its forcing; the
/// error at t = 0.1 is measured on nz ∈ {9, 17, 33}.
pub fn vertical_diffusion_study() -> Result<Study> {
    let eps = 0.1;
    let spec = MmsSpec {
        surface: Expr::constant(1.0),
        vx: Expr::atom(eps, Factor::ONE, Factor::sin(1), Factor::cos(1), Factor::ONE),
        vy: Expr::zero(),
    };
    let mut hs = Vec::new();
    let mut errors = Vec::new();
    for nz in [9, 17, 33] {
        let mut p = SimParams::new(Regime::GravityGamma2);
        p.g = 0.0;
        p.dt = 1e-3;
        let ctx = Context::new(Grid::new(8, 8, nz)?, p)?;
        hs.push(ctx.grid.hz);
        errors.push(run_spec(&ctx, &spec, 100)?);
    }
    let report = convergence_order(&hs, &errors)?;
    Ok(Study { hs, errors, report })
}

/// ξ = 1 + ε cos2πx cos t, v = ε(sin2πy, 0) sin t on a spectrally exact grid;
/// the error at t = 0.4 is measured for dt ∈ {0.04, 0.02, 0.01}.
pub fn temporal_study() -> Result<Study> {
    let eps = 0.1;
    let spec = MmsSpec {
        surface: Expr::constant(1.0)
            + Expr::atom(eps, Factor::cos(1), Factor::ONE, Factor::ONE, Factor::cos(1)),
        vx: Expr::atom(eps, Factor::ONE, Factor::sin(1), Factor::ONE, Factor::sin(1)),
        vy: Expr::zero(),
    };
    let t_end = 0.4;
    let mut hs = Vec::new();
    let mut errors = Vec::new();
    for dt in [0.04, 0.02, 0.01] {
        let mut p = SimParams::new(Regime::GravityGamma2);
        p.dt = dt;
        p.picard_tol = 1e-12;
        p.picard_max_iter = 60;
        let ctx = Context::new(Grid::new(16, 16, 5)?, p)?;
        hs.push(dt);
        errors.push(run_spec(&ctx, &spec, (t_end / dt).round() as usize)?);
    }
    let report = convergence_order(&hs, &errors)?;
    Ok(Study { hs, errors, report })
}

/// Band-limited spec with horizontal bandwidth 2 and z-independent velocity.
pub fn band_limited_spec() -> MmsSpec {
    let one = Factor::ONE;
    MmsSpec {
        surface: Expr::constant(1.0)
            + Expr::atom(0.1, Factor::cos(2), Factor::sin(1), one, one)
            + Expr::atom(0.05, Factor::sin(1), Factor::cos(2), one, one),
        vx: Expr::atom(0.3, Factor::sin(1), Factor::cos(2), one, one) + Expr::constant(0.2),
        vy: Expr::atom(-0.2, Factor::cos(2), Factor::sin(2), one, one)
            + Expr::atom(0.1, Factor::sin(2), one, one, one),
    }
}

/// Max difference between the discrete ℱ + Lv and the exact
/// −ρv·∇v − ∇P + Lv for [`band_limited_spec`] at n × n resolution, g = 0.
pub fn horizontal_spectral_error(n: usize) -> Result<f64> {
    let mut p = SimParams::new(Regime::GravityGamma2);
    p.g = 0.0;
    let ctx = Context::new(Grid::new(n, n, 3)?, p)?;
    let spec = band_limited_spec();
    let state = spec.state_at(&ctx.grid, 0.0);
    let mut discrete = stepper::assemble_forcing(&ctx, &state)?;
    discrete.axpy(1.0, &stepper::apply_viscous(&ctx, &state.v)?);

    // Exact balance: the forcing with the time derivative removed, negated.
    let f = mms_forcing(&spec, &ctx.params)?;
    let vt_x = (&spec.surface * spec.vx.d_t()).sample3(&ctx.grid, 0.0);
    let vt_y = (&spec.surface * spec.vy.d_t()).sample3(&ctx.grid, 0.0);
    let ex = f.momentum_x.sample3(&ctx.grid, 0.0);
    let ey = f.momentum_y.sample3(&ctx.grid, 0.0);
    let mut err = 0.0f64;
    for i in 0..ctx.grid.len3() {
        let want_x = vt_x.data[i] - ex.data[i];
        let want_y = vt_y.data[i] - ey.data[i];
        err = err
            .max((discrete.x.data[i] - want_x).abs())
            .max((discrete.y.data[i] - want_y).abs());
    }
    Ok(err)
}

/// Manufactured solution for the forcing-consistency check:
/// ξ = 1 + ε cos2πx cos t, v = ε(sin2πy cos πz, 0) sin t.
pub fn shear_wave_spec(eps: f64) -> MmsSpec {
    MmsSpec {
        surface: Expr::constant(1.0)
            + Expr::atom(eps, Factor::cos(1), Factor::ONE, Factor::ONE, Factor::cos(1)),
        vx: Expr::atom(eps, Factor::ONE, Factor::sin(1), Factor::cos(1), Factor::sin(1)),
        vy: Expr::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::oracle;

    #[test]
    fn rest_spec_has_zero_forcing() {
        for regime in [Regime::GravityGamma2, Regime::VacuumNoGravity] {
            let f = mms_forcing(&MmsSpec::rest(1.0), &SimParams::new(regime)).unwrap();
            assert!(f.surface.max_coeff() < 1e-15);
            assert!(f.momentum_x.max_coeff() < 1e-15 && f.momentum_y.max_coeff() < 1e-15, "{f:?}");
        }
    }

    #[test]
    fn rejects_non_neumann_and_layered_specs() {
        let p = SimParams::new(Regime::GravityGamma2);
        let mut spec = MmsSpec::rest(1.0);
        spec.vx = Expr::atom(1.0, Factor::ONE, Factor::ONE, Factor::sin(1), Factor::ONE);
        assert!(matches!(mms_forcing(&spec, &p), Err(Error::InvalidManufactured(_))));
        let mut spec = MmsSpec::rest(1.0);
        spec.surface = Expr::atom(1.0, Factor::ONE, Factor::ONE, Factor::cos(1), Factor::ONE);
        assert!(mms_forcing(&spec, &p).is_err());
    }

    #[test]
    fn frozen_spec_has_no_time_terms() {
        let p = SimParams::new(Regime::GravityGamma2);
        let spec = MmsSpec {
            surface: Expr::constant(1.0) + Expr::atom(0.1, Factor::cos(1), Factor::ONE, Factor::ONE, Factor::ONE),
            vx: Expr::atom(0.1, Factor::ONE, Factor::sin(1), Factor::cos(1), Factor::ONE),
            vy: Expr::zero(),
        };
        let f = mms_forcing(&spec, &p).unwrap();
        for e in [&f.surface, &f.momentum_x, &f.momentum_y] {
            assert!(e.terms().all(|(m, _)| m.t == Factor::ONE));
        }
    }

    #[test]
    fn forcing_matches_finite_difference_oracle() {
        let mut p = SimParams::new(Regime::GravityGamma2);
        p.lambda = 0.5;
        let spec = shear_wave_spec(0.1);
        let f = mms_forcing(&spec, &p).unwrap();
        let ev = |e: &Expr| {
            let e = e.clone();
            move |x: f64, y: f64, z: f64, t: f64| e.eval(x, y, z, t)
        };
        let (xi, vx, vy) = (ev(&spec.surface), ev(&spec.vx), ev(&spec.vy));
        for &pt in &[(0.13, 0.71, 0.37, 0.9), (0.6, 0.2, 0.05, 1.7), (0.42, 0.93, 0.88, 0.3)] {
            let (s, fx, fy) = oracle::fd_gravity_forcing(&xi, &vx, &vy, p.mu, p.lambda, p.g, pt);
            let (x, y, z, t) = pt;
            assert!((f.surface.eval(x, y, z, t) - s).abs() < 1e-10, "surface");
            assert!((f.momentum_x.eval(x, y, z, t) - fx).abs() < 1e-10, "{} vs {fx}", f.momentum_x.eval(x, y, z, t));
            assert!((f.momentum_y.eval(x, y, z, t) - fy).abs() < 1e-10);
        }
    }

    #[test]
    fn source_terms_sample_the_forcing() {
        let p = SimParams::new(Regime::GravityGamma2);
        let ctx = Context::new(Grid::new(8, 8, 5).unwrap(), p.clone()).unwrap();
        let f = mms_forcing(&shear_wave_spec(0.1), &p).unwrap();
        let s = f.surface(&ctx, 0.3).unwrap();
        let want = f.surface.eval(ctx.grid.x(3), ctx.grid.y(2), 0.0, 0.3);
        assert!((s.data[2 * 8 + 3] - want).abs() < 1e-15);
        assert!(MmsForcing {
            surface: Expr::zero(),
            momentum_x: Expr::zero(),
            momentum_y: Expr::zero()
        }
        .momentum(&ctx, 0.0)
        .is_none());
    }
}
