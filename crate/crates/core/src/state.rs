//! Prognostic state, derived fields and initial-data checks.

use crate::error::{Error, Result};
use crate::field::{Field2, Field3, VecField3};
use crate::grid::Grid;
use crate::hydrostatics;
use crate::ops::spectral::SpectralPlan;
use crate::ops::vertical::{self, DzMode};
use crate::params::{Regime, SimParams};

/// Grid, transform plan and parameters shared by every operation of a run.
#[derive(Debug, Clone)]
pub struct Context {
    pub grid: Grid,
    pub plan: SpectralPlan,
    pub params: SimParams,
}

impl Context {
    pub fn new(grid: Grid, params: SimParams) -> Result<Self> {
        params.validate()?;
        let plan = SpectralPlan::new(&grid);
        Ok(Context { grid, plan, params })
    }

    pub fn regime(&self) -> Regime {
        self.params.regime
    }
}

/// Surface variable (ξ or σ) plus horizontal velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimState {
    pub surface_var: Field2,
    pub v: VecField3,
    pub time: f64,
}

impl PrimState {
    pub fn matches(&self, grid: &Grid) -> bool {
        self.surface_var.matches(grid) && self.v.matches(grid)
    }
}

/// Quantities reconstructed from a [`PrimState`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFields {
    pub rho: Field3,
    pub pressure: Field3,
    /// ρw in the gravity regime, σw in the vacuum regime.
    pub mass_flux_w: Field3,
    /// NaN where the density does not exceed the floor.
    pub w: Field3,
}

/// One row of the diagnostics stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub dissipation_rate: f64,
    pub min_density: f64,
    pub picard_iters: usize,
    pub l2_surface: f64,
    pub l2_v: f64,
}

/// Overwrites the end levels so the one-sided second-order ∂_z v vanishes there.
pub fn neumann_project(f: &mut Field3) {
    let nz = f.nz;
    let n = f.plane_len();
    if nz == 3 {
        let mid = f.plane(1).to_vec();
        f.plane_mut(0).copy_from_slice(&mid);
        f.plane_mut(2).copy_from_slice(&mid);
        return;
    }
    let top = (nz - 1) * n;
    for p in 0..n {
        f.data[p] = (4.0 * f.data[n + p] - f.data[2 * n + p]) / 3.0;
        f.data[top + p] = (4.0 * f.data[top - n + p] - f.data[top - 2 * n + p]) / 3.0;
    }
}

/// Builds the initial state, rejecting data the regime cannot carry.
pub fn make_state(ctx: &Context, init_surface: Field2, init_v: VecField3) -> Result<PrimState> {
    let grid = &ctx.grid;
    if !init_surface.matches(grid) {
        return Err(Error::ShapeMismatch {
            expected: grid.plane_len(),
            got: init_surface.data.len(),
        });
    }
    for comp in [&init_v.x, &init_v.y] {
        if !comp.matches(grid) {
            return Err(Error::ShapeMismatch {
                expected: grid.len3(),
                got: comp.data.len(),
            });
        }
    }
    if init_surface.data.iter().chain(&init_v.x.data).chain(&init_v.y.data).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInitialData("non-finite value in initial data".into()));
    }
    let p = &ctx.params;
    match p.regime {
        Regime::GravityGamma2 => {
            // ρ is smallest at the ground because g ≥ 0.
            let (index, value) = argmin(&init_surface.data);
            if value < 0.0 {
                return Err(Error::NegativeDensity { value, index });
            }
            if p.rho_floor > 0.0 && value < p.rho_floor {
                return Err(Error::DensityBelowFloor {
                    value,
                    floor: p.rho_floor,
                    index,
                });
            }
        }
        Regime::VacuumNoGravity => {
            let (index, value) = argmin(&init_surface.data);
            if value < 0.0 {
                return Err(Error::NegativeDensity { value, index });
            }
        }
        Regime::FreeBoundary => {
            return Err(Error::InvalidParams(
                "free-boundary states are built with FbState".into(),
            ));
        }
    }
    let mut v = init_v;
    neumann_project(&mut v.x);
    neumann_project(&mut v.y);
    let state = PrimState {
        surface_var: init_surface,
        v,
        time: 0.0,
    };
    let mass = crate::diagnostics::mass(ctx, &state);
    if !(mass > 0.0) {
        return Err(Error::InvalidInitialData(format!(
            "total mass must be positive, got {mass:e}"
        )));
    }
    Ok(state)
}

fn argmin(data: &[f64]) -> (usize, f64) {
    data.iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) })
}

/// Residuals of the initial compatibility conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    /// L² norm of V₁ (gravity) or h₁ (vacuum).
    pub residual_l2: f64,
    /// Max of the one-sided ∂_z v₀ at z = 0.
    pub boundary_bottom: f64,
    /// Max of the one-sided ∂_z v₀ at z = 1.
    pub boundary_top: f64,
    /// Points excluded because the weight ρ₀ (or ρ₀^{1/2}) vanishes there.
    pub excluded_points: usize,
}

/// Evaluates the compatibility combination on the given initial fields.
pub fn check_compatibility_fields(
    ctx: &Context,
    surface: &Field2,
    v: &VecField3,
) -> Result<CompatibilityReport> {
    let grid = &ctx.grid;
    let plan = &ctx.plan;
    let p = &ctx.params;
    let state = PrimState {
        surface_var: surface.clone(),
        v: v.clone(),
        time: 0.0,
    };
    let rho = hydrostatics::density_field(ctx, surface);
    let flux = match p.regime {
        Regime::GravityGamma2 => hydrostatics::mass_flux_gravity(ctx, surface, v),
        Regime::VacuumNoGravity => {
            let sw = hydrostatics::mass_flux_vacuum(ctx, surface, v);
            sw.mul_plane(surface)
        }
        Regime::FreeBoundary => {
            return Err(Error::InvalidParams("no compatibility conditions for FbState".into()))
        }
    };
    let lv = crate::stepper::apply_viscous(ctx, v)?;
    let grad_p = hydrostatics::pressure_gradient_pointwise(ctx, surface);
    let mut total = Vec::with_capacity(grid.plane_len());
    let mut excluded = 0usize;
    let mut comps = Vec::new();
    for (vc, lc, gp) in [(&v.x, &lv.x, &grad_p.x), (&v.y, &lv.y, &grad_p.y)] {
        let dx = plan.dx3(vc);
        let dy = plan.dy3(vc);
        let dz = vertical::d_z(grid, vc, DzMode::Even)?;
        let mut r = Field3::zeros(grid);
        for i in 0..r.data.len() {
            let adv = rho.data[i] * (v.x.data[i] * dx.data[i] + v.y.data[i] * dy.data[i])
                + flux.data[i] * dz.data[i];
            r.data[i] = lc.data[i] - gp.data[i] - adv;
        }
        comps.push(r);
    }
    let weight = match p.regime {
        Regime::GravityGamma2 => rho.clone(),
        _ => rho.map(|r| r.max(0.0).sqrt()),
    };
    let n = grid.plane_len();
    for k in 0..grid.nz {
        let mut sq = Vec::with_capacity(n);
        for pt in 0..n {
            let i = k * n + pt;
            let wgt = weight.data[i];
            if wgt > 0.0 {
                let a = comps[0].data[i] / wgt;
                let b = comps[1].data[i] / wgt;
                sq.push(a * a + b * b);
            } else {
                excluded += 1;
            }
        }
        total.push(grid.quad_weights[k] * crate::field::pairwise_sum(&sq));
    }
    let residual_l2 = (crate::field::pairwise_sum(&total) / n as f64).sqrt();
    let bottom_top = |comp: &Field3| -> Result<(f64, f64)> {
        let d = vertical::d_z(grid, comp, DzMode::OneSided)?;
        let b = d.plane(0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let t = d.plane(grid.nz - 1).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok((b, t))
    };
    let (bx, tx) = bottom_top(&state.v.x)?;
    let (by, ty) = bottom_top(&state.v.y)?;
    Ok(CompatibilityReport {
        residual_l2,
        boundary_bottom: bx.max(by),
        boundary_top: tx.max(ty),
        excluded_points: excluded,
    })
}

/// Compatibility residuals of a constructed state.
pub fn check_compatibility(ctx: &Context, state: &PrimState) -> Result<CompatibilityReport> {
    check_compatibility_fields(ctx, &state.surface_var, &state.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ctx(regime: Regime, n: usize, nz: usize) -> Context {
        Context::new(Grid::new(n, n, nz).unwrap(), SimParams::new(regime)).unwrap()
    }

    #[test]
    fn constant_state_has_unit_min_density() {
        let c = ctx(Regime::GravityGamma2, 4, 3);
        let s = make_state(&c, Field2::constant(&c.grid, 1.0), VecField3::zeros(&c.grid)).unwrap();
        assert_eq!(crate::diagnostics::min_density(&c, &s), 1.0);
    }

    #[test]
    fn zero_vacuum_mass_rejected() {
        let c = ctx(Regime::VacuumNoGravity, 4, 3);
        let err = make_state(&c, Field2::constant(&c.grid, 0.0), VecField3::zeros(&c.grid)).unwrap_err();
        assert!(matches!(err, Error::InvalidInitialData(_)), "{err}");
    }

    #[test]
    fn shape_mismatch_rejected() {
        let c = ctx(Regime::GravityGamma2, 4, 3);
        let bad = Field2::zeros(6, 4);
        assert!(matches!(
            make_state(&c, bad, VecField3::zeros(&c.grid)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn negative_surface_rejected() {
        let c = ctx(Regime::GravityGamma2, 4, 3);
        let mut s = Field2::constant(&c.grid, 1.0);
        s.data[5] = -0.1;
        assert!(matches!(
            make_state(&c, s, VecField3::zeros(&c.grid)),
            Err(Error::NegativeDensity { index: 5, .. })
        ));
    }

    #[test]
    fn projection_zeroes_one_sided_slope() {
        let c = ctx(Regime::GravityGamma2, 4, 9);
        let v = VecField3::from_fn(&c.grid, |_, _, z| (z * z * z, 0.0));
        let s = make_state(&c, Field2::constant(&c.grid, 1.0), v).unwrap();
        let d = vertical::d_z(&c.grid, &s.v.x, DzMode::OneSided).unwrap();
        assert!(d.plane(0).iter().chain(d.plane(8)).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rest_state_is_compatible() {
        let mut p = SimParams::new(Regime::GravityGamma2);
        p.g = 0.0;
        let c = Context::new(Grid::new(8, 8, 5).unwrap(), p).unwrap();
        let r = check_compatibility_fields(&c, &Field2::constant(&c.grid, 2.0), &VecField3::zeros(&c.grid)).unwrap();
        assert!(r.residual_l2 < 1e-13);
        assert_eq!(r.boundary_top, 0.0);
    }

    #[test]
    fn vacuum_cosine_residual() {
        let mut p = SimParams::new(Regime::VacuumNoGravity);
        p.lambda = 0.0;
        let c = Context::new(Grid::new(16, 16, 5).unwrap(), p).unwrap();
        let v = VecField3::from_fn(&c.grid, |x, _, _| ((2.0 * PI * x).cos(), 0.0));
        let r = check_compatibility_fields(&c, &Field2::constant(&c.grid, 1.0), &v).unwrap();
        let exact = (32.0 * PI.powi(4) + PI * PI / 2.0).sqrt();
        assert!((r.residual_l2 - exact).abs() < 1e-10 * exact, "{}", r.residual_l2);
    }

    #[test]
    fn boundary_slope_is_flagged() {
        let c = ctx(Regime::GravityGamma2, 4, 9);
        let v = VecField3::from_fn(&c.grid, |_, _, z| (z * z, 0.0));
        let r = check_compatibility_fields(&c, &Field2::constant(&c.grid, 1.0), &v).unwrap();
        assert!((r.boundary_top - 2.0).abs() < 1e-10);
        assert!(r.boundary_bottom < 1e-12);
    }
}
