//! Inviscid free-boundary flow in the interface-following coordinate
//! η = 1 − z/Z, with η = 0 the gas–vacuum interface and η = 1 the ground.
//!
//! The vertical level k of the grid is η_k = k·h. Weighted averages
//! (η^a f)‾ with a = 1/(γ−1) are computed by product integration against the
//! piecewise-linear interpolant of f, so the weight moments are exact and the
//! recovered W of an η-independent velocity vanishes to roundoff.

use crate::error::{Error, Result};
use crate::field::{pairwise_sum, Field2, Field3, VecField3};
use crate::grid::Grid;
use crate::ops::vertical::{self, DzMode};
use crate::params::{Regime, SimParams};
use crate::state::Context;
use crate::stepper::check_cfl;

/// Interface height Z and horizontal velocity on the (x, y, η) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FbState {
    pub height: Field2,
    pub v: VecField3,
    pub time: f64,
}

impl FbState {
    pub fn matches(&self, grid: &Grid) -> bool {
        self.height.matches(grid) && self.v.matches(grid)
    }
}

fn exponent(params: &SimParams) -> f64 {
    1.0 / (params.gamma - 1.0)
}

fn check_height(height: &Field2) -> Result<()> {
    for (index, &value) in height.data.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InterfaceCollapse { value, index });
        }
    }
    Ok(())
}

fn check_params(params: &SimParams) -> Result<()> {
    if params.regime != Regime::FreeBoundary {
        return Err(Error::InvalidParams(format!(
            "free-boundary operations need regime free_boundary, got {}",
            params.regime
        )));
    }
    Ok(())
}

/// ρ = ((γ−1)/γ · g η Z)^{1/(γ−1)}.
pub fn fb_density(height: f64, eta: f64, params: &SimParams) -> Result<f64> {
    if !(height > 0.0) {
        return Err(Error::InterfaceCollapse { value: height, index: 0 });
    }
    let gm = params.gamma;
    Ok(((gm - 1.0) / gm * params.g * eta * height).powf(exponent(params)))
}

/// Density on every grid point.
pub fn fb_density_field(grid: &Grid, height: &Field2, params: &SimParams) -> Result<Field3> {
    check_height(height)?;
    let mut out = Field3::zeros(grid);
    for k in 0..grid.nz {
        let eta = grid.z_levels[k];
        for (o, &z) in out.plane_mut(k).iter_mut().zip(&height.data) {
            *o = fb_density(z, eta, params)?;
        }
    }
    Ok(out)
}

/// Ground pressure P_s = ((γ−1)/γ · g Z)^{γ/(γ−1)}.
pub fn fb_ground_pressure(height: &Field2, params: &SimParams) -> Result<Field2> {
    check_height(height)?;
    let gm = params.gamma;
    let c = (gm - 1.0) / gm * params.g;
    Ok(height.map(|z| (c * z).powf(gm / (gm - 1.0))))
}

/// Mean over the horizontal domain of Z^{γ/(γ−1)}, proportional to the total mass.
pub fn column_mass(height: &Field2, params: &SimParams) -> f64 {
    let p = params.gamma / (params.gamma - 1.0);
    let vals: Vec<f64> = height.data.iter().map(|z| z.powf(p)).collect();
    pairwise_sum(&vals) / vals.len() as f64
}

/// Product-integration weights on each cell: ∫_{η_k}^{η_{k+1}} η^a f dη = α_k f_k + β_k f_{k+1}.
fn cell_weights(grid: &Grid, a: f64) -> Vec<(f64, f64)> {
    let h = grid.hz;
    (0..grid.nz - 1)
        .map(|k| {
            let (e0, e1) = (grid.z_levels[k], grid.z_levels[k + 1]);
            let m0 = (e1.powf(a + 1.0) - e0.powf(a + 1.0)) / (a + 1.0);
            let m1 = (e1.powf(a + 2.0) - e0.powf(a + 2.0)) / (a + 2.0);
            ((e1 * m0 - m1) / h, (m1 - e0 * m0) / h)
        })
        .collect()
}

/// ∫₀^{η_k} η^a f dη at every level.
pub fn weighted_cumulative(grid: &Grid, f: &Field3, a: f64) -> Field3 {
    let w = cell_weights(grid, a);
    let n = f.plane_len();
    let mut out = Field3::zeros(grid);
    for k in 0..grid.nz - 1 {
        let (al, be) = w[k];
        for p in 0..n {
            out.data[(k + 1) * n + p] =
                out.data[k * n + p] + al * f.data[k * n + p] + be * f.data[(k + 1) * n + p];
        }
    }
    out
}

/// (η^a f)‾ = ∫₀¹ η^a f dη.
pub fn weighted_average(grid: &Grid, f: &Field3, a: f64) -> Field2 {
    let cum = weighted_cumulative(grid, f, a);
    Field2 {
        nx: f.nx,
        ny: f.ny,
        data: cum.plane(grid.nz - 1).to_vec(),
    }
}

struct Columns {
    vbar: (Field2, Field2),
    dbar: Field2,
    cum_v: (Field3, Field3),
    cum_d: Field3,
    grad_z: (Field2, Field2),
}

fn columns(ctx: &Context, height: &Field2, v: &VecField3) -> Columns {
    let grid = &ctx.grid;
    let a = exponent(&ctx.params);
    let div = ctx.plan.div3(v);
    let cum_v = (weighted_cumulative(grid, &v.x, a), weighted_cumulative(grid, &v.y, a));
    let cum_d = weighted_cumulative(grid, &div, a);
    let top = |f: &Field3| Field2 {
        nx: f.nx,
        ny: f.ny,
        data: f.plane(grid.nz - 1).to_vec(),
    };
    Columns {
        vbar: (top(&cum_v.0), top(&cum_v.1)),
        dbar: top(&cum_d),
        grad_z: ctx.plan.grad2(height),
        cum_v,
        cum_d,
    }
}

/// Diagnoses W from the interface height and velocity. W = 0 at both ends.
pub fn fb_recover_w(ctx: &Context, height: &Field2, v: &VecField3) -> Result<Field3> {
    check_params(&ctx.params)?;
    check_height(height)?;
    let grid = &ctx.grid;
    let gm = ctx.params.gamma;
    let a = exponent(&ctx.params);
    let c = columns(ctx, height, v);
    let n = grid.plane_len();
    let mut w = Field3::zeros(grid);
    // The top level (η = 0) keeps its limiting value 0.
    for k in 1..grid.nz {
        let eta = grid.z_levels[k];
        let lift = eta.powf(a + 1.0);
        let denom = (gm - 1.0) * eta.powf(a);
        for p in 0..n {
            let idx = k * n + p;
            let z = height.data[p];
            let flux = (lift * c.vbar.0.data[p] - c.cum_v.0.data[idx]) * c.grad_z.0.data[p]
                + (lift * c.vbar.1.data[p] - c.cum_v.1.data[idx]) * c.grad_z.1.data[p];
            let dil = lift * c.dbar.data[p] - c.cum_d.data[idx];
            w.data[idx] = (gm * flux + (gm - 1.0) * z * dil) / (denom * z);
        }
    }
    Ok(w)
}

/// ∂_t Z = −[γ (η^a v)‾·∇Z + (γ−1)(η^a div v)‾ Z] / (γ−1).
pub fn fb_interface_rhs(ctx: &Context, height: &Field2, v: &VecField3) -> Result<Field2> {
    check_params(&ctx.params)?;
    check_height(height)?;
    let gm = ctx.params.gamma;
    let c = columns(ctx, height, v);
    let data = (0..height.data.len())
        .map(|p| {
            let adv = c.vbar.0.data[p] * c.grad_z.0.data[p] + c.vbar.1.data[p] * c.grad_z.1.data[p];
            -(gm * adv + (gm - 1.0) * c.dbar.data[p] * height.data[p]) / (gm - 1.0)
        })
        .collect();
    Ok(Field2 {
        nx: height.nx,
        ny: height.ny,
        data,
    })
}

/// Largest |W| on the two end levels.
pub fn fb_endpoint_residual(grid: &Grid, w: &Field3) -> f64 {
    let m = |k: usize| w.plane(k).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    m(0).max(m(grid.nz - 1))
}

/// Tendencies of M = Z^{γ/(γ−1)} and v. M_t = −γ/(γ−1) div(M (η^a v)‾).
fn tendencies(ctx: &Context, mass: &Field2, v: &VecField3) -> Result<(Field2, VecField3)> {
    let gm = ctx.params.gamma;
    let p = gm / (gm - 1.0);
    for (index, &value) in mass.data.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InterfaceCollapse { value, index });
        }
    }
    let height = mass.map(|m| m.powf(1.0 / p));
    let grid = &ctx.grid;
    let a = exponent(&ctx.params);
    let vbar = (weighted_average(grid, &v.x, a), weighted_average(grid, &v.y, a));
    let fx = mass.zip_map(&vbar.0, |m, u| m * u);
    let fy = mass.zip_map(&vbar.1, |m, u| m * u);
    let dm = ctx.plan.div2(&fx, &fy).map(|d| -p * d);

    let w = fb_recover_w(ctx, &height, v)?;
    let (gzx, gzy) = ctx.plan.grad2(&height);
    let g = ctx.params.g;
    let adv = |f: &Field3, gz: &Field2| -> Result<Field3> {
        let grad = ctx.plan.grad3(f);
        let dz = vertical::d_z(grid, f, DzMode::OneSided)?;
        let nonlin = Field3 {
            nx: f.nx,
            ny: f.ny,
            nz: f.nz,
            data: (0..f.data.len())
                .map(|i| v.x.data[i] * grad.x.data[i] + v.y.data[i] * grad.y.data[i])
                .collect(),
        };
        let mut out = ctx.plan.dealias3(&nonlin);
        let n = f.plane_len();
        for (i, o) in out.data.iter_mut().enumerate() {
            *o = -*o - w.data[i] * dz.data[i] - g * gz.data[i % n];
        }
        Ok(out)
    };
    let dv = VecField3 {
        x: adv(&v.x, &gzx)?,
        y: adv(&v.y, &gzy)?,
    };
    Ok((dm, dv))
}

/// One SSP-RK2 step of the interface law and the inviscid momentum equation.
pub fn fb_advance(ctx: &Context, state: &FbState, dt: f64) -> Result<FbState> {
    check_params(&ctx.params)?;
    if !state.matches(&ctx.grid) {
        return Err(Error::ShapeMismatch {
            expected: ctx.grid.len3(),
            got: state.v.x.data.len(),
        });
    }
    check_height(&state.height)?;
    let gm = ctx.params.gamma;
    let p = gm / (gm - 1.0);
    let zmax = state.height.data.iter().fold(0.0f64, |m, &z| m.max(z));
    let speed = (0..state.v.x.data.len())
        .map(|i| state.v.x.data[i].hypot(state.v.y.data[i]))
        .fold(0.0f64, f64::max);
    let wave = ((gm - 1.0) * ctx.params.g * zmax).sqrt();
    let zero = Field2::zeros(ctx.grid.nx, ctx.grid.ny);
    check_cfl(ctx, &zero, &zero, speed + wave, dt)?;

    let m0 = state.height.map(|z| z.powf(p));
    let (dm0, dv0) = tendencies(ctx, &m0, &state.v)?;
    let mut m1 = m0.clone();
    for (a, b) in m1.data.iter_mut().zip(&dm0.data) {
        *a += dt * b;
    }
    let mut v1 = state.v.clone();
    v1.axpy(dt, &dv0);
    let (dm1, dv1) = tendencies(ctx, &m1, &v1)?;
    let m2 = Field2 {
        nx: m0.nx,
        ny: m0.ny,
        data: (0..m0.data.len())
            .map(|i| 0.5 * m0.data[i] + 0.5 * (m1.data[i] + dt * dm1.data[i]))
            .collect(),
    };
    let mut v2 = state.v.lincomb(0.5, &v1, 0.5);
    v2.axpy(0.5 * dt, &dv1);
    for (index, &value) in m2.data.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InterfaceCollapse { value, index });
        }
    }
    Ok(FbState {
        height: m2.map(|m| m.powf(1.0 / p)),
        v: v2,
        time: state.time + dt,
    })
}

fn interp(levels: &[f64], values: &[f64], x: f64) -> f64 {
    let n = levels.len();
    let h = levels[1] - levels[0];
    let s = ((x - levels[0]) / h).clamp(0.0, (n - 1) as f64);
    let k = (s.floor() as usize).min(n - 2);
    let t = s - k as f64;
    (1.0 - t) * values[k] + t * values[k + 1]
}

fn column(f: &Field3, p: usize) -> Vec<f64> {
    f.planes().map(|pl| pl[p]).collect()
}

/// Maps a physical field sampled at z_j = j·z_top/(nz−1) to the η levels by
/// linear interpolation.
pub fn to_sigma(grid: &Grid, phys: &Field3, z_top: f64, height: &Field2) -> Result<Field3> {
    check_height(height)?;
    if let Some((index, &value)) = height.data.iter().enumerate().find(|(_, &z)| z > z_top * (1.0 + 1e-12)) {
        return Err(Error::InvalidInitialData(format!(
            "interface height {value} at index {index} exceeds the physical column top {z_top}"
        )));
    }
    let zl: Vec<f64> = (0..grid.nz).map(|j| z_top * grid.z_levels[j]).collect();
    let mut out = Field3::zeros(grid);
    let n = grid.plane_len();
    for p in 0..n {
        let col = column(phys, p);
        for k in 0..grid.nz {
            let z = (1.0 - grid.z_levels[k]) * height.data[p];
            out.data[k * n + p] = interp(&zl, &col, z);
        }
    }
    Ok(out)
}

/// Inverse of [`to_sigma`]; points above the interface are set to zero.
pub fn from_sigma(grid: &Grid, f_eta: &Field3, z_top: f64, height: &Field2) -> Result<Field3> {
    check_height(height)?;
    let mut out = Field3::zeros(grid);
    let n = grid.plane_len();
    for p in 0..n {
        let col = column(f_eta, p);
        let zs = height.data[p];
        for j in 0..grid.nz {
            let z = z_top * grid.z_levels[j];
            if z <= zs {
                out.data[j * n + p] = interp(&grid.z_levels, &col, 1.0 - z / zs);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::oracle;
    use std::f64::consts::PI;

    fn ctx(n: usize, nz: usize, gamma: f64) -> Context {
        let mut p = SimParams::new(Regime::FreeBoundary);
        p.gamma = gamma;
        Context::new(Grid::new(n, n, nz).unwrap(), p).unwrap()
    }

    #[test]
    fn density_examples() {
        let mut p = SimParams::new(Regime::FreeBoundary);
        assert_eq!(fb_density(1.0, 0.0, &p).unwrap(), 0.0);
        p.gamma = 2.0;
        p.g = 2.0;
        assert_eq!(fb_density(1.0, 1.0, &p).unwrap(), 1.0);
        assert!(fb_density(0.0, 0.5, &p).is_err());
        let h = Field2 { nx: 1, ny: 1, data: vec![1.0, 4.0] };
        let ps = fb_ground_pressure(&h, &p).unwrap();
        assert_eq!(ps.data, vec![1.0, 16.0]);
    }

    #[test]
    fn density_matches_half_integer_power_oracle() {
        let mut p = SimParams::new(Regime::FreeBoundary);
        p.gamma = 1.4;
        p.g = 9.8;
        let got = fb_density(2.0, 0.5, &p).unwrap();
        let c = 0.4 / 1.4 * 9.8 * 0.5 * 2.0;
        let want = oracle::half_integer_power(c, 5);
        assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
        let h = Field2 { nx: 1, ny: 1, data: vec![2.0] };
        let ps = fb_ground_pressure(&h, &p).unwrap().data[0];
        let want = oracle::half_integer_power(0.4 / 1.4 * 9.8 * 2.0, 7);
        assert!((ps - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn product_weights_integrate_linear_profiles_exactly() {
        let g = Grid::new(4, 4, 9).unwrap();
        let a = 2.5;
        let f = Field3::from_fn(&g, |_, _, e| 3.0 - 2.0 * e);
        let cum = weighted_cumulative(&g, &f, a);
        for k in 0..g.nz {
            let e: f64 = g.z_levels[k];
            let exact = 3.0 * e.powf(a + 1.0) / (a + 1.0) - 2.0 * e.powf(a + 2.0) / (a + 2.0);
            assert!((cum.at(1, 2, k) - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn rest_gives_zero_w_and_zero_tendency() {
        let c = ctx(8, 9, 1.4);
        let h = Field2::from_fn(&c.grid, |x, _| 1.0 + 0.1 * (2.0 * PI * x).cos());
        let v = VecField3::zeros(&c.grid);
        assert_eq!(fb_recover_w(&c, &h, &v).unwrap().max_abs(), 0.0);
        assert_eq!(fb_interface_rhs(&c, &h, &v).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn eta_independent_velocity_gives_zero_w() {
        for gamma in [1.4, 2.0, 5.0 / 3.0] {
            let c = ctx(16, 17, gamma);
            let h = Field2::from_fn(&c.grid, |x, y| 1.0 + 0.2 * (2.0 * PI * x).cos() * (2.0 * PI * y).sin());
            let v = VecField3::from_fn(&c.grid, |x, y, _| {
                ((2.0 * PI * y).sin() + 0.3, (2.0 * PI * x).cos())
            });
            let w = fb_recover_w(&c, &h, &v).unwrap();
            assert!(w.max_abs() <= 1e-10, "gamma {gamma}: {}", w.max_abs());
        }
    }

    #[test]
    fn constant_velocity_tendency() {
        let c = ctx(16, 9, 1.4);
        let h = Field2::from_fn(&c.grid, |x, _| 1.0 + 0.1 * (2.0 * PI * x).sin());
        let v = VecField3::from_fn(&c.grid, |_, _, _| (0.7, 0.0));
        let rhs = fb_interface_rhs(&c, &h, &v).unwrap();
        // (η^a)‾ = (γ−1)/γ, so ∂_t Z = −U ∂_x Z.
        for i in 0..16 {
            let x = c.grid.x(i);
            let want = -0.7 * 0.1 * 2.0 * PI * (2.0 * PI * x).cos();
            assert!((rhs.data[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_profile_matches_simpson_oracle() {
        let c = ctx(16, 17, 2.0);
        let h = Field2::constant(&c.grid, 1.0);
        let v = VecField3::from_fn(&c.grid, |x, _, e| ((2.0 * PI * x).cos() * e, 0.0));
        let w = fb_recover_w(&c, &h, &v).unwrap();
        assert!(fb_endpoint_residual(&c.grid, &w) <= 1e-8);
        let i = 3;
        let d = -2.0 * PI * (2.0 * PI * c.grid.x(i)).sin();
        let dbar = oracle::simpson(|e| e * e * d, 0.0, 1.0, 16 * 16);
        for k in 1..c.grid.nz {
            let e = c.grid.z_levels[k];
            let cum = oracle::simpson(|s| s * s * d, 0.0, e, 16 * 16);
            let want = (e * e * dbar - cum) / e;
            assert!((w.at(i, 0, k) - want).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn advance_keeps_rest_state() {
        let c = ctx(8, 9, 1.4);
        let s = FbState {
            height: Field2::constant(&c.grid, 1.3),
            v: VecField3::zeros(&c.grid),
            time: 0.0,
        };
        let out = fb_advance(&c, &s, 1e-3).unwrap();
        assert_eq!(out.v.max_abs(), 0.0);
        for z in &out.height.data {
            assert!((z - 1.3).abs() < 1e-14);
        }
    }

    #[test]
    fn first_step_is_gravity_acceleration() {
        let c = ctx(16, 9, 1.4);
        let h = Field2::from_fn(&c.grid, |x, _| 1.0 + 0.1 * (2.0 * PI * x).cos());
        let s = FbState { height: h, v: VecField3::zeros(&c.grid), time: 0.0 };
        let mut errs = Vec::new();
        for dt in [1e-3, 5e-4] {
            let out = fb_advance(&c, &s, dt).unwrap();
            let err = (0..16)
                .map(|i| {
                    let want = 9.8 * 0.1 * 2.0 * PI * (2.0 * PI * c.grid.x(i)).sin() * dt;
                    (out.v.x.at(i, 0, 4) - want).abs()
                })
                .fold(0.0, f64::max);
            errs.push(err / (dt * dt));
        }
        assert!(errs[1] < 1.2 * errs[0] && errs[0] < 100.0, "{errs:?}");
    }

    #[test]
    fn column_mass_is_conserved() {
        let c = ctx(16, 9, 1.4);
        let h = Field2::from_fn(&c.grid, |x, _| 1.0 + 0.1 * (2.0 * PI * x).cos());
        let v = VecField3::from_fn(&c.grid, |x, y, e| (0.1 * (2.0 * PI * y).sin() * e, 0.05 * (2.0 * PI * x).cos()));
        let mut s = FbState { height: h, v, time: 0.0 };
        let m0 = column_mass(&s.height, &c.params);
        for _ in 0..20 {
            s = fb_advance(&c, &s, 1e-3).unwrap();
        }
        assert!((column_mass(&s.height, &c.params) - m0).abs() <= 1e-12 * m0);
    }

    #[test]
    fn density_power_law_is_exact() {
        for gamma in [1.4, 2.0, 3.0] {
            let c = ctx(4, 33, gamma);
            let h = Field2::constant(&c.grid, 1.7);
            let rho = fb_density_field(&c.grid, &h, &c.params).unwrap();
            let r1 = rho.at(0, 0, 1).powf(gamma - 1.0) / c.grid.z_levels[1];
            for k in 1..c.grid.nz {
                let r = rho.at(0, 0, k).powf(gamma - 1.0) / c.grid.z_levels[k];
                assert!((r - r1).abs() <= 1e-13 * r1);
                assert!(rho.at(0, 0, k) > rho.at(0, 0, k - 1));
            }
        }
    }

    #[test]
    fn sigma_transform_endpoints_and_round_trip() {
        let errs: Vec<f64> = [9, 17, 33]
            .iter()
            .map(|&nz| {
                let g = Grid::new(8, 8, nz).unwrap();
                let h = Field2::from_fn(&g, |x, _| 1.0 + 0.2 * (2.0 * PI * x).cos());
                let z_top = 1.25;
                let phys = Field3::from_fn(&g, |x, _, s| ((2.0 * PI * x).sin() + 2.0) * (3.0 * s * z_top).cos());
                let eta = to_sigma(&g, &phys, z_top, &h).unwrap();
                // z = 0 sits at η = 1.
                assert!((eta.at(2, 0, nz - 1) - phys.at(2, 0, 0)).abs() < 1e-14);
                let back = from_sigma(&g, &eta, z_top, &h).unwrap();
                let mut err = 0.0f64;
                for i in 0..8 {
                    let zs = h.data[i];
                    for j in 0..nz {
                        if z_top * g.z_levels[j] <= zs {
                            err = err.max((back.at(i, 0, j) - phys.at(i, 0, j)).abs());
                        } else {
                            assert_eq!(back.at(i, 0, j), 0.0);
                        }
                    }
                }
                err
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.7, "{errs:?}");
        }
    }
}
