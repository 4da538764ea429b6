//! Picard time stepping of the viscous regimes.
//!
//! Each iterate freezes the midpoint of the previous time level and the
//! latest iterate, advances the surface variable with that velocity, then
//! solves the Crank–Nicolson momentum system with the frozen forcing. The
//! advection is written in skew-symmetric form and the pressure work matches
//! the discrete continuity equation, so the semi-discrete energy balance is
//! exact and the time error is second order.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::field::{Field2, Field3, VecField3};
use crate::hydrostatics;
use crate::ops::vertical::{self, DzMode};
use crate::params::{Regime, CFL_LIMIT};
use crate::state::{Context, DiagnosticsRecord, PrimState};

/// Relative residual at which the momentum CG stops.
pub const MOMENTUM_TOL: f64 = 1e-13;
const MOMENTUM_MAX_ITER: usize = 2000;
const MIDPOINT_TOL: f64 = 1e-15;
const MIDPOINT_MAX_ITER: usize = 200;

/// Manufactured sources added to the continuity and momentum equations.
pub trait SourceTerms: Sync {
    fn surface(&self, ctx: &Context, t: f64) -> Option<Field2>;
    fn momentum(&self, ctx: &Context, t: f64) -> Option<VecField3>;
}

/// Outcome of one Picard solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// Relative successive-iterate differences, one per iteration.
    pub residuals: Vec<f64>,
    /// Ratios of consecutive residuals.
    pub contraction_estimates: Vec<f64>,
    /// CG iterations of each momentum solve.
    pub solver_iterations: Vec<usize>,
}

fn column_means(ctx: &Context, v: &VecField3) -> (Field2, Field2, Field2, Field2) {
    let grid = &ctx.grid;
    let zv = |f: &Field3| {
        let mut g = f.clone();
        for k in 0..grid.nz {
            let z = grid.z_levels[k];
            for x in g.plane_mut(k) {
                *x *= z;
            }
        }
        vertical::vavg(grid, &g)
    };
    (
        vertical::vavg(grid, &v.x),
        vertical::vavg(grid, &v.y),
        zv(&v.x),
        zv(&v.y),
    )
}

pub(crate) fn check_cfl(ctx: &Context, ux: &Field2, uy: &Field2, extra_speed: f64, dt: f64) -> Result<()> {
    let h = ctx.grid.hx().min(ctx.grid.hy());
    let speed = ux
        .data
        .iter()
        .zip(&uy.data)
        .fold(0.0f64, |m, (a, b)| m.max((a * a + b * b).sqrt()))
        + extra_speed;
    let courant = speed * dt / h;
    if !courant.is_finite() || courant > CFL_LIMIT {
        let suggested_dt = if speed > 0.0 && speed.is_finite() {
            CFL_LIMIT * h / speed
        } else {
            0.0
        };
        return Err(Error::Cfl {
            courant,
            limit: CFL_LIMIT,
            suggested_dt,
        });
    }
    Ok(())
}

/// −div_h(ξ v̄ + (g/2)(z v)‾).
fn gravity_tendency(ctx: &Context, xi: &Field2, vbar: (&Field2, &Field2), zbar: (&Field2, &Field2)) -> Field2 {
    let half_g = 0.5 * ctx.params.g;
    let n = xi.data.len();
    let mut fx = vec![0.0; n];
    let mut fy = vec![0.0; n];
    for p in 0..n {
        fx[p] = xi.data[p] * vbar.0.data[p] + half_g * zbar.0.data[p];
        fy[p] = xi.data[p] * vbar.1.data[p] + half_g * zbar.1.data[p];
    }
    let mut d = ctx.plan.div_plane(&fx, &fy);
    for x in &mut d {
        *x = -*x;
    }
    Field2 {
        nx: xi.nx,
        ny: xi.ny,
        data: d,
    }
}

/// −½[div_h(σ v̄) + v̄·∇_h σ].
fn vacuum_tendency(ctx: &Context, sigma: &Field2, ux: &Field2, uy: &Field2) -> Field2 {
    let n = sigma.data.len();
    let fx: Vec<f64> = (0..n).map(|p| sigma.data[p] * ux.data[p]).collect();
    let fy: Vec<f64> = (0..n).map(|p| sigma.data[p] * uy.data[p]).collect();
    let d = ctx.plan.div_plane(&fx, &fy);
    let (gx, gy) = ctx.plan.grad_plane(&sigma.data);
    let data = (0..n)
        .map(|p| -0.5 * (d[p] + ux.data[p] * gx[p] + uy.data[p] * gy[p]))
        .collect();
    Field2 {
        nx: sigma.nx,
        ny: sigma.ny,
        data,
    }
}

fn apply_iota(ctx: &Context, f: Field2, dt: f64) -> Field2 {
    let iota = ctx.params.iota;
    if iota == 0.0 {
        return f;
    }
    let mut s = ctx.plan.forward(&f.data);
    for (idx, c) in s.iter_mut().enumerate() {
        *c /= 1.0 + iota * ctx.plan.k2(idx) * dt;
    }
    Field2 {
        nx: f.nx,
        ny: f.ny,
        data: ctx.plan.inverse(s),
    }
}

/// One SSP-RK2 step of the averaged gravity continuity equation with frozen velocity.
pub fn continuity_step_gravity(ctx: &Context, xi: &Field2, v_in: &VecField3, dt: f64) -> Result<Field2> {
    continuity_step_gravity_with(ctx, xi, v_in, dt, None)
}

fn continuity_step_gravity_with(
    ctx: &Context,
    xi: &Field2,
    v_in: &VecField3,
    dt: f64,
    source: Option<&Field2>,
) -> Result<Field2> {
    let (ux, uy, zx, zy) = column_means(ctx, v_in);
    check_cfl(ctx, &ux, &uy, 0.0, dt)?;
    let tendency = |x: &Field2| {
        let t = gravity_tendency(ctx, x, (&ux, &uy), (&zx, &zy));
        match source {
            Some(s) => t.zip_map(s, |a, b| a + b),
            None => t,
        }
    };
    let k1 = tendency(xi);
    let stage = xi.zip_map(&k1, |a, b| a + dt * b);
    let k2 = tendency(&stage);
    let out = xi.zip_map(&stage.zip_map(&k2, |a, b| a + dt * b), |a, b| 0.5 * a + 0.5 * b);
    Ok(apply_iota(ctx, out, dt))
}

/// One implicit-midpoint step of the σ transport with frozen velocity.
///
/// The skew form makes Σσ² an exact invariant of the midpoint rule.
pub fn continuity_step_vacuum(ctx: &Context, sigma: &Field2, v_in: &VecField3, dt: f64) -> Result<Field2> {
    continuity_step_vacuum_with(ctx, sigma, v_in, dt, None)
}

fn continuity_step_vacuum_with(
    ctx: &Context,
    sigma: &Field2,
    v_in: &VecField3,
    dt: f64,
    source: Option<&Field2>,
) -> Result<Field2> {
    let (ux, uy, _, _) = column_means(ctx, v_in);
    check_cfl(ctx, &ux, &uy, 0.0, dt)?;
    let base = match source {
        Some(s) => sigma.zip_map(s, |a, b| a + dt * b),
        None => sigma.clone(),
    };
    if ux.max_abs() == 0.0 && uy.max_abs() == 0.0 {
        return Ok(apply_iota(ctx, base, dt));
    }
    let scale = sigma.max_abs().max(1.0);
    let mut next = base.clone();
    for _ in 0..MIDPOINT_MAX_ITER {
        let mid = sigma.zip_map(&next, |a, b| 0.5 * (a + b));
        let t = vacuum_tendency(ctx, &mid, &ux, &uy);
        let cand = base.zip_map(&t, |a, b| a + dt * b);
        let diff = cand
            .data
            .iter()
            .zip(&next.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        next = cand;
        if diff <= MIDPOINT_TOL * scale {
            return Ok(apply_iota(ctx, next, dt));
        }
    }
    Err(Error::SolverFailure(
        "implicit midpoint iteration for σ did not converge".into(),
    ))
}

/// Continuity tendency without sources (∂_t ξ or ∂_t σ).
pub fn surface_tendency(ctx: &Context, surface: &Field2, v: &VecField3) -> Field2 {
    let (ux, uy, zx, zy) = column_means(ctx, v);
    match ctx.params.regime {
        Regime::GravityGamma2 => gravity_tendency(ctx, surface, (&ux, &uy), (&zx, &zy)),
        _ => vacuum_tendency(ctx, surface, &ux, &uy),
    }
}

fn spectral_planes(ctx: &Context, v: &VecField3) -> Vec<(Vec<Complex64>, Vec<Complex64>)> {
    (0..v.x.nz)
        .into_par_iter()
        .map(|k| ctx.plan.forward_pair(v.x.plane(k), v.y.plane(k)))
        .collect()
}

fn physical_planes(ctx: &Context, spec: Vec<(Vec<Complex64>, Vec<Complex64>)>) -> VecField3 {
    let grid = &ctx.grid;
    let planes: Vec<(Vec<f64>, Vec<f64>)> = spec
        .into_par_iter()
        .map(|(a, b)| ctx.plan.inverse_pair(a, &b))
        .collect();
    let mut out = VecField3::zeros(grid);
    for (k, (a, b)) in planes.into_iter().enumerate() {
        out.x.plane_mut(k).copy_from_slice(&a);
        out.y.plane_mut(k).copy_from_slice(&b);
    }
    out
}

/// μΔ_h v + μ∂_zz v + (μ+λ)∇_h div_h v with the Neumann vertical closure.
pub fn apply_viscous(ctx: &Context, v: &VecField3) -> Result<VecField3> {
    let mu = ctx.params.mu;
    let ml = ctx.params.mu + ctx.params.lambda;
    let mut spec = spectral_planes(ctx, v);
    let plan = &ctx.plan;
    spec.par_iter_mut().for_each(|(a, b)| {
        for idx in 0..a.len() {
            let (kx, ky) = plan.wavevector(idx);
            let k2 = kx * kx + ky * ky;
            let d = kx * a[idx] + ky * b[idx];
            a[idx] = -mu * k2 * a[idx] - ml * kx * d;
            b[idx] = -mu * k2 * b[idx] - ml * ky * d;
        }
    });
    let mut out = physical_planes(ctx, spec);
    if mu != 0.0 {
        out.x.axpy(mu, &vertical::d_zz(&ctx.grid, &v.x, DzMode::Even)?);
        out.y.axpy(mu, &vertical::d_zz(&ctx.grid, &v.y, DzMode::Even)?);
    }
    Ok(out)
}

/// Trapezoid-weighted inner product of two velocity fields.
pub fn inner_vel(ctx: &Context, a: &VecField3, b: &VecField3) -> f64 {
    let grid = &ctx.grid;
    let n = grid.plane_len();
    let mut s = 0.0;
    for k in 0..grid.nz {
        let (ax, ay, bx, by) = (a.x.plane(k), a.y.plane(k), b.x.plane(k), b.y.plane(k));
        let mut lvl = 0.0;
        for p in 0..n {
            lvl += ax[p] * bx[p] + ay[p] * by[p];
        }
        s += grid.quad_weights[k] * lvl;
    }
    s / n as f64
}

/// Per-mode solver for the operator with horizontally averaged mass.
struct ModePreconditioner {
    /// Horizontal mean of the mass coefficient at each level.
    mass: Vec<f64>,
    mu: f64,
    ml: f64,
    h2: f64,
}

impl ModePreconditioner {
    /// Solves the tridiagonal system `(m_k + c + μ/h²) x_k − off·(neighbours) = r_k`.
    fn thomas(&self, c: f64, rhs: &mut [Complex64]) {
        let nz = rhs.len();
        let off = 0.5 * self.mu / self.h2;
        let mut cp = vec![0.0; nz];
        let diag = |k: usize| self.mass[k] + c + 2.0 * off;
        let sup = |k: usize| if k == 0 { -2.0 * off } else { -off };
        let sub = |k: usize| if k == nz - 1 { -2.0 * off } else { -off };
        let mut denom = diag(0);
        cp[0] = sup(0) / denom;
        rhs[0] /= denom;
        for k in 1..nz {
            denom = diag(k) - sub(k) * cp[k - 1];
            if k < nz - 1 {
                cp[k] = sup(k) / denom;
            }
            let prev = rhs[k - 1];
            rhs[k] = (rhs[k] - sub(k) * prev) / denom;
        }
        for k in (0..nz - 1).rev() {
            let next = rhs[k + 1];
            rhs[k] -= cp[k] * next;
        }
    }

    fn apply(&self, ctx: &Context, r: &VecField3) -> VecField3 {
        let nz = ctx.grid.nz;
        let spec = spectral_planes(ctx, r);
        let modes = ctx.plan.len();
        let mut cols = vec![Complex64::new(0.0, 0.0); 2 * modes * nz];
        for (k, (a, b)) in spec.iter().enumerate() {
            for idx in 0..modes {
                cols[(2 * idx) * nz + k] = a[idx];
                cols[(2 * idx + 1) * nz + k] = b[idx];
            }
        }
        let plan = &ctx.plan;
        cols.par_chunks_mut(2 * nz).enumerate().for_each(|(idx, col)| {
            let (kx, ky) = plan.wavevector(idx);
            let k2 = kx * kx + ky * ky;
            let (ca, cb) = col.split_at_mut(nz);
            if k2 == 0.0 {
                self.thomas(0.0, ca);
                self.thomas(0.0, cb);
                return;
            }
            let kn = k2.sqrt();
            let (ex, ey) = (kx / kn, ky / kn);
            for k in 0..nz {
                let (a, b) = (ca[k], cb[k]);
                ca[k] = ex * a + ey * b;
                cb[k] = -ey * a + ex * b;
            }
            self.thomas(0.5 * (self.mu + self.ml) * k2, ca);
            self.thomas(0.5 * self.mu * k2, cb);
            for k in 0..nz {
                let (l, t) = (ca[k], cb[k]);
                ca[k] = ex * l - ey * t;
                cb[k] = ey * l + ex * t;
            }
        });
        let mut out_spec = spec;
        for (k, (a, b)) in out_spec.iter_mut().enumerate() {
            for idx in 0..modes {
                a[idx] = cols[(2 * idx) * nz + k];
                b[idx] = cols[(2 * idx + 1) * nz + k];
            }
        }
        physical_planes(ctx, out_spec)
    }
}

/// Statistics of one momentum solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Crank–Nicolson momentum solve
/// `(ρ°/dt − ½L) v = (ρ°/dt + ½L) vⁿ + ℱ`.
pub fn momentum_solve(
    ctx: &Context,
    rho: &Field3,
    forcing: &VecField3,
    v_n: &VecField3,
    dt: f64,
) -> Result<VecField3> {
    momentum_solve_with(ctx, rho, forcing, v_n, dt, None).map(|(v, _)| v)
}

/// As [`momentum_solve`], starting CG from `guess` when given.
pub fn momentum_solve_with(
    ctx: &Context,
    rho: &Field3,
    forcing: &VecField3,
    v_n: &VecField3,
    dt: f64,
    guess: Option<&VecField3>,
) -> Result<(VecField3, SolveStats)> {
    let grid = &ctx.grid;
    for f in [rho, &forcing.x, &forcing.y, &v_n.x, &v_n.y] {
        if !f.matches(grid) {
            return Err(Error::ShapeMismatch {
                expected: grid.len3(),
                got: f.data.len(),
            });
        }
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    let mu = ctx.params.mu;
    let ml = mu + ctx.params.lambda;
    if mu == 0.0 && ml == 0.0 {
        if let Some((i, &r)) = rho.data.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
            return Err(Error::SingularSystem(format!(
                "inviscid momentum update with density {r:e} at index {i}"
            )));
        }
        let mut v = v_n.clone();
        for (c, f) in [(&mut v.x, &forcing.x), (&mut v.y, &forcing.y)] {
            for ((x, fv), r) in c.data.iter_mut().zip(&f.data).zip(&rho.data) {
                *x += dt * fv / r;
            }
        }
        return Ok((
            v,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let lift = ctx.params.mass_lift();
    let m = rho.map(|r| r.max(lift) / dt);
    let apply_a = |x: &VecField3| -> Result<VecField3> {
        let lx = apply_viscous(ctx, x)?;
        Ok(VecField3 {
            x: m.zip_map(&x.x, |a, b| a * b).zip_map(&lx.x, |a, l| a - 0.5 * l),
            y: m.zip_map(&x.y, |a, b| a * b).zip_map(&lx.y, |a, l| a - 0.5 * l),
        })
    };
    let ln = apply_viscous(ctx, v_n)?;
    let b = VecField3 {
        x: Field3 {
            data: (0..m.data.len())
                .map(|i| m.data[i] * v_n.x.data[i] + 0.5 * ln.x.data[i] + forcing.x.data[i])
                .collect(),
            ..m.clone()
        },
        y: Field3 {
            data: (0..m.data.len())
                .map(|i| m.data[i] * v_n.y.data[i] + 0.5 * ln.y.data[i] + forcing.y.data[i])
                .collect(),
            ..m.clone()
        },
    };
    let bnorm = inner_vel(ctx, &b, &b).sqrt();
    if bnorm == 0.0 {
        return Ok((
            VecField3::zeros(grid),
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let n = grid.plane_len() as f64;
    let precond = ModePreconditioner {
        mass: (0..grid.nz).map(|k| m.plane(k).iter().sum::<f64>() / n).collect(),
        mu,
        ml,
        h2: grid.hz * grid.hz,
    };
    let mut x = guess.cloned().unwrap_or_else(|| v_n.clone());
    let ax = apply_a(&x)?;
    let mut r = b.lincomb(1.0, &ax, -1.0);
    let mut rnorm = inner_vel(ctx, &r, &r).sqrt();
    if rnorm <= MOMENTUM_TOL * bnorm {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: rnorm / bnorm,
            },
        ));
    }
    let mut z = precond.apply(ctx, &r);
    let mut p = z.clone();
    let mut rz = inner_vel(ctx, &r, &z);
    for it in 1..=MOMENTUM_MAX_ITER {
        let ap = apply_a(&p)?;
        let pap = inner_vel(ctx, &p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SingularSystem(format!(
                "momentum operator lost definiteness (pᵀAp = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        rnorm = inner_vel(ctx, &r, &r).sqrt();
        if rnorm <= MOMENTUM_TOL * bnorm {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    relative_residual: rnorm / bnorm,
                },
            ));
        }
        z = precond.apply(ctx, &r);
        let rz_new = inner_vel(ctx, &r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = z.lincomb(1.0, &p, beta);
    }
    Err(Error::SolverFailure(format!(
        "momentum CG stalled at relative residual {:e}",
        rnorm / bnorm
    )))
}

/// Right-hand side ℱ of the frozen momentum equation:
/// skew-symmetric advection, the ½ρ_t v correction and the pressure force.
pub fn assemble_forcing(ctx: &Context, state_in: &PrimState) -> Result<VecField3> {
    let grid = &ctx.grid;
    let plan = &ctx.plan;
    let s = &state_in.surface_var;
    let v = &state_in.v;
    let rho = hydrostatics::density_field(ctx, s);
    let flux = hydrostatics::density_flux(ctx, s, v);
    let u = plan.dealias_vec(v);
    let n = grid.plane_len();

    let mut adv = Vec::with_capacity(2);
    for uj in [&u.x, &u.y] {
        let products = VecField3 {
            x: rho.zip_map(&u.x, |r, a| r * a).zip_map(uj, |a, b| a * b),
            y: rho.zip_map(&u.y, |r, a| r * a).zip_map(uj, |a, b| a * b),
        };
        let conservative = plan.div3(&products);
        let g = plan.grad3(uj);
        let fu = flux.zip_map(uj, |f, a| f * a);
        let vert_c = vertical::d_z(grid, &fu, DzMode::Odd)?;
        let vert_a = vertical::d_z(grid, uj, DzMode::Even)?;
        let mut total = Field3::zeros(grid);
        for i in 0..total.data.len() {
            let advective = rho.data[i] * (u.x.data[i] * g.x.data[i] + u.y.data[i] * g.y.data[i]);
            total.data[i] = 0.5
                * (conservative.data[i] + advective + vert_c.data[i] + flux.data[i] * vert_a.data[i]);
        }
        adv.push(plan.dealias3(&total));
    }

    let tendency = surface_tendency(ctx, s, v);
    let rho_t: Vec<f64> = match ctx.params.regime {
        Regime::GravityGamma2 => tendency.data.clone(),
        _ => (0..n).map(|p| 2.0 * s.data[p] * tendency.data[p]).collect(),
    };
    let pressure = pressure_force(ctx, s);

    let mut out = VecField3::zeros(grid);
    for (j, (oc, vc)) in [(&mut out.x, &v.x), (&mut out.y, &v.y)].into_iter().enumerate() {
        let pc = if j == 0 { &pressure.x } else { &pressure.y };
        for k in 0..grid.nz {
            for p in 0..n {
                let i = k * n + p;
                oc.data[i] = -adv[j].data[i] - 0.5 * rho_t[p] * vc.data[i] + pc.data[i];
            }
        }
    }
    Ok(out)
}

/// −∇_h P in the form whose work matches the discrete continuity equation.
///
/// Gravity: −(2ξ + gz)∇_h ξ. Vacuum: γ/(γ−1)·(s∇_h σ − σ∇_h s) with
/// s = σ^{2γ−1}, which equals −∇_h σ^{2γ} for smooth σ.
pub fn pressure_force(ctx: &Context, surface: &Field2) -> VecField3 {
    let grid = &ctx.grid;
    let n = grid.plane_len();
    let mut out = VecField3::zeros(grid);
    match ctx.params.regime {
        Regime::GravityGamma2 => {
            let (gx, gy) = ctx.plan.grad_plane(&surface.data);
            for k in 0..grid.nz {
                let gz = ctx.params.g * grid.z_levels[k];
                for p in 0..n {
                    let c = -(2.0 * surface.data[p] + gz);
                    out.x.data[k * n + p] = c * gx[p];
                    out.y.data[k * n + p] = c * gy[p];
                }
            }
        }
        _ => {
            let gamma = ctx.params.gamma;
            let e = 2.0 * gamma - 1.0;
            let s: Vec<f64> = surface
                .data
                .iter()
                .map(|&x| if e == 3.0 { x * x * x } else { x.abs().powf(e) * x.signum() })
                .collect();
            let (gsx, gsy) = ctx.plan.grad_plane(&surface.data);
            let (gpx, gpy) = ctx.plan.grad_plane(&s);
            let c = gamma / (gamma - 1.0);
            let fx: Vec<f64> = (0..n).map(|p| c * (s[p] * gsx[p] - surface.data[p] * gpx[p])).collect();
            let fy: Vec<f64> = (0..n).map(|p| c * (s[p] * gsy[p] - surface.data[p] * gpy[p])).collect();
            for k in 0..grid.nz {
                out.x.plane_mut(k).copy_from_slice(&fx);
                out.y.plane_mut(k).copy_from_slice(&fy);
            }
        }
    }
    out
}

/// The Picard stopping norm: L² of the surface difference, L² of the velocity
/// difference and the √dt-weighted L² of its gradient.
pub fn picard_norm(ctx: &Context, ds: &Field2, dv: &VecField3, dt: f64) -> f64 {
    let g = diagnostics::gradient_energy(ctx, dv);
    ds.l2() + inner_vel(ctx, dv, dv).max(0.0).sqrt() + (dt * (g.horizontal + g.vertical)).max(0.0).sqrt()
}

fn check_surface(ctx: &Context, s: &Field2) -> Result<()> {
    if let Some((index, &value)) = s.data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::SolverFailure(format!("non-finite surface value {value} at index {index}")));
    }
    if ctx.params.regime == Regime::GravityGamma2 {
        let (index, value) = s
            .data
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) });
        if value < 0.0 {
            return Err(Error::NegativeDensity { value, index });
        }
        let floor = ctx.params.rho_floor;
        if floor > 0.0 && value <= floor {
            return Err(Error::DensityBelowFloor { value, floor, index });
        }
    }
    Ok(())
}

/// Advances one time step by Picard iteration.
pub fn picard_advance(ctx: &Context, state: &PrimState) -> Result<(PrimState, PicardReport)> {
    picard_advance_with(ctx, state, None)
}

/// As [`picard_advance`] with optional manufactured sources.
pub fn picard_advance_with(
    ctx: &Context,
    state: &PrimState,
    source: Option<&dyn SourceTerms>,
) -> Result<(PrimState, PicardReport)> {
    let p = &ctx.params;
    if !state.matches(&ctx.grid) {
        return Err(Error::ShapeMismatch {
            expected: ctx.grid.len3(),
            got: state.v.x.data.len(),
        });
    }
    if p.regime == Regime::FreeBoundary {
        return Err(Error::InvalidParams("picard_advance covers the viscous regimes".into()));
    }
    let dt = p.dt;
    if p.picard_max_iter == 0 {
        return Err(Error::PicardNonConvergence {
            iterations: 0,
            history: Vec::new(),
        });
    }
    let t_half = state.time + 0.5 * dt;
    let surface_src = source.and_then(|s| s.surface(ctx, t_half));
    let momentum_src = source.and_then(|s| s.momentum(ctx, t_half));
    let rho_n = hydrostatics::density_field(ctx, &state.surface_var);

    let mut prev_s = state.surface_var.clone();
    let mut prev_v = state.v.clone();
    let mut residuals = Vec::new();
    let mut solver_iterations = Vec::new();
    for iter in 1..=p.picard_max_iter {
        let mid = PrimState {
            surface_var: state.surface_var.zip_map(&prev_s, |a, b| 0.5 * (a + b)),
            v: state.v.lincomb(0.5, &prev_v, 0.5),
            time: t_half,
        };
        let new_s = match p.regime {
            Regime::GravityGamma2 => {
                continuity_step_gravity_with(ctx, &state.surface_var, &mid.v, dt, surface_src.as_ref())?
            }
            _ => continuity_step_vacuum_with(ctx, &state.surface_var, &mid.v, dt, surface_src.as_ref())?,
        };
        check_surface(ctx, &new_s)?;
        let rho_new = hydrostatics::density_field(ctx, &new_s);
        let rho_mid = rho_n.zip_map(&rho_new, |a, b| 0.5 * (a + b));
        let mut forcing = assemble_forcing(ctx, &mid)?;
        if let Some(src) = &momentum_src {
            forcing.axpy(1.0, src);
        }
        let (new_v, stats) = momentum_solve_with(ctx, &rho_mid, &forcing, &state.v, dt, Some(&prev_v))?;
        solver_iterations.push(stats.iterations);
        let ds = new_s.zip_map(&prev_s, |a, b| a - b);
        let dv = new_v.lincomb(1.0, &prev_v, -1.0);
        let diff = picard_norm(ctx, &ds, &dv, dt);
        let scale = picard_norm(ctx, &new_s, &new_v, dt);
        let rel = if scale > 0.0 { diff / scale } else { diff };
        residuals.push(rel);
        prev_s = new_s;
        prev_v = new_v;
        if rel <= p.picard_tol {
            let contraction_estimates = residuals.windows(2).map(|w| w[1] / w[0]).collect();
            let report = PicardReport {
                iterations: iter,
                final_residual: rel,
                converged: true,
                residuals,
                contraction_estimates,
                solver_iterations,
            };
            let next = PrimState {
                surface_var: prev_s,
                v: prev_v,
                time: state.time + dt,
            };
            return Ok((next, report));
        }
    }
    Err(Error::PicardNonConvergence {
        iterations: p.picard_max_iter,
        history: residuals,
    })
}

/// Diagnostics of a state with the given Picard count.
pub fn record(ctx: &Context, state: &PrimState, picard_iters: usize) -> DiagnosticsRecord {
    let (energy, dissipation_rate) = diagnostics::energy(ctx, state);
    DiagnosticsRecord {
        time: state.time,
        mass: diagnostics::mass(ctx, state),
        energy,
        dissipation_rate,
        min_density: diagnostics::min_density(ctx, state),
        picard_iters,
        l2_surface: state.surface_var.l2(),
        l2_v: inner_vel(ctx, &state.v, &state.v).max(0.0).sqrt(),
    }
}

/// Advances `n_steps`, emitting the initial record and one record per step.
pub fn run(
    ctx: &Context,
    state: PrimState,
    n_steps: usize,
    sink: &mut dyn FnMut(&DiagnosticsRecord),
) -> Result<PrimState> {
    run_with(ctx, state, n_steps, None, sink, &mut |_, _| {})
}

/// As [`run`] with sources and a per-step observer of the state and report.
pub fn run_with(
    ctx: &Context,
    mut state: PrimState,
    n_steps: usize,
    source: Option<&dyn SourceTerms>,
    sink: &mut dyn FnMut(&DiagnosticsRecord),
    observer: &mut dyn FnMut(&PrimState, &PicardReport),
) -> Result<PrimState> {
    sink(&record(ctx, &state, 0));
    for _ in 0..n_steps {
        let (next, report) = picard_advance_with(ctx, &state, source)?;
        state = next;
        sink(&record(ctx, &state, report.iterations));
        observer(&state, &report);
    }
    Ok(state)
}
