//! Density reconstruction from the surface variable and vertical velocity
//! recovery from cumulative integrals of horizontal divergences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{pairwise_sum, Field2, Field3, VecField3};
use crate::ops::vertical::{self, DzMode};
use crate::params::Regime;
use crate::state::{Context, DerivedFields, PrimState};

/// ρ on the full grid without sign checks.
pub fn density_field(ctx: &Context, surface: &Field2) -> Field3 {
    let grid = &ctx.grid;
    match ctx.params.regime {
        Regime::GravityGamma2 => {
            let half_g = 0.5 * ctx.params.g;
            let mut rho = Field3::broadcast(grid, surface);
            for k in 0..grid.nz {
                let shift = half_g * grid.z_levels[k];
                for r in rho.plane_mut(k) {
                    *r += shift;
                }
            }
            rho
        }
        _ => Field3::broadcast(grid, &surface.map(|s| s * s)),
    }
}

/// Density and pressure `P = ρ^γ`.
pub fn reconstruct_density(ctx: &Context, state: &PrimState) -> Result<(Field3, Field3)> {
    let rho = density_field(ctx, &state.surface_var);
    if let Some((index, &value)) = rho.data.iter().enumerate().find(|(_, r)| **r < 0.0) {
        return Err(Error::NegativeDensity { value, index });
    }
    let gamma = ctx.params.gamma;
    let pressure = if gamma == 2.0 {
        rho.map(|r| r * r)
    } else {
        rho.map(|r| r.powf(gamma))
    };
    Ok((rho, pressure))
}

/// ρw = −∫₀^z [div_h(ξ ṽ) + (g/2)(z div_h v)~] dz′.
pub fn mass_flux_gravity(ctx: &Context, xi: &Field2, v: &VecField3) -> Field3 {
    let grid = &ctx.grid;
    let half_g = 0.5 * ctx.params.g;
    let xv = VecField3 {
        x: v.x.mul_plane(xi),
        y: v.y.mul_plane(xi),
    };
    let mut q = ctx.plan.div3(&xv);
    if half_g != 0.0 {
        let d = ctx.plan.div3(v);
        for k in 0..grid.nz {
            let c = half_g * grid.z_levels[k];
            for (a, b) in q.plane_mut(k).iter_mut().zip(d.plane(k)) {
                *a += c * b;
            }
        }
    }
    let mut flux = vertical::vint(grid, &vertical::vfluct(grid, &q));
    flux.scale(-1.0);
    flux
}

/// σw = −∫₀^z [σ (div_h v)~ + 2 ṽ·∇_h σ] dz′.
pub fn mass_flux_vacuum(ctx: &Context, sigma: &Field2, v: &VecField3) -> Field3 {
    let grid = &ctx.grid;
    let div = vertical::vfluct(grid, &ctx.plan.div3(v));
    let (sx, sy) = ctx.plan.grad2(sigma);
    let vx = vertical::vfluct(grid, &v.x);
    let vy = vertical::vfluct(grid, &v.y);
    let n = grid.plane_len();
    let mut q = Field3::zeros(grid);
    for k in 0..grid.nz {
        for p in 0..n {
            let i = k * n + p;
            q.data[i] = sigma.data[p] * div.data[i] + 2.0 * (vx.data[i] * sx.data[p] + vy.data[i] * sy.data[p]);
        }
    }
    let mut flux = vertical::vint(grid, &q);
    flux.scale(-1.0);
    flux
}

/// ρw in either viscous regime (σ·σw in the vacuum regime).
pub fn density_flux(ctx: &Context, surface: &Field2, v: &VecField3) -> Field3 {
    match ctx.params.regime {
        Regime::GravityGamma2 => mass_flux_gravity(ctx, surface, v),
        _ => mass_flux_vacuum(ctx, surface, v).mul_plane(surface),
    }
}

fn divide_where(num: &Field3, den: &Field3, threshold: f64) -> Field3 {
    num.zip_map(den, |a, b| if b > threshold { a / b } else { f64::NAN })
}

/// Gravity-regime flux and velocity. Fails if the density does not exceed the floor.
pub fn recover_w_gravity(ctx: &Context, state: &PrimState) -> Result<(Field3, Field3)> {
    if ctx.params.regime != Regime::GravityGamma2 {
        return Err(Error::InvalidParams("recover_w_gravity needs the gravity regime".into()));
    }
    let rho = density_field(ctx, &state.surface_var);
    let floor = ctx.params.rho_floor;
    if let Some((index, &value)) = rho.data.iter().enumerate().find(|(_, r)| **r <= floor) {
        return Err(Error::DensityBelowFloor { value, floor, index });
    }
    let flux = mass_flux_gravity(ctx, &state.surface_var, &state.v);
    let w = divide_where(&flux, &rho, floor);
    Ok((flux, w))
}

/// Vacuum-regime σw and w; w is NaN where σ² does not exceed the floor.
pub fn recover_w_vacuum(ctx: &Context, state: &PrimState) -> Result<(Field3, Field3)> {
    if ctx.params.regime != Regime::VacuumNoGravity {
        return Err(Error::InvalidParams("recover_w_vacuum needs the vacuum regime".into()));
    }
    let sigma = &state.surface_var;
    let flux = mass_flux_vacuum(ctx, sigma, &state.v);
    let floor = ctx.params.rho_floor;
    let s3 = Field3::broadcast(&ctx.grid, sigma);
    let w = flux.zip_map(&s3, |a, s| if s * s > floor && s > 0.0 { a / s } else { f64::NAN });
    Ok((flux, w))
}

/// All derived fields of a state.
pub fn derive(ctx: &Context, state: &PrimState) -> Result<DerivedFields> {
    let (rho, pressure) = reconstruct_density(ctx, state)?;
    let (mass_flux_w, w) = match ctx.params.regime {
        Regime::GravityGamma2 => {
            let flux = mass_flux_gravity(ctx, &state.surface_var, &state.v);
            let w = divide_where(&flux, &rho, ctx.params.rho_floor);
            (flux, w)
        }
        Regime::VacuumNoGravity => recover_w_vacuum(ctx, state)?,
        Regime::FreeBoundary => {
            return Err(Error::InvalidParams("use the free-boundary module for FbState".into()))
        }
    };
    Ok(DerivedFields {
        rho,
        pressure,
        mass_flux_w,
        w,
    })
}

/// ∇_h P evaluated by the chain rule at each node.
pub fn pressure_gradient_pointwise(ctx: &Context, surface: &Field2) -> VecField3 {
    let grid = &ctx.grid;
    let (gx, gy) = ctx.plan.grad2(surface);
    let n = grid.plane_len();
    let mut out = VecField3::zeros(grid);
    let gamma = ctx.params.gamma;
    for k in 0..grid.nz {
        for p in 0..n {
            let s = surface.data[p];
            let coef = match ctx.params.regime {
                Regime::GravityGamma2 => 2.0 * s + ctx.params.g * grid.z_levels[k],
                _ => 2.0 * gamma * s.abs().powf(2.0 * gamma - 1.0) * s.signum(),
            };
            out.x.data[k * n + p] = coef * gx.data[p];
            out.y.data[k * n + p] = coef * gy.data[p];
        }
    }
    out
}

/// Result of the weighted embedding diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingReport {
    pub p: f64,
    pub lp_norm: f64,
    pub grad_norm: f64,
    pub weighted_norm: f64,
    pub ratio: f64,
}

fn weighted_mean(ctx: &Context, f: &Field3) -> f64 {
    let n = ctx.grid.plane_len();
    let levels: Vec<f64> = (0..ctx.grid.nz)
        .map(|k| ctx.grid.quad_weights[k] * pairwise_sum(f.plane(k)))
        .collect();
    pairwise_sum(&levels) / n as f64
}

/// ‖f‖_{L^p} / (‖∇f‖₂ + ‖ρ^{1/2} f‖₂).
pub fn weighted_embedding_check(ctx: &Context, f: &Field3, rho: &Field3, p: f64) -> Result<EmbeddingReport> {
    if !(2.0..=6.0).contains(&p) {
        return Err(Error::InvalidParams(format!("embedding exponent must lie in [2, 6], got {p}")));
    }
    let mass = weighted_mean(ctx, rho);
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::InvalidParams("embedding check needs positive finite mass".into()));
    }
    let lp_norm = weighted_mean(ctx, &f.map(|v| v.abs().powf(p))).powf(1.0 / p);
    let g = ctx.plan.grad3(f);
    let dz = vertical::d_z(&ctx.grid, f, DzMode::OneSided)?;
    let mut sq = g.x.zip_map(&g.y, |a, b| a * a + b * b);
    sq = sq.zip_map(&dz, |a, b| a + b * b);
    let grad_norm = weighted_mean(ctx, &sq).sqrt();
    let weighted_norm = weighted_mean(ctx, &f.zip_map(rho, |v, r| r.max(0.0) * v * v)).sqrt();
    let den = grad_norm + weighted_norm;
    let ratio = if lp_norm == 0.0 {
        0.0
    } else if den == 0.0 {
        return Err(Error::ZeroDenominator("‖∇f‖ + ‖ρ^{1/2} f‖ vanishes".into()));
    } else {
        lp_norm / den
    };
    Ok(EmbeddingReport {
        p,
        lp_norm,
        grad_norm,
        weighted_norm,
        ratio,
    })
}

/// Largest embedding ratio over seeded random band-limited fields.
pub fn empirical_embedding_constant(
    ctx: &Context,
    rho: &Field3,
    p: f64,
    samples: usize,
    kmax: i32,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let f = random_band_limited3(ctx, &mut rng, kmax);
        worst = worst.max(weighted_embedding_check(ctx, &f, rho, p)?.ratio);
    }
    Ok(worst)
}

/// Random trigonometric field with horizontal modes |m| ≤ kmax and cos(πrz) profiles, r ≤ 2.
pub fn random_band_limited3(ctx: &Context, rng: &mut ChaCha8Rng, kmax: i32) -> Field3 {
    use std::f64::consts::PI;
    let mut terms = Vec::new();
    for a in -kmax..=kmax {
        for b in -kmax..=kmax {
            for r in 0..3 {
                terms.push((a as f64, b as f64, r as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)));
            }
        }
    }
    Field3::from_fn(&ctx.grid, |x, y, z| {
        terms
            .iter()
            .map(|&(a, b, r, c, ph)| c * (2.0 * PI * (a * x + b * y) + ph).cos() * (PI * r * z).cos())
            .sum::<f64>()
    })
}
