//! Mass, energy and dissipation, the energy-balance residual, and the
//! continuous-dependence experiment.

use crate::error::{Error, Result};
use crate::field::{pairwise_sum, Field3, VecField3};
use crate::hydrostatics;
use crate::ops::vertical;
use crate::params::Regime;
use crate::state::{Context, DiagnosticsRecord, PrimState};
use crate::stepper;

fn weighted_integral(ctx: &Context, f: &Field3) -> f64 {
    let grid = &ctx.grid;
    let levels: Vec<f64> = (0..grid.nz)
        .map(|k| grid.quad_weights[k] * pairwise_sum(f.plane(k)))
        .collect();
    pairwise_sum(&levels) / grid.plane_len() as f64
}

/// ∫_Ω ρ.
pub fn mass(ctx: &Context, state: &PrimState) -> f64 {
    match ctx.params.regime {
        Regime::GravityGamma2 => {
            // ∫ρ dz = ξ + g/4 exactly under the trapezoid rule.
            let zbar: f64 = pairwise_sum(
                &(0..ctx.grid.nz)
                    .map(|k| ctx.grid.quad_weights[k] * ctx.grid.z_levels[k])
                    .collect::<Vec<_>>(),
            );
            state.surface_var.mean() + 0.5 * ctx.params.g * zbar
        }
        _ => {
            let sq: Vec<f64> = state.surface_var.data.iter().map(|s| s * s).collect();
            pairwise_sum(&sq) / sq.len() as f64
        }
    }
}

/// Squared gradient norms of a velocity field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientEnergy {
    /// Σ_k w_k ‖∇_h v(·, z_k)‖².
    pub horizontal: f64,
    /// Σ over vertical edges of h‖(v_{k+1} − v_k)/h‖².
    pub vertical: f64,
    /// Σ_k w_k ‖div_h v(·, z_k)‖².
    pub divergence: f64,
}

/// Gradient norms consistent with the discrete viscous operator: the
/// dissipation μ(horizontal + vertical) + (μ+λ)divergence equals −⟨v, Lv⟩.
pub fn gradient_energy(ctx: &Context, v: &VecField3) -> GradientEnergy {
    let grid = &ctx.grid;
    let plan = &ctx.plan;
    let n = grid.plane_len();
    let n2 = (n * n) as f64;
    let mut hor = Vec::with_capacity(grid.nz);
    let mut div = Vec::with_capacity(grid.nz);
    for k in 0..grid.nz {
        let (a, b) = plan.forward_pair(v.x.plane(k), v.y.plane(k));
        let mut h = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for idx in 0..n {
            let (kx, ky) = plan.wavevector(idx);
            h.push((kx * kx + ky * ky) * (a[idx].norm_sqr() + b[idx].norm_sqr()));
            d.push((kx * a[idx] + ky * b[idx]).norm_sqr());
        }
        hor.push(grid.quad_weights[k] * pairwise_sum(&h) / n2);
        div.push(grid.quad_weights[k] * pairwise_sum(&d) / n2);
    }
    let mut vert = Vec::with_capacity(grid.nz - 1);
    for k in 0..grid.nz - 1 {
        let mut e = Vec::with_capacity(n);
        for p in 0..n {
            let dx = v.x.plane(k + 1)[p] - v.x.plane(k)[p];
            let dy = v.y.plane(k + 1)[p] - v.y.plane(k)[p];
            e.push(dx * dx + dy * dy);
        }
        vert.push(pairwise_sum(&e) / (n as f64 * grid.hz));
    }
    GradientEnergy {
        horizontal: pairwise_sum(&hor),
        vertical: pairwise_sum(&vert),
        divergence: pairwise_sum(&div),
    }
}

/// Dissipation rate μ‖∇v‖² + (μ+λ)‖div_h v‖².
pub fn dissipation_rate(ctx: &Context, v: &VecField3) -> f64 {
    let g = gradient_energy(ctx, v);
    let mu = ctx.params.mu;
    mu * (g.horizontal + g.vertical) + (mu + ctx.params.lambda) * g.divergence
}

/// Total energy and dissipation rate.
///
/// Energy is ½∫ρ|v|² + 1/(γ−1)∫ρ^γ, plus the potential g∫ρ(1−z) in the
/// gravity regime, which the pressure work exchanges with the internal part.
pub fn energy(ctx: &Context, state: &PrimState) -> (f64, f64) {
    let grid = &ctx.grid;
    let p = &ctx.params;
    let rho = hydrostatics::density_field(ctx, &state.surface_var);
    let v = &state.v;
    let mut dens = Field3::zeros(grid);
    let n = grid.plane_len();
    for k in 0..grid.nz {
        let z = grid.z_levels[k];
        for q in 0..n {
            let i = k * n + q;
            let r = rho.data[i];
            let kinetic = 0.5 * r * (v.x.data[i] * v.x.data[i] + v.y.data[i] * v.y.data[i]);
            let pg = if p.gamma == 2.0 { r * r } else { r.max(0.0).powf(p.gamma) };
            let mut e = kinetic + pg / (p.gamma - 1.0);
            if p.regime == Regime::GravityGamma2 {
                e += p.g * r * (1.0 - z);
            }
            dens.data[i] = e;
        }
    }
    (weighted_integral(ctx, &dens), dissipation_rate(ctx, v))
}

/// Minimum of ρ over the grid.
pub fn min_density(ctx: &Context, state: &PrimState) -> f64 {
    hydrostatics::density_field(ctx, &state.surface_var).min()
}

/// |E(t) + ∫₀^t D ds − E(0)| for every record after the first, with the
/// dissipation integrated by the trapezoid rule.
pub fn energy_balance_residual(records: &[DiagnosticsRecord]) -> Vec<f64> {
    if records.len() < 2 {
        return Vec::new();
    }
    let e0 = records[0].energy;
    let mut integral = 0.0;
    let mut out = Vec::with_capacity(records.len() - 1);
    for w in records.windows(2) {
        integral += 0.5 * (w[1].time - w[0].time) * (w[0].dissipation_rate + w[1].dissipation_rate);
        out.push((w[1].energy + integral - e0).abs());
    }
    out
}

/// Discrete Sobolev-norm proxies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevProxies {
    pub surface_h1: f64,
    pub surface_h2: f64,
    pub v_h1: f64,
    pub v_h2: f64,
}

pub fn sobolev_proxies(ctx: &Context, state: &PrimState) -> Result<SobolevProxies> {
    let plan = &ctx.plan;
    let grid = &ctx.grid;
    let s = plan.forward(&state.surface_var.data);
    let n = grid.plane_len();
    let n2 = (n * n) as f64;
    let mut h1 = Vec::with_capacity(n);
    let mut h2 = Vec::with_capacity(n);
    for (idx, c) in s.iter().enumerate() {
        let w = 1.0 + plan.k2(idx);
        h1.push(w * c.norm_sqr());
        h2.push(w * w * c.norm_sqr());
    }
    let v = &state.v;
    let l2 = stepper::inner_vel(ctx, v, v);
    let g = gradient_energy(ctx, v);
    let lap = VecField3 {
        x: plan.laplace3(&v.x),
        y: plan.laplace3(&v.y),
    };
    let vzz = VecField3 {
        x: vertical::d_zz(grid, &v.x, vertical::DzMode::Even)?,
        y: vertical::d_zz(grid, &v.y, vertical::DzMode::Even)?,
    };
    let gz = VecField3 {
        x: plan.grad3(&vertical::d_z(grid, &v.x, vertical::DzMode::Even)?).x,
        y: plan.grad3(&vertical::d_z(grid, &v.y, vertical::DzMode::Even)?).y,
    };
    let v_h1_sq = l2 + g.horizontal + g.vertical;
    let v_h2_sq = v_h1_sq
        + stepper::inner_vel(ctx, &lap, &lap)
        + stepper::inner_vel(ctx, &vzz, &vzz)
        + 2.0 * stepper::inner_vel(ctx, &gz, &gz);
    Ok(SobolevProxies {
        surface_h1: (pairwise_sum(&h1) / n2).sqrt(),
        surface_h2: (pairwise_sum(&h2) / n2).sqrt(),
        v_h1: v_h1_sq.sqrt(),
        v_h2: v_h2_sq.sqrt(),
    })
}

/// One row of the continuous-dependence experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRow {
    pub time: f64,
    /// L² of the surface-variable difference.
    pub d_surface: f64,
    /// L² of ρ_a^{1/2}(v_a − v_b).
    pub d_v_a: f64,
    /// L² of ρ_b^{1/2}(v_a − v_b).
    pub d_v_b: f64,
    /// (∫₀^t ‖∇(v_a − v_b)‖² ds)^{1/2}.
    pub d_grad: f64,
    /// (d_surface² + d_v_a² + d_grad²)^{1/2}.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// Least-squares slope of ln(distance) against time.
    pub growth_rate: f64,
}

fn weighted_velocity_distance(ctx: &Context, rho: &Field3, dv: &VecField3) -> f64 {
    let f = Field3 {
        data: (0..rho.data.len())
            .map(|i| rho.data[i].max(0.0) * (dv.x.data[i] * dv.x.data[i] + dv.y.data[i] * dv.y.data[i]))
            .collect(),
        ..rho.clone()
    };
    weighted_integral(ctx, &f).max(0.0).sqrt()
}

/// Evolves two states side by side and reports the continuous-dependence norms.
pub fn stability_experiment(
    ctx: &Context,
    state_a: &PrimState,
    state_b: &PrimState,
    n_steps: usize,
) -> Result<StabilityReport> {
    if !state_a.matches(&ctx.grid) || !state_b.matches(&ctx.grid) {
        return Err(Error::ShapeMismatch {
            expected: ctx.grid.len3(),
            got: state_b.v.x.data.len(),
        });
    }
    let mut a = state_a.clone();
    let mut b = state_b.clone();
    let mut rows = Vec::with_capacity(n_steps + 1);
    let mut grad_int = 0.0;
    let mut prev_grad = None;
    for step in 0..=n_steps {
        if step > 0 {
            a = stepper::picard_advance(ctx, &a)?.0;
            b = stepper::picard_advance(ctx, &b)?.0;
        }
        let ds = a.surface_var.zip_map(&b.surface_var, |x, y| x - y);
        let dv = a.v.lincomb(1.0, &b.v, -1.0);
        let ge = gradient_energy(ctx, &dv);
        let gsq = ge.horizontal + ge.vertical;
        if let Some(pg) = prev_grad {
            grad_int += 0.5 * ctx.params.dt * (pg + gsq);
        }
        prev_grad = Some(gsq);
        let rho_a = hydrostatics::density_field(ctx, &a.surface_var);
        let rho_b = hydrostatics::density_field(ctx, &b.surface_var);
        let d_surface = ds.l2();
        let d_v_a = weighted_velocity_distance(ctx, &rho_a, &dv);
        let d_v_b = weighted_velocity_distance(ctx, &rho_b, &dv);
        let d_grad = grad_int.sqrt();
        rows.push(StabilityRow {
            time: a.time,
            d_surface,
            d_v_a,
            d_v_b,
            d_grad,
            distance: (d_surface * d_surface + d_v_a * d_v_a + grad_int).sqrt(),
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.distance > 0.0)
        .map(|r| (r.time, r.distance.ln()))
        .collect();
    let growth_rate = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let lm = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let num: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(StabilityReport { rows, growth_rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field2;
    use crate::grid::Grid;
    use crate::params::SimParams;
    use std::f64::consts::PI;

    fn ctx(regime: Regime, g: f64, n: usize, nz: usize) -> Context {
        let mut p = SimParams::new(regime);
        p.g = g;
        p.lambda = 0.0;
        Context::new(Grid::new(n, n, nz).unwrap(), p).unwrap()
    }

    fn state(s: Field2, v: VecField3) -> PrimState {
        PrimState {
            surface_var: s,
            v,
            time: 0.0,
        }
    }

    #[test]
    fn mass_of_linear_profile() {
        let c = ctx(Regime::GravityGamma2, 2.0, 4, 5);
        let s = state(Field2::constant(&c.grid, 1.0), VecField3::zeros(&c.grid));
        assert!((mass(&c, &s) - 1.5).abs() < 1e-15);
        let cv = ctx(Regime::VacuumNoGravity, 0.0, 4, 5);
        let s0 = state(Field2::constant(&c.grid, 0.0), VecField3::zeros(&c.grid));
        assert_eq!(mass(&cv, &s0), 0.0);
        assert_eq!(energy(&cv, &s0).0, 0.0);
    }

    #[test]
    fn rest_energy() {
        let c = ctx(Regime::GravityGamma2, 0.0, 4, 3);
        let s = state(Field2::constant(&c.grid, 1.0), VecField3::zeros(&c.grid));
        assert_eq!(energy(&c, &s), (1.0, 0.0));
    }

    #[test]
    fn cosine_energy_and_dissipation() {
        let c = ctx(Regime::GravityGamma2, 0.0, 16, 5);
        let s = state(
            Field2::constant(&c.grid, 1.0),
            VecField3::from_fn(&c.grid, |x, _, _| ((2.0 * PI * x).cos(), 0.0)),
        );
        let (e, d) = energy(&c, &s);
        assert!((e - 1.25).abs() < 1e-14);
        assert!((d - 4.0 * PI * PI).abs() < 1e-10, "{d}");
    }

    #[test]
    fn dissipation_matches_viscous_operator() {
        let mut p = SimParams::new(Regime::GravityGamma2);
        p.lambda = 0.7;
        p.mu = 1.3;
        let c = Context::new(Grid::new(8, 6, 7).unwrap(), p).unwrap();
        let v = VecField3::from_fn(&c.grid, |x, y, z| {
            ((2.0 * PI * x).sin() * z * z + y, (2.0 * PI * (x + 2.0 * y)).cos() * (3.0 * z).sin())
        });
        let l = stepper::apply_viscous(&c, &v).unwrap();
        let lhs = -stepper::inner_vel(&c, &v, &l);
        let rhs = dissipation_rate(&c, &v);
        assert!((lhs - rhs).abs() < 1e-10 * rhs, "{lhs} {rhs}");
    }

    #[test]
    fn balance_residual_edges() {
        let r = DiagnosticsRecord {
            time: 0.0,
            mass: 1.0,
            energy: 2.0,
            dissipation_rate: 0.0,
            min_density: 1.0,
            picard_iters: 0,
            l2_surface: 1.0,
            l2_v: 0.0,
        };
        assert!(energy_balance_residual(&[r]).is_empty());
        let r2 = DiagnosticsRecord { time: 1.0, energy: 1.0, dissipation_rate: 2.0, ..r };
        let r1 = DiagnosticsRecord { dissipation_rate: 0.0, ..r };
        assert_eq!(energy_balance_residual(&[r1, r2]), vec![0.0]);
    }

    #[test]
    fn identical_states_have_zero_distance() {
        let c = ctx(Regime::GravityGamma2, 9.8, 8, 5);
        let s = state(
            Field2::from_fn(&c.grid, |x, _| 1.0 + 0.1 * (2.0 * PI * x).cos()),
            VecField3::from_fn(&c.grid, |_, y, z| (0.1 * (2.0 * PI * y).sin() * (PI * z).cos(), 0.0)),
        );
        let rep = stability_experiment(&c, &s, &s, 3).unwrap();
        assert!(rep.rows.iter().all(|r| r.distance == 0.0));
    }

    #[test]
    fn min_density_with_zero() {
        let c = ctx(Regime::VacuumNoGravity, 0.0, 8, 3);
        let s = state(
            Field2::from_fn(&c.grid, |x, _| (PI * x).sin()),
            VecField3::zeros(&c.grid),
        );
        assert_eq!(min_density(&c, &s), 0.0);
    }
}
