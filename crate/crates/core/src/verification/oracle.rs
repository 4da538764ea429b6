//! Brute-force reference computations that share no code with the fast paths.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::{Field3, VecField3};
use crate::state::Context;

/// Largest grid accepted by the dense momentum oracle.
pub const DENSE_MAX_POINTS: usize = 4096;

/// Composite Simpson rule with `n` (rounded up to even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

const D1: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
const D2: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];

/// Eighth-order central first derivative.
pub fn fd8_first(f: impl Fn(f64) -> f64, s: f64, h: f64) -> f64 {
    let mut acc = 0.0;
    for (m, c) in D1.iter().enumerate() {
        let d = (m + 1) as f64 * h;
        acc += c * (f(s + d) - f(s - d));
    }
    acc / h
}

/// Eighth-order central second derivative.
pub fn fd8_second(f: impl Fn(f64) -> f64, s: f64, h: f64) -> f64 {
    let mut acc = D2[0] * f(s);
    for (m, c) in D2.iter().enumerate().skip(1) {
        let d = m as f64 * h;
        acc += c * (f(s + d) + f(s - d));
    }
    acc / (h * h)
}

/// c^{k/2} through integer powers and one square root.
pub fn half_integer_power(c: f64, twice_exponent: u32) -> f64 {
    let whole = c.powi((twice_exponent / 2) as i32);
    if twice_exponent % 2 == 1 {
        whole * c.sqrt()
    } else {
        whole
    }
}

fn wavenumber(m: usize, n: usize) -> f64 {
    if 2 * m == n {
        return 0.0;
    }
    let s = if m > n / 2 { m as f64 - n as f64 } else { m as f64 };
    2.0 * PI * s
}

/// Dense periodic first- and second-derivative matrices built from the
/// trigonometric interpolant, with the Nyquist mode carrying no derivative.
pub fn trig_derivative_matrices(n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut d1 = DMatrix::zeros(n, n);
    let mut d2 = DMatrix::zeros(n, n);
    for i in 0..n {
        for ip in 0..n {
            let mut a = 0.0;
            let mut b = 0.0;
            for m in 0..n {
                let k = wavenumber(m, n);
                let th = 2.0 * PI * (m as f64) * (i as f64 - ip as f64) / n as f64;
                a -= k * th.sin();
                b -= k * k * th.cos();
            }
            d1[(i, ip)] = a / n as f64;
            d2[(i, ip)] = b / n as f64;
        }
    }
    (d1, d2)
}

/// Matrix of μΔ_h + μ∂_zz (Neumann) + (μ+λ)∇_h div_h on the stacked unknowns
/// `[v_x; v_y]`, each ordered like [`Field3::data`].
pub fn dense_viscous_matrix(ctx: &Context) -> Result<DMatrix<f64>> {
    let g = &ctx.grid;
    let (nx, ny, nz) = (g.nx, g.ny, g.nz);
    let n3 = g.len3();
    if n3 > DENSE_MAX_POINTS {
        return Err(Error::InvalidGrid(format!(
            "dense oracle limited to {DENSE_MAX_POINTS} points, got {n3}"
        )));
    }
    let mu = ctx.params.mu;
    let ml = ctx.params.mu + ctx.params.lambda;
    let (dx, dxx) = trig_derivative_matrices(nx);
    let (dy, dyy) = trig_derivative_matrices(ny);
    let dxdx = &dx * &dx;
    let dydy = &dy * &dy;
    let h2 = g.hz * g.hz;
    let mut dzz = DMatrix::zeros(nz, nz);
    for k in 0..nz {
        if k == 0 {
            dzz[(0, 0)] = -2.0 / h2;
            dzz[(0, 1)] = 2.0 / h2;
        } else if k == nz - 1 {
            dzz[(k, k)] = -2.0 / h2;
            dzz[(k, k - 1)] = 2.0 / h2;
        } else {
            dzz[(k, k - 1)] = 1.0 / h2;
            dzz[(k, k)] = -2.0 / h2;
            dzz[(k, k + 1)] = 1.0 / h2;
        }
    }
    let idx = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
    let mut l = DMatrix::zeros(2 * n3, 2 * n3);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let row = idx(i, j, k);
                for c in 0..2 {
                    let r = c * n3 + row;
                    for ip in 0..nx {
                        l[(r, c * n3 + idx(ip, j, k))] += mu * dxx[(i, ip)];
                    }
                    for jp in 0..ny {
                        l[(r, c * n3 + idx(i, jp, k))] += mu * dyy[(j, jp)];
                    }
                    for kp in 0..nz {
                        l[(r, c * n3 + idx(i, j, kp))] += mu * dzz[(k, kp)];
                    }
                }
                // (μ+λ) ∂_x(∂_x v_x + ∂_y v_y) and ∂_y(…)
                for ip in 0..nx {
                    l[(row, idx(ip, j, k))] += ml * dxdx[(i, ip)];
                }
                for jp in 0..ny {
                    l[(n3 + row, n3 + idx(i, jp, k))] += ml * dydy[(j, jp)];
                }
                for ip in 0..nx {
                    for jp in 0..ny {
                        let cross = ml * dx[(i, ip)] * dy[(j, jp)];
                        l[(row, n3 + idx(ip, jp, k))] += cross;
                        l[(n3 + row, idx(ip, jp, k))] += cross;
                    }
                }
            }
        }
    }
    Ok(l)
}

/// Assembles `ρ°/dt − ½L` and solves the Crank–Nicolson momentum system by LU.
/// With μ = λ = 0 the update is explicit and uses the unlifted density.
pub fn dense_momentum_solve(
    ctx: &Context,
    rho: &Field3,
    forcing: &VecField3,
    v_n: &VecField3,
    dt: f64,
) -> Result<VecField3> {
    let g = &ctx.grid;
    let n3 = g.len3();
    let inviscid = ctx.params.mu == 0.0 && ctx.params.mu + ctx.params.lambda == 0.0;
    let stack = |v: &VecField3| {
        DVector::from_iterator(2 * n3, v.x.data.iter().chain(&v.y.data).copied())
    };
    let x = if inviscid {
        if rho.data.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::SingularSystem("nonpositive density in explicit update".into()));
        }
        let mut out = stack(v_n);
        let f = stack(forcing);
        for i in 0..2 * n3 {
            out[i] += dt * f[i] / rho.data[i % n3];
        }
        out
    } else {
        let l = dense_viscous_matrix(ctx)?;
        let lift = ctx.params.mass_lift();
        let mut a = -0.5 * &l;
        for i in 0..2 * n3 {
            a[(i, i)] += rho.data[i % n3].max(lift) / dt;
        }
        let vn = stack(v_n);
        let mut b = &l * &vn * 0.5 + stack(forcing);
        for i in 0..2 * n3 {
            b[i] += rho.data[i % n3].max(lift) / dt * vn[i];
        }
        a.lu()
            .solve(&b)
            .ok_or_else(|| Error::SingularSystem("dense LU found a zero pivot".into()))?
    };
    let mut out = VecField3::zeros(g);
    out.x.data.copy_from_slice(&x.as_slice()[..n3]);
    out.y.data.copy_from_slice(&x.as_slice()[n3..]);
    Ok(out)
}

/// A scalar function of (x, y, z, t).
pub type Field4<'a> = &'a dyn Fn(f64, f64, f64, f64) -> f64;

/// Gravity-regime residual forcing at one point, by finite differences and
/// Simpson quadrature applied directly to the exact solution. Returns the
/// continuity source and the two momentum sources.
pub fn fd_gravity_forcing(
    xi: Field4,
    vx: Field4,
    vy: Field4,
    mu: f64,
    lambda: f64,
    g: f64,
    (x, y, z, t): (f64, f64, f64, f64),
) -> (f64, f64, f64) {
    const H1: f64 = 2e-3;
    const H2: f64 = 1e-2;
    const PANELS: usize = 400;
    let dx = |f: Field4, x: f64, y: f64, z: f64, t: f64| fd8_first(|s| f(s, y, z, t), x, H1);
    let dy = |f: Field4, x: f64, y: f64, z: f64, t: f64| fd8_first(|s| f(x, s, z, t), y, H1);
    // div(ξv) + (g/2) z div v, evaluated at height s.
    let q = |s: f64| {
        let xv = |a: f64, b: f64, c: f64, d: f64| xi(a, b, c, d) * vx(a, b, c, d);
        let yv = |a: f64, b: f64, c: f64, d: f64| xi(a, b, c, d) * vy(a, b, c, d);
        let div = dx(vx, x, y, s, t) + dy(vy, x, y, s, t);
        dx(&xv, x, y, s, t) + dy(&yv, x, y, s, t) + 0.5 * g * s * div
    };
    let qbar = simpson(q, 0.0, 1.0, PANELS);
    let flux = -(simpson(q, 0.0, z, PANELS) - z * qbar);
    let surface = fd8_first(|s| xi(x, y, z, s), t, H1) + qbar;

    let rho = xi(x, y, z, t) + 0.5 * g * z;
    let p = |a: f64, b: f64, c: f64, d: f64| (xi(a, b, c, d) + 0.5 * g * c).powi(2);
    let comp = |v: Field4, along_x: bool| {
        let vt = fd8_first(|s| v(x, y, z, s), t, H1);
        let adv = vx(x, y, z, t) * dx(v, x, y, z, t) + vy(x, y, z, t) * dy(v, x, y, z, t);
        let vz = fd8_first(|s| v(x, y, s, t), z, H1);
        let lap = fd8_second(|s| v(s, y, z, t), x, H2)
            + fd8_second(|s| v(x, s, z, t), y, H2)
            + fd8_second(|s| v(x, y, s, t), z, H2);
        let (dp, ddiv) = if along_x {
            let ddiv = fd8_second(|s| vx(s, y, z, t), x, H2)
                + fd8_first(|s| fd8_first(|r| vy(s, r, z, t), y, H2), x, H2);
            (dx(&p, x, y, z, t), ddiv)
        } else {
            let ddiv = fd8_second(|s| vy(x, s, z, t), y, H2)
                + fd8_first(|s| fd8_first(|r| vx(r, s, z, t), x, H2), y, H2);
            (dy(&p, x, y, z, t), ddiv)
        };
        rho * (vt + adv) + flux * vz + dp - mu * lap - (mu + lambda) * ddiv
    };
    (surface, comp(vx, true), comp(vy, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::params::{Regime, SimParams};
    use crate::stepper;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 2);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn eighth_order_stencils() {
        let d = fd8_first(f64::sin, 0.3, 1e-2);
        assert!((d - 0.3f64.cos()).abs() < 1e-14);
        let d = fd8_second(f64::sin, 0.3, 1e-2);
        assert!((d + 0.3f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn half_integer_powers() {
        assert_eq!(half_integer_power(4.0, 5), 32.0);
        assert_eq!(half_integer_power(3.0, 4), 9.0);
    }

    #[test]
    fn trig_matrices_differentiate_resolved_modes() {
        let n = 8;
        let (d1, d2) = trig_derivative_matrices(n);
        let f = DVector::from_fn(n, |i, _| (2.0 * PI * 3.0 * i as f64 / n as f64).sin());
        let df = &d1 * &f;
        let ddf = &d2 * &f;
        for i in 0..n {
            let x = i as f64 / n as f64;
            assert!((df[i] - 6.0 * PI * (6.0 * PI * x).cos()).abs() < 1e-11);
            assert!((ddf[i] + 36.0 * PI * PI * (6.0 * PI * x).sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn dense_matches_viscous_operator() {
        let ctx = Context::new(Grid::new(4, 6, 5).unwrap(), SimParams::new(Regime::GravityGamma2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut v = VecField3::zeros(&ctx.grid);
        for x in v.x.data.iter_mut().chain(v.y.data.iter_mut()) {
            *x = rng.gen_range(-1.0..1.0);
        }
        let l = dense_viscous_matrix(&ctx).unwrap();
        let n3 = ctx.grid.len3();
        let stacked = DVector::from_iterator(2 * n3, v.x.data.iter().chain(&v.y.data).copied());
        let dense = &l * stacked;
        let fast = stepper::apply_viscous(&ctx, &v).unwrap();
        for i in 0..n3 {
            assert!((dense[i] - fast.x.data[i]).abs() < 1e-9 * (1.0 + dense[i].abs()));
            assert!((dense[n3 + i] - fast.y.data[i]).abs() < 1e-9 * (1.0 + dense[n3 + i].abs()));
        }
    }

    #[test]
    fn rejects_large_grids() {
        let ctx = Context::new(Grid::new(32, 32, 9).unwrap(), SimParams::new(Regime::GravityGamma2)).unwrap();
        assert!(dense_viscous_matrix(&ctx).is_err());
    }
}
