//! Second-order vertical differences and the trapezoid bar/tilde/cumulative
//! operators.
//!
//! The `Even`/`Odd` ghost pair is skew-adjoint under the trapezoid inner
//! product for fields vanishing at both ends, and the Neumann second
//! difference is symmetric negative semidefinite under the same weights.

use crate::error::{Error, Result};
use crate::field::{Field2, Field3};
use crate::grid::Grid;

/// Boundary closure for vertical differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DzMode {
    /// Even reflection about each end (encodes ∂_z f = 0).
    Even,
    /// Odd reflection about each end (for fields vanishing there).
    Odd,
    /// One-sided second-order stencils.
    OneSided,
}

fn check_nz(f: &Field3) -> Result<()> {
    if f.nz < 3 {
        return Err(Error::InvalidGrid(format!("vertical operators need nz >= 3, got {}", f.nz)));
    }
    Ok(())
}

/// First vertical derivative.
pub fn d_z(grid: &Grid, f: &Field3, mode: DzMode) -> Result<Field3> {
    check_nz(f)?;
    let nz = f.nz;
    let n = f.plane_len();
    let h = grid.hz;
    let mut out = Field3::zeros(grid);
    let src = &f.data;
    for k in 1..nz - 1 {
        let (lo, hi) = ((k - 1) * n, (k + 1) * n);
        let dst = out.plane_mut(k);
        for p in 0..n {
            dst[p] = (src[hi + p] - src[lo + p]) / (2.0 * h);
        }
    }
    let top = (nz - 1) * n;
    match mode {
        DzMode::Even => {}
        DzMode::Odd => {
            for p in 0..n {
                out.data[p] = src[n + p] / h;
                out.data[top + p] = -src[top - n + p] / h;
            }
        }
        DzMode::OneSided => {
            for p in 0..n {
                out.data[p] = (-3.0 * src[p] + 4.0 * src[n + p] - src[2 * n + p]) / (2.0 * h);
                out.data[top + p] =
                    (3.0 * src[top + p] - 4.0 * src[top - n + p] + src[top - 2 * n + p]) / (2.0 * h);
            }
        }
    }
    Ok(out)
}

/// Second vertical derivative. `Even` is the Neumann closure; `Odd` treats the
/// field as vanishing at both ends.
pub fn d_zz(grid: &Grid, f: &Field3, mode: DzMode) -> Result<Field3> {
    check_nz(f)?;
    let nz = f.nz;
    let n = f.plane_len();
    let h2 = grid.hz * grid.hz;
    let mut out = Field3::zeros(grid);
    let src = &f.data;
    for k in 1..nz - 1 {
        let dst = out.plane_mut(k);
        for p in 0..n {
            dst[p] = (src[(k + 1) * n + p] - 2.0 * src[k * n + p] + src[(k - 1) * n + p]) / h2;
        }
    }
    let top = (nz - 1) * n;
    for p in 0..n {
        let (b, t) = match mode {
            DzMode::Even => (
                2.0 * (src[n + p] - src[p]) / h2,
                2.0 * (src[top - n + p] - src[top + p]) / h2,
            ),
            DzMode::Odd => (
                -2.0 * src[p] / h2,
                -2.0 * src[top + p] / h2,
            ),
            DzMode::OneSided if nz >= 4 => (
                (2.0 * src[p] - 5.0 * src[n + p] + 4.0 * src[2 * n + p] - src[3 * n + p]) / h2,
                (2.0 * src[top + p] - 5.0 * src[top - n + p] + 4.0 * src[top - 2 * n + p]
                    - src[top - 3 * n + p])
                    / h2,
            ),
            DzMode::OneSided => {
                let c = (src[p] - 2.0 * src[n + p] + src[2 * n + p]) / h2;
                (c, c)
            }
        };
        out.data[p] = b;
        out.data[top + p] = t;
    }
    Ok(out)
}

/// Trapezoid vertical average.
pub fn vavg(grid: &Grid, f: &Field3) -> Field2 {
    let n = f.plane_len();
    let mut out = vec![0.0; n];
    for (k, plane) in f.planes().enumerate() {
        let w = grid.quad_weights[k];
        for (o, v) in out.iter_mut().zip(plane) {
            *o += w * v;
        }
    }
    Field2 {
        nx: f.nx,
        ny: f.ny,
        data: out,
    }
}

/// Fluctuation `f − vavg(f)`.
pub fn vfluct(grid: &Grid, f: &Field3) -> Field3 {
    let bar = vavg(grid, f);
    let mut out = f.clone();
    for plane in out.planes_mut() {
        for (v, b) in plane.iter_mut().zip(&bar.data) {
            *v -= b;
        }
    }
    out
}

/// Cumulative trapezoid integral from the bottom, `∫₀^{z_k} f dz`.
pub fn vint(grid: &Grid, f: &Field3) -> Field3 {
    let n = f.plane_len();
    let half = 0.5 * grid.hz;
    let mut out = Field3::zeros(grid);
    for k in 1..f.nz {
        for p in 0..n {
            out.data[k * n + p] =
                out.data[(k - 1) * n + p] + half * (f.data[(k - 1) * n + p] + f.data[k * n + p]);
        }
    }
    out
}

/// Trapezoid-weighted inner product over the whole grid, normalized by the
/// horizontal point count so it approximates ∫_Ω f g.
pub fn inner_w(grid: &Grid, f: &Field3, g: &Field3) -> f64 {
    let n = f.plane_len();
    let mut per_level = Vec::with_capacity(f.nz);
    for k in 0..f.nz {
        let prod: Vec<f64> = f.plane(k).iter().zip(g.plane(k)).map(|(a, b)| a * b).collect();
        per_level.push(grid.quad_weights[k] * crate::field::pairwise_sum(&prod));
    }
    crate::field::pairwise_sum(&per_level) / n as f64
}
