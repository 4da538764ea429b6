//! Fourier collocation on the periodic unit square.
//!
//! Spectral arrays use a transposed layout, `spec[mx * ny + my]`, which saves
//! one transpose per transform pair. Derivative symbols use the effective
//! wavenumber with the Nyquist mode removed, so every first derivative is
//! exactly skew-adjoint and `div_h(grad_h f) == laplace_h(f)` to roundoff.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::field::{Field2, Field3, VecField3};
use crate::grid::Grid;

#[derive(Clone)]
pub struct SpectralPlan {
    pub nx: usize,
    pub ny: usize,
    /// 2π·m for each x index, zero at the Nyquist index.
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    /// 2/3-rule mask in spectral layout.
    pub dealias_mask: Vec<bool>,
    fft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish_non_exhaustive()
    }
}

/// Signed integer frequency of FFT index `m` on `n` points.
pub fn signed_mode(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

fn derivative_wavenumbers(n: usize) -> Vec<f64> {
    (0..n)
        .map(|m| {
            if m == n / 2 {
                0.0
            } else {
                2.0 * PI * signed_mode(m, n) as f64
            }
        })
        .collect()
}

fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

impl SpectralPlan {
    pub fn new(grid: &Grid) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut planner = FftPlanner::new();
        let fft_x = planner.plan_fft_forward(nx);
        let fft_y = planner.plan_fft_forward(ny);
        let ifft_x = planner.plan_fft_inverse(nx);
        let ifft_y = planner.plan_fft_inverse(ny);
        let mut dealias_mask = vec![false; nx * ny];
        let (cx, cy) = ((nx / 3) as i64, (ny / 3) as i64);
        for mx in 0..nx {
            for my in 0..ny {
                dealias_mask[mx * ny + my] =
                    signed_mode(mx, nx).abs() <= cx && signed_mode(my, ny).abs() <= cy;
            }
        }
        SpectralPlan {
            nx,
            ny,
            kx: derivative_wavenumbers(nx),
            ky: derivative_wavenumbers(ny),
            dealias_mask,
            fft_x,
            fft_y,
            ifft_x,
            ifft_y,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spectral-layout index of the mode with FFT indices `(mx, my)`.
    pub fn mode_index(&self, mx: usize, my: usize) -> usize {
        mx * self.ny + my
    }

    /// Effective wavenumbers of spectral index `idx`.
    pub fn wavevector(&self, idx: usize) -> (f64, f64) {
        (self.kx[idx / self.ny], self.ky[idx % self.ny])
    }

    /// |k|² with the effective wavenumbers.
    pub fn k2(&self, idx: usize) -> f64 {
        let (a, b) = self.wavevector(idx);
        a * a + b * b
    }

    /// Unnormalized forward transform of a complex plane in physical layout.
    pub fn forward_complex(&self, mut buf: Vec<Complex64>) -> Vec<Complex64> {
        let (nx, ny) = (self.nx, self.ny);
        self.fft_x.process(&mut buf);
        let mut t = vec![Complex64::new(0.0, 0.0); nx * ny];
        transpose(&buf, ny, nx, &mut t);
        self.fft_y.process(&mut t);
        t
    }

    /// Inverse of [`forward_complex`](Self::forward_complex), including the 1/N factor.
    pub fn inverse_complex(&self, mut spec: Vec<Complex64>) -> Vec<Complex64> {
        let (nx, ny) = (self.nx, self.ny);
        self.ifft_y.process(&mut spec);
        let mut buf = vec![Complex64::new(0.0, 0.0); nx * ny];
        transpose(&spec, nx, ny, &mut buf);
        self.ifft_x.process(&mut buf);
        let s = 1.0 / (nx * ny) as f64;
        for c in &mut buf {
            *c *= s;
        }
        buf
    }

    pub fn forward(&self, plane: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(plane.len(), self.len());
        self.forward_complex(plane.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn inverse(&self, spec: Vec<Complex64>) -> Vec<f64> {
        self.inverse_complex(spec).into_iter().map(|c| c.re).collect()
    }

    /// Transforms two real planes with a single complex FFT.
    pub fn forward_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let packed = a
            .iter()
            .zip(b)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        let c = self.forward_complex(packed);
        let (nx, ny) = (self.nx, self.ny);
        let mut sa = vec![Complex64::new(0.0, 0.0); nx * ny];
        let mut sb = vec![Complex64::new(0.0, 0.0); nx * ny];
        for mx in 0..nx {
            let cx = (nx - mx) % nx;
            for my in 0..ny {
                let cy = (ny - my) % ny;
                let z = c[mx * ny + my];
                let zc = c[cx * ny + cy].conj();
                sa[mx * ny + my] = 0.5 * (z + zc);
                sb[mx * ny + my] = Complex64::new(0.0, -0.5) * (z - zc);
            }
        }
        (sa, sb)
    }

    /// Inverts two Hermitian spectra with a single complex FFT.
    pub fn inverse_pair(&self, sa: Vec<Complex64>, sb: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut c = sa;
        let i = Complex64::new(0.0, 1.0);
        for (z, b) in c.iter_mut().zip(sb) {
            *z += i * b;
        }
        let out = self.inverse_complex(c);
        (out.iter().map(|z| z.re).collect(), out.iter().map(|z| z.im).collect())
    }

    fn dx_spec(&self, spec: &mut [Complex64]) {
        let ny = self.ny;
        for (idx, c) in spec.iter_mut().enumerate() {
            *c *= Complex64::new(0.0, self.kx[idx / ny]);
        }
    }

    fn dy_spec(&self, spec: &mut [Complex64]) {
        let ny = self.ny;
        for (idx, c) in spec.iter_mut().enumerate() {
            *c *= Complex64::new(0.0, self.ky[idx % ny]);
        }
    }

    pub fn dx_plane(&self, plane: &[f64]) -> Vec<f64> {
        let mut s = self.forward(plane);
        self.dx_spec(&mut s);
        self.inverse(s)
    }

    pub fn dy_plane(&self, plane: &[f64]) -> Vec<f64> {
        let mut s = self.forward(plane);
        self.dy_spec(&mut s);
        self.inverse(s)
    }

    /// Gradient of one plane.
    pub fn grad_plane(&self, plane: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let s = self.forward(plane);
        let mut sx = s.clone();
        let mut sy = s;
        self.dx_spec(&mut sx);
        self.dy_spec(&mut sy);
        self.inverse_pair(sx, &sy)
    }

    /// Divergence of the plane vector `(u, v)`.
    pub fn div_plane(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let (mut su, mut sv) = self.forward_pair(u, v);
        self.dx_spec(&mut su);
        self.dy_spec(&mut sv);
        for (a, b) in su.iter_mut().zip(&sv) {
            *a += b;
        }
        self.inverse(su)
    }

    pub fn laplace_plane(&self, plane: &[f64]) -> Vec<f64> {
        let mut s = self.forward(plane);
        for (idx, c) in s.iter_mut().enumerate() {
            *c *= -self.k2(idx);
        }
        self.inverse(s)
    }

    /// Orthogonal projection onto the 2/3-rule band.
    pub fn dealias_plane(&self, plane: &[f64]) -> Vec<f64> {
        let mut s = self.forward(plane);
        for (c, &keep) in s.iter_mut().zip(&self.dealias_mask) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        self.inverse(s)
    }

    pub fn grad2(&self, f: &Field2) -> (Field2, Field2) {
        let (gx, gy) = self.grad_plane(&f.data);
        (
            Field2 { nx: f.nx, ny: f.ny, data: gx },
            Field2 { nx: f.nx, ny: f.ny, data: gy },
        )
    }

    pub fn div2(&self, u: &Field2, v: &Field2) -> Field2 {
        Field2 {
            nx: u.nx,
            ny: u.ny,
            data: self.div_plane(&u.data, &v.data),
        }
    }

    pub fn laplace2(&self, f: &Field2) -> Field2 {
        Field2 {
            nx: f.nx,
            ny: f.ny,
            data: self.laplace_plane(&f.data),
        }
    }

    pub fn dealias2(&self, f: &Field2) -> Field2 {
        Field2 {
            nx: f.nx,
            ny: f.ny,
            data: self.dealias_plane(&f.data),
        }
    }

    /// Applies a plane map to every level in parallel.
    pub fn map_planes(&self, f: &Field3, op: impl Fn(&[f64]) -> Vec<f64> + Sync) -> Field3 {
        let planes: Vec<Vec<f64>> = f.planes().collect::<Vec<_>>().par_iter().map(|p| op(p)).collect();
        Field3 {
            nx: f.nx,
            ny: f.ny,
            nz: f.nz,
            data: planes.concat(),
        }
    }

    pub fn grad3(&self, f: &Field3) -> VecField3 {
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = f
            .planes()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|p| self.grad_plane(p))
            .collect();
        let mut x = Vec::with_capacity(f.data.len());
        let mut y = Vec::with_capacity(f.data.len());
        for (a, b) in pairs {
            x.extend(a);
            y.extend(b);
        }
        VecField3 {
            x: Field3 { nx: f.nx, ny: f.ny, nz: f.nz, data: x },
            y: Field3 { nx: f.nx, ny: f.ny, nz: f.nz, data: y },
        }
    }

    pub fn div3(&self, u: &VecField3) -> Field3 {
        let planes: Vec<Vec<f64>> = (0..u.x.nz)
            .into_par_iter()
            .map(|k| self.div_plane(u.x.plane(k), u.y.plane(k)))
            .collect();
        Field3 {
            nx: u.x.nx,
            ny: u.x.ny,
            nz: u.x.nz,
            data: planes.concat(),
        }
    }

    pub fn dx3(&self, f: &Field3) -> Field3 {
        self.map_planes(f, |p| self.dx_plane(p))
    }

    pub fn dy3(&self, f: &Field3) -> Field3 {
        self.map_planes(f, |p| self.dy_plane(p))
    }

    pub fn laplace3(&self, f: &Field3) -> Field3 {
        self.map_planes(f, |p| self.laplace_plane(p))
    }

    pub fn dealias3(&self, f: &Field3) -> Field3 {
        self.map_planes(f, |p| self.dealias_plane(p))
    }

    pub fn dealias_vec(&self, u: &VecField3) -> VecField3 {
        VecField3 {
            x: self.dealias3(&u.x),
            y: self.dealias3(&u.y),
        }
    }
}

/// Horizontal gradient of a plane field.
pub fn grad_h(plan: &SpectralPlan, f: &Field2) -> (Field2, Field2) {
    plan.grad2(f)
}

/// Horizontal divergence of a 3D vector field.
pub fn div_h(plan: &SpectralPlan, u: &VecField3) -> Field3 {
    plan.div3(u)
}

/// Horizontal Laplacian of a plane field.
pub fn laplace_h(plan: &SpectralPlan, f: &Field2) -> Field2 {
    plan.laplace2(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::pairwise_sum;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn band_limited(grid: &Grid, rng: &mut ChaCha8Rng, kmax: i32) -> Field2 {
        let mut terms = Vec::new();
        for p in -kmax..=kmax {
            for q in -kmax..=kmax {
                terms.push((p, q, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)));
            }
        }
        Field2::from_fn(grid, |x, y| {
            terms
                .iter()
                .map(|&(p, q, a, ph)| a * (2.0 * PI * (p as f64 * x + q as f64 * y) + ph).cos())
                .sum()
        })
    }

    #[test]
    fn gradient_of_sine() {
        let g = Grid::new(16, 8, 3).unwrap();
        let plan = SpectralPlan::new(&g);
        let f = Field2::from_fn(&g, |x, _| (2.0 * PI * x).sin());
        let (gx, gy) = plan.grad2(&f);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let exact = 2.0 * PI * (2.0 * PI * g.x(i)).cos();
                assert!((gx.data[j * g.nx + i] - exact).abs() < 1e-12);
                assert!(gy.data[j * g.nx + i].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = Grid::new(8, 8, 3).unwrap();
        let plan = SpectralPlan::new(&g);
        let (gx, gy) = plan.grad2(&Field2::constant(&g, 3.7));
        assert!(gx.max_abs() < 1e-14 && gy.max_abs() < 1e-14);
    }

    #[test]
    fn pair_transform_matches_single() {
        let g = Grid::new(12, 8, 3).unwrap();
        let plan = SpectralPlan::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..96).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..96).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (sa, sb) = plan.forward_pair(&a, &b);
        let ra = plan.forward(&a);
        let rb = plan.forward(&b);
        for i in 0..96 {
            assert!((sa[i] - ra[i]).norm() < 1e-12);
            assert!((sb[i] - rb[i]).norm() < 1e-12);
        }
        let (a2, b2) = plan.inverse_pair(sa, &sb);
        for i in 0..96 {
            assert!((a2[i] - a[i]).abs() < 1e-14 && (b2[i] - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn parseval() {
        let g = Grid::new(16, 16, 3).unwrap();
        let plan = SpectralPlan::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = plan.forward(&f);
        let phys: f64 = pairwise_sum(&f.iter().map(|v| v * v).collect::<Vec<_>>()) / 256.0;
        let spec: f64 = s.iter().map(|c| c.norm_sqr()).sum::<f64>() / (256.0 * 256.0);
        assert!((phys - spec).abs() < 1e-14 * phys.max(1.0));
    }

    #[test]
    fn mask_is_symmetric() {
        let g = Grid::new(12, 10, 3).unwrap();
        let plan = SpectralPlan::new(&g);
        for mx in 0..12 {
            for my in 0..10 {
                let a = plan.dealias_mask[plan.mode_index(mx, my)];
                let b = plan.dealias_mask[plan.mode_index((12 - mx) % 12, (10 - my) % 10)];
                assert_eq!(a, b);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn div_grad_is_laplace(seed in any::<u64>()) {
            let g = Grid::new(16, 12, 3).unwrap();
            let plan = SpectralPlan::new(&g);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = band_limited(&g, &mut rng, 3);
            let (gx, gy) = plan.grad2(&f);
            let lhs = plan.div2(&gx, &gy);
            let rhs = plan.laplace2(&f);
            let scale = rhs.max_abs().max(1.0);
            for (a, b) in lhs.data.iter().zip(&rhs.data) {
                prop_assert!((a - b).abs() < 1e-12 * scale);
            }
        }

        #[test]
        fn grad_div_adjoint(seed in any::<u64>()) {
            let g = Grid::new(8, 16, 3).unwrap();
            let plan = SpectralPlan::new(&g);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = g.plane_len();
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (gx, gy) = plan.grad_plane(&f);
            let d = plan.div_plane(&u, &v);
            let a: f64 = (0..n).map(|i| gx[i] * u[i] + gy[i] * v[i]).sum();
            let b: f64 = (0..n).map(|i| f[i] * d[i]).sum();
            prop_assert!((a + b).abs() < 1e-11);
        }

        #[test]
        fn divergence_has_zero_mean(seed in any::<u64>()) {
            let g = Grid::new(8, 8, 3).unwrap();
            let plan = SpectralPlan::new(&g);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u: Vec<f64> = (0..64).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let v: Vec<f64> = (0..64).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let d = plan.div_plane(&u, &v);
            prop_assert!(pairwise_sum(&d).abs() < 1e-11);
        }
    }
}
