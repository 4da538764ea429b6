//! Field containers on the collocation grid.
//!
//! Horizontal planes are stored row-major with x fastest: `data[j * nx + i]`.
//! Three-dimensional fields stack planes with z slowest:
//! `data[(k * ny + j) * nx + i]`.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Fixed-order pairwise summation. The result depends only on the input
/// order, never on thread scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Horizontal mean of a plane, i.e. the integral over the unit torus.
pub fn plane_mean(plane: &[f64]) -> f64 {
    pairwise_sum(plane) / plane.len() as f64
}

/// A scalar field on the horizontal torus.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2 {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<f64>,
}

impl Field2 {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Field2 {
            nx,
            ny,
            data: vec![0.0; nx * ny],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Field2 {
            nx: grid.nx,
            ny: grid.ny,
            data: vec![value; grid.plane_len()],
        }
    }

    /// Samples `f(x, y)` at the collocation points.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.plane_len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                data.push(f(grid.x(i), grid.y(j)));
            }
        }
        Field2 {
            nx: grid.nx,
            ny: grid.ny,
            data,
        }
    }

    pub fn from_vec(grid: &Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.plane_len() {
            return Err(Error::ShapeMismatch {
                expected: grid.plane_len(),
                got: data.len(),
            });
        }
        Ok(Field2 {
            nx: grid.nx,
            ny: grid.ny,
            data,
        })
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.nx == grid.nx && self.ny == grid.ny && self.data.len() == grid.plane_len()
    }

    pub fn mean(&self) -> f64 {
        plane_mean(&self.data)
    }

    /// Discrete L² norm on the unit torus.
    pub fn l2(&self) -> f64 {
        let sq: Vec<f64> = self.data.iter().map(|v| v * v).collect();
        plane_mean(&sq).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field2 {
        Field2 {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field2, f: impl Fn(f64, f64) -> f64) -> Field2 {
        debug_assert_eq!(self.data.len(), other.data.len());
        Field2 {
            nx: self.nx,
            ny: self.ny,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// A scalar field on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3 {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub data: Vec<f64>,
}

impl Field3 {
    pub fn zeros(grid: &Grid) -> Self {
        Field3 {
            nx: grid.nx,
            ny: grid.ny,
            nz: grid.nz,
            data: vec![0.0; grid.len3()],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Field3 {
            nx: grid.nx,
            ny: grid.ny,
            nz: grid.nz,
            data: vec![value; grid.len3()],
        }
    }

    /// Samples `f(x, y, z)` at every grid node.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len3());
        for k in 0..grid.nz {
            let z = grid.z_levels[k];
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    data.push(f(grid.x(i), grid.y(j), z));
                }
            }
        }
        Field3 {
            nx: grid.nx,
            ny: grid.ny,
            nz: grid.nz,
            data,
        }
    }

    pub fn from_vec(grid: &Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len3() {
            return Err(Error::ShapeMismatch {
                expected: grid.len3(),
                got: data.len(),
            });
        }
        Ok(Field3 {
            nx: grid.nx,
            ny: grid.ny,
            nz: grid.nz,
            data,
        })
    }

    /// Copies a horizontal field onto every level.
    pub fn broadcast(grid: &Grid, plane: &Field2) -> Self {
        let mut data = Vec::with_capacity(grid.len3());
        for _ in 0..grid.nz {
            data.extend_from_slice(&plane.data);
        }
        Field3 {
            nx: grid.nx,
            ny: grid.ny,
            nz: grid.nz,
            data,
        }
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.nx == grid.nx && self.ny == grid.ny && self.nz == grid.nz && self.data.len() == grid.len3()
    }

    pub fn plane_len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn plane(&self, k: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn plane_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn planes(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.plane_len())
    }

    pub fn planes_mut(&mut self) -> std::slice::ChunksMut<'_, f64> {
        let n = self.plane_len();
        self.data.chunks_mut(n)
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(k * self.ny + j) * self.nx + i]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field3 {
        Field3 {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field3, f: impl Fn(f64, f64) -> f64) -> Field3 {
        debug_assert_eq!(self.data.len(), other.data.len());
        Field3 {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Pointwise product with a horizontal field broadcast over levels.
    pub fn mul_plane(&self, plane: &Field2) -> Field3 {
        let mut out = self.clone();
        for level in out.planes_mut() {
            for (v, p) in level.iter_mut().zip(&plane.data) {
                *v *= p;
            }
        }
        out
    }

    pub fn axpy(&mut self, a: f64, x: &Field3) {
        for (y, xv) in self.data.iter_mut().zip(&x.data) {
            *y += a * xv;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.data {
            *v *= a;
        }
    }
}

/// Two-component horizontal velocity on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VecField3 {
    pub x: Field3,
    pub y: Field3,
}

impl VecField3 {
    pub fn zeros(grid: &Grid) -> Self {
        VecField3 {
            x: Field3::zeros(grid),
            y: Field3::zeros(grid),
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64, f64) -> (f64, f64)) -> Self {
        VecField3 {
            x: Field3::from_fn(grid, |x, y, z| f(x, y, z).0),
            y: Field3::from_fn(grid, |x, y, z| f(x, y, z).1),
        }
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.x.matches(grid) && self.y.matches(grid)
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }

    pub fn axpy(&mut self, a: f64, other: &VecField3) {
        self.x.axpy(a, &other.x);
        self.y.axpy(a, &other.y);
    }

    pub fn scale(&mut self, a: f64) {
        self.x.scale(a);
        self.y.scale(a);
    }

    pub fn zip_map(&self, other: &VecField3, f: impl Fn(f64, f64) -> f64 + Copy) -> VecField3 {
        VecField3 {
            x: self.x.zip_map(&other.x, f),
            y: self.y.zip_map(&other.y, f),
        }
    }

    /// `a*self + b*other`.
    pub fn lincomb(&self, a: f64, other: &VecField3, b: f64) -> VecField3 {
        self.zip_map(other, move |u, v| a * u + b * v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 4950.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn layout_is_z_slowest() {
        let g = Grid::new(4, 6, 3).unwrap();
        let f = Field3::from_fn(&g, |x, y, z| x + 10.0 * y + 100.0 * z);
        assert_eq!(f.at(1, 2, 1), g.x(1) + 10.0 * g.y(2) + 50.0);
        assert_eq!(f.plane(2)[6 * 0 + 3], g.x(3) + 100.0);
    }

    #[test]
    fn l2_of_cosine() {
        let g = Grid::new(16, 8, 3).unwrap();
        let f = Field2::from_fn(&g, |x, _| (2.0 * std::f64::consts::PI * x).cos());
        assert!((f.l2() - 0.5f64.sqrt()).abs() < 1e-15);
    }
}
