use crate::error::{Error, Result};

/// Periodic horizontal collocation on [0,1)² times uniform vertical levels on [0,1].
///
/// Vertical integrals use the trapezoid rule with the weights stored here, so
/// averages, fluctuations and cumulative integrals are mutually consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub hz: f64,
    pub z_levels: Vec<f64>,
    pub quad_weights: Vec<f64>,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx < 4 || ny < 4 || nx % 2 != 0 || ny % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "horizontal sizes must be even and >= 4, got {nx}x{ny}"
            )));
        }
        if nz < 3 {
            return Err(Error::InvalidGrid(format!("need nz >= 3, got {nz}")));
        }
        let hz = 1.0 / (nz - 1) as f64;
        let z_levels = (0..nz)
            .map(|k| if k == nz - 1 { 1.0 } else { k as f64 * hz })
            .collect();
        let quad_weights = (0..nz)
            .map(|k| if k == 0 || k == nz - 1 { 0.5 * hz } else { hz })
            .collect();
        Ok(Grid {
            nx,
            ny,
            nz,
            hz,
            z_levels,
            quad_weights,
        })
    }

    /// Points in one horizontal plane.
    pub fn plane_len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn len3(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn hx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        1.0 / self.ny as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.nx as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 / self.ny as f64
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.nz == other.nz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for nz in [3, 4, 9, 17, 33, 100] {
            let g = Grid::new(4, 4, nz).unwrap();
            let s: f64 = g.quad_weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "nz={nz}: {s}");
            assert_eq!(g.z_levels[0], 0.0);
            assert_eq!(g.z_levels[nz - 1], 1.0);
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(5, 4, 3).is_err());
        assert!(Grid::new(2, 4, 3).is_err());
        assert!(Grid::new(4, 4, 2).is_err());
    }
}
