//! Horizontal spectral and vertical finite-difference operators.

pub mod spectral;
pub mod vertical;

pub use spectral::{div_h, grad_h, laplace_h, SpectralPlan};
pub use vertical::{d_z, d_zz, vavg, vfluct, vint, DzMode};
