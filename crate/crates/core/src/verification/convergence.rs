//! Observed order of accuracy from a refinement family.

use crate::error::{Error, Result};

/// Errors at or below this level count as exact.
pub const EXACT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// log(e_i / e_{i+1}) / log(h_i / h_{i+1}) for each consecutive pair.
    pub orders: Vec<f64>,
    /// Order of the finest pair; infinite when exact.
    pub observed: f64,
    pub exact: bool,
    /// False when some refinement did not reduce the error.
    pub monotone: bool,
}

pub fn convergence_order(hs: &[f64], errors: &[f64]) -> Result<ConvergenceReport> {
    if hs.len() != errors.len() {
        return Err(Error::ShapeMismatch {
            expected: hs.len(),
            got: errors.len(),
        });
    }
    if hs.len() < 3 {
        return Err(Error::InvalidParams(format!(
            "convergence study needs at least 3 resolutions, got {}",
            hs.len()
        )));
    }
    if hs.iter().any(|h| !(*h > 0.0)) || errors.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidParams("step sizes must be positive and errors finite".into()));
    }
    if errors.iter().all(|&e| e <= EXACT_TOL) {
        return Ok(ConvergenceReport {
            orders: vec![f64::INFINITY; hs.len() - 1],
            observed: f64::INFINITY,
            exact: true,
            monotone: true,
        });
    }
    let orders: Vec<f64> = (0..hs.len() - 1)
        .map(|i| (errors[i] / errors[i + 1]).ln() / (hs[i] / hs[i + 1]).ln())
        .collect();
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    Ok(ConvergenceReport {
        observed: *orders.last().unwrap(),
        orders,
        exact: false,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_order_sequence() {
        let r = convergence_order(&[0.1, 0.05, 0.025], &[4e-3, 1e-3, 2.5e-4]).unwrap();
        assert!((r.observed - 2.0).abs() < 1e-12);
        assert!(r.monotone && !r.exact);
    }

    #[test]
    fn exact_when_all_errors_vanish() {
        let r = convergence_order(&[1.0, 0.5, 0.25], &[0.0, 1e-16, 0.0]).unwrap();
        assert!(r.exact);
        assert!(r.observed.is_infinite());
    }

    #[test]
    fn flags_non_monotone() {
        let r = convergence_order(&[1.0, 0.5, 0.25], &[1e-2, 2e-2, 1e-3]).unwrap();
        assert!(!r.monotone);
    }

    #[test]
    fn needs_three_levels() {
        assert!(convergence_order(&[1.0, 0.5], &[1.0, 0.25]).is_err());
        assert!(convergence_order(&[1.0, 0.5, 0.25], &[1.0, 0.25]).is_err());
    }
}
