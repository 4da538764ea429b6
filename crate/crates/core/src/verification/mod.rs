//! Manufactured solutions, brute-force oracles and convergence measurement.

pub mod convergence;
pub mod mms;
pub mod oracle;
pub mod symbolic;

pub use convergence::{convergence_order, ConvergenceReport};
pub use mms::{mms_forcing, MmsForcing, MmsSpec, Study};
pub use symbolic::{Expr, Factor, Trig};
