//! Compressible primitive equations on the periodic channel.
//!
//! Two reformulated viscous systems are integrated by Picard iteration: the
//! gravity-stratified case with γ = 2, whose prognostic scalar is the surface
//! variable ξ = ρ − gz/2, and the gravity-free case with vacuum, whose
//! prognostic scalar is σ = ρ^{1/2}. A third regime covers the inviscid free
//! boundary in the coordinate η = 1 − z/Z.

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod free_boundary;
pub mod grid;
pub mod hydrostatics;
pub mod io;
pub mod ops;
pub mod params;
pub mod state;
pub mod stepper;
pub mod verification;

pub use error::{Error, Result};
pub use free_boundary::FbState;
pub use field::{Field2, Field3, VecField3};
pub use grid::Grid;
pub use params::{Regime, SimParams};
pub use state::{
    check_compatibility, make_state, CompatibilityReport, Context, DerivedFields, DiagnosticsRecord,
    PrimState,
};
pub use stepper::{picard_advance, run, PicardReport};
