//! Pseudo-spectral incompressible Navier-Stokes on the periodic box, with
//! Lorentz-space and level-set diagnostics for enstrophy growth bounds.

// `!(x >= 0.0)` also rejects NaN; index loops read better on 3x3 tensors.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod criteria;
pub mod eigen;
pub mod error;
pub mod fft;
pub mod fields;
pub mod grid;
pub mod lorentz;
pub mod snapshot;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use fft::Fft3;
pub use fields::{FieldKind, NormKind};
pub use grid::{Grid, ScalarField};
pub use spectral::{SpectralVectorField, StrainField};
pub use config::SolverConfig;
pub use solver::{NavierStokes, Sample, SimState, TrajectoryLog};
pub use criteria::{Certificate, CutoffRule, Diagnostics, Variant};
