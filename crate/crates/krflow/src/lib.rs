//! Numerical laboratory for U(n)-invariant Kahler geometry on CP^n and its
//! cyclic quotients.
//!
//! The crate reduces rotation-invariant Kahler metrics in the anticanonical
//! class to a single radial profile on a compactified coordinate grid, and
//! provides curvature, spectral, and energy-functional evaluation on top of
//! that reduction, together with a normalized Kahler-Ricci flow integrator
//! and a small batch-run driver.
//!
//! Module map:
//! - [`grid`]: uniform grid, finite differences, quadrature.
//! - [`geometry`]: radial profiles, curvature, volume, diameter, spectrum.
//! - [`oracle`]: independent pointwise tensor evaluation in affine coordinates.
//! - [`functionals`]: energy functionals, holomorphic invariants, gap bounds.
//! - [`flow`]: normalized Kahler-Ricci flow and the E_1 gradient flow.
//! - [`config`], [`output`], [`run`]: batch-run configuration and artifacts.

pub mod config;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod grid;
pub mod oracle;
pub mod output;
pub mod run;

pub use error::{CliError, FlowError, FunctionalError, GeometryError, OracleError};
