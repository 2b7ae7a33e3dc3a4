//! Explicit solution of the radial (l = 0) Lippmann-Schwinger equation for the
//! spherical shell potential `V(r) = V0` on `a < r < b`.
//!
//! The crate is layered bottom-up:
//!
//! * [`units`]: configuration, branch of the square root, wave numbers;
//! * [`coeffs`]: matching coefficients, Jost functions, S-matrix;
//! * [`eigenfuncs`]: closed-form piecewise solutions and an ODE cross-check;
//! * [`green`]: resolvent kernel, theta matrices, spectral density;
//! * [`testspace`]: smooth compactly supported test functions;
//! * [`transforms`]: the energy-representation transforms `U+`, `U-`, `U0`;
//! * [`scattering`]: Moller operators, the S operator, the sandwiched LS equation;
//! * [`evolution`]: time evolution in the energy representation;
//! * [`verify`]: a self-check suite with a serializable report.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coeffs;
pub mod eigenfuncs;
pub mod error;
pub mod evolution;
pub mod green;
pub mod quadrature;
pub mod radial;
pub mod scattering;
pub mod testspace;
pub mod transforms;
pub mod units;
pub mod verify;

pub use coeffs::{compute_coefficients, phase_shift, phase_shift_grid, s_matrix, CoefficientSet, Sign};
pub use eigenfuncs::{PiecewiseWave, WaveKind};
pub use error::{Error, Result};
pub use units::{branch_sqrt, csv_row, format_shortest, kappa, wave_number, ComplexEnergy, PotentialConfig, C64};
