//! Dyadic B-spline quasi-interpolation and Whitney-type extension for
//! functions of mixed smoothness on the unit cube.
//!
//! The library is organized bottom-up:
//!
//! * [`index`]: multi-index arithmetic, integer index boxes, binary masks
//!   and dyadic cell geometry,
//! * [`splines`]: cardinal B-spline generators, refinement masks and the
//!   shifted tensor generators `g_{κ,ν}`,
//! * [`quad`]: Gauss–Legendre rules and tensor quadrature on boxes,
//! * [`polyproj`]: orthonormal polynomial bases, local L² projectors and
//!   tensor lifting of one-dimensional operators,
//! * [`quasiinterp`]: clamped local projectors, dyadic quasi-interpolants
//!   `E_κ` and their telescoped level details,
//! * [`extension`]: whole-space masked projectors, piecewise-polynomial
//!   classes with boundary constraints, and the truncated extension operator,
//! * [`analysis`]: mixed differences, moduli of continuity and
//!   Besov/Nikolskii mixed-smoothness norms.

pub mod analysis;
pub mod extension;
pub mod index;
pub mod oracle;
pub mod polyproj;
pub mod quad;
pub mod quasiinterp;
pub mod splines;

mod ratpoly;

pub use index::{dyadic_cell, indicator_vector, min_coord, BinaryMask, IndexBox, MultiIndex, Rect};
pub use oracle::{FnOracle, Oracle, SmoothnessHint};
