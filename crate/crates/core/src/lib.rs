//! Constructive toolkit for quasi-periodic solutions of the cubic wave
//! equation `u_tt − u_xx + m u + 4u³ = 0` on the circle.
//!
//! * [`spectrum`]: frequencies `√(s² + m)`, admissible tangential sets,
//!   mass-derivative determinants and sublevel-set measures.
//! * [`smalldiv`]: small divisors, resonance patterns and lower-bound scans.
//! * [`polyham`]: sparse polynomial Hamiltonians and their Poisson algebra.
//! * [`birkhoff`]: the order-four normal form and its rescaled frequencies.
//! * [`kamcheck`]: finite-resolution checks of the separation,
//!   transversality and second Melnikov conditions.
//! * [`simulate`]: Galerkin spectral integration and torus diagnostics.
//! * [`cli`]: the `kamwave` command line.

pub mod birkhoff;
pub mod cli;
pub mod error;
pub mod interval;
pub mod kamcheck;
pub mod polyham;
pub mod simulate;
pub mod smalldiv;
pub mod spectrum;

pub use error::{Error, Result};
