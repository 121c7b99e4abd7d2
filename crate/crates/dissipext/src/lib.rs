//! Computation and classification of the proper dissipative extensions of a
//! dual pair of ordinary differential operators on the unit interval.
//!
//! The library models the complement space of a dual pair by a small closed
//! dictionary of symbolic functions, assembles the boundary quadratic form
//! `q(v) = Im<v, A~* v> - ||V_K^{1/2} v||^2` together with the L2 Gram matrix
//! on that space, splits the resulting Hermitian pencil into positive, null
//! and negative spectral subspaces, and parametrizes every dissipative
//! extension by a subspace of the non-negative part plus a contraction into
//! the negative part. Lower bounds on the imaginary part of the numerical
//! range (Robin ground eigenvalues, essential infima of the potential) come
//! with independent finite-difference oracles.
//!
//! The built-in [`catalog`] contains six ready-made problems covering first
//! and second order operators with singular dissipative potentials; `verify`
//! runs every recorded expected value against the computation.

pub mod catalog;
pub mod cli;
pub mod dualpair;
pub mod extensions;
pub mod funcspace;
pub mod krein;
pub mod numrange;
pub mod quadrature;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;

/// Shorthand for a complex number.
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
