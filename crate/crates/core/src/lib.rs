//! Stochastic hybrid-stress quadrilateral finite elements for plane elasticity
//! with a random Young's modulus and random loads.
//!
//! The library discretizes the mixed (Hellinger–Reissner) formulation of plane
//! elasticity on quadrilateral meshes with the 5-parameter Pian–Sumihara stress
//! mode and bilinear displacements, and couples it with tensor-product
//! polynomial spaces on the stochastic parameter box Γ:
//!
//! * `k`-version — piecewise polynomials on a partition of Γ,
//! * `p`-version — global polynomials on Γ,
//! * Hermite chaos over a Gaussian germ (for comparison runs).
//!
//! Random inputs are described either by explicit functions of a few random
//! variables or by truncated Karhunen–Loève expansions whose eigenpairs are
//! computed with a Nyström discretization of the covariance operator.
//!
//! The stress unknowns are discontinuous across elements, so they are
//! eliminated element-wise (static condensation), leaving a symmetric positive
//! definite displacement system that is factorized with a skyline LDLᵀ solver.
//! The `analysis` module provides relative error norms in the stochastic
//! Sobolev metrics, a collocation (per-sample) reference solver, and numerical
//! kernel-coercivity / inf-sup diagnostics for the mixed discretization.
//!
//! Everything in this crate is deterministic: randomness only enters through
//! probability densities, which are resolved by quadrature.
//!
//! The crate is `no_std`-compatible (it requires `alloc`); disable default
//! features to build without the Rust standard library.

#![no_std]
#![allow(clippy::needless_range_loop)]
// negated comparisons like `!(x > 0.0)` are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::type_complexity)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod analysis;
pub mod error;
pub mod fem;
pub mod kl;
pub mod material;
pub mod mesh;
pub(crate) mod num;
pub mod quadrature;
pub mod stochastic;

pub use error::{Error, Result};
