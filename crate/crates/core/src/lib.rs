//! Numerical laboratory for stable ODE blowup of radial focusing semilinear
//! wave equations `u_tt - Delta u = |u|^{p-1} u` in odd dimensions `d >= 5`.
//!
//! The solution `u_T(t) = c_p (T - t)^{-2/(p-1)}` becomes a static state in
//! similarity coordinates `(tau, rho) = (-log(T - t) + log T, r / (T - t))`.
//! The crate discretizes the linearized similarity generator on the backward
//! lightcone `rho in [0, 1]` with Chebyshev collocation, checks the reduction
//! calculus and norm equivalences it rests on, computes its spectrum both from
//! the matrix and from hypergeometric connection coefficients, and evolves
//! the nonlinear flow while shooting on the blowup time `T` to cancel the one
//! unstable mode.

pub mod corpus;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod linop;
pub mod model;
pub mod reduction;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};
pub use grid::{build_grid, chebyshev_nodes, ingest_profile, interpolate, Grid, SampledProfile};
pub use model::{make_params, symmetry_mode, ModelParams, StatePair};
