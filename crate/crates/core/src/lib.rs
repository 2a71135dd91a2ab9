//! Spectral Galerkin solver and verification harness for strictly parabolic
//! equations
//!
//!   ∂t u + Div f_x(u) = Div(Div A_x(u))  (+ ε Δu, + Φ(x,u) dW_t)
//!
//! on compact Riemannian manifolds with analytically known Laplace–Beltrami
//! eigenbases (flat 1-/2-tori and the round unit sphere).
//!
//! The crate is organized along the pipeline:
//!
//! * [`geometry`] — built-in manifolds, quadrature grids, eigenbases with
//!   tabulated gradients and covariant Hessians.
//! * [`spectral`] — coefficient-space utilities: projection, synthesis,
//!   the Λˢ = (I−Δ)^{s/2} scale of Sobolev norms.
//! * [`fields`] — coefficient models (flux / diffusion / noise), chart
//!   divergence operators, structural checks and the truncation construction.
//! * [`galerkin`] — assembly of the Galerkin ODE right-hand sides and the
//!   weak-form / entropy / energy monitors.
//! * [`integrate`] — deterministic time stepping (RK4 and a stiff-exact
//!   IMEX scheme for linear diffusion) with monitor emission.
//! * [`stochastic`] — Euler–Maruyama paths, counter-based Wiener increments,
//!   streaming Monte Carlo ensembles and the statistical checks.
//! * [`verify`] — the identity suite (integration by parts, trace identity,
//!   Laplace reduction) run on randomized smooth fields.

// Tensor kernels co-index several tables per node; explicit index loops
// are clearer than zipped iterators there.
#![allow(clippy::needless_range_loop)]

pub mod fields;
pub mod galerkin;
pub mod geometry;
pub mod integrate;
pub mod mat;
pub mod numeric;
pub mod spectral;
pub mod stochastic;
pub mod verify;

pub use geometry::{build_basis, build_grid, EigenBasis, ManifoldKind, ManifoldSpec, QuadratureGrid};
pub use spectral::SpectralVector;
