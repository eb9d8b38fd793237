//! Certification and synthesis toolkit for finite-time stability of
//! continuous, non-Lipschitz dynamical systems.
//!
//! The pipeline: parse a vector field with rational-power primitives
//! ([`system`]), recast it into constrained polynomial form ([`recast`]),
//! compile sum-of-squares feasibility programs into semidefinite programs
//! ([`sos`]), solve them with a built-in primal-dual interior-point solver
//! ([`sdp`]), and emit independently validated Lyapunov certificates
//! ([`certify`]), region-of-reaching estimates ([`region`]), and
//! finite-time feedback controllers ([`synth`]). A fixed-step integrator
//! for non-smooth right-hand sides lives in [`sim`].

pub mod poly;
pub mod recast;
pub mod sdp;
pub mod sos;
pub mod certify;
pub mod sim;
pub mod system;

pub use poly::{monomial_basis, match_coefficients, Monomial, ParamPoly, Polynomial};
