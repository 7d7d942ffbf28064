//! Numerical laboratory for the heat equation with density
//!
//! ```text
//!     ρ(r) ∂ₜu = Δu
//! ```
//!
//! on rotationally symmetric model manifolds M_f^N with metric
//! g = dr² + f²(r)dθ². The crate provides:
//!
//! - shared numerical kernels (adaptive quadrature, improper-integral
//!   divergence probing, monotone inversion, tridiagonal solves),
//! - model-manifold geometry (radial Laplacian, volume, curvature,
//!   Laplacian-comparison checks),
//! - the conformal change g̃ = ρg with the distance reparametrization
//!   r̃ ↔ r and completeness checks,
//! - integral uniqueness criteria and the comparison-weight φ
//!   construction,
//! - explicit supersolutions of Δh = −ρ witnessing non-uniqueness,
//! - an implicit ball solver and the exhaustion experiment that
//!   reproduces the uniqueness/non-uniqueness dichotomy at desk scale.

pub mod config;
pub mod conformal;
pub mod criteria;
pub mod geometry;
pub mod numerics;
pub mod solver;
pub mod witness;
