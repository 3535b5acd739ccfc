//! Monte Carlo simulation of the one-dimensional stochastic wave equation
//!
//! ```text
//!     ∂²u/∂t² − ∂²u/∂x² = F(u) ξ,     (u, ∂ₜu)|ₜ₌₀ = (u₀, u₁)
//! ```
//!
//! driven by multiplicative space-time white noise `ξ`. In the null
//! coordinates `x₁ = (x − t)/√2`, `x₂ = (x + t)/√2` the wave operator factors
//! as `−2 ∂₁∂₂`, and the solution `v` satisfies
//!
//! ```text
//!     v(x) = V₀(x) + ½ ∫∫_{x₁ ≤ y₁ ≤ y₂ ≤ x₂} F(v(y)) ξ̃(dy₁, dy₂).
//! ```
//!
//! The crate realizes `ξ̃` as i.i.d. Gaussian cell increments on a square
//! lattice ([`noise`]), solves the integral equation exactly on that lattice
//! with a light-cone marching scheme ([`solver`]), and measures the local
//! linearization rates of the solution by Monte Carlo ([`stats`]). The
//! [`cli`] module drives configurable experiments and writes CSV/JSON reports.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod noise;
pub mod solver;
pub mod stats;

pub use error::{ConfigErrors, ConfigIssue, Error, Result};
