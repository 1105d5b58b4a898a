//! Solvers and oracles for Dirichlet problems
//!
//! ```text
//! F(D²u) + H(x, Du) + p(x) u^{−γ} = 0 in Ω,   u = 0 on ∂Ω,
//! ```
//!
//! where `F` is a degenerate elliptic operator squeezed between the truncated
//! Laplacians `𝒫⁻ₖ ≤ F ≤ 𝒫⁺ₖ`, `H = ±b|Du|`, and `Ω` is an intersection of
//! congruent balls.

pub mod barriers;
pub mod experiment;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod matrix;
pub mod operators;
pub mod problem;
pub mod profile;
pub mod quadrature;
pub mod radial_ode;
pub mod scheme;
pub mod solver;

pub use geometry::{BallDomain, DistanceBundle, DistanceConstants};
pub use matrix::SymMatrix;
pub use operators::OperatorSpec;
pub use problem::ProblemSpec;
pub use profile::RadialProfile;

/// Version tag embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
