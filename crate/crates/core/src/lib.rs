//! Finite-element toolkit for recovering a piecewise-constant absorption
//! coefficient and the interface that separates its two values from a single
//! boundary measurement of the steady diffusion equation
//!
//! ```text
//! -div(α ∇u) + μ u = f  in Ω,      α ∂ₙu + u/ζ = 0  on ∂Ω.
//! ```
//!
//! Ω is a disk, the inclusion ω is tracked by an interface-fitted triangular
//! mesh, μ_in is updated with an adjoint gradient and the interface is moved
//! along an H¹ (Sobolev) representative of the shape gradient.

pub mod error;
pub mod fem;
pub mod geometry;
pub mod gradients;
pub mod io;
pub mod mesh;
pub mod optimizer;
pub mod oracle;
pub mod problems;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{ParametricCurve, Polyline, Vec2};
pub use mesh::{Mesh, Region};
