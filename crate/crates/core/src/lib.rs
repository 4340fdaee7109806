//! Numerical laboratory for the parabolic Anderson model
//!     ∂_t u = Δu + u·ξ
//! on closed two-dimensional surfaces (flat torus, unit sphere).
//!
//! The crate builds, at desk scale, every ingredient of the pathwise solution
//! theory: intrinsic "polynomial" jets and their transport, Laplace–Beltrami
//! spectral kernels, scaled-test-function Hölder estimators, Wick-renormalized
//! Gaussian noise, the minimal regularity structures for the equation, a
//! Schauder-type integration operator and the Picard fixpoint — together with
//! exponent-fit verification of the inequalities each construction must
//! satisfy.

pub mod error;
pub mod geometry;
pub mod holder;
pub mod noise;
pub mod pamstruct;
pub mod polymodel;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
