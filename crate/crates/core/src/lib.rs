//! Reduced model problems and verification tools for added-mass partitioned
//! (AMP) schemes coupling rigid bodies to incompressible flow.
//!
//! The numerical kernels are generic over [`Real`]; the `f64` aliases below
//! are what the command-line front end and the acceptance suite use.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod collision;
pub mod damping_tensors;
pub mod error;
pub mod model_ad;
pub mod model_am;
pub mod piston;
pub mod quadrature;
pub mod scalar;
pub mod specfun;
pub mod stability;
mod util;

pub use error::{Error, Result};
pub use scalar::Real;

pub use num_complex::Complex;

/// Complex double-precision scalar.
pub type Complex64 = Complex<f64>;
pub type ShellGeometry = specfun::ShellGeometry<f64>;
pub type PhiProfile = specfun::PhiProfile<f64>;
pub type AmProblem = model_am::AmProblem<f64>;
pub type RadialGrid = model_ad::RadialGrid<f64>;
pub type AdParams = model_ad::AdParams<f64>;
pub type AdState = model_ad::AdState<f64>;
pub type AdStepper = model_ad::AdStepper<f64>;
pub type StabilityParams = stability::StabilityParams<f64>;
pub type RootOptions = stability::RootOptions<f64>;
pub type StabilityVerdict = stability::StabilityVerdict<f64>;
pub type StabilityMap = stability::StabilityMap<f64>;
pub type SurfaceMesh = damping_tensors::SurfaceMesh<f64>;
pub type Tensor6 = damping_tensors::Tensor6<f64>;
pub type RepulsionParams = collision::RepulsionParams<f64>;
pub type AngularParams = collision::AngularParams<f64>;
pub type MprfSystem = collision::MprfSystem<f64>;
pub type PistonParams = piston::PistonParams<f64>;
pub type PistonStepper = piston::PistonStepper<f64>;
