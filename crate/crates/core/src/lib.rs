//! Numerical core for studying how mini-batch noise lowers the sharpness at
//! which SGD settles on the edge of stability.
//!
//! * [`vecmath`]: vectors, seeded randomness, Lanczos.
//! * [`landscape`]: loss landscapes with gradients, Hessian-vector products and
//!   third-derivative forms.
//! * [`refpath`]: the projected reference trajectory on the stable set.
//! * [`predicted`]: reduced and full predicted displacement dynamics.
//! * [`probe`]: landscape measurements and statistics.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod error;
pub mod landscape;
pub mod predicted;
pub mod probe;
pub mod refpath;
pub mod scalar;
pub mod vecmath;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ParamVector = vecmath::Vector<f64>;
pub type ParamVectorF32 = vecmath::Vector<f32>;
pub type EigenPairF64 = vecmath::EigenPair<f64>;
pub type LandscapeReportF64 = probe::LandscapeReport<f64>;
pub type ReducedStateF64 = predicted::ReducedState<f64>;
pub type ReducedCoeffsF64 = predicted::ReducedCoeffs<f64>;
pub type PowerLawFitF64 = probe::PowerLawFit<f64>;
pub type CouplingRecordF64 = probe::CouplingRecord<f64>;
pub type CanonicalCubicF64 = landscape::CanonicalCubic<f64>;
pub type TeacherStudentMlpF64 = landscape::TeacherStudentMlp<f64>;
