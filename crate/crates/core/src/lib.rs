//! Curvature algebra, pinching certification and discrete mean curvature flow for
//! surfaces of codimension two in R⁴.

pub mod certifier;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod gradient;
pub mod pointwise;
pub mod sampling;

pub use error::{Error, Result};
pub use gradient::GradientState;
pub use pointwise::{CurvatureScalars, ShapeTensor, SpecialFrameState};
