//! Discrete-time attitude observer on SO(3) with gyro-bias estimation.
//!
//! The observer lives in the ambient space ℝ³ˣ³ × ℝ³. A manifold-attraction
//! term keeps plain Euclidean steps close to the rotation group, and a
//! predictor–corrector split lets it run on sparse measurements.
//!
//! * [`so3`]: hat/vee, exponentials, projection.
//! * [`feedback_integrator`]: generic modified fields `X − ∇V` and steppers.
//! * [`observers`]: continuous and discrete observers, error-system analysis.
//! * [`truth`]: ground truth, synthetic measurements, replay files.
//! * [`controllers`]: stabilisation and path tracking.
//! * [`harness`]: scenarios, metrics and CSV/JSON output.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controllers;
pub mod error;
pub mod exec;
pub mod feedback_integrator;
pub mod harness;
pub mod observers;
pub mod so3;
pub mod truth;

pub use error::{Error, Result};
pub use exec::ExecMode;
