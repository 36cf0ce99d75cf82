//! Composable two-component continuous-time Bayesian networks.
//!
//! The crate builds joint generators from conditional generators, simulates
//! and projects trajectories, estimates generators by maximum likelihood, and
//! measures directional causality between the two components with a
//! Kullback–Leibler causality measure and its Bernoulli calibration. The
//! [`tickdata`] module turns price quotes into an uptick/downtick network.
//!
//! Numeric code is generic over [`Scalar`] (`f32`, `f64`, [`TwoFloat`]); the
//! aliases below fix it to `f64`, which is what most callers want.

pub mod causality;
pub mod compose;
pub mod error;
pub mod estimate;
pub mod generators;
pub mod linalg;
pub mod scalar;
pub mod simulate;
pub mod tickdata;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use twofloat::TwoFloat;

pub use causality::{kl_calibration, CausalityReport, Direction};
pub use compose::{composite_index, split_index, CompositeIndex, ModelDocument, StateGrid};
pub use generators::GeneratorDocument;
pub use simulate::{SimConfig, Trajectory};

pub type Matrix = linalg::Matrix<f64>;
pub type Generator = generators::Generator<f64>;
pub type ProbabilityVector = generators::ProbabilityVector<f64>;
pub type OccupationVector = generators::OccupationVector<f64>;
pub type InitialLaw = generators::InitialLaw<f64>;
pub type ConditionalFamily = compose::ConditionalFamily<f64>;
pub type CtbnModel = compose::CtbnModel<f64>;
pub type ModulatedParams = compose::ModulatedParams<f64>;

pub type Generator32 = generators::Generator<f32>;
pub type CtbnModel32 = compose::CtbnModel<f32>;
pub type GeneratorDd = generators::Generator<TwoFloat>;
pub type CtbnModelDd = compose::CtbnModel<TwoFloat>;
