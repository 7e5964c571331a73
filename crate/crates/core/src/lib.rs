//! Hybrid-systems model of pedestrian crosswalk behavior.
//!
//! * [`hybrid`]: discrete actions, velocity guards, transition function and reset map.
//! * [`tracker`]: constant-velocity dynamics and the Kalman filter.
//! * [`gap`]: gap events, features and the gap-acceptance classifiers.
//! * [`inference`]: long-horizon rollouts and the real-time predict/update loop.
//! * [`sim`]: synthetic pedestrian/vehicle scenario generator.
//! * [`metrics`]: trajectory, classification and distribution metrics.
//! * [`harness`]: experiment configuration, file formats and the commands behind the CLI.
//!
//! The automaton, filter and trajectory metrics are generic over [`Real`]
//! (`f32`/`f64`); the aliases below fix the scalar type.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod gap;
pub mod harness;
pub mod hybrid;
pub mod inference;
pub mod linalg;
pub mod metrics;
pub mod scalar;
pub mod sim;
pub mod tracker;

pub use error::{Error, Result};
pub use hybrid::{ActionState, GapKey};
pub use scalar::Real;

pub type Kinematics64 = hybrid::Kinematics<f64>;
pub type Kinematics32 = hybrid::Kinematics<f32>;
pub type HybridState64 = hybrid::HybridState<f64>;
pub type HybridState32 = hybrid::HybridState<f32>;
pub type GeometryConfig64 = hybrid::GeometryConfig<f64>;
pub type GeometryConfig32 = hybrid::GeometryConfig<f32>;
pub type AcceptedGap64 = hybrid::AcceptedGap<f64>;
pub type Mat4f64 = linalg::Mat4<f64>;
pub type Mat4f32 = linalg::Mat4<f32>;
pub type NoiseConfig64 = tracker::NoiseConfig<f64>;
pub type NoiseConfig32 = tracker::NoiseConfig<f32>;
pub type Measurement64 = tracker::Measurement<f64>;
pub type Measurement32 = tracker::Measurement<f32>;
pub type TrajPoint64 = metrics::TrajPoint<f64>;
pub type TrajectoryPair64 = metrics::TrajectoryPair<f64>;
