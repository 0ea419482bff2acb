//! Flow-matching action-chunk sampling with physics-aware guidance for a
//! simulated aerial manipulator.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynamics`]: semi-kinematic quadrotor model, RK4 integration, a
//!   cascaded PD setpoint controller and a simple gripper.
//! * [`policy`]: action chunks, velocity fields (closed-form Gaussian and a
//!   small MLP), Euler sampling and conditional flow-matching training.
//! * [`guidance`]: tracking and payload potentials, payload confidence and the
//!   guided velocity field.
//! * [`rtc`]: real-time chunking: soft masks, frozen prefixes and a 10 Hz
//!   execution loop with simulated inference latency.
//! * [`synth`]: domain-randomized expert rollouts through gate scenes and
//!   conversion to training datasets.
//! * [`harness`]: staged trials, conditional-rate benchmark reports.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod guidance;
pub mod harness;
pub mod policy;
pub mod rng;
pub mod rtc;
pub mod synth;

pub use error::{Error, Result};
