//! Deterministic simulator for voice-assistant mediated multi-robot control.
//!
//! A pub/sub broker and device-shadow store connect a skill-based assistant
//! to a fleet of delivery robots on a grid. Robots talk back to the assistant
//! over a simulated voice link. A discrete-event scheduler drives scripted or
//! live operators through the delivery tasks and records an event log from
//! which interaction metrics are computed.

pub mod assistant;
pub mod broker;
pub mod metrics;
pub mod robots;
pub mod scenario;
pub mod shadow;
pub mod value;
pub mod voice_link;

pub use value::{Scalar, StateMap};
