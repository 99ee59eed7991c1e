//! Damage-tolerant fixed-wing flight control: rigid-body and aerodynamic
//! models, an adaptive sliding-mode attitude controller, the surrounding
//! autopilot, and a closed-loop simulator with stability monitors.

// Negated comparisons are used on purpose: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aero;
pub mod autopilot;
pub mod error;
pub mod flightdyn;
pub mod propulsion;
pub mod rasmc;
pub mod scenario;
pub mod sim;
pub mod smc;
pub mod telemetry;
pub mod verify;

#[cfg(test)]
mod testutil;

pub use error::{Error, ErrorClass, Result};
