//! First-order jet turbine: throttle fraction in, body-x thrust out.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbineParams {
    /// Maximum thrust [N].
    pub thrust_max: f64,
    /// Idle thrust [N].
    pub thrust_idle: f64,
    /// Spool time constant [s].
    pub tau: f64,
}

impl TurbineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("turbine.tau must be positive, got {}", self.tau)));
        }
        if !(self.thrust_idle >= 0.0 && self.thrust_max > self.thrust_idle) {
            return Err(Error::Config(format!(
                "turbine thrust limits need T_max > T_idle >= 0, got T_max = {}, T_idle = {}",
                self.thrust_max, self.thrust_idle
            )));
        }
        Ok(())
    }

    /// Steady-state thrust for a throttle fraction.
    pub fn commanded_thrust(&self, throttle: f64) -> f64 {
        self.thrust_idle + throttle.clamp(0.0, 1.0) * (self.thrust_max - self.thrust_idle)
    }

    /// Throttle fraction whose steady-state thrust is `thrust`.
    pub fn throttle_for(&self, thrust: f64) -> f64 {
        (thrust - self.thrust_idle) / (self.thrust_max - self.thrust_idle)
    }

    /// Spool-lag rate `Ṫ = (T_cmd − T)/τ`.
    pub fn thrust_rate(&self, throttle: f64, thrust: f64) -> f64 {
        (self.commanded_thrust(throttle) - thrust) / self.tau
    }

    pub fn clamp(&self, thrust: f64) -> f64 {
        thrust.clamp(self.thrust_idle, self.thrust_max)
    }
}

/// One explicit step of the spool lag, clamped to the thrust range.
pub fn turbine_step(throttle: f64, thrust: f64, params: &TurbineParams, dt: f64) -> Result<f64> {
    if !(params.tau > 0.0) {
        return Err(Error::Config(format!("turbine.tau must be positive, got {}", params.tau)));
    }
    Ok(params.clamp(thrust + dt * params.thrust_rate(throttle, thrust)))
}
