//! Adaptive switching gains on top of the sliding-mode attitude law.
//!
//! Each gain grows at a rate proportional to `|s_i|` while the sliding
//! variable sits outside its boundary layer, and stops at the cap `k_d`
//! obtained from the gain-bound system.

use nalgebra::Vector3;

use crate::aero::NominalMoments;
use crate::error::{Error, Result};
use crate::flightdyn::{euler_rate_matrix, AirframeParams, BodyState};
use crate::smc::{attitude_control_with, sliding_variable, AttitudeReference, SlidingState, SmcConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveGains {
    pub k: Vector3<f64>,
    pub k_d: Vector3<f64>,
    pub gamma: Vector3<f64>,
    pub k0: Vector3<f64>,
}

impl AdaptiveGains {
    /// Starts at `k0`, clipped to the cap when the cap is lower.
    pub fn new(k0: Vector3<f64>, k_d: Vector3<f64>, gamma: Vector3<f64>) -> Result<Self> {
        if gamma.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::Config(format!("rasmc.gamma entries must be positive, got {gamma:?}")));
        }
        if k0.iter().any(|k| !(*k >= 0.0)) {
            return Err(Error::Config(format!("rasmc.k0 entries must be nonnegative, got {k0:?}")));
        }
        Ok(Self { k: k0.inf(&k_d), k_d, gamma, k0 })
    }
}

/// One explicit-Euler step of the boundary-layer adaptation law.
pub fn adapt_gains(
    gains: &AdaptiveGains,
    s: &Vector3<f64>,
    sigma: &Vector3<f64>,
    b_diag: &Vector3<f64>,
    dt: f64,
) -> Result<AdaptiveGains> {
    if gains.gamma.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::Config("rasmc.gamma entries must be positive".into()));
    }
    let mut next = *gains;
    for i in 0..3 {
        if gains.k[i] < gains.k_d[i] && s[i].abs() > sigma[i] {
            let rate = (1.0 - b_diag[i]) * s[i].abs() / gains.gamma[i];
            next.k[i] = (gains.k[i] + dt * rate).min(gains.k_d[i]);
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasmcOutput {
    pub deflection: Vector3<f64>,
    pub gains: AdaptiveGains,
    pub sliding: SlidingState,
    pub pi: Vector3<f64>,
    pub mu: Vector3<f64>,
}

/// Sliding variable, then gain update, then the control law with the new gains.
#[allow(clippy::too_many_arguments)]
pub fn rasmc_step(
    state: &BodyState,
    reference: &AttitudeReference,
    gains: &AdaptiveGains,
    cfg: &SmcConfig,
    nominal: &NominalMoments,
    params: &AirframeParams,
    dt: f64,
    theta_margin: f64,
) -> Result<RasmcOutput> {
    let psi_mat = euler_rate_matrix(&state.attitude, theta_margin)?;
    let sliding = sliding_variable(&state.attitude, &(psi_mat * state.rates), reference, &cfg.lambda);
    let updated = adapt_gains(gains, &sliding.s, &cfg.sigma, &cfg.bounds.diagonal(), dt)?;
    let out = attitude_control_with(state, reference, &sliding, &updated.k, cfg, nominal, params, theta_margin)?;
    Ok(RasmcOutput { deflection: out.deflection, gains: updated, sliding, pi: out.pi, mu: out.mu })
}

/// V₁ = ½sᵀs.
pub fn lyapunov_v1(s: &Vector3<f64>) -> f64 {
    0.5 * s.norm_squared()
}

/// V₂ = V₁ + Σ½γᵢ(kᵢ − k_d,ᵢ)².
pub fn lyapunov_v2(s: &Vector3<f64>, gains: &AdaptiveGains) -> f64 {
    let gain_error = gains.k - gains.k_d;
    lyapunov_v1(s) + 0.5 * gains.gamma.component_mul(&gain_error.component_mul(&gain_error)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gains(k: f64, k_d: f64, gamma: f64) -> AdaptiveGains {
        AdaptiveGains::new(Vector3::repeat(k), Vector3::repeat(k_d), Vector3::repeat(gamma)).unwrap()
    }

    #[test]
    fn frozen_inside_layer() {
        let g = gains(1.0, 5.0, 2.0);
        let next =
            adapt_gains(&g, &Vector3::new(0.1, -0.1, 0.0), &Vector3::repeat(0.1), &Vector3::zeros(), 0.02).unwrap();
        assert_eq!(next, g);
    }

    #[test]
    fn frozen_at_cap() {
        let g = gains(5.0, 5.0, 2.0);
        let next = adapt_gains(&g, &Vector3::repeat(100.0), &Vector3::repeat(0.1), &Vector3::zeros(), 0.02).unwrap();
        assert_eq!(next.k, g.k);
    }

    #[test]
    fn single_step_arithmetic() {
        let g = gains(0.5, 5.0, 2.0);
        let next = adapt_gains(&g, &Vector3::repeat(0.5), &Vector3::repeat(0.1), &Vector3::repeat(0.2), 0.02).unwrap();
        assert_relative_eq!(next.k, Vector3::repeat(0.504), epsilon = 1e-15);
    }

    #[test]
    fn rejects_nonpositive_rate() {
        assert!(AdaptiveGains::new(Vector3::repeat(1.0), Vector3::repeat(2.0), Vector3::new(1.0, 0.0, 1.0)).is_err());
        let mut g = gains(1.0, 2.0, 1.0);
        g.gamma.x = -1.0;
        assert!(adapt_gains(&g, &Vector3::zeros(), &Vector3::repeat(0.1), &Vector3::zeros(), 0.02).is_err());
    }

    #[test]
    fn ramp_reaches_cap_in_closed_form_time() {
        let (k0, k_d, gamma, b, s, dt) = (1.0, 4.0, 0.5, 0.25, 0.3, 0.02);
        let mut g = gains(k0, k_d, gamma);
        let mut steps = 0;
        while g.k.x < k_d {
            g = adapt_gains(&g, &Vector3::repeat(s), &Vector3::repeat(0.05), &Vector3::repeat(b), dt).unwrap();
            steps += 1;
        }
        let ramp_time = gamma * (k_d - k0) / ((1.0 - b) * s);
        assert!((steps as f64 * dt - ramp_time).abs() <= dt);
        assert_eq!(g.k, Vector3::repeat(k_d));
        let held = adapt_gains(&g, &Vector3::repeat(s), &Vector3::repeat(0.05), &Vector3::repeat(b), dt).unwrap();
        assert_eq!(held.k, g.k);
    }

    #[test]
    fn zero_diagonal_bound_reduces_to_plain_law() {
        let g = gains(1.0, 10.0, 4.0);
        let s = Vector3::new(0.8, -0.4, 0.2);
        let next = adapt_gains(&g, &s, &Vector3::repeat(0.1), &Vector3::zeros(), 0.02).unwrap();
        assert_relative_eq!(next.k, g.k + s.abs() / 4.0 * 0.02, epsilon = 1e-15);
    }

    #[test]
    fn lyapunov_examples() {
        assert_eq!(lyapunov_v1(&Vector3::new(1.0, 2.0, 3.0)), 7.0);
        let g = gains(3.0, 3.0, 1.0);
        assert_eq!(lyapunov_v2(&Vector3::zeros(), &g), 0.0);
    }

    #[test]
    fn cap_below_initial_gain_clips() {
        let g = AdaptiveGains::new(Vector3::repeat(1.0), Vector3::new(0.5, 2.0, 2.0), Vector3::repeat(1.0)).unwrap();
        assert_eq!(g.k, Vector3::new(0.5, 1.0, 1.0));
    }

    proptest! {
        #[test]
        fn gains_stay_capped_and_monotone(
            s_seq in prop::collection::vec(prop::array::uniform3(-3.0..3.0f64), 1..200),
            b in prop::array::uniform3(0.0..0.9f64),
        ) {
            let mut g = gains(1.0, 2.5, 0.7);
            for s in s_seq {
                let next = adapt_gains(&g, &Vector3::from(s), &Vector3::repeat(0.2), &Vector3::from(b), 0.02).unwrap();
                prop_assert!(next.k.iter().zip(g.k.iter()).all(|(n, o)| n >= o));
                prop_assert!(next.k.iter().zip(next.k_d.iter()).all(|(k, c)| k <= c));
                if s.iter().all(|v| v.abs() <= 0.2) {
                    prop_assert_eq!(next.k, g.k);
                }
                g = next;
            }
        }
    }
}
