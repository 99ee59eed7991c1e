use std::cell::RefCell;

use approx::assert_relative_eq;
use nalgebra::Vector3;
use rasmc_core::flightdyn::BodyState;
use rasmc_core::scenario::Scenario;
use rasmc_core::sim::{integrate_step, ForceModel, HeldInputs, PlantState, StepContext, ZeroForce};
use rasmc_core::verify::{ballistic_energy_drift, observed_rk4_order};
use rasmc_core::Error;

/// Records the time and deflection of every force evaluation.
#[derive(Default)]
struct Probe {
    calls: RefCell<Vec<(f64, Vector3<f64>)>>,
}

impl ForceModel for Probe {
    fn evaluate(&self, t: f64, _: &BodyState, deflection: &Vector3<f64>, _: f64) -> (Vector3<f64>, Vector3<f64>) {
        self.calls.borrow_mut().push((t, *deflection));
        (Vector3::zeros(), Vector3::zeros())
    }
}

fn cruise() -> PlantState {
    PlantState {
        body: BodyState {
            velocity: Vector3::new(55.0, 0.0, 1.0),
            attitude: Vector3::new(0.1, 0.02, 0.3),
            rates: Vector3::new(0.2, -0.1, 0.05),
            altitude: 300.0,
            course: 0.3,
        },
        thrust: 120.0,
    }
}

#[test]
fn deflection_is_held_across_all_stages() {
    let s = Scenario::shipped_default().unwrap();
    let probe = Probe::default();
    let ctx = StepContext {
        model: &probe,
        params: &s.airframe,
        turbine: &s.turbine,
        theta_margin: s.sim.theta_margin,
        divergence_limit: s.sim.divergence_limit,
    };
    let inputs = HeldInputs { deflection: Vector3::new(0.01, -0.02, 0.03), throttle: 0.4 };
    let mut plant = cruise();
    let dt = 1e-3;
    for n in 0..20 {
        plant = integrate_step(&plant, &inputs, &ctx, n as f64 * dt, dt).unwrap();
    }
    let calls = probe.calls.borrow();
    assert_eq!(calls.len(), 80);
    assert!(calls.iter().all(|(_, d)| *d == inputs.deflection));
    let first: Vec<f64> = calls[..4].iter().map(|c| c.0).collect();
    assert_eq!(first, vec![0.0, 0.5e-3, 0.5e-3, 1e-3]);
}

#[test]
fn torque_free_body_conserves_energy_and_momentum_magnitude() {
    let s = Scenario::shipped_default().unwrap();
    let j = s.airframe.inertia;
    let ctx = StepContext {
        model: &ZeroForce,
        params: &s.airframe,
        turbine: &s.turbine,
        theta_margin: s.sim.theta_margin,
        divergence_limit: s.sim.divergence_limit,
    };
    let inputs = HeldInputs { deflection: Vector3::zeros(), throttle: s.turbine.throttle_for(120.0) };
    let mut plant = cruise();
    plant.body.rates = Vector3::new(0.3, 0.05, -0.2);
    let w0 = plant.body.rates;
    let (e0, h0) = (0.5 * w0.dot(&(j * w0)), (j * w0).norm());
    let dt = 1e-3;
    for n in 0..5000 {
        plant = integrate_step(&plant, &inputs, &ctx, n as f64 * dt, dt).unwrap();
    }
    let w = plant.body.rates;
    assert_relative_eq!(0.5 * w.dot(&(j * w)), e0, max_relative = 1e-10);
    assert_relative_eq!((j * w).norm(), h0, max_relative = 1e-10);
    assert!((w - w0).norm() > 1e-3, "cross-coupled inertia should move the rates");
    assert_relative_eq!(plant.body.velocity.norm(), cruise().body.velocity.norm(), max_relative = 1e-10);
}

#[test]
fn observed_order_is_four() {
    let s = Scenario::shipped_default().unwrap();
    let order = observed_rk4_order(&s, 0.02, 1.0).unwrap();
    assert!((3.7..=4.3).contains(&order), "{order}");
}

#[test]
fn ballistic_energy_is_conserved() {
    let s = Scenario::shipped_default().unwrap();
    let drift = ballistic_energy_drift(&s, 1e-3, 5.0).unwrap();
    assert!(drift < 1e-9, "{drift:e}");
}

#[test]
fn runaway_state_is_reported_as_divergence() {
    let s = Scenario::shipped_default().unwrap();
    let ctx = StepContext {
        model: &ZeroForce,
        params: &s.airframe,
        turbine: &s.turbine,
        theta_margin: s.sim.theta_margin,
        divergence_limit: 50.0,
    };
    let err = integrate_step(&cruise(), &HeldInputs::default(), &ctx, 0.0, 1e-3).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }), "{err}");
}
