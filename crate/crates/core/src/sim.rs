//! Closed-loop simulation: trim, fixed-step integration under a zero-order
//! hold of the controller outputs, and per-tick stability diagnostics.

use nalgebra::{SMatrix, SVector, Vector3};
use serde::Serialize;

use crate::aero::{
    damage_factors, nominal_moment_terms, total_forces, total_moments, true_uncertainty, AeroCoefficientSet,
    DamageConfig, EffectiveLambdas, TrueUncertainty,
};
use crate::autopilot::{add_trim, Autopilot, EnergyMeasurement, TrimPoint};
use crate::error::{Error, Result};
use crate::flightdyn::{airdata, rigid_body_derivative, AirframeParams, BodyState, STATE_DIM};
use crate::propulsion::TurbineParams;
use crate::rasmc::{lyapunov_v1, lyapunov_v2, rasmc_step, AdaptiveGains};
use crate::scenario::Scenario;
use crate::smc::{gain_bound_report, sliding_rate, GainBoundReport};
use crate::telemetry::TelemetryRecord;

/// Source of body force and moment for the integrator.
pub trait ForceModel {
    /// Force [N] and moment [N·m] at time `t` for held deflection and current thrust.
    fn evaluate(
        &self,
        t: f64,
        state: &BodyState,
        deflection: &Vector3<f64>,
        thrust: f64,
    ) -> (Vector3<f64>, Vector3<f64>);
}

/// The full aerodynamic, gravity and thrust model with time-dependent damage.
#[derive(Debug, Clone)]
pub struct AeroForceModel<'a> {
    pub params: &'a AirframeParams,
    pub coeffs: &'a AeroCoefficientSet,
    pub damage: &'a DamageConfig,
    pub v_eps: f64,
}

impl ForceModel for AeroForceModel<'_> {
    fn evaluate(
        &self,
        t: f64,
        state: &BodyState,
        deflection: &Vector3<f64>,
        thrust: f64,
    ) -> (Vector3<f64>, Vector3<f64>) {
        let lambdas = damage_factors(self.damage, t);
        evaluate_aero(state, deflection, thrust, &lambdas, self.coeffs, self.params, self.v_eps)
    }
}

fn evaluate_aero(
    state: &BodyState,
    deflection: &Vector3<f64>,
    thrust: f64,
    lambdas: &EffectiveLambdas,
    coeffs: &AeroCoefficientSet,
    params: &AirframeParams,
    v_eps: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let air = airdata(&state.velocity, &state.rates, params, v_eps);
    let force = total_forces(state, &air, deflection, thrust, lambdas, coeffs, params).total;
    let moment = total_moments(&air, deflection, lambdas, coeffs, params).total;
    (force, moment)
}

/// No force and no moment.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroForce;

impl ForceModel for ZeroForce {
    fn evaluate(&self, _: f64, _: &BodyState, _: &Vector3<f64>, _: f64) -> (Vector3<f64>, Vector3<f64>) {
        (Vector3::zeros(), Vector3::zeros())
    }
}

/// Gravity only: a ballistic body.
#[derive(Debug, Clone)]
pub struct GravityOnly<'a> {
    pub params: &'a AirframeParams,
}

impl ForceModel for GravityOnly<'_> {
    fn evaluate(&self, _: f64, state: &BodyState, _: &Vector3<f64>, _: f64) -> (Vector3<f64>, Vector3<f64>) {
        (crate::aero::gravity_force(&state.attitude, self.params), Vector3::zeros())
    }
}

/// Inputs held constant over one integration step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeldInputs {
    pub deflection: Vector3<f64>,
    pub throttle: f64,
}

/// Rigid-body state augmented with the turbine thrust.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub body: BodyState,
    /// Thrust [N].
    pub thrust: f64,
}

type Augmented = SVector<f64, { STATE_DIM + 1 }>;

fn pack(plant: &PlantState) -> Augmented {
    let body = plant.body.to_vector();
    Augmented::from_fn(|i, _| if i < STATE_DIM { body[i] } else { plant.thrust })
}

fn unpack(y: &Augmented) -> PlantState {
    let body = SVector::<f64, STATE_DIM>::from_fn(|i, _| y[i]);
    PlantState { body: BodyState::from_vector(&body), thrust: y[STATE_DIM] }
}

/// Integrator context: everything except the state and time.
pub struct StepContext<'a> {
    pub model: &'a dyn ForceModel,
    pub params: &'a AirframeParams,
    pub turbine: &'a TurbineParams,
    pub theta_margin: f64,
    pub divergence_limit: f64,
}

impl StepContext<'_> {
    fn derivative(&self, t: f64, y: &Augmented, inputs: &HeldInputs) -> Result<Augmented> {
        let plant = unpack(y);
        let (force, moment) = self.model.evaluate(t, &plant.body, &inputs.deflection, plant.thrust);
        let d = rigid_body_derivative(&plant.body, &force, &moment, self.params, self.theta_margin)?.to_vector();
        let thrust_rate = self.turbine.thrust_rate(inputs.throttle, plant.thrust);
        Ok(Augmented::from_fn(|i, _| if i < STATE_DIM { d[i] } else { thrust_rate }))
    }
}

/// One classical RK4 step with inputs held; angles are re-wrapped and thrust
/// clamped afterwards.
pub fn integrate_step(
    plant: &PlantState,
    inputs: &HeldInputs,
    ctx: &StepContext<'_>,
    t: f64,
    dt: f64,
) -> Result<PlantState> {
    let y = pack(plant);
    let k1 = ctx.derivative(t, &y, inputs)?;
    let k2 = ctx.derivative(t + 0.5 * dt, &(y + k1 * (0.5 * dt)), inputs)?;
    let k3 = ctx.derivative(t + 0.5 * dt, &(y + k2 * (0.5 * dt)), inputs)?;
    let k4 = ctx.derivative(t + dt, &(y + k3 * dt), inputs)?;
    let next = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if let Some(bad) = next.iter().find(|v| !v.is_finite() || v.abs() > ctx.divergence_limit) {
        return Err(Error::Divergence { t: t + dt, reason: format!("state component reached {bad:e}") });
    }
    let mut out = unpack(&next);
    out.body = out.body.wrapped();
    out.thrust = ctx.turbine.clamp(out.thrust);
    Ok(out)
}

/// Level-flight body state for a given airspeed, flow angles and attitude.
fn level_state(airspeed: f64, alpha: f64, beta: f64, theta: f64, altitude: f64, heading: f64) -> BodyState {
    BodyState {
        velocity: Vector3::new(
            airspeed * alpha.cos() * beta.cos(),
            airspeed * beta.sin(),
            airspeed * alpha.sin() * beta.cos(),
        ),
        attitude: Vector3::new(0.0, theta, heading),
        rates: Vector3::zeros(),
        altitude,
        course: heading,
    }
}

type TrimVector = SVector<f64, 6>;

/// Straight, wings-level trim by damped Newton iteration on the translational
/// and rotational accelerations of the undamaged model.
///
/// Unknowns are (α, η, T, β, ξ, ζ) with θ = α so the flight path is level.
pub fn trim_solve(
    params: &AirframeParams,
    coeffs: &AeroCoefficientSet,
    turbine: &TurbineParams,
    v_trim: f64,
    altitude: f64,
    theta_margin: f64,
    max_iter: usize,
) -> Result<TrimPoint> {
    let qs = 0.5 * params.rho_air * v_trim * v_trim * params.s_ref;
    let lift_required = params.mass * params.gravity / qs;
    if lift_required > coeffs.lift_max {
        return Err(Error::TrimInfeasible(format!(
            "required lift coefficient {lift_required:.4} exceeds C_L_max {} at {v_trim} m/s",
            coeffs.lift_max
        )));
    }

    let residual = |x: &TrimVector| -> Result<TrimVector> {
        let state = level_state(v_trim, x[0], x[3], x[0], altitude, 0.0);
        let deflection = Vector3::new(x[4], x[1], x[5]);
        let (force, moment) =
            evaluate_aero(&state, &deflection, x[2], &EffectiveLambdas::nominal(), coeffs, params, 1e-9);
        let d = rigid_body_derivative(&state, &force, &moment, params, theta_margin)?;
        Ok(TrimVector::new(d.velocity.x, d.velocity.y, d.velocity.z, d.rates.x, d.rates.y, d.rates.z))
    };

    let lift_slope = coeffs.get(crate::aero::Family::Lift, crate::aero::Derivative::Alpha);
    let alpha0 = if lift_slope > 0.0 {
        (lift_required - coeffs.get(crate::aero::Family::Lift, crate::aero::Derivative::Zero)) / lift_slope
    } else {
        0.05
    };
    let mut x = TrimVector::new(alpha0, 0.0, 0.1 * params.mass * params.gravity, 0.0, 0.0, 0.0);
    let mut r = residual(&x)?;
    let mut iterations = 0;
    while r.norm() >= 1e-10 {
        if iterations >= max_iter {
            return Err(Error::TrimDiverged { iterations, residual: r.norm() });
        }
        iterations += 1;
        let mut jac = SMatrix::<f64, 6, 6>::zeros();
        for j in 0..6 {
            let h = 1e-6 * x[j].abs().max(if j == 2 { 100.0 } else { 1.0 });
            let mut plus = x;
            let mut minus = x;
            plus[j] += h;
            minus[j] -= h;
            jac.set_column(j, &((residual(&plus)? - residual(&minus)?) / (2.0 * h)));
        }
        let step = jac.lu().solve(&(-r)).ok_or(Error::TrimDiverged { iterations, residual: r.norm() })?;
        let mut scale = 1.0;
        loop {
            let candidate = x + step * scale;
            if let Ok(rc) = residual(&candidate) {
                if rc.norm() < r.norm() {
                    x = candidate;
                    r = rc;
                    break;
                }
            }
            scale *= 0.5;
            if scale < 1e-6 {
                return Err(Error::TrimDiverged { iterations, residual: r.norm() });
            }
        }
    }

    let throttle = turbine.throttle_for(x[2]);
    if !(0.0..=1.0).contains(&throttle) {
        return Err(Error::TrimInfeasible(format!(
            "trim thrust {:.1} N lies outside the turbine range [{}, {}] N",
            x[2], turbine.thrust_idle, turbine.thrust_max
        )));
    }
    Ok(TrimPoint {
        airspeed: v_trim,
        alpha: x[0],
        beta: x[3],
        phi: 0.0,
        theta: x[0],
        deflection: [x[4], x[1], x[5]],
        thrust: x[2],
        throttle,
    })
}

/// Residual accelerations (u̇, v̇, ẇ, ṗ, q̇, ṙ) of a trim point through the full
/// force and moment path.
pub fn trim_residual(
    trim: &TrimPoint,
    params: &AirframeParams,
    coeffs: &AeroCoefficientSet,
    altitude: f64,
    theta_margin: f64,
) -> Result<TrimVector> {
    let state = level_state(trim.airspeed, trim.alpha, trim.beta, trim.theta, altitude, 0.0);
    let (force, moment) =
        evaluate_aero(&state, &trim.deflection(), trim.thrust, &EffectiveLambdas::nominal(), coeffs, params, 1e-9);
    let d = rigid_body_derivative(&state, &force, &moment, params, theta_margin)?;
    Ok(TrimVector::new(d.velocity.x, d.velocity.y, d.velocity.z, d.rates.x, d.rates.y, d.rates.z))
}

/// Stability diagnostics for one control tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LyapunovDiagnostics {
    pub v1: f64,
    pub v2: f64,
    /// sᵀṡ under the applied gains.
    pub s_dot_s: f64,
    /// −Σεᵢ|sᵢ|.
    pub reaching_bound: f64,
    /// V̇₂ = sᵀṡ + Σ(1 − Bᵢᵢ)(kᵢ − k_d,ᵢ)|sᵢ| while adapting, sᵀṡ otherwise.
    pub v2_rate: f64,
    pub outside_layer: bool,
    pub violation: bool,
}

/// V₁, V₂ and the reaching-condition check. `s_dot` is the analytic closed-loop
/// sliding rate.
pub fn lyapunov_monitor(
    s: &Vector3<f64>,
    s_dot: &Vector3<f64>,
    gains: &AdaptiveGains,
    epsilon: &Vector3<f64>,
    sigma: &Vector3<f64>,
    b_diag: &Vector3<f64>,
    tolerance: f64,
) -> LyapunovDiagnostics {
    let s_dot_s = s.dot(s_dot);
    let reaching_bound = -epsilon.dot(&s.abs());
    let outside_layer = s.iter().zip(sigma.iter()).all(|(si, wi)| si.abs() > *wi);
    let adapting: f64 = (0..3)
        .filter(|&i| gains.k[i] < gains.k_d[i] && s[i].abs() > sigma[i])
        .map(|i| (1.0 - b_diag[i]) * (gains.k[i] - gains.k_d[i]) * s[i].abs())
        .sum();
    LyapunovDiagnostics {
        v1: lyapunov_v1(s),
        v2: lyapunov_v2(s, gains),
        s_dot_s,
        reaching_bound,
        v2_rate: s_dot_s + adapting,
        outside_layer,
        violation: outside_layer && s_dot_s > reaching_bound + tolerance,
    }
}

/// Outcome of the startup gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSetup {
    pub trim: TrimPoint,
    pub rho: f64,
    pub k_d: [f64; 3],
    #[serde(skip)]
    pub gain_report: GainBoundReportView,
}

/// Copy of the gain-bound system kept alongside the setup.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GainBoundReportView {
    pub d: [[f64; 3]; 3],
    pub z: [f64; 3],
}

impl From<&GainBoundReport> for GainBoundReportView {
    fn from(r: &GainBoundReport) -> Self {
        Self { d: r.system.d.transpose().into(), z: r.system.z.into() }
    }
}

/// Startup checks in order: validation, trim, nominal effectiveness at trim,
/// gain-bound admissibility.
pub fn prepare(scenario: &Scenario) -> Result<RunSetup> {
    scenario.validate()?;
    let sim = &scenario.sim;
    let trim = trim_solve(
        &scenario.airframe,
        &scenario.aero,
        &scenario.turbine,
        sim.v_trim,
        sim.h0,
        sim.theta_margin,
        sim.trim_max_iter,
    )?;
    let state = initial_state(scenario, &trim);
    let air = airdata(&state.velocity, &state.rates, &scenario.airframe, sim.v_eps);
    nominal_moment_terms(&air, &scenario.aero, &scenario.airframe)?;
    let report = gain_bound_report(&scenario.smc)?;
    Ok(RunSetup { trim, rho: report.rho, k_d: report.k_d.into(), gain_report: (&report).into() })
}

fn initial_state(scenario: &Scenario, trim: &TrimPoint) -> BodyState {
    let heading = crate::flightdyn::wrap_angle(scenario.sim.course0_deg.to_radians());
    level_state(trim.airspeed, trim.alpha, trim.beta, trim.theta, scenario.sim.h0, heading)
}

/// Per-run aggregates.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunSummary {
    pub ticks: usize,
    pub final_time: f64,
    /// Largest |Θ − Θ_r| per axis over the run [deg].
    pub max_attitude_error_deg: [f64; 3],
    pub max_altitude_error: f64,
    pub max_airspeed_error: f64,
    pub max_course_error_deg: f64,
    pub final_gains: [f64; 3],
    pub k_d: [f64; 3],
    /// max over records of kᵢ − k_d,ᵢ.
    pub max_gain_excess: f64,
    pub reaching_violations: usize,
    pub xi_bound_violations: usize,
    pub iota_bound_violations: usize,
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub setup: RunSetup,
    pub records: Vec<TelemetryRecord>,
    pub summary: RunSummary,
}

/// A failed run with whatever telemetry was produced before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub setup: Option<RunSetup>,
    pub partial: Vec<TelemetryRecord>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} telemetry records before failure)", self.error, self.partial.len())
    }
}

impl std::error::Error for RunFailure {}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self { error, setup: None, partial: Vec::new() }
    }
}

/// Runs a scenario end to end.
#[allow(clippy::result_large_err)]
pub fn run_scenario(scenario: &Scenario) -> std::result::Result<SimRun, RunFailure> {
    let setup = prepare(scenario)?;
    let mut records = Vec::with_capacity(scenario.sim.ticks() + 1);
    match run_loop(scenario, &setup, &mut records) {
        Ok(()) => {
            let summary = summarize(&records, &setup);
            Ok(SimRun { setup, records, summary })
        }
        Err(error) => Err(RunFailure { error, setup: Some(setup), partial: records }),
    }
}

fn run_loop(scenario: &Scenario, setup: &RunSetup, records: &mut Vec<TelemetryRecord>) -> Result<()> {
    let sim = &scenario.sim;
    let params = &scenario.airframe;
    let coeffs = &scenario.aero;
    let smc = &scenario.smc;
    let trim = setup.trim;
    let dt_ctrl = sim.control_dt();
    let substeps = sim.substeps();
    let dt_phys = dt_ctrl / substeps as f64;
    let tolerance = sim.reaching_tolerance * dt_ctrl;
    let b_diag = smc.bounds.diagonal();
    let trim_deflection = trim.deflection();

    let model = AeroForceModel { params, coeffs, damage: &scenario.damage, v_eps: sim.v_eps };
    let ctx = StepContext {
        model: &model,
        params,
        turbine: &scenario.turbine,
        theta_margin: sim.theta_margin,
        divergence_limit: sim.divergence_limit,
    };

    let mut plant = PlantState { body: initial_state(scenario, &trim), thrust: trim.thrust };
    let initial_air = airdata(&plant.body.velocity, &plant.body.rates, params, sim.v_eps);
    let mut autopilot =
        Autopilot::new(scenario.autopilot.clone(), trim, params.gravity, &plant.body, initial_air.airspeed);
    let mut gains = AdaptiveGains::new(scenario.rasmc.k0, Vector3::from(setup.k_d), scenario.rasmc.gamma)?;
    let mut previous_airspeed = initial_air.airspeed;

    for n in 0..=sim.ticks() {
        let t = n as f64 / sim.f_ctrl;
        let state = plant.body;
        let air = airdata(&state.velocity, &state.rates, params, sim.v_eps);
        let (st, ct) = state.attitude.y.sin_cos();
        let (sp, cp) = state.attitude.x.sin_cos();
        let measured = EnergyMeasurement {
            climb_rate: state.velocity.x * st - state.velocity.y * sp * ct - state.velocity.z * cp * ct,
            airspeed_rate: (air.airspeed - previous_airspeed) / dt_ctrl,
        };
        previous_airspeed = air.airspeed;

        let raw = scenario.command_at(t);
        let ap = autopilot.step(&raw, &state, &air, &measured, dt_ctrl);

        let nominal = nominal_moment_terms(&air, coeffs, params)?.with_deflection_offset(&trim_deflection);
        let control = rasmc_step(&state, &ap.reference, &gains, smc, &nominal, params, dt_ctrl, sim.theta_margin)?;
        gains = control.gains;
        let (deflection, throttle) = add_trim(&control.deflection, ap.throttle_cmd, &trim);

        let lambdas = damage_factors(&scenario.damage, t);
        let uncertainty: TrueUncertainty = true_uncertainty(
            &state,
            &air,
            &lambdas,
            coeffs,
            params,
            &smc.lambda,
            &ap.reference,
            &trim_deflection,
            sim.theta_margin,
        )?;
        let s = control.sliding.s;
        let s_dot = sliding_rate(&uncertainty, &s, &gains.k, &smc.sigma, smc.switching);
        let s_dot_cap = sliding_rate(&uncertainty, &s, &gains.k_d, &smc.sigma, smc.switching);
        let lyapunov = lyapunov_monitor(&s, &s_dot, &gains, &smc.epsilon, &smc.sigma, &b_diag, tolerance);
        let (xi_ok, iota_ok) = uncertainty.within(&smc.bounds, &smc.accel_bounds);
        let xi_bound_ratio = uncertainty
            .xi
            .iter()
            .zip(smc.bounds.iter())
            .map(|(x, b)| {
                if *b > 0.0 {
                    x.abs() / b
                } else if *x == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);

        let reference = &ap.reference;
        records.push(TelemetryRecord {
            t_s: t,
            u_mps: state.velocity.x,
            v_mps: state.velocity.y,
            w_mps: state.velocity.z,
            phi_rad: state.attitude.x,
            theta_rad: state.attitude.y,
            psi_rad: state.attitude.z,
            p_radps: state.rates.x,
            q_radps: state.rates.y,
            r_radps: state.rates.z,
            h_m: state.altitude,
            chi_rad: state.course,
            v_tas_mps: air.airspeed,
            alpha_rad: air.alpha,
            beta_rad: air.beta,
            qbar_pa: air.dynamic_pressure,
            v_c_mps: ap.filtered.airspeed,
            chi_c_rad: ap.filtered.course,
            h_c_m: ap.filtered.altitude,
            phi_c_rad: ap.phi_c,
            theta_c_rad: ap.theta_c,
            psi_c_rad: ap.psi_c,
            phi_r_rad: reference.angle.x,
            theta_r_rad: reference.angle.y,
            psi_r_rad: reference.angle.z,
            phi_r_dot_radps: reference.rate.x,
            theta_r_dot_radps: reference.rate.y,
            psi_r_dot_radps: reference.rate.z,
            phi_r_ddot_radps2: reference.accel.x,
            theta_r_ddot_radps2: reference.accel.y,
            psi_r_ddot_radps2: reference.accel.z,
            aileron_rad: deflection.x,
            elevator_rad: deflection.y,
            rudder_rad: deflection.z,
            throttle,
            thrust_n: plant.thrust,
            s1_radps: s.x,
            s2_radps: s.y,
            s3_radps: s.z,
            k1: gains.k.x,
            k2: gains.k.y,
            k3: gains.k.z,
            v1: lyapunov.v1,
            v2: lyapunov.v2,
            sdot_s: lyapunov.s_dot_s,
            sdot_s_kd: s.dot(&s_dot_cap),
            reaching_bound: lyapunov.reaching_bound,
            v2_rate: lyapunov.v2_rate,
            iota1_radps2: uncertainty.iota.x,
            iota2_radps2: uncertainty.iota.y,
            iota3_radps2: uncertainty.iota.z,
            xi_bound_ratio,
            outside_layer: u8::from(lyapunov.outside_layer),
            reaching_violation: u8::from(lyapunov.violation),
            xi_within_bounds: u8::from(xi_ok),
            iota_within_bounds: u8::from(iota_ok),
            damaged: u8::from(!scenario.damage.is_inert() && t >= scenario.damage.onset),
            clamp_flags: ap.clamps.bits(),
        });

        if n == sim.ticks() {
            break;
        }
        let inputs = HeldInputs { deflection, throttle };
        for j in 0..substeps {
            let t_sub = t + j as f64 * dt_phys;
            plant = integrate_step(&plant, &inputs, &ctx, t_sub, dt_phys)?;
        }
    }
    Ok(())
}

fn summarize(records: &[TelemetryRecord], setup: &RunSetup) -> RunSummary {
    let mut summary = RunSummary {
        ticks: records.len(),
        final_time: records.last().map_or(0.0, |r| r.t_s),
        k_d: setup.k_d,
        max_gain_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    for r in records {
        let errors = r.attitude_error();
        for i in 0..3 {
            summary.max_attitude_error_deg[i] = summary.max_attitude_error_deg[i].max(errors[i].abs().to_degrees());
        }
        summary.max_altitude_error = summary.max_altitude_error.max((r.h_c_m - r.h_m).abs());
        summary.max_airspeed_error = summary.max_airspeed_error.max((r.v_c_mps - r.v_tas_mps).abs());
        summary.max_course_error_deg =
            summary.max_course_error_deg.max(crate::flightdyn::wrap_angle(r.chi_c_rad - r.chi_rad).abs().to_degrees());
        for (k, cap) in [r.k1, r.k2, r.k3].iter().zip(setup.k_d) {
            summary.max_gain_excess = summary.max_gain_excess.max(k - cap);
        }
        summary.reaching_violations += usize::from(r.reaching_violation != 0);
        summary.xi_bound_violations += usize::from(r.xi_within_bounds == 0);
        summary.iota_bound_violations += usize::from(r.iota_within_bounds == 0);
        summary.final_gains = [r.k1, r.k2, r.k3];
    }
    summary
}
