//! Outer loops: command filter, course/altitude/speed controllers, energy
//! control (pitch and throttle), attitude reference model and trim addition.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flightdyn::{wrap_angle, AirdataQuantities, BodyState};
pub use crate::smc::AttitudeReference;

/// Guidance setpoints. The course command is wrapped to (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GuidanceCommand {
    /// Airspeed [m/s].
    pub airspeed: f64,
    /// Course [rad].
    pub course: f64,
    /// Altitude [m].
    pub altitude: f64,
}

/// Straight-and-level equilibrium the outer loops perturb around.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrimPoint {
    pub airspeed: f64,
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub theta: f64,
    /// Aileron, elevator, rudder [rad].
    pub deflection: [f64; 3],
    /// Thrust [N].
    pub thrust: f64,
    /// Throttle fraction giving `thrust` at steady state.
    pub throttle: f64,
}

impl TrimPoint {
    pub fn deflection(&self) -> Vector3<f64> {
        Vector3::from(self.deflection)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutopilotConfig {
    /// Command-filter natural frequencies (airspeed, course, altitude) [rad/s].
    pub filter_omega: [f64; 3],
    /// Command-filter rate limits (airspeed [m/s²], course [rad/s], altitude [m/s]).
    pub filter_rate_limit: [f64; 3],
    /// Course-error gain [1/s].
    pub k_chi: f64,
    /// Bank-angle limit [rad].
    pub phi_max: f64,
    /// Altitude-error gain [1/s].
    pub k_h: f64,
    /// Climb-rate limits [m/s].
    pub roc_min: f64,
    pub roc_max: f64,
    /// Airspeed-error gain [1/s].
    pub k_v: f64,
    /// Symmetric airspeed-rate limit [m/s²].
    pub vdot_max: f64,
    /// Energy-rate to throttle gain [-].
    pub k_e: f64,
    /// Energy-balance to pitch gain [-].
    pub k_b: f64,
    /// Integral gain on the energy-rate error [1/s]; zero disables it.
    #[serde(default)]
    pub k_ei: f64,
    /// Clamp on the throttle integrator [-].
    #[serde(default = "default_integral_limit")]
    pub tecs_integral_limit: f64,
    /// Pitch-command limit [rad].
    pub theta_max: f64,
    /// Reference-model natural frequencies (roll, pitch, yaw) [rad/s].
    #[serde(default = "default_ref_omega")]
    pub ref_omega: [f64; 3],
    /// Reference-model damping ratios.
    #[serde(default = "default_ref_zeta")]
    pub ref_zeta: [f64; 3],
    /// Lowest admissible airspeed command [m/s].
    pub v_min: f64,
}

fn default_integral_limit() -> f64 {
    0.2
}

fn default_ref_omega() -> [f64; 3] {
    [4.0, 3.0, 2.0]
}

fn default_ref_zeta() -> [f64; 3] {
    [1.0; 3]
}

impl AutopilotConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("autopilot.{name} must be positive, got {v}")))
            }
        };
        for (i, w) in self.filter_omega.iter().enumerate() {
            positive(&format!("filter_omega[{i}]"), *w)?;
        }
        for (i, r) in self.filter_rate_limit.iter().enumerate() {
            positive(&format!("filter_rate_limit[{i}]"), *r)?;
        }
        for (i, w) in self.ref_omega.iter().enumerate() {
            positive(&format!("ref_omega[{i}]"), *w)?;
        }
        for (i, z) in self.ref_zeta.iter().enumerate() {
            positive(&format!("ref_zeta[{i}]"), *z)?;
        }
        positive("phi_max", self.phi_max)?;
        positive("theta_max", self.theta_max)?;
        positive("vdot_max", self.vdot_max)?;
        positive("v_min", self.v_min)?;
        if !(self.roc_min < self.roc_max) {
            return Err(Error::Config("autopilot.roc_min must be below roc_max".into()));
        }
        if self.k_ei < 0.0 || self.tecs_integral_limit < 0.0 {
            return Err(Error::Config("autopilot TECS integral settings must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Value and rate of each filtered guidance channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FilterState {
    pub value: GuidanceCommand,
    pub rate: GuidanceCommand,
}

impl FilterState {
    pub fn at_rest(command: GuidanceCommand) -> Self {
        Self { value: command, rate: GuidanceCommand::default() }
    }
}

/// One semi-implicit step of a critically damped second-order filter with a
/// rate clamp; returns the new value and rate and whether the clamp bit.
fn filter_channel(error: f64, value: f64, rate: f64, omega: f64, rate_limit: f64, dt: f64) -> (f64, f64, bool) {
    let accel = omega * omega * error - 2.0 * omega * rate;
    let raw_rate = rate + dt * accel;
    let next_rate = raw_rate.clamp(-rate_limit, rate_limit);
    (value + dt * next_rate, next_rate, next_rate != raw_rate)
}

/// Advances the guidance command filter by `dt`. The returned flag reports
/// whether any rate limit was active.
pub fn command_filter(
    raw: &GuidanceCommand,
    prev: &FilterState,
    cfg: &AutopilotConfig,
    dt: f64,
) -> (FilterState, bool) {
    let [wv, wc, wh] = cfg.filter_omega;
    let [lv, lc, lh] = cfg.filter_rate_limit;
    let (v, vr, cv) =
        filter_channel(raw.airspeed - prev.value.airspeed, prev.value.airspeed, prev.rate.airspeed, wv, lv, dt);
    let (c, cr, cc) =
        filter_channel(wrap_angle(raw.course - prev.value.course), prev.value.course, prev.rate.course, wc, lc, dt);
    let (h, hr, ch) =
        filter_channel(raw.altitude - prev.value.altitude, prev.value.altitude, prev.rate.altitude, wh, lh, dt);
    let next = FilterState {
        value: GuidanceCommand { airspeed: v, course: wrap_angle(c), altitude: h },
        rate: GuidanceCommand { airspeed: vr, course: cr, altitude: hr },
    };
    (next, cv || cc || ch)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CourseOutput {
    pub phi_c: f64,
    pub r_c: f64,
    pub clamped: bool,
}

/// Coordinated-turn bank and yaw-rate commands. The yaw rate uses the
/// level-turn relation `g·tan φ / v` and ignores pitch.
pub fn course_controller(
    course_c: f64,
    course_rate_c: f64,
    state: &BodyState,
    air: &AirdataQuantities,
    cfg: &AutopilotConfig,
    gravity: f64,
) -> CourseOutput {
    let course_rate = course_rate_c + cfg.k_chi * wrap_angle(course_c - state.course);
    let raw = (air.airspeed * course_rate / gravity).atan();
    let phi_c = raw.clamp(-cfg.phi_max, cfg.phi_max);
    CourseOutput { phi_c, r_c: gravity * phi_c.tan() / air.airspeed, clamped: phi_c != raw }
}

/// Rate-of-climb command with feedforward; returns the clamped value and a clamp flag.
pub fn altitude_controller(h_c: f64, h_rate_c: f64, state: &BodyState, cfg: &AutopilotConfig) -> (f64, bool) {
    let raw = h_rate_c + cfg.k_h * (h_c - state.altitude);
    let roc = raw.clamp(cfg.roc_min, cfg.roc_max);
    (roc, roc != raw)
}

/// Airspeed-rate command with feedforward; returns the clamped value and a clamp flag.
pub fn speed_controller(v_c: f64, v_rate_ff: f64, air: &AirdataQuantities, cfg: &AutopilotConfig) -> (f64, bool) {
    let raw = v_rate_ff + cfg.k_v * (v_c - air.airspeed);
    let vdot = raw.clamp(-cfg.vdot_max, cfg.vdot_max);
    (vdot, vdot != raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TecsState {
    pub integral: f64,
}

/// Measured energy rates used by the optional integral term.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyMeasurement {
    pub climb_rate: f64,
    pub airspeed_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TecsOutput {
    pub theta_c: f64,
    pub throttle: f64,
    pub state: TecsState,
    pub theta_clamped: bool,
    pub throttle_clamped: bool,
}

/// Specific-energy control: total energy rate to throttle, energy balance to pitch.
#[allow(clippy::too_many_arguments)]
pub fn tecs(
    roc_c: f64,
    vdot_c: f64,
    air: &AirdataQuantities,
    trim: &TrimPoint,
    cfg: &AutopilotConfig,
    gravity: f64,
    prev: &TecsState,
    measured: &EnergyMeasurement,
    dt: f64,
) -> TecsOutput {
    let v = air.airspeed;
    let energy_rate = gravity * roc_c + v * vdot_c;
    let balance_rate = gravity * roc_c - v * vdot_c;
    let scale = 1.0 / (gravity * v);

    let mut state = *prev;
    if cfg.k_ei > 0.0 {
        let measured_rate = gravity * measured.climb_rate + v * measured.airspeed_rate;
        state.integral = (state.integral + dt * cfg.k_ei * (energy_rate - measured_rate) * scale)
            .clamp(-cfg.tecs_integral_limit, cfg.tecs_integral_limit);
    }
    let throttle_raw = trim.throttle + cfg.k_e * energy_rate * scale + state.integral;
    let throttle = throttle_raw.clamp(0.0, 1.0);
    let theta_raw = trim.theta + cfg.k_b * balance_rate * scale;
    let theta_c = theta_raw.clamp(-cfg.theta_max, cfg.theta_max);
    TecsOutput {
        theta_c,
        throttle,
        state,
        theta_clamped: theta_c != theta_raw,
        throttle_clamped: throttle != throttle_raw,
    }
}

/// Per-axis second-order attitude reference model state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReferenceModelState {
    pub angle: Vector3<f64>,
    pub rate: Vector3<f64>,
}

/// Emits the reference at the current instant and advances the model by `dt`.
///
/// Each axis follows `ẍ = ω²(c − x) + 2ζω(ċ − ẋ)`; `command_rate` is zero for
/// roll and pitch and carries the commanded heading rate for yaw. The update
/// is semi-implicit, so the emitted streams satisfy
/// `(x[n+1] − x[n])/dt = ẋ[n+1]` and `(ẋ[n+1] − ẋ[n])/dt = ẍ[n]` exactly.
pub fn reference_model(
    command: &Vector3<f64>,
    command_rate: &Vector3<f64>,
    prev: &ReferenceModelState,
    cfg: &AutopilotConfig,
    dt: f64,
) -> (AttitudeReference, ReferenceModelState) {
    let mut accel = Vector3::zeros();
    for i in 0..3 {
        let (w, z) = (cfg.ref_omega[i], cfg.ref_zeta[i]);
        accel[i] = w * w * wrap_angle(command[i] - prev.angle[i]) + 2.0 * z * w * (command_rate[i] - prev.rate[i]);
    }
    let reference = AttitudeReference { angle: prev.angle, rate: prev.rate, accel };
    let rate = prev.rate + accel * dt;
    let mut angle = prev.angle + rate * dt;
    angle.x = wrap_angle(angle.x);
    angle.z = wrap_angle(angle.z);
    (reference, ReferenceModelState { angle, rate })
}

pub fn add_trim(deflection_cmd: &Vector3<f64>, throttle_cmd: f64, trim: &TrimPoint) -> (Vector3<f64>, f64) {
    (deflection_cmd + trim.deflection(), throttle_cmd.clamp(0.0, 1.0))
}

/// Which limits were active on one autopilot step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClampFlags {
    pub filter_rate: bool,
    pub bank: bool,
    pub climb: bool,
    pub accel: bool,
    pub pitch: bool,
    pub throttle: bool,
}

impl ClampFlags {
    pub fn bits(&self) -> u8 {
        [self.filter_rate, self.bank, self.climb, self.accel, self.pitch, self.throttle]
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &on)| acc | (u8::from(on) << i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutopilotOutput {
    pub filtered: GuidanceCommand,
    pub phi_c: f64,
    pub theta_c: f64,
    pub psi_c: f64,
    pub r_c: f64,
    pub roc_c: f64,
    pub vdot_c: f64,
    pub throttle_cmd: f64,
    pub reference: AttitudeReference,
    pub clamps: ClampFlags,
}

/// Mutable outer-loop state, stepped once per control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Autopilot {
    pub cfg: AutopilotConfig,
    pub trim: TrimPoint,
    pub gravity: f64,
    pub filter: FilterState,
    pub reference_model: ReferenceModelState,
    /// Integrated heading command [rad].
    pub psi_c: f64,
    pub tecs: TecsState,
}

impl Autopilot {
    /// Initialises every internal state at the given aircraft state so the
    /// first step produces no transient.
    pub fn new(cfg: AutopilotConfig, trim: TrimPoint, gravity: f64, state: &BodyState, airspeed: f64) -> Self {
        let filter = FilterState::at_rest(GuidanceCommand { airspeed, course: state.course, altitude: state.altitude });
        Self {
            cfg,
            trim,
            gravity,
            filter,
            reference_model: ReferenceModelState { angle: state.attitude, rate: Vector3::zeros() },
            psi_c: state.attitude.z,
            tecs: TecsState::default(),
        }
    }

    pub fn step(
        &mut self,
        raw: &GuidanceCommand,
        state: &BodyState,
        air: &AirdataQuantities,
        measured: &EnergyMeasurement,
        dt: f64,
    ) -> AutopilotOutput {
        let cfg = &self.cfg;
        let raw = GuidanceCommand { airspeed: raw.airspeed.max(cfg.v_min), course: wrap_angle(raw.course), ..*raw };
        let (filter, filter_rate) = command_filter(&raw, &self.filter, cfg, dt);
        self.filter = filter;
        let cmd = filter.value;
        let rates = filter.rate;

        let course = course_controller(cmd.course, rates.course, state, air, cfg, self.gravity);
        let (roc_c, climb) = altitude_controller(cmd.altitude, rates.altitude, state, cfg);
        let (vdot_c, accel) = speed_controller(cmd.airspeed, rates.airspeed, air, cfg);
        let energy = tecs(roc_c, vdot_c, air, &self.trim, cfg, self.gravity, &self.tecs, measured, dt);
        self.tecs = energy.state;

        let command = Vector3::new(course.phi_c, energy.theta_c, self.psi_c);
        let command_rate = Vector3::new(0.0, 0.0, course.r_c);
        let (reference, next) = reference_model(&command, &command_rate, &self.reference_model, cfg, dt);
        self.reference_model = next;
        let psi_c = self.psi_c;
        self.psi_c = wrap_angle(self.psi_c + dt * course.r_c);

        AutopilotOutput {
            filtered: cmd,
            phi_c: course.phi_c,
            theta_c: energy.theta_c,
            psi_c,
            r_c: course.r_c,
            roc_c,
            vdot_c,
            throttle_cmd: energy.throttle,
            reference,
            clamps: ClampFlags {
                filter_rate,
                bank: course.clamped,
                climb,
                accel,
                pitch: energy.theta_clamped,
                throttle: energy.throttle_clamped,
            },
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::flightdyn::{airdata, STANDARD_GRAVITY};
    use crate::testutil::test_airframe;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    pub(crate) fn test_autopilot_config() -> AutopilotConfig {
        AutopilotConfig {
            filter_omega: [0.5, 0.8, 0.4],
            filter_rate_limit: [1.0, 0.15, 5.0],
            k_chi: 0.5,
            phi_max: 0.5,
            k_h: 0.2,
            roc_min: -6.0,
            roc_max: 6.0,
            k_v: 0.3,
            vdot_max: 1.5,
            k_e: 3.0,
            k_b: 1.0,
            k_ei: 0.0,
            tecs_integral_limit: 0.2,
            theta_max: 0.35,
            ref_omega: [4.0, 3.0, 2.0],
            ref_zeta: [1.0; 3],
            v_min: 35.0,
        }
    }

    fn level(speed: f64) -> (BodyState, AirdataQuantities) {
        let state = BodyState { velocity: Vector3::new(speed, 0.0, 0.0), altitude: 300.0, ..Default::default() };
        let air = airdata(&state.velocity, &state.rates, &test_airframe(), 1.0);
        (state, air)
    }

    fn trim() -> TrimPoint {
        TrimPoint { airspeed: 50.0, alpha: 0.03, theta: 0.03, throttle: 0.3, thrust: 127.0, ..Default::default() }
    }

    #[test]
    fn filter_equilibrium() {
        let cfg = test_autopilot_config();
        let cmd = GuidanceCommand { airspeed: 50.0, course: 0.3, altitude: 200.0 };
        let (next, limited) = command_filter(&cmd, &FilterState::at_rest(cmd), &cfg, 0.02);
        assert_eq!(next, FilterState::at_rest(cmd));
        assert!(!limited);
    }

    #[test]
    fn filter_respects_rate_limit() {
        let cfg = test_autopilot_config();
        let start = GuidanceCommand { airspeed: 50.0, course: 0.0, altitude: 200.0 };
        let target = GuidanceCommand { altitude: 300.0, ..start };
        let mut state = FilterState::at_rest(start);
        let mut max_slope: f64 = 0.0;
        for _ in 0..5000 {
            let (next, _) = command_filter(&target, &state, &cfg, 0.02);
            max_slope = max_slope.max((next.value.altitude - state.value.altitude).abs() / 0.02);
            state = next;
        }
        assert!(max_slope <= 5.0 + 1e-9, "{max_slope}");
        assert_relative_eq!(state.value.altitude, 300.0, epsilon = 1e-6);
    }

    #[test]
    fn filter_course_takes_short_way_round() {
        let cfg = test_autopilot_config();
        let start = GuidanceCommand { airspeed: 50.0, course: 3.0, altitude: 200.0 };
        let target = GuidanceCommand { course: -3.0, ..start };
        let (next, _) = command_filter(&target, &FilterState::at_rest(start), &cfg, 0.02);
        assert!(next.rate.course > 0.0);
    }

    #[test]
    fn zero_frequency_is_rejected() {
        let mut cfg = test_autopilot_config();
        cfg.filter_omega[1] = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = test_autopilot_config();
        cfg.ref_omega[0] = 0.0;
        assert!(cfg.validate().is_err());
        assert!(test_autopilot_config().validate().is_ok());
    }

    #[test]
    fn course_controller_examples() {
        let cfg = test_autopilot_config();
        let (state, air) = level(50.0);
        let out = course_controller(0.0, 0.0, &state, &air, &cfg, STANDARD_GRAVITY);
        assert_eq!((out.phi_c, out.r_c), (0.0, 0.0));

        let wide = AutopilotConfig { phi_max: 1.2, ..cfg.clone() };
        let out = course_controller(0.0, 0.1, &state, &air, &wide, STANDARD_GRAVITY);
        assert_relative_eq!(out.phi_c, (50.0 * 0.1 / STANDARD_GRAVITY).atan(), epsilon = 1e-15);
        assert_relative_eq!(out.phi_c, 0.4715, epsilon = 1e-4);
        assert_relative_eq!(out.r_c, 0.1, epsilon = 1e-12);

        let aggressive = AutopilotConfig { k_chi: 50.0, ..cfg.clone() };
        let out = course_controller(std::f64::consts::PI, 0.0, &state, &air, &aggressive, STANDARD_GRAVITY);
        assert_eq!(out.phi_c, cfg.phi_max);
        assert!(out.clamped);
    }

    #[test]
    fn altitude_and_speed_examples() {
        let cfg = test_autopilot_config();
        let (state, air) = level(50.0);
        assert_eq!(altitude_controller(300.0, 0.0, &state, &cfg), (0.0, false));
        let wide = AutopilotConfig { roc_max: 20.0, ..cfg.clone() };
        let (roc, clamped) = altitude_controller(350.0, 0.0, &state, &wide);
        assert_relative_eq!(roc, 10.0, epsilon = 1e-12);
        assert!(!clamped);
        assert_eq!(altitude_controller(-1e6, 0.0, &state, &cfg), (cfg.roc_min, true));

        assert_eq!(speed_controller(50.0, 0.0, &air, &cfg), (0.0, false));
        let (vdot, _) = speed_controller(52.0, 0.1, &air, &cfg);
        assert_relative_eq!(vdot, 0.1 + 0.3 * 2.0, epsilon = 1e-12);
        assert_eq!(speed_controller(1e6, 0.0, &air, &cfg), (cfg.vdot_max, true));
    }

    #[test]
    fn tecs_examples() {
        let cfg = test_autopilot_config();
        let (_, air) = level(50.0);
        let t = trim();
        let none = EnergyMeasurement::default();
        let out = tecs(0.0, 0.0, &air, &t, &cfg, STANDARD_GRAVITY, &TecsState::default(), &none, 0.02);
        assert_eq!((out.theta_c, out.throttle), (t.theta, t.throttle));

        let climb = tecs(2.0, 0.0, &air, &t, &cfg, STANDARD_GRAVITY, &TecsState::default(), &none, 0.02);
        assert!(climb.theta_c > t.theta && climb.throttle > t.throttle);

        let vdot = STANDARD_GRAVITY * 2.0 / 50.0;
        let exchange = tecs(2.0, vdot, &air, &t, &cfg, STANDARD_GRAVITY, &TecsState::default(), &none, 0.02);
        assert!(exchange.throttle > t.throttle);
        assert_relative_eq!(exchange.theta_c, t.theta, epsilon = 1e-15);
    }

    #[test]
    fn reference_model_at_rest() {
        let cfg = test_autopilot_config();
        let c = Vector3::new(0.1, 0.05, -0.4);
        let (r, next) = reference_model(
            &c,
            &Vector3::zeros(),
            &ReferenceModelState { angle: c, rate: Vector3::zeros() },
            &cfg,
            0.02,
        );
        assert_eq!(r.angle, c);
        assert_eq!(r.rate, Vector3::zeros());
        assert_eq!(r.accel, Vector3::zeros());
        assert_eq!(next.angle, c);
    }

    #[test]
    fn reference_model_streams_are_consistent() {
        let cfg = test_autopilot_config();
        let dt = 0.02;
        let c = Vector3::new(0.3, -0.1, 0.5);
        let mut model = ReferenceModelState::default();
        let mut stream = Vec::new();
        for _ in 0..800 {
            let (r, next) = reference_model(&c, &Vector3::zeros(), &model, &cfg, dt);
            stream.push(r);
            model = next;
        }
        for pair in stream.windows(2) {
            let fd_angle = (pair[1].angle - pair[0].angle) / dt;
            let fd_rate = (pair[1].rate - pair[0].rate) / dt;
            assert!((fd_angle - pair[1].rate).abs().max() < 1e-4);
            assert!((fd_rate - pair[0].accel).abs().max() < 1e-3);
        }
        assert_relative_eq!(stream.last().unwrap().angle, c, epsilon = 1e-6);
    }

    #[test]
    fn trim_addition() {
        let t = TrimPoint { deflection: [0.01, -0.02, 0.0], ..trim() };
        assert_eq!(add_trim(&Vector3::zeros(), 0.4, &t), (t.deflection(), 0.4));
        let zero = TrimPoint { deflection: [0.0; 3], ..trim() };
        let cmd = Vector3::new(0.1, 0.2, 0.3);
        assert_eq!(add_trim(&cmd, 0.4, &zero).0, cmd);
        assert_relative_eq!(add_trim(&cmd, 1.4, &t).0, Vector3::new(0.11, 0.18, 0.3), epsilon = 1e-15);
        assert_eq!(add_trim(&cmd, 1.4, &t).1, 1.0);
    }

    #[test]
    fn zero_error_fixed_point_does_not_drift() {
        let cfg = test_autopilot_config();
        let (mut state, air) = level(50.0);
        let t = trim();
        state.attitude = Vector3::new(0.0, t.theta, 0.0);
        let mut ap = Autopilot::new(cfg, t, STANDARD_GRAVITY, &state, air.airspeed);
        let raw = GuidanceCommand { airspeed: 50.0, course: 0.0, altitude: 300.0 };
        for _ in 0..1000 {
            let out = ap.step(&raw, &state, &air, &EnergyMeasurement::default(), 0.02);
            assert_eq!(out.phi_c, 0.0);
            assert_eq!(out.theta_c, t.theta);
            assert_eq!(out.throttle_cmd, t.throttle);
            assert_eq!(out.reference.angle, state.attitude);
            assert_eq!(out.reference.accel, Vector3::zeros());
        }
    }

    proptest! {
        #[test]
        fn outputs_respect_limits(
            h_err in -500.0..500.0f64,
            v_err in -30.0..30.0f64,
            chi in -3.2..3.2f64,
            speed in 30.0..80.0f64,
        ) {
            let cfg = test_autopilot_config();
            let (mut state, air) = level(speed);
            state.course = chi;
            let mut ap = Autopilot::new(cfg.clone(), trim(), STANDARD_GRAVITY, &state, speed);
            let raw = GuidanceCommand { airspeed: speed + v_err, course: 0.0, altitude: 300.0 + h_err };
            for _ in 0..50 {
                let out = ap.step(&raw, &state, &air, &EnergyMeasurement::default(), 0.02);
                prop_assert!(out.phi_c.abs() <= cfg.phi_max);
                prop_assert!(out.theta_c.abs() <= cfg.theta_max);
                prop_assert!((0.0..=1.0).contains(&out.throttle_cmd));
                prop_assert!(out.roc_c >= cfg.roc_min && out.roc_c <= cfg.roc_max);
                prop_assert!(out.vdot_c.abs() <= cfg.vdot_max);
            }
        }
    }
}
