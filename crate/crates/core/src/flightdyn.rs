//! Rigid-body kinematics and dynamics in the body-fixed frame.
//!
//! Attitude uses roll-pitch-yaw Euler angles. Every function that needs the
//! Euler-rate matrix takes an explicit pitch margin and fails with
//! [`Error::EulerSingularity`] instead of returning a near-infinite matrix.

use nalgebra::{Matrix3, SVector, Vector3};

use crate::error::{Error, Result};

/// Standard gravity [m/s²].
pub const STANDARD_GRAVITY: f64 = 9.80665;
/// Airspeed clamp used for the normalized rates and dynamic pressure [m/s].
pub const DEFAULT_V_EPS: f64 = 1.0;
/// Distance from ±π/2 at which pitch is declared singular [rad].
pub const DEFAULT_THETA_MARGIN: f64 = 0.05;

/// Wraps an angle into (−π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::PI;
    if angle > -PI && angle <= PI {
        return angle;
    }
    let wrapped = angle.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Nine rigid-body states plus the altitude/course navigation augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyState {
    /// Body-frame velocity (u, v, w) [m/s].
    pub velocity: Vector3<f64>,
    /// Euler angles (φ, θ, ψ) [rad].
    pub attitude: Vector3<f64>,
    /// Body rates (p, q, r) [rad/s].
    pub rates: Vector3<f64>,
    /// Altitude [m].
    pub altitude: f64,
    /// Course angle [rad].
    pub course: f64,
}

pub const STATE_DIM: usize = 11;

impl BodyState {
    pub fn to_vector(&self) -> SVector<f64, STATE_DIM> {
        let mut x = SVector::<f64, STATE_DIM>::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.velocity);
        x.fixed_rows_mut::<3>(3).copy_from(&self.attitude);
        x.fixed_rows_mut::<3>(6).copy_from(&self.rates);
        x[9] = self.altitude;
        x[10] = self.course;
        x
    }

    pub fn from_vector(x: &SVector<f64, STATE_DIM>) -> Self {
        Self {
            velocity: x.fixed_rows::<3>(0).into_owned(),
            attitude: x.fixed_rows::<3>(3).into_owned(),
            rates: x.fixed_rows::<3>(6).into_owned(),
            altitude: x[9],
            course: x[10],
        }
    }

    /// Wraps φ, ψ and χ into (−π, π]; θ is left alone.
    pub fn wrapped(mut self) -> Self {
        self.attitude.x = wrap_angle(self.attitude.x);
        self.attitude.z = wrap_angle(self.attitude.z);
        self.course = wrap_angle(self.course);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }

    /// Euler-angle rates Θ̇ = Ψω.
    pub fn attitude_rates(&self, theta_margin: f64) -> Result<Vector3<f64>> {
        Ok(euler_rate_matrix(&self.attitude, theta_margin)? * self.rates)
    }
}

/// Time derivative of a [`BodyState`], laid out identically.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub velocity: Vector3<f64>,
    pub attitude: Vector3<f64>,
    pub rates: Vector3<f64>,
    pub altitude: f64,
    pub course: f64,
}

impl StateDerivative {
    pub fn to_vector(&self) -> SVector<f64, STATE_DIM> {
        BodyState {
            velocity: self.velocity,
            attitude: self.attitude,
            rates: self.rates,
            altitude: self.altitude,
            course: self.course,
        }
        .to_vector()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirdataQuantities {
    /// True airspeed, clamped below at `v_eps` [m/s].
    pub airspeed: f64,
    /// Angle of attack [rad].
    pub alpha: f64,
    /// Sideslip [rad].
    pub beta: f64,
    /// Dynamic pressure [Pa].
    pub dynamic_pressure: f64,
    /// Normalized rates (p̄, q̄, r̄).
    pub normalized_rates: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AirframeParams {
    /// [kg]
    pub mass: f64,
    /// Inertia tensor [kg·m²].
    pub inertia: Matrix3<f64>,
    /// Reference wing area [m²].
    pub s_ref: f64,
    /// Reference chord [m].
    pub c_ref: f64,
    /// Reference span [m].
    pub b_ref: f64,
    /// [kg/m³]
    pub rho_air: f64,
    /// [m/s²]
    pub gravity: f64,
    pub oswald: f64,
    pub aspect_ratio: f64,
}

impl AirframeParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("S_ref", self.s_ref),
            ("C_ref", self.c_ref),
            ("B_ref", self.b_ref),
            ("rho_air", self.rho_air),
            ("g", self.gravity),
            ("e0", self.oswald),
            ("AR", self.aspect_ratio),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("airframe.{name} must be positive, got {value}")));
            }
        }
        let j = &self.inertia;
        if (j - j.transpose()).abs().max() > 1e-12 * j.abs().max() {
            return Err(Error::Config("airframe inertia tensor must be symmetric".into()));
        }
        if j.cholesky().is_none() {
            return Err(Error::Config("airframe inertia tensor must be positive definite".into()));
        }
        Ok(())
    }

    pub fn inertia_inverse(&self) -> Matrix3<f64> {
        self.inertia.try_inverse().expect("inertia tensor is validated positive definite")
    }
}

fn check_pitch(theta: f64, theta_margin: f64) -> Result<()> {
    if theta.abs() < std::f64::consts::FRAC_PI_2 - theta_margin {
        Ok(())
    } else {
        Err(Error::EulerSingularity { theta: theta.abs(), margin: theta_margin })
    }
}

/// Euler-angle rate matrix Ψ with Θ̇ = Ψω.
pub fn euler_rate_matrix(attitude: &Vector3<f64>, theta_margin: f64) -> Result<Matrix3<f64>> {
    let (phi, theta) = (attitude.x, attitude.y);
    check_pitch(theta, theta_margin)?;
    let (sp, cp) = phi.sin_cos();
    let (tt, ct) = (theta.tan(), theta.cos());
    Ok(Matrix3::new(
        1.0,
        sp * tt,
        cp * tt, //
        0.0,
        cp,
        -sp, //
        0.0,
        sp / ct,
        cp / ct,
    ))
}

/// Closed-form Ψ⁻¹.
pub fn euler_rate_matrix_inverse(attitude: &Vector3<f64>, theta_margin: f64) -> Result<Matrix3<f64>> {
    let (phi, theta) = (attitude.x, attitude.y);
    check_pitch(theta, theta_margin)?;
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    Ok(Matrix3::new(
        1.0,
        0.0,
        -st, //
        0.0,
        cp,
        sp * ct, //
        0.0,
        -sp,
        cp * ct,
    ))
}

/// Ψ̇ along the trajectory, by the chain rule with Θ̇ = Ψω (Ψ does not depend on ψ).
pub fn euler_rate_matrix_derivative(
    attitude: &Vector3<f64>,
    rates: &Vector3<f64>,
    theta_margin: f64,
) -> Result<Matrix3<f64>> {
    let psi_mat = euler_rate_matrix(attitude, theta_margin)?;
    let attitude_rates = psi_mat * rates;
    let (phi, theta) = (attitude.x, attitude.y);
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let tt = st / ct;
    let sec2 = 1.0 / (ct * ct);

    let d_phi = Matrix3::new(
        0.0,
        cp * tt,
        -sp * tt, //
        0.0,
        -sp,
        -cp, //
        0.0,
        cp / ct,
        -sp / ct,
    );
    let d_theta = Matrix3::new(
        0.0,
        sp * sec2,
        cp * sec2, //
        0.0,
        0.0,
        0.0, //
        0.0,
        sp * st * sec2,
        cp * st * sec2,
    );
    Ok(d_phi * attitude_rates.x + d_theta * attitude_rates.y)
}

/// Rotation from the aerodynamic frame to the body frame.
pub fn aero_to_body(alpha: f64, beta: f64) -> Matrix3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Matrix3::new(
        ca * cb,
        -ca * sb,
        -sa, //
        sb,
        cb,
        0.0, //
        sa * cb,
        -sa * sb,
        ca,
    )
}

/// Airspeed, flow angles, dynamic pressure and normalized rates.
///
/// Airspeed is clamped below at `v_eps`; `atan2(0, 0)` evaluates to zero so a
/// motionless body reports zero flow angles.
pub fn airdata(
    velocity: &Vector3<f64>,
    rates: &Vector3<f64>,
    params: &AirframeParams,
    v_eps: f64,
) -> AirdataQuantities {
    let (u, v, w) = (velocity.x, velocity.y, velocity.z);
    let airspeed = velocity.norm().max(v_eps);
    let alpha = w.atan2(u);
    let beta = v.atan2((u * u + w * w).sqrt());
    let dynamic_pressure = 0.5 * params.rho_air * airspeed * airspeed;
    let span_scale = params.b_ref / (2.0 * airspeed);
    let chord_scale = params.c_ref / (2.0 * airspeed);
    AirdataQuantities {
        airspeed,
        alpha,
        beta,
        dynamic_pressure,
        normalized_rates: Vector3::new(span_scale * rates.x, chord_scale * rates.y, span_scale * rates.z),
    }
}

/// Newton–Euler state derivative for total body force `force` and moment `moment`.
///
/// Altitude and course follow flat-earth, no-wind kinematics (χ̇ = ψ̇).
pub fn rigid_body_derivative(
    state: &BodyState,
    force: &Vector3<f64>,
    moment: &Vector3<f64>,
    params: &AirframeParams,
    theta_margin: f64,
) -> Result<StateDerivative> {
    let psi_mat = euler_rate_matrix(&state.attitude, theta_margin)?;
    let omega = state.rates;
    let j = &params.inertia;
    let j_inv = params.inertia_inverse();

    let velocity = -omega.cross(&state.velocity) + force / params.mass;
    let attitude = psi_mat * omega;
    let rates = j_inv * (moment - omega.cross(&(j * omega)));

    let (sp, cp) = state.attitude.x.sin_cos();
    let (st, ct) = state.attitude.y.sin_cos();
    let (u, v, w) = (state.velocity.x, state.velocity.y, state.velocity.z);
    let altitude = u * st - v * sp * ct - w * cp * ct;

    Ok(StateDerivative { velocity, attitude, rates, altitude, course: attitude.z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::test_airframe;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(wrap_angle(0.3), 0.3);
    }

    #[test]
    fn euler_rate_matrix_identity_at_zero() {
        let m = euler_rate_matrix(&Vector3::zeros(), DEFAULT_THETA_MARGIN).unwrap();
        assert_eq!(m, Matrix3::identity());
    }

    #[test]
    fn euler_rate_matrix_at_quarter_roll() {
        let m = euler_rate_matrix(&Vector3::new(FRAC_PI_2, 0.0, 0.0), DEFAULT_THETA_MARGIN).unwrap();
        let expected = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_relative_eq!(m, expected, epsilon = 1e-15);
    }

    #[test]
    fn euler_rate_matrix_rejects_near_vertical_pitch() {
        let err = euler_rate_matrix(&Vector3::new(0.2, 1.55, 0.0), DEFAULT_THETA_MARGIN).unwrap_err();
        assert!(matches!(err, Error::EulerSingularity { .. }));
        assert!(euler_rate_matrix_derivative(&Vector3::new(0.0, -1.53, 0.0), &Vector3::zeros(), 0.05).is_err());
    }

    fn finite_difference_psi_dot(attitude: Vector3<f64>, rates: Vector3<f64>) -> Matrix3<f64> {
        // Central difference of Ψ(Θ(t)) along Θ̇ = Ψω, step 1e-6.
        let h = 1e-6;
        let theta_dot = euler_rate_matrix(&attitude, 0.05).unwrap() * rates;
        let plus = euler_rate_matrix(&(attitude + theta_dot * h), 0.05).unwrap();
        let minus = euler_rate_matrix(&(attitude - theta_dot * h), 0.05).unwrap();
        (plus - minus) / (2.0 * h)
    }

    #[test]
    fn psi_dot_zero_for_zero_rates() {
        let m = euler_rate_matrix_derivative(&Vector3::new(0.4, -0.3, 1.0), &Vector3::zeros(), 0.05).unwrap();
        assert_eq!(m, Matrix3::zeros());
    }

    #[test]
    fn psi_dot_matches_finite_difference() {
        for (att, w) in [
            (Vector3::zeros(), Vector3::new(0.0, 1.0, 0.0)),
            (Vector3::new(0.3, 0.2, 0.1), Vector3::new(0.1, -0.2, 0.05)),
        ] {
            let analytic = euler_rate_matrix_derivative(&att, &w, 0.05).unwrap();
            let oracle = finite_difference_psi_dot(att, w);
            assert_relative_eq!(analytic, oracle, epsilon = 1e-6);
        }
    }

    #[test]
    fn aero_to_body_special_cases() {
        assert_eq!(aero_to_body(0.0, 0.0), Matrix3::identity());
        let expected = Matrix3::new(0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0);
        assert_relative_eq!(aero_to_body(FRAC_PI_2, 0.0), expected, epsilon = 1e-15);
        let t = aero_to_body(0.3, 0.1);
        assert_relative_eq!(t.transpose() * t, Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn airdata_examples() {
        let p = test_airframe();
        let a = airdata(&Vector3::new(30.0, 0.0, 0.0), &Vector3::zeros(), &p, DEFAULT_V_EPS);
        assert_eq!(a.airspeed, 30.0);
        assert_eq!((a.alpha, a.beta), (0.0, 0.0));
        assert_relative_eq!(a.dynamic_pressure, 551.25, epsilon = 1e-12);

        let still = airdata(&Vector3::zeros(), &Vector3::new(1.0, 1.0, 1.0), &p, DEFAULT_V_EPS);
        assert_eq!(still.airspeed, DEFAULT_V_EPS);
        assert_eq!((still.alpha, still.beta), (0.0, 0.0));
        assert!(still.normalized_rates.iter().all(|r| r.is_finite()));

        let climb = airdata(&Vector3::new(30.0, 0.0, 3.0), &Vector3::zeros(), &p, DEFAULT_V_EPS);
        assert_relative_eq!(climb.alpha, 0.099_668_652_491_162_04, epsilon = 1e-15);
    }

    #[test]
    fn rigid_body_derivative_at_rest() {
        let p = test_airframe();
        let state = BodyState { velocity: Vector3::new(40.0, 1.0, 2.0), ..Default::default() };
        let d = rigid_body_derivative(&state, &Vector3::zeros(), &Vector3::zeros(), &p, 0.05).unwrap();
        assert_eq!(d.velocity, Vector3::zeros());
        assert_eq!(d.attitude, Vector3::zeros());
        assert_eq!(d.rates, Vector3::zeros());
    }

    #[test]
    fn principal_axis_spin_has_no_rate_change() {
        let mut p = test_airframe();
        p.inertia = Matrix3::from_diagonal(&Vector3::new(60.0, 110.0, 160.0));
        let state = BodyState { rates: Vector3::new(2.0, 0.0, 0.0), ..Default::default() };
        let d = rigid_body_derivative(&state, &Vector3::zeros(), &Vector3::zeros(), &p, 0.05).unwrap();
        assert_eq!(d.rates, Vector3::zeros());
    }

    #[test]
    fn rigid_body_derivative_matches_scalar_expansion() {
        let p = test_airframe();
        let state = BodyState {
            velocity: Vector3::new(45.0, -2.0, 3.5),
            attitude: Vector3::new(0.2, -0.1, 0.7),
            rates: Vector3::new(0.3, -0.2, 0.15),
            altitude: 100.0,
            course: 0.7,
        };
        let f = Vector3::new(120.0, -30.0, -900.0);
        let m = Vector3::new(14.0, -8.0, 3.0);
        let d = rigid_body_derivative(&state, &f, &m, &p, 0.05).unwrap();

        // Hand-expanded cross products.
        let (u, v, w) = (45.0, -2.0, 3.5);
        let (pr, qr, rr) = (0.3, -0.2, 0.15);
        let u_dot = -(qr * w - rr * v) + f.x / p.mass;
        let v_dot = -(rr * u - pr * w) + f.y / p.mass;
        let w_dot = -(pr * v - qr * u) + f.z / p.mass;
        assert_relative_eq!(d.velocity, Vector3::new(u_dot, v_dot, w_dot), epsilon = 1e-12);

        let (jxx, jyy, jzz, jxz) = (60.0, 110.0, 160.0, -3.0);
        let hx = jxx * pr + jxz * rr;
        let hy = jyy * qr;
        let hz = jxz * pr + jzz * rr;
        let gyro = Vector3::new(qr * hz - rr * hy, rr * hx - pr * hz, pr * hy - qr * hx);
        let rhs = m - gyro;
        // Solve the 2x2 roll/yaw block of J by hand, pitch separately.
        let det = jxx * jzz - jxz * jxz;
        let p_dot = (jzz * rhs.x - jxz * rhs.z) / det;
        let r_dot = (-jxz * rhs.x + jxx * rhs.z) / det;
        let q_dot = rhs.y / jyy;
        assert_relative_eq!(d.rates, Vector3::new(p_dot, q_dot, r_dot), epsilon = 1e-12);

        let (phi, theta) = (0.2_f64, -0.1_f64);
        let h_dot = u * theta.sin() - v * phi.sin() * theta.cos() - w * phi.cos() * theta.cos();
        assert_relative_eq!(d.altitude, h_dot, epsilon = 1e-12);
        assert_eq!(d.course, d.attitude.z);
    }

    fn admissible_attitude() -> impl Strategy<Value = Vector3<f64>> {
        (-PI..PI, -1.45..1.45, -PI..PI).prop_map(|(a, b, c)| Vector3::new(a, b, c))
    }

    proptest! {
        #[test]
        fn psi_times_inverse_is_identity(att in admissible_attitude()) {
            let m = euler_rate_matrix(&att, 0.05).unwrap();
            let inv = euler_rate_matrix_inverse(&att, 0.05).unwrap();
            prop_assert!((m * inv - Matrix3::identity()).abs().max() < 1e-10);
        }

        #[test]
        fn aero_to_body_is_proper_rotation(alpha in -PI..PI, beta in -FRAC_PI_2..FRAC_PI_2) {
            let t = aero_to_body(alpha, beta);
            prop_assert!((t.transpose() * t - Matrix3::identity()).abs().max() < 1e-12);
            prop_assert!((t.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn derivative_is_linear_in_force_and_moment(
            f1 in prop::array::uniform3(-1e3..1e3f64),
            f2 in prop::array::uniform3(-1e3..1e3f64),
            m1 in prop::array::uniform3(-1e2..1e2f64),
        ) {
            let p = test_airframe();
            let state = BodyState {
                velocity: Vector3::new(40.0, 1.0, 2.0),
                attitude: Vector3::new(0.1, 0.2, 0.3),
                rates: Vector3::new(0.1, 0.05, -0.1),
                ..Default::default()
            };
            let (f1, f2, m1) = (Vector3::from(f1), Vector3::from(f2), Vector3::from(m1));
            let zero = rigid_body_derivative(&state, &Vector3::zeros(), &Vector3::zeros(), &p, 0.05).unwrap();
            let a = rigid_body_derivative(&state, &f1, &m1, &p, 0.05).unwrap();
            let b = rigid_body_derivative(&state, &f2, &Vector3::zeros(), &p, 0.05).unwrap();
            let ab = rigid_body_derivative(&state, &(f1 + f2), &m1, &p, 0.05).unwrap();
            let lhs = ab.to_vector() - zero.to_vector();
            let rhs = (a.to_vector() - zero.to_vector()) + (b.to_vector() - zero.to_vector());
            prop_assert!((lhs - rhs).abs().max() < 1e-9);
        }

        #[test]
        fn airdata_sideslip_mirror(u in 1.0..80.0f64, v in -20.0..20.0f64, w in -20.0..20.0f64) {
            let p = test_airframe();
            let a = airdata(&Vector3::new(u, v, w), &Vector3::zeros(), &p, DEFAULT_V_EPS);
            let b = airdata(&Vector3::new(u, -v, w), &Vector3::zeros(), &p, DEFAULT_V_EPS);
            prop_assert_eq!(a.airspeed, b.airspeed);
            prop_assert_eq!(a.dynamic_pressure, b.dynamic_pressure);
            prop_assert_eq!(a.beta, -b.beta);
        }
    }
}
