//! Static-gain sliding-mode attitude control and its gain-bound system.

use nalgebra::{Matrix3, Vector3};

use crate::aero::{condition_number, NominalMoments, TrueUncertainty, MAX_EFFECTIVENESS_CONDITION};
use crate::error::{Error, Result};
use crate::flightdyn::{
    euler_rate_matrix, euler_rate_matrix_derivative, euler_rate_matrix_inverse, wrap_angle, AirframeParams, BodyState,
};

/// Reference attitude with its first and second time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AttitudeReference {
    pub angle: Vector3<f64>,
    pub rate: Vector3<f64>,
    pub accel: Vector3<f64>,
}

/// Switching term used in place of the sign of `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Switching {
    /// Linear inside the boundary layer, ±1 outside.
    #[default]
    Saturation,
    /// Discontinuous sign function; for analysis and tests only.
    Sign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmcConfig {
    /// Sliding-surface gain Λ [1/s].
    pub lambda: Matrix3<f64>,
    /// Reaching margins ε [rad/s²].
    pub epsilon: Vector3<f64>,
    /// Bounds B on |Ξ_ij|.
    pub bounds: Matrix3<f64>,
    /// Bounds a on |ι_i| [rad/s²].
    pub accel_bounds: Vector3<f64>,
    /// Boundary-layer widths σ [rad/s].
    pub sigma: Vector3<f64>,
    pub switching: Switching,
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !is_hurwitz_gain(&self.lambda) {
            return Err(Error::Config("smc.Lambda: -Lambda must be Hurwitz".into()));
        }
        if self.bounds.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::Config("smc.B entries must be nonnegative".into()));
        }
        if self.accel_bounds.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::Config("smc.a entries must be nonnegative".into()));
        }
        if self.epsilon.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config("smc.epsilon entries must be positive".into()));
        }
        if self.sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("smc.sigma entries must be positive".into()));
        }
        Ok(())
    }
}

/// True when every eigenvalue of `lambda` has positive real part, i.e. −Λ is
/// Hurwitz. Routh–Hurwitz on det(sI + Λ) = s³ + c₂s² + c₁s + c₀.
pub fn is_hurwitz_gain(lambda: &Matrix3<f64>) -> bool {
    let c2 = lambda.trace();
    let c1 = principal_minor_sum(lambda);
    let c0 = lambda.determinant();
    c2 > 0.0 && c0 > 0.0 && c2 * c1 > c0
}

fn principal_minor_sum(m: &Matrix3<f64>) -> f64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)]
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlidingState {
    pub s: Vector3<f64>,
    pub angle_error: Vector3<f64>,
    pub rate_error: Vector3<f64>,
}

/// `s = Θ̇̃ + ΛΘ̃` with each attitude error wrapped into (−π, π].
pub fn sliding_variable(
    angle: &Vector3<f64>,
    angle_rate: &Vector3<f64>,
    reference: &AttitudeReference,
    lambda: &Matrix3<f64>,
) -> SlidingState {
    let angle_error = (angle - reference.angle).map(wrap_angle);
    let rate_error = angle_rate - reference.rate;
    SlidingState { s: rate_error + lambda * angle_error, angle_error, rate_error }
}

/// The linear system `(I − D)k = z` whose solution caps the switching gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintySystem {
    pub d: Matrix3<f64>,
    pub z: Vector3<f64>,
}

pub fn uncertainty_system(
    bounds: &Matrix3<f64>,
    accel_bounds: &Vector3<f64>,
    epsilon: &Vector3<f64>,
) -> Result<UncertaintySystem> {
    let mut d = Matrix3::zeros();
    let mut z = Vector3::zeros();
    for i in 0..3 {
        let bii = bounds[(i, i)];
        if !(bii < 1.0) {
            return Err(Error::DiagonalBound { axis: i + 1, value: bii });
        }
        let scale = 1.0 - bii;
        for j in 0..3 {
            if j != i {
                d[(i, j)] = bounds[(i, j)] / scale;
            }
        }
        z[i] = (accel_bounds[i] + epsilon[i]) / scale;
    }
    Ok(UncertaintySystem { d, z })
}

/// Largest eigenvalue modulus of a real 3×3 matrix, from the roots of its
/// characteristic polynomial.
pub fn spectral_radius(d: &Matrix3<f64>) -> f64 {
    // λ³ + b λ² + c λ + e
    let b = -d.trace();
    let c = principal_minor_sum(d);
    let e = -d.determinant();
    cubic_root_moduli(b, c, e).into_iter().fold(0.0, f64::max)
}

fn cubic(b: f64, c: f64, e: f64, x: f64) -> f64 {
    ((x + b) * x + c) * x + e
}

/// Newton refinement that only accepts steps reducing the residual.
fn polish_root(b: f64, c: f64, e: f64, mut x: f64) -> f64 {
    for _ in 0..8 {
        let f = cubic(b, c, e, x);
        let df = (3.0 * x + 2.0 * b) * x + c;
        if f == 0.0 || df == 0.0 {
            break;
        }
        let candidate = x - f / df;
        if cubic(b, c, e, candidate).abs() < f.abs() {
            x = candidate;
        } else {
            break;
        }
    }
    x
}

fn cubic_root_moduli(b: f64, c: f64, e: f64) -> Vec<f64> {
    use std::f64::consts::PI;
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + e;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);

    if disc > 0.0 {
        // One real root and a complex pair: deflate after polishing the real root.
        let sq = disc.sqrt();
        let real = (-q / 2.0 + sq).cbrt() + (-q / 2.0 - sq).cbrt() - shift;
        let r = polish_root(b, c, e, real);
        let lin = b + r;
        let constant = c + r * lin;
        let pair = lin * lin - 4.0 * constant;
        if pair < 0.0 {
            vec![r.abs(), constant.max(0.0).sqrt()]
        } else {
            let root = pair.sqrt();
            vec![r.abs(), ((-lin + root) / 2.0).abs(), ((-lin - root) / 2.0).abs()]
        }
    } else if p == 0.0 {
        vec![polish_root(b, c, e, -shift).abs()]
    } else {
        let radius = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phase = arg.acos() / 3.0;
        (0..3)
            .map(|k| {
                let t = radius * (phase - 2.0 * PI * k as f64 / 3.0).cos();
                polish_root(b, c, e, t - shift).abs()
            })
            .collect()
    }
}

/// Solves `(I − D)k_d = z` after checking ρ(D) < 1.
pub fn solve_gain_bounds(system: &UncertaintySystem) -> Result<Vector3<f64>> {
    let rho = spectral_radius(&system.d);
    if !(rho < 1.0) {
        return Err(Error::SpectralRadius { rho });
    }
    let k = solve3(&(Matrix3::identity() - system.d), &system.z).ok_or(Error::SpectralRadius { rho })?;
    for (i, &value) in k.iter().enumerate() {
        if value < -1e-12 || !value.is_finite() {
            return Err(Error::NegativeGainBound { axis: i + 1, value });
        }
    }
    Ok(k.map(|v| v.max(0.0)))
}

/// Gaussian elimination with partial pivoting.
fn solve3(a: &Matrix3<f64>, rhs: &Vector3<f64>) -> Option<Vector3<f64>> {
    let mut m = *a;
    let mut y = *rhs;
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))?;
        if m[(pivot, col)] == 0.0 {
            return None;
        }
        m.swap_rows(col, pivot);
        y.swap_rows(col, pivot);
        for row in col + 1..3 {
            let factor = m[(row, col)] / m[(col, col)];
            for k in col..3 {
                m[(row, k)] -= factor * m[(col, k)];
            }
            y[row] -= factor * y[col];
        }
    }
    let mut x = Vector3::zeros();
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[(row, k)] * x[k]).sum();
        x[row] = (y[row] - tail) / m[(row, row)];
    }
    Some(x)
}

/// Everything the startup admissibility gate computes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainBoundReport {
    pub system: UncertaintySystem,
    pub rho: f64,
    pub k_d: Vector3<f64>,
}

pub fn gain_bound_report(cfg: &SmcConfig) -> Result<GainBoundReport> {
    let system = uncertainty_system(&cfg.bounds, &cfg.accel_bounds, &cfg.epsilon)?;
    let rho = spectral_radius(&system.d);
    let k_d = solve_gain_bounds(&system)?;
    Ok(GainBoundReport { system, rho, k_d })
}

/// Π = −ΨJ⁻¹M_a0 + ΨJ⁻¹(ω×Jω) − Ψ̇ω.
pub fn control_pi(
    state: &BodyState,
    m_a0: &Vector3<f64>,
    params: &AirframeParams,
    theta_margin: f64,
) -> Result<Vector3<f64>> {
    let psi_mat = euler_rate_matrix(&state.attitude, theta_margin)?;
    let psi_dot = euler_rate_matrix_derivative(&state.attitude, &state.rates, theta_margin)?;
    let omega = state.rates;
    let psi_j_inv = psi_mat * params.inertia_inverse();
    Ok(psi_j_inv * (omega.cross(&(params.inertia * omega)) - m_a0) - psi_dot * omega)
}

pub fn saturation(s: &Vector3<f64>, sigma: &Vector3<f64>) -> Vector3<f64> {
    s.zip_map(sigma, |si, wi| {
        if si > wi {
            1.0
        } else if si < -wi {
            -1.0
        } else {
            si / wi
        }
    })
}

pub fn switching_term(s: &Vector3<f64>, sigma: &Vector3<f64>, law: Switching) -> Vector3<f64> {
    match law {
        Switching::Saturation => saturation(s, sigma),
        Switching::Sign => s.map(|si| {
            if si > 0.0 {
                1.0
            } else if si < 0.0 {
                -1.0
            } else {
                0.0
            }
        }),
    }
}

/// μ = Θ̈_r − ΛΘ̇̃ − K·sat(s), with K = diag(`gains`).
pub fn control_mu(
    reference_accel: &Vector3<f64>,
    rate_error: &Vector3<f64>,
    s: &Vector3<f64>,
    gains: &Vector3<f64>,
    lambda: &Matrix3<f64>,
    sigma: &Vector3<f64>,
) -> Vector3<f64> {
    reference_accel - lambda * rate_error - gains.component_mul(&saturation(s, sigma))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeControlOutput {
    pub deflection: Vector3<f64>,
    pub pi: Vector3<f64>,
    pub mu: Vector3<f64>,
    pub sliding: SlidingState,
}

/// δ = M_δ0⁻¹ J Ψ⁻¹ (Π + μ).
pub fn attitude_control(
    state: &BodyState,
    reference: &AttitudeReference,
    gains: &Vector3<f64>,
    cfg: &SmcConfig,
    nominal: &NominalMoments,
    params: &AirframeParams,
    theta_margin: f64,
) -> Result<AttitudeControlOutput> {
    let psi_mat = euler_rate_matrix(&state.attitude, theta_margin)?;
    let sliding = sliding_variable(&state.attitude, &(psi_mat * state.rates), reference, &cfg.lambda);
    attitude_control_with(state, reference, &sliding, gains, cfg, nominal, params, theta_margin)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn attitude_control_with(
    state: &BodyState,
    reference: &AttitudeReference,
    sliding: &SlidingState,
    gains: &Vector3<f64>,
    cfg: &SmcConfig,
    nominal: &NominalMoments,
    params: &AirframeParams,
    theta_margin: f64,
) -> Result<AttitudeControlOutput> {
    let condition = condition_number(&nominal.m_delta0);
    if !(condition <= MAX_EFFECTIVENESS_CONDITION) {
        return Err(Error::SingularEffectiveness { condition });
    }
    let m_delta0_inv = nominal.m_delta0.try_inverse().ok_or(Error::SingularEffectiveness { condition })?;
    let psi_inv = euler_rate_matrix_inverse(&state.attitude, theta_margin)?;
    let pi = control_pi(state, &nominal.m_a0, params, theta_margin)?;
    let mu = reference.accel
        - cfg.lambda * sliding.rate_error
        - gains.component_mul(&switching_term(&sliding.s, &cfg.sigma, cfg.switching));
    let deflection = m_delta0_inv * params.inertia * psi_inv * (pi + mu);
    Ok(AttitudeControlOutput { deflection, pi, mu, sliding: *sliding })
}

/// Closed-loop `ṡ = ι − (I + Ξ)K·sw(s)` under the true uncertainty.
pub fn sliding_rate(
    uncertainty: &TrueUncertainty,
    s: &Vector3<f64>,
    gains: &Vector3<f64>,
    sigma: &Vector3<f64>,
    law: Switching,
) -> Vector3<f64> {
    let push = gains.component_mul(&switching_term(s, sigma, law));
    uncertainty.iota - (Matrix3::identity() + uncertainty.xi) * push
}
