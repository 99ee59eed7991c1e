//! Aerodynamic coefficient buildup with multiplicative/additive damage.
//!
//! Every stability and control derivative `C_{f,d}` is scaled by its own
//! damage multiplier `λ_{f,d} = 1 − H·D_{f,d}` and each coefficient family
//! receives an additive bias `H·ΔC_f`, where `H` switches on at the damage
//! onset time. Drag carries only `C_D,0`, the induced term and its bias.

use std::f64::consts::PI;
use std::ops::{Index, IndexMut};

use nalgebra::{Matrix3, RowVector3, Vector3};

use crate::error::{Error, Result};
use crate::flightdyn::{aero_to_body, euler_rate_matrix, AirdataQuantities, AirframeParams, BodyState};
use crate::smc::{control_pi, AttitudeReference};

/// Upper condition-number limit for the nominal control-effectiveness matrix.
pub const MAX_EFFECTIVENESS_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Lift,
    Side,
    Drag,
    Roll,
    Pitch,
    Yaw,
}

impl Family {
    pub const ALL: [Family; 6] = [Family::Lift, Family::Side, Family::Drag, Family::Roll, Family::Pitch, Family::Yaw];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Subscript used in config keys (`C_L_alpha`, `dC_m_asym`, ...).
    pub fn key(self) -> &'static str {
        match self {
            Family::Lift => "L",
            Family::Side => "Y",
            Family::Drag => "D",
            Family::Roll => "l",
            Family::Pitch => "m",
            Family::Yaw => "n",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Derivative {
    Zero,
    Alpha,
    Beta,
    P,
    Q,
    R,
    Xi,
    Eta,
    Zeta,
}

impl Derivative {
    pub const ALL: [Derivative; 9] = [
        Derivative::Zero,
        Derivative::Alpha,
        Derivative::Beta,
        Derivative::P,
        Derivative::Q,
        Derivative::R,
        Derivative::Xi,
        Derivative::Eta,
        Derivative::Zeta,
    ];
    pub const STABILITY: [Derivative; 6] =
        [Derivative::Zero, Derivative::Alpha, Derivative::Beta, Derivative::P, Derivative::Q, Derivative::R];
    pub const CONTROL: [Derivative; 3] = [Derivative::Xi, Derivative::Eta, Derivative::Zeta];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn key(self) -> &'static str {
        match self {
            Derivative::Zero => "0",
            Derivative::Alpha => "alpha",
            Derivative::Beta => "beta",
            Derivative::P => "p",
            Derivative::Q => "q",
            Derivative::R => "r",
            Derivative::Xi => "xi",
            Derivative::Eta => "eta",
            Derivative::Zeta => "zeta",
        }
    }

    /// Value of the variable this derivative multiplies.
    fn variable(self, air: &AirdataQuantities, deflection: &Vector3<f64>) -> f64 {
        match self {
            Derivative::Zero => 1.0,
            Derivative::Alpha => air.alpha,
            Derivative::Beta => air.beta,
            Derivative::P => air.normalized_rates.x,
            Derivative::Q => air.normalized_rates.y,
            Derivative::R => air.normalized_rates.z,
            Derivative::Xi => deflection.x,
            Derivative::Eta => deflection.y,
            Derivative::Zeta => deflection.z,
        }
    }
}

/// A value per (family, derivative) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientTable(pub [[f64; 9]; 6]);

impl CoefficientTable {
    pub const fn filled(value: f64) -> Self {
        Self([[value; 9]; 6])
    }

    pub fn zeros() -> Self {
        Self::filled(0.0)
    }
}

impl Index<(Family, Derivative)> for CoefficientTable {
    type Output = f64;
    fn index(&self, (f, d): (Family, Derivative)) -> &f64 {
        &self.0[f.index()][d.index()]
    }
}

impl IndexMut<(Family, Derivative)> for CoefficientTable {
    fn index_mut(&mut self, (f, d): (Family, Derivative)) -> &mut f64 {
        &mut self.0[f.index()][d.index()]
    }
}

/// Which lift coefficient feeds the induced-drag term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InducedDragLift {
    /// The full, damaged lift coefficient.
    #[default]
    Damaged,
    /// The lift coefficient evaluated with every damage term switched off.
    Nominal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeroCoefficientSet {
    /// Nominal derivatives; the drag row carries only `C_D,0`.
    pub derivatives: CoefficientTable,
    pub induced_drag_lift: InducedDragLift,
    /// Largest usable lift coefficient, consulted by the trim solver.
    pub lift_max: f64,
}

impl AeroCoefficientSet {
    pub fn get(&self, family: Family, derivative: Derivative) -> f64 {
        self.derivatives[(family, derivative)]
    }

    pub fn validate(&self) -> Result<()> {
        for d in Derivative::ALL.into_iter().skip(1) {
            if self.get(Family::Drag, d) != 0.0 {
                return Err(Error::Config(format!(
                    "aero.C_D_{} is not part of the drag model; only C_D_0 is allowed",
                    d.key()
                )));
            }
        }
        if self.derivatives.0.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("aero coefficients must be finite".into()));
        }
        if !(self.lift_max > 0.0) {
            return Err(Error::Config("aero.C_L_max must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DamageConfig {
    /// Onset time t_d [s].
    pub onset: f64,
    /// Damage amount D per derivative, each in [0, 1].
    pub scaling: CoefficientTable,
    /// Asymmetric coefficient bias ΔC per family.
    pub asym: [f64; 6],
}

impl DamageConfig {
    pub fn none() -> Self {
        Self { onset: 0.0, scaling: CoefficientTable::zeros(), asym: [0.0; 6] }
    }

    /// Derivatives with a nonzero damage amount.
    pub fn damaged_derivatives(&self) -> Vec<(Family, Derivative)> {
        Family::ALL
            .into_iter()
            .flat_map(|f| Derivative::ALL.into_iter().map(move |d| (f, d)))
            .filter(|&(f, d)| self.scaling[(f, d)] != 0.0)
            .collect()
    }

    pub fn is_inert(&self) -> bool {
        self.scaling.0.iter().flatten().all(|&d| d == 0.0) && self.asym.iter().all(|&b| b == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.onset >= 0.0) {
            return Err(Error::Config(format!("damage.t_d must be >= 0, got {}", self.onset)));
        }
        for f in Family::ALL {
            for d in Derivative::ALL {
                let v = self.scaling[(f, d)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!("damage.D_{}_{} out of [0,1]: {v}", f.key(), d.key())));
                }
                if f == Family::Drag && v != 0.0 {
                    return Err(Error::Config(format!("damage.D_D_{} has no drag derivative to scale", d.key())));
                }
            }
        }
        if self.asym.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("damage asymmetric biases must be finite".into()));
        }
        Ok(())
    }
}

/// Damage multipliers and biases in effect at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveLambdas {
    pub scale: CoefficientTable,
    pub asym: [f64; 6],
}

impl EffectiveLambdas {
    /// All multipliers one, all biases zero.
    pub fn nominal() -> Self {
        Self { scale: CoefficientTable::filled(1.0), asym: [0.0; 6] }
    }
}

/// Damage multipliers at time `t`; the onset step is right-continuous.
pub fn damage_factors(config: &DamageConfig, t: f64) -> EffectiveLambdas {
    if t < config.onset {
        return EffectiveLambdas::nominal();
    }
    let mut scale = CoefficientTable::filled(1.0);
    for (row, damage_row) in scale.0.iter_mut().zip(config.scaling.0.iter()) {
        for (lambda, damage) in row.iter_mut().zip(damage_row) {
            *lambda = 1.0 - damage;
        }
    }
    EffectiveLambdas { scale, asym: config.asym }
}

/// Coefficient without control-surface contributions, bias included.
fn base_coefficient(
    family: Family,
    air: &AirdataQuantities,
    lambdas: &EffectiveLambdas,
    coeffs: &AeroCoefficientSet,
) -> f64 {
    let zero = Vector3::zeros();
    Derivative::STABILITY
        .iter()
        .map(|&d| lambdas.scale[(family, d)] * coeffs.get(family, d) * d.variable(air, &zero))
        .sum::<f64>()
        + lambdas.asym[family.index()]
}

/// Damaged control derivatives (ξ, η, ζ) of one family.
fn control_row(family: Family, lambdas: &EffectiveLambdas, coeffs: &AeroCoefficientSet) -> RowVector3<f64> {
    let [xi, eta, zeta] = Derivative::CONTROL;
    RowVector3::new(
        lambdas.scale[(family, xi)] * coeffs.get(family, xi),
        lambdas.scale[(family, eta)] * coeffs.get(family, eta),
        lambdas.scale[(family, zeta)] * coeffs.get(family, zeta),
    )
}

fn lift_coefficient(
    air: &AirdataQuantities,
    deflection: &Vector3<f64>,
    lambdas: &EffectiveLambdas,
    coeffs: &AeroCoefficientSet,
) -> f64 {
    base_coefficient(Family::Lift, air, lambdas, coeffs) + (control_row(Family::Lift, lambdas, coeffs) * deflection)[0]
}

fn drag_coefficient(
    air: &AirdataQuantities,
    deflection: &Vector3<f64>,
    lift: f64,
    lambdas: &EffectiveLambdas,
    coeffs: &AeroCoefficientSet,
    params: &AirframeParams,
) -> f64 {
    let induced_lift = match coeffs.induced_drag_lift {
        InducedDragLift::Damaged => lift,
        InducedDragLift::Nominal => lift_coefficient(air, deflection, &EffectiveLambdas::nominal(), coeffs),
    };
    coeffs.get(Family::Drag, Derivative::Zero)
        + induced_lift * induced_lift / (PI * params.oswald * params.aspect_ratio)
        + lambdas.asym[Family::Drag.index()]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceCoefficients {
    pub lift: f64,
    pub side: f64,
    pub drag: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCoefficients {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

/// Lift, side-force and drag coefficients under damage.
pub fn force_coefficients(
    air: &AirdataQuantities,
    deflection: &Vector3<f64>,
    lambdas: &EffectiveLambdas,
    coeffs: &AeroCoefficientSet,
    params: &AirframeParams,
) -> ForceCoefficients {
    let lift = lift_coefficient(air, deflection, lambdas, coeffs);
    let side = Derivative::ALL
        .iter()
        .map(|&d| lambdas.scale[(Family::Side, d)] * coeffs.get(Family::Side, d) * d.variable(air, deflection))
        .sum::<f64>()
        + lambdas.asym[Family::Side.index()];
    let drag = drag_coefficient(air, deflection, lift, lambdas, coeffs, params);
    ForceCoefficients { lift, side, drag }
}

/// Roll, pitch and yaw moment coefficients under damage.
pub fn moment_coefficients(
    air: &AirdataQuantities,
    deflection: &Vector3<f64>,
    lambdas: &EffectiveLambdas,
    coeffs: &AeroCoefficientSet,
) -> MomentCoefficients {
    let family_sum = |f: Family| {
        Derivative::ALL
            .iter()
            .map(|&d| lambdas.scale[(f, d)] * coeffs.get(f, d) * d.variable(air, deflection))
            .sum::<f64>()
            + lambdas.asym[f.index()]
    };
    MomentCoefficients {
        roll: family_sum(Family::Roll),
        pitch: family_sum(Family::Pitch),
        yaw: family_sum(Family::Yaw),
    }
}

pub fn gravity_force(attitude: &Vector3<f64>, params: &AirframeParams) -> Vector3<f64> {
    let (sp, cp) = attitude.x.sin_cos();
    let (st, ct) = attitude.y.sin_cos();
    let weight = params.mass * params.gravity;
    Vector3::new(-st * weight, sp * ct * weight, cp * ct * weight)
}

/// Total body force and its affine split `F = F_a + F_δ·δ + F_T·T`.
///
/// `F_a` holds gravity and the non-control aerodynamic terms. Drag has no
/// control derivatives, so its induced term (which depends on δ through the
/// lift) is carried inside `F_a` at the current deflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceBreakdown {
    pub total: Vector3<f64>,
    pub f_a: Vector3<f64>,
    pub f_delta: Matrix3<f64>,
    pub f_thrust: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBreakdown {
    pub total: Vector3<f64>,
    pub m_a: Vector3<f64>,
    pub m_delta: Matrix3<f64>,
}

pub fn total_forces(
    state: &BodyState,
    air: &AirdataQuantities,
    deflection: &Vector3<f64>,
    thrust: f64,
    lambdas: &EffectiveLambdas,
    coeffs: &AeroCoefficientSet,
    params: &AirframeParams,
) -> ForceBreakdown {
    let t_fa = aero_to_body(air.alpha, air.beta);
    let qs = air.dynamic_pressure * params.s_ref;
    let gravity = gravity_force(&state.attitude, params);

    let c = force_coefficients(air, deflection, lambdas, coeffs, params);
    let total = gravity + Vector3::new(thrust, 0.0, 0.0) + t_fa * (qs * Vector3::new(-c.drag, c.side, -c.lift));

    let lift_base = base_coefficient(Family::Lift, air, lambdas, coeffs);
    let side_base = base_coefficient(Family::Side, air, lambdas, coeffs);
    let f_a = gravity + t_fa * (qs * Vector3::new(-c.drag, side_base, -lift_base));
    let mut control = Matrix3::zeros();
    control.set_row(1, &control_row(Family::Side, lambdas, coeffs));
    control.set_row(2, &(-control_row(Family::Lift, lambdas, coeffs)));
    let f_delta = t_fa * control * qs;

    ForceBreakdown { total, f_a, f_delta, f_thrust: Vector3::x() }
}

pub fn total_moments(
    air: &AirdataQuantities,
    deflection: &Vector3<f64>,
    lambdas: &EffectiveLambdas,
    coeffs: &AeroCoefficientSet,
    params: &AirframeParams,
) -> MomentBreakdown {
    let t_fa = aero_to_body(air.alpha, air.beta);
    let qs = air.dynamic_pressure * params.s_ref;
    let arms = Vector3::new(params.b_ref, params.c_ref, params.b_ref);

    let c = moment_coefficients(air, deflection, lambdas, coeffs);
    let total = t_fa * (qs * Vector3::new(c.roll, c.pitch, c.yaw).component_mul(&arms));

    let base = Vector3::new(
        base_coefficient(Family::Roll, air, lambdas, coeffs),
        base_coefficient(Family::Pitch, air, lambdas, coeffs),
        base_coefficient(Family::Yaw, air, lambdas, coeffs),
    );
    let m_a = t_fa * (qs * base.component_mul(&arms));
    let mut control = Matrix3::zeros();
    control.set_row(0, &(control_row(Family::Roll, lambdas, coeffs) * arms.x));
    control.set_row(1, &(control_row(Family::Pitch, lambdas, coeffs) * arms.y));
    control.set_row(2, &(control_row(Family::Yaw, lambdas, coeffs) * arms.z));
    let m_delta = t_fa * control * qs;

    MomentBreakdown { total, m_a, m_delta }
}

/// Known nominal moment model used by the attitude controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalMoments {
    pub m_a0: Vector3<f64>,
    pub m_delta0: Matrix3<f64>,
}

impl NominalMoments {
    /// Folds a fixed deflection offset (the trim deflection) into the
    /// nominal moment: `M_a0 + M_δ0·δ_off`.
    pub fn with_deflection_offset(mut self, offset: &Vector3<f64>) -> Self {
        self.m_a0 += self.m_delta0 * offset;
        self
    }
}

pub fn condition_number(m: &Matrix3<f64>) -> f64 {
    let sv = m.singular_values();
    let (max, min) = (sv.max(), sv.min());
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Undamaged moment split, with the effectiveness matrix checked for invertibility.
pub fn nominal_moment_terms(
    air: &AirdataQuantities,
    coeffs: &AeroCoefficientSet,
    params: &AirframeParams,
) -> Result<NominalMoments> {
    let split = total_moments(air, &Vector3::zeros(), &EffectiveLambdas::nominal(), coeffs, params);
    let condition = condition_number(&split.m_delta);
    if !(condition <= MAX_EFFECTIVENESS_CONDITION) {
        return Err(Error::SingularEffectiveness { condition });
    }
    Ok(NominalMoments { m_a0: split.m_a, m_delta0: split.m_delta })
}

/// Ground-truth uncertainty terms Ξ and ι seen by the attitude controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueUncertainty {
    pub xi: Matrix3<f64>,
    pub iota: Vector3<f64>,
}

impl TrueUncertainty {
    pub fn within(&self, bounds: &Matrix3<f64>, accel_bounds: &Vector3<f64>) -> (bool, bool) {
        let xi_ok = self.xi.iter().zip(bounds.iter()).all(|(x, b)| x.abs() <= *b);
        let iota_ok = self.iota.iter().zip(accel_bounds.iter()).all(|(x, a)| x.abs() <= *a);
        (xi_ok, iota_ok)
    }
}

/// Computes Ξ = ΨJ⁻¹ΔM_δJΨ⁻¹ and ι = ΨJ⁻¹ΔM_a + Ξ(Π + Θ̈_r − ΛΘ̇̃) from
/// the true damage state. Verification only: the controller never sees it.
///
/// `deflection_offset` is the deflection the controller folds into its
/// nominal moment (zero for the bare control law, the trim deflection inside
/// the autopilot).
#[allow(clippy::too_many_arguments)]
pub fn true_uncertainty(
    state: &BodyState,
    air: &AirdataQuantities,
    lambdas: &EffectiveLambdas,
    coeffs: &AeroCoefficientSet,
    params: &AirframeParams,
    lambda_gain: &Matrix3<f64>,
    reference: &AttitudeReference,
    deflection_offset: &Vector3<f64>,
    theta_margin: f64,
) -> Result<TrueUncertainty> {
    let nominal = nominal_moment_terms(air, coeffs, params)?.with_deflection_offset(deflection_offset);
    let actual = total_moments(air, &Vector3::zeros(), lambdas, coeffs, params);
    let m_delta0_inv =
        nominal.m_delta0.try_inverse().ok_or(Error::SingularEffectiveness { condition: f64::INFINITY })?;

    let delta_m_delta = actual.m_delta * m_delta0_inv - Matrix3::identity();
    let delta_m_a = actual.m_a + actual.m_delta * deflection_offset - nominal.m_a0;

    let psi_mat = euler_rate_matrix(&state.attitude, theta_margin)?;
    let psi_inv = crate::flightdyn::euler_rate_matrix_inverse(&state.attitude, theta_margin)?;
    let j = &params.inertia;
    let j_inv = params.inertia_inverse();
    let xi = psi_mat * j_inv * delta_m_delta * j * psi_inv;

    let pi = control_pi(state, &nominal.m_a0, params, theta_margin)?;
    let rate_error = psi_mat * state.rates - reference.rate;
    let iota = psi_mat * j_inv * delta_m_a + xi * (pi + reference.accel - lambda_gain * rate_error);
    Ok(TrueUncertainty { xi, iota })
}
