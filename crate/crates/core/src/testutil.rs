//! Surrogate airframe and coefficients shared by unit tests.

use nalgebra::Matrix3;

use crate::aero::{AeroCoefficientSet, CoefficientTable, Derivative, Family, InducedDragLift};
use crate::flightdyn::{AirframeParams, STANDARD_GRAVITY};

pub(crate) fn test_airframe() -> AirframeParams {
    AirframeParams {
        mass: 120.0,
        inertia: Matrix3::new(60.0, 0.0, -3.0, 0.0, 110.0, 0.0, -3.0, 0.0, 160.0),
        s_ref: 2.4,
        c_ref: 0.55,
        b_ref: 4.4,
        rho_air: 1.225,
        gravity: STANDARD_GRAVITY,
        oswald: 0.8,
        aspect_ratio: 4.4 * 4.4 / 2.4,
    }
}

pub(crate) fn test_coefficients() -> AeroCoefficientSet {
    use Derivative::*;
    use Family::*;
    let mut c = CoefficientTable::zeros();
    let entries = [
        (Lift, Zero, 0.15),
        (Lift, Alpha, 5.2),
        (Lift, Q, 6.0),
        (Lift, Eta, 0.35),
        (Side, Beta, -0.45),
        (Side, R, 0.25),
        (Side, Zeta, 0.15),
        (Drag, Zero, 0.025),
        (Roll, Beta, -0.06),
        (Roll, P, -0.45),
        (Roll, R, 0.10),
        (Roll, Xi, 0.18),
        (Roll, Zeta, 0.012),
        (Pitch, Zero, 0.03),
        (Pitch, Alpha, -0.9),
        (Pitch, Q, -14.0),
        (Pitch, Eta, -1.1),
        (Yaw, Beta, 0.07),
        (Yaw, P, -0.03),
        (Yaw, R, -0.12),
        (Yaw, Xi, -0.012),
        (Yaw, Zeta, -0.07),
    ];
    for (f, d, v) in entries {
        c[(f, d)] = v;
    }
    AeroCoefficientSet { derivatives: c, induced_drag_lift: InducedDragLift::Damaged, lift_max: 1.2 }
}
