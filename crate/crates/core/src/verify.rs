//! The acceptance suite: eight pass/fail criteria over the solver, the control
//! law, the closed loop and the numerics.

use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aero::{nominal_moment_terms, total_forces, total_moments, EffectiveLambdas};
use crate::error::{Error, ErrorClass};
use crate::flightdyn::{
    aero_to_body, airdata, euler_rate_matrix, euler_rate_matrix_derivative, euler_rate_matrix_inverse,
    rigid_body_derivative, wrap_angle, BodyState,
};
use crate::scenario::Scenario;
use crate::sim::{
    integrate_step, prepare, run_scenario, trim_residual, AeroForceModel, GravityOnly, HeldInputs, PlantState, SimRun,
    StepContext,
};
use crate::smc::{
    attitude_control, gain_bound_report, saturation, solve_gain_bounds, spectral_radius, uncertainty_system,
    AttitudeReference, SmcConfig, Switching,
};
use crate::telemetry::TelemetryRecord;

#[derive(Debug, Clone, Default)]
pub struct AcceptanceOptions {
    /// Overrides the scenario's draw seed.
    pub seed: Option<u64>,
    /// Overrides the scenario's draw count.
    pub draws: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {} {}: {} ({:.2} s of {:.0} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs_f64()
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct AcceptanceReport {
    pub criteria: Vec<CriterionResult>,
}

impl AcceptanceReport {
    pub fn lines(&self) -> Vec<String> {
        self.criteria.iter().map(CriterionResult::line).collect()
    }

    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.criteria.iter().filter(|c| !c.passed).count()
    }
}

/// Outcome of one check before timing is attached.
#[derive(Debug, Clone)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }

    fn failed(detail: impl Into<String>) -> Self {
        Self::new(false, detail)
    }
}

fn timed(id: usize, name: &'static str, budget_s: f64, f: impl FnOnce() -> Check) -> CriterionResult {
    let start = Instant::now();
    let check = f();
    let elapsed = start.elapsed();
    let budget = Duration::from_secs_f64(budget_s);
    let within = elapsed <= budget;
    let detail = if within { check.detail } else { format!("{}; over the time budget", check.detail) };
    CriterionResult { id, name, passed: check.passed && within, detail, elapsed, budget }
}

/// Runs all eight criteria against `scenario`, which should be the shipped
/// damaged scenario or a variant of it.
pub fn run_acceptance(scenario: &Scenario, options: &AcceptanceOptions) -> AcceptanceReport {
    let seed = options.seed.unwrap_or(scenario.verify.seed);
    let draws = options.draws.unwrap_or(scenario.verify.draws);
    let mut criteria = vec![
        timed(1, "gain-bound solver", 5.0, || gain_solver_fuzz(10_000, seed)),
        timed(2, "exact linearization", 5.0, || linearization_check(scenario, 1_000, seed)),
    ];

    let mut shipped: Option<Result<SimRun, String>> = None;
    criteria.push(timed(3, "reaching condition", 60.0, || {
        let run = run_scenario(scenario).map_err(|f| f.to_string());
        let check = match &run {
            Ok(run) => reaching_condition(run, scenario),
            Err(e) => Check::failed(format!("run failed: {e}")),
        };
        shipped = Some(run);
        check
    }));
    let shipped = shipped.expect("criterion 3 always runs");
    criteria.push(timed(4, "boundary-layer confinement and gain behavior", 60.0, || match &shipped {
        Ok(run) => boundary_layer_confinement(run, scenario),
        Err(e) => Check::failed(format!("run failed: {e}")),
    }));
    criteria.push(timed(5, "nominal-phase low effort", 60.0, || match &shipped {
        Ok(run) => nominal_phase(run, scenario),
        Err(e) => Check::failed(format!("run failed: {e}")),
    }));
    criteria.push(timed(6, "outer-loop survival", 900.0, || outer_loop_survival(scenario, draws, seed)));
    criteria.push(timed(7, "numerics", 30.0, || numerics_suite(scenario)));
    criteria.push(timed(8, "admissibility gates", 5.0, || admissibility_gates(scenario)));
    AcceptanceReport { criteria }
}

/// k = Σₙ Dⁿz, summed until the terms stop contributing.
pub fn neumann_gain_bounds(d: &Matrix3<f64>, z: &Vector3<f64>) -> Vector3<f64> {
    let mut term = *z;
    let mut sum = *z;
    for _ in 0..100_000 {
        term = d * term;
        sum += term;
        if term.abs().max() <= 1e-17 * sum.abs().max().max(1e-300) {
            break;
        }
    }
    sum
}

/// Random admissible (B, a, ε): nonnegative entries, B_ii < 1 and ρ(D) below
/// `rho_max`.
pub fn random_admissible_bounds(rng: &mut impl Rng, rho_max: f64) -> (Matrix3<f64>, Vector3<f64>, Vector3<f64>) {
    loop {
        let b = Matrix3::from_fn(|i, j| if i == j { rng.random_range(0.0..0.95) } else { rng.random_range(0.0..0.6) });
        let a = Vector3::from_fn(|_, _| rng.random_range(0.0..20.0));
        let eps = Vector3::from_fn(|_, _| rng.random_range(1e-3..2.0));
        let system = uncertainty_system(&b, &a, &eps).expect("diagonal below one");
        if spectral_radius(&system.d) < rho_max {
            return (b, a, eps);
        }
    }
}

pub fn gain_solver_fuzz(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut negative = 0;
    for _ in 0..cases {
        let (b, a, eps) = random_admissible_bounds(&mut rng, 0.97);
        let system = uncertainty_system(&b, &a, &eps).expect("admissible");
        let k = match solve_gain_bounds(&system) {
            Ok(k) => k,
            Err(e) => return Check::failed(format!("solver rejected an admissible case: {e}")),
        };
        let oracle = neumann_gain_bounds(&system.d, &system.z);
        let err = ((k - oracle).abs().max()) / oracle.abs().max().max(1.0);
        worst = worst.max(err);
        negative += usize::from(k.iter().any(|v| *v < 0.0));
    }
    Check::new(
        worst <= 1e-10 && negative == 0,
        format!("{cases} cases, worst relative deviation from series {worst:.2e}, {negative} negative"),
    )
}

/// Random state with moderate attitude and rates at flying airspeed.
pub fn random_flight_state(rng: &mut impl Rng) -> BodyState {
    let v = rng.random_range(30.0..80.0);
    let alpha: f64 = rng.random_range(-0.1..0.25);
    let beta: f64 = rng.random_range(-0.15..0.15);
    BodyState {
        velocity: Vector3::new(v * alpha.cos() * beta.cos(), v * beta.sin(), v * alpha.sin() * beta.cos()),
        attitude: Vector3::new(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2), rng.random_range(-3.1..3.1)),
        rates: Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
        altitude: rng.random_range(50.0..2000.0),
        course: rng.random_range(-3.1..3.1),
    }
}

fn random_reference(rng: &mut impl Rng) -> AttitudeReference {
    AttitudeReference {
        angle: Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-3.1..3.1)),
        rate: Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5)),
        accel: Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
    }
}

/// Applies the control law to the undamaged plant and compares the resulting
/// Euler-angle acceleration with the commanded sliding dynamics.
pub fn linearization_check(scenario: &Scenario, cases: usize, seed: u64) -> Check {
    let params = &scenario.airframe;
    let coeffs = &scenario.aero;
    let margin = scenario.sim.theta_margin;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let state = random_flight_state(&mut rng);
        let reference = random_reference(&mut rng);
        let gains = Vector3::from_fn(|_, _| rng.random_range(0.0..20.0));
        let air = airdata(&state.velocity, &state.rates, params, scenario.sim.v_eps);
        let result = nominal_moment_terms(&air, coeffs, params).and_then(|nominal| {
            let cfg = SmcConfig { switching: Switching::Saturation, ..scenario.smc.clone() };
            let out = attitude_control(&state, &reference, &gains, &cfg, &nominal, params, margin)?;
            let lambdas = EffectiveLambdas::nominal();
            let force = total_forces(&state, &air, &out.deflection, 0.0, &lambdas, coeffs, params).total;
            let moment = total_moments(&air, &out.deflection, &lambdas, coeffs, params).total;
            let d = rigid_body_derivative(&state, &force, &moment, params, margin)?;
            let psi = euler_rate_matrix(&state.attitude, margin)?;
            let psi_dot = euler_rate_matrix_derivative(&state.attitude, &state.rates, margin)?;
            let achieved = psi_dot * state.rates + psi * d.rates;
            let target = reference.accel
                - cfg.lambda * out.sliding.rate_error
                - gains.component_mul(&saturation(&out.sliding.s, &cfg.sigma));
            Ok((achieved - target).abs().max() / target.abs().max().max(1.0))
        });
        match result {
            Ok(err) => worst = worst.max(err),
            Err(e) => return Check::failed(format!("control law failed on an admissible state: {e}")),
        }
    }
    Check::new(worst <= 1e-8, format!("{cases} states, worst deviation {worst:.2e}"))
}

/// The pass rule covers ticks with every |s_i| > sigma_i. The same inequality
/// over ticks with any axis outside the layer, at the applied gains and at k_d,
/// and the sign of the adaptive Lyapunov rate are reported alongside.
pub fn reaching_condition(run: &SimRun, scenario: &Scenario) -> Check {
    let s = &run.summary;
    let tol = scenario.sim.reaching_tolerance;
    let sigma = sigma_of(scenario);
    let audited = s.xi_bound_violations == 0 && s.iota_bound_violations == 0;
    let all_outside = run.records.iter().filter(|r| r.outside_layer != 0).count();
    let partial: Vec<_> = run.records.iter().filter(|r| !inside_layer(r, &sigma)).collect();
    let applied = partial.iter().filter(|r| r.sdot_s > r.reaching_bound + tol).count();
    let capped = partial.iter().filter(|r| r.sdot_s_kd > r.reaching_bound + tol).count();
    let rising = partial.iter().filter(|r| r.v2_rate > tol).count();
    Check::new(
        audited && s.reaching_violations == 0,
        format!(
            "{} violations over {all_outside} ticks with every |s_i| > sigma_i; with any axis outside ({} ticks): \
             {applied} at the applied gains, {capped} at k_d, {rising} with V2 rising; \
             bound audit: {} Xi, {} iota exceedances",
            s.reaching_violations,
            partial.len(),
            s.xi_bound_violations,
            s.iota_bound_violations
        ),
    )
}

fn sigma_of(scenario: &Scenario) -> Vector3<f64> {
    scenario.smc.sigma
}

fn inside_layer(r: &TelemetryRecord, sigma: &Vector3<f64>) -> bool {
    r.sliding().iter().zip(sigma.iter()).all(|(s, w)| s.abs() <= *w)
}

pub fn boundary_layer_confinement(run: &SimRun, scenario: &Scenario) -> Check {
    let sigma = sigma_of(scenario);
    let settle = scenario.damage.onset + scenario.verify.settle_time;
    let k_d = Vector3::from(run.setup.k_d);
    let escaped = run.records.iter().filter(|r| r.t_s >= settle && !inside_layer(r, &sigma)).count();
    let mut decreasing = 0;
    let mut moved_inside = 0;
    for pair in run.records.windows(2) {
        let (prev, next) = (pair[0].gains(), pair[1].gains());
        decreasing += usize::from((0..3).any(|i| next[i] < prev[i]));
        moved_inside += usize::from(inside_layer(&pair[1], &sigma) && next != prev);
    }
    let over_cap = run.records.iter().filter(|r| (0..3).any(|i| r.gains()[i] > k_d[i])).count();
    let last_outside = run.records.iter().filter(|r| !inside_layer(r, &sigma)).map(|r| r.t_s).fold(f64::NAN, f64::max);
    Check::new(
        escaped == 0 && decreasing == 0 && moved_inside == 0 && over_cap == 0,
        format!(
            "{escaped} ticks outside the layer after t = {settle} s (last exit at {last_outside:.2} s); \
             {decreasing} gain decreases, {moved_inside} updates inside the layer, {over_cap} above k_d"
        ),
    )
}

pub fn nominal_phase(run: &SimRun, scenario: &Scenario) -> Check {
    let sigma = sigma_of(scenario);
    let onset = scenario.damage.onset;
    let k0 = scenario.rasmc.k0;
    let mut unexplained = 0;
    let mut excited = [false; 3];
    for r in run.records.iter().take_while(|r| r.t_s < onset) {
        let s = r.sliding();
        for i in 0..3 {
            excited[i] |= s[i].abs() > sigma[i];
            if r.gains()[i] != k0[i] && !excited[i] {
                unexplained += 1;
            }
        }
    }
    let window_start = onset - scenario.verify.quiet_window;
    let steady = run
        .records
        .iter()
        .filter(|r| r.t_s >= window_start && r.t_s < onset)
        .fold(Vector3::zeros(), |acc: Vector3<f64>, r| acc.sup(&r.attitude_error().abs()))
        .map(f64::to_degrees);
    let limit = scenario.verify.steady_tolerance_deg;
    Check::new(
        unexplained == 0 && steady.max() < limit,
        format!(
            "gain moves without a layer exit: {unexplained}; steady error in [{window_start}, {onset}) s \
             [{:.2e}, {:.2e}, {:.2e}] deg (limit {limit})",
            steady.x, steady.y, steady.z
        ),
    )
}

/// The shipped damage pattern with every nonzero amount redrawn uniformly in
/// [min, max] and every bias uniformly in [−bias, bias].
pub fn draw_damage(scenario: &Scenario, rng: &mut impl Rng) -> Scenario {
    let v = &scenario.verify;
    let mut out = scenario.clone();
    for (f, d) in scenario.damage.damaged_derivatives() {
        out.damage.scaling[(f, d)] = rng.random_range(v.draw_damage_min..=v.draw_damage_max);
    }
    for bias in out.damage.asym.iter_mut() {
        *bias = rng.random_range(-v.draw_bias_max..=v.draw_bias_max);
    }
    out.overrides.push("randomized damage draw".into());
    out
}

#[derive(Debug, Clone)]
pub struct DrawOutcome {
    pub index: usize,
    pub result: Result<DrawErrors, String>,
}

/// Post-damage altitude [m], airspeed [m/s] and course [deg] errors of one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawErrors {
    /// Largest error after onset.
    pub peak: [f64; 3],
    /// Largest error over the final window of the run.
    pub settled: [f64; 3],
}

/// Largest altitude [m], airspeed [m/s] and course [deg] errors from `from` on.
pub fn post_damage_errors(records: &[TelemetryRecord], from: f64) -> [f64; 3] {
    records.iter().filter(|r| r.t_s >= from).fold([0.0; 3], |acc, r| {
        [
            acc[0].max((r.h_c_m - r.h_m).abs()),
            acc[1].max((r.v_c_mps - r.v_tas_mps).abs()),
            acc[2].max(wrap_angle(r.chi_c_rad - r.chi_rad).abs().to_degrees()),
        ]
    })
}

pub fn run_draws(scenario: &Scenario, draws: usize, seed: u64) -> Vec<DrawOutcome> {
    let window_start = scenario.sim.t_end - scenario.verify.envelope_window_s;
    (0..draws)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
            let drawn = draw_damage(scenario, &mut rng);
            let result = match run_scenario(&drawn) {
                Ok(run) if run.records.iter().all(TelemetryRecord::is_finite) => Ok(DrawErrors {
                    peak: post_damage_errors(&run.records, drawn.damage.onset),
                    settled: post_damage_errors(&run.records, window_start),
                }),
                Ok(_) => Err("non-finite telemetry".to_string()),
                Err(failure) => Err(failure.error.to_string()),
            };
            DrawOutcome { index, result }
        })
        .collect()
}

/// Every draw must finish with finite telemetry and no divergence or
/// singularity exit. How many draws end inside the tracking envelope is
/// reported but does not decide the outcome.
pub fn outer_loop_survival(scenario: &Scenario, draws: usize, seed: u64) -> Check {
    let v = &scenario.verify;
    let envelope = [v.envelope_altitude_m, v.envelope_airspeed_mps, v.envelope_course_deg];
    let outcomes = run_draws(scenario, draws, seed);
    let mut peak = [0.0f64; 3];
    let mut settled_inside = 0;
    let mut failures = Vec::new();
    for o in &outcomes {
        match &o.result {
            Ok(errors) => {
                for (p, e) in peak.iter_mut().zip(errors.peak) {
                    *p = p.max(e);
                }
                if (0..3).all(|i| errors.settled[i] <= envelope[i]) {
                    settled_inside += 1;
                }
            }
            Err(e) => failures.push(format!("draw {}: {e}", o.index)),
        }
    }
    let mut detail = format!(
        "{}/{} draws bounded; peak errors {:.1} m, {:.1} m/s, {:.1} deg; {}/{} end within {} m, {} m/s, {} deg",
        outcomes.len() - failures.len(),
        outcomes.len(),
        peak[0],
        peak[1],
        peak[2],
        settled_inside,
        outcomes.len(),
        envelope[0],
        envelope[1],
        envelope[2],
    );
    if !failures.is_empty() {
        detail.push_str(&format!("; {}", failures.join("; ")));
    }
    Check::new(failures.is_empty(), detail)
}

/// Relative-or-absolute deviation.
fn deviation(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max().max(1.0)
}

/// log₂ of the error ratio between successive step halvings over `horizon`.
pub fn observed_rk4_order(scenario: &Scenario, dt: f64, horizon: f64) -> crate::Result<f64> {
    let setup = prepare(scenario)?;
    let trim = setup.trim;
    let params = &scenario.airframe;
    let model = AeroForceModel { params, coeffs: &scenario.aero, damage: &scenario.damage, v_eps: scenario.sim.v_eps };
    let ctx = StepContext {
        model: &model,
        params,
        turbine: &scenario.turbine,
        theta_margin: scenario.sim.theta_margin,
        divergence_limit: scenario.sim.divergence_limit,
    };
    let mut start = PlantState {
        body: BodyState {
            velocity: Vector3::new(trim.airspeed * trim.alpha.cos(), 1.5, trim.airspeed * trim.alpha.sin()),
            attitude: Vector3::new(0.2, trim.theta, 0.3),
            rates: Vector3::new(0.3, -0.1, 0.05),
            altitude: scenario.sim.h0,
            course: 0.3,
        },
        thrust: trim.thrust,
    };
    start.body.course = start.body.attitude.z;
    let inputs = HeldInputs { deflection: trim.deflection() + Vector3::new(0.02, -0.01, 0.01), throttle: 0.7 };
    let propagate = |h: f64| -> crate::Result<Vec<f64>> {
        let steps = (horizon / h).round() as usize;
        let mut plant = start;
        for n in 0..steps {
            plant = integrate_step(&plant, &inputs, &ctx, n as f64 * h, h)?;
        }
        let mut v: Vec<f64> = plant.body.to_vector().iter().copied().collect();
        v.push(plant.thrust);
        Ok(v)
    };
    let coarse = propagate(dt)?;
    let mid = propagate(dt / 2.0)?;
    let fine = propagate(dt / 4.0)?;
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok((diff(&coarse, &mid) / diff(&mid, &fine)).log2())
}

/// Relative drift of g·h + ½‖V‖² over `horizon` for a gravity-only body.
pub fn ballistic_energy_drift(scenario: &Scenario, dt: f64, horizon: f64) -> crate::Result<f64> {
    let params = &scenario.airframe;
    let model = GravityOnly { params };
    let ctx = StepContext {
        model: &model,
        params,
        turbine: &scenario.turbine,
        theta_margin: scenario.sim.theta_margin,
        divergence_limit: scenario.sim.divergence_limit,
    };
    let mut plant = PlantState {
        body: BodyState {
            velocity: Vector3::new(40.0, 2.0, -5.0),
            attitude: Vector3::new(0.1, 0.2, 0.0),
            rates: Vector3::new(0.05, 0.02, -0.03),
            altitude: 1000.0,
            course: 0.0,
        },
        thrust: scenario.turbine.thrust_idle,
    };
    let energy = |b: &BodyState| params.gravity * b.altitude + 0.5 * b.velocity.norm_squared();
    let e0 = energy(&plant.body);
    let steps = (horizon / dt).round() as usize;
    let inputs = HeldInputs::default();
    for n in 0..steps {
        plant = integrate_step(&plant, &inputs, &ctx, n as f64 * dt, dt)?;
    }
    Ok(((energy(&plant.body) - e0) / e0).abs())
}

pub fn numerics_suite(scenario: &Scenario) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.verify.seed ^ 0x7);
    let margin = scenario.sim.theta_margin;
    let mut orth = 0.0f64;
    let mut inverse = 0.0f64;
    let mut rate_fd = 0.0f64;
    for _ in 0..1_000 {
        let t = aero_to_body(rng.random_range(-3.1..3.1), rng.random_range(-1.5..1.5));
        orth = orth.max((t.transpose() * t - Matrix3::identity()).abs().max());
        let state = random_flight_state(&mut rng);
        let (Ok(psi), Ok(psi_inv), Ok(psi_dot)) = (
            euler_rate_matrix(&state.attitude, margin),
            euler_rate_matrix_inverse(&state.attitude, margin),
            euler_rate_matrix_derivative(&state.attitude, &state.rates, margin),
        ) else {
            return Check::failed("Euler-rate matrix rejected an admissible attitude");
        };
        inverse = inverse.max((psi * psi_inv - Matrix3::identity()).abs().max());
        let attitude_rate = psi * state.rates;
        let h = 1e-6;
        let plus = euler_rate_matrix(&(state.attitude + attitude_rate * h), margin);
        let minus = euler_rate_matrix(&(state.attitude - attitude_rate * h), margin);
        if let (Ok(plus), Ok(minus)) = (plus, minus) {
            rate_fd = rate_fd.max(deviation(&psi_dot, &((plus - minus) / (2.0 * h))));
        }
    }

    let order = observed_rk4_order(scenario, 0.02, 1.0);
    let drift = ballistic_energy_drift(scenario, 1e-3, 10.0);
    let residual = prepare(scenario).and_then(|setup| {
        trim_residual(&setup.trim, &scenario.airframe, &scenario.aero, scenario.sim.h0, margin).map(|r| r.norm())
    });
    let (order, drift, residual) = match (order, drift, residual) {
        (Ok(o), Ok(d), Ok(r)) => (o, d, r),
        (o, d, r) => {
            let e = [o.err(), d.err(), r.err()].into_iter().flatten().next();
            return Check::failed(format!("numerics setup failed: {}", e.map_or(String::new(), |e| e.to_string())));
        }
    };
    Check::new(
        orth <= 1e-12 && inverse <= 1e-10 && rate_fd <= 1e-5 && order >= 3.8 && drift < 1e-6 && residual < 1e-8,
        format!(
            "orthogonality {orth:.1e}, Psi*Psi^-1 {inverse:.1e}, Psi-dot vs FD {rate_fd:.1e}, \
             RK4 order {order:.2}, energy drift {drift:.1e}, trim residual {residual:.1e}"
        ),
    )
}

/// Expected startup rejection for a deliberately broken variant.
fn expect_rejection(
    label: &str,
    scenario: &Scenario,
    class: ErrorClass,
    matches: impl Fn(&Error) -> bool,
) -> Option<String> {
    match prepare(scenario) {
        Ok(_) => Some(format!("{label}: accepted")),
        Err(e) if e.class() == class && matches(&e) => None,
        Err(e) => Some(format!("{label}: wrong error {e}")),
    }
}

pub fn admissibility_gates(scenario: &Scenario) -> Check {
    let mut problems = Vec::new();

    let mut diagonal = scenario.clone();
    diagonal.smc.bounds[(1, 1)] = 1.0;
    problems.extend(expect_rejection("B_22 = 1", &diagonal, ErrorClass::Admissibility, |e| {
        matches!(e, Error::DiagonalBound { axis: 2, .. })
    }));

    let mut coupled = scenario.clone();
    coupled.smc.bounds = Matrix3::new(0.5, 0.6, 0.6, 0.6, 0.5, 0.6, 0.6, 0.6, 0.5);
    problems.extend(expect_rejection(
        "rho(D) >= 1",
        &coupled,
        ErrorClass::Admissibility,
        |e| matches!(e, Error::SpectralRadius { rho } if *rho >= 1.0),
    ));

    let mut singular = scenario.clone();
    for f in [crate::aero::Family::Roll, crate::aero::Family::Yaw] {
        singular.aero.derivatives[(f, crate::aero::Derivative::Xi)] = 0.0;
    }
    problems.extend(expect_rejection("no aileron effectiveness", &singular, ErrorClass::Admissibility, |e| {
        matches!(e, Error::SingularEffectiveness { .. })
    }));

    if let Err(e) = gain_bound_report(&scenario.smc) {
        problems.push(format!("shipped bounds rejected: {e}"));
    }
    Check::new(
        problems.is_empty(),
        if problems.is_empty() {
            "B_ii >= 1, rho(D) >= 1 and singular control effectiveness all rejected before simulation".to_string()
        } else {
            problems.join("; ")
        },
    )
}
