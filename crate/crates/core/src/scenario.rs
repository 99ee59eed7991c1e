//! Scenario files: TOML with one section per subsystem plus a `[[command]]`
//! schedule. Every problem is reported against its dotted key path.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::aero::{
    condition_number, AeroCoefficientSet, CoefficientTable, DamageConfig, Derivative, Family, InducedDragLift,
    MAX_EFFECTIVENESS_CONDITION,
};
use crate::autopilot::{AutopilotConfig, GuidanceCommand};
use crate::error::{Error, Result, SchemaIssue};
use crate::flightdyn::{AirframeParams, DEFAULT_THETA_MARGIN, DEFAULT_V_EPS, STANDARD_GRAVITY};
use crate::propulsion::TurbineParams;
use crate::smc::{SmcConfig, Switching};

/// The damaged reference scenario shipped with the crate.
pub const DEFAULT_SCENARIO: &str = include_str!("../../../scenarios/default.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Physics step [s].
    #[serde(default = "default_dt_phys")]
    pub dt_phys: f64,
    /// Controller rate [Hz].
    #[serde(default = "default_f_ctrl")]
    pub f_ctrl: f64,
    /// Run length [s].
    pub t_end: f64,
    /// Trim airspeed [m/s].
    pub v_trim: f64,
    /// Initial altitude [m].
    pub h0: f64,
    /// Initial course and heading [deg].
    #[serde(default)]
    pub course0_deg: f64,
    #[serde(default = "default_theta_margin")]
    pub theta_margin: f64,
    #[serde(default = "default_v_eps")]
    pub v_eps: f64,
    /// Any state component above this magnitude aborts the run.
    #[serde(default = "default_divergence_limit")]
    pub divergence_limit: f64,
    /// Coefficient C of the reaching-condition tolerance C·dt [rad²/s²].
    #[serde(default = "default_reaching_tolerance")]
    pub reaching_tolerance: f64,
    #[serde(default = "default_trim_max_iter")]
    pub trim_max_iter: usize,
}

fn default_dt_phys() -> f64 {
    0.001
}
fn default_f_ctrl() -> f64 {
    50.0
}
fn default_theta_margin() -> f64 {
    DEFAULT_THETA_MARGIN
}
fn default_v_eps() -> f64 {
    DEFAULT_V_EPS
}
fn default_divergence_limit() -> f64 {
    1e6
}
fn default_reaching_tolerance() -> f64 {
    0.05
}
fn default_trim_max_iter() -> usize {
    100
}

impl SimConfig {
    pub fn control_dt(&self) -> f64 {
        1.0 / self.f_ctrl
    }

    /// Physics substeps per control period.
    pub fn substeps(&self) -> usize {
        (self.control_dt() / self.dt_phys).round() as usize
    }

    /// Number of control periods in the run.
    pub fn ticks(&self) -> usize {
        (self.t_end * self.f_ctrl).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.dt_phys > 0.0) || !(self.f_ctrl > 0.0) {
            return fail("sim.dt_phys and sim.f_ctrl must be positive".into());
        }
        let ratio = self.control_dt() / self.dt_phys;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 1.0 {
            return fail(format!(
                "sim: control period 1/f_ctrl must be an integer multiple of dt_phys (ratio {ratio})"
            ));
        }
        if !(self.t_end > 0.0) {
            return fail(format!("sim.t_end must be positive, got {}", self.t_end));
        }
        if !(self.v_trim > self.v_eps) {
            return fail("sim.v_trim must exceed sim.v_eps".into());
        }
        if !(self.theta_margin > 0.0 && self.theta_margin < std::f64::consts::FRAC_PI_2) {
            return fail("sim.theta_margin must lie in (0, pi/2)".into());
        }
        if !(self.divergence_limit > 0.0) || !(self.reaching_tolerance >= 0.0) || self.trim_max_iter == 0 {
            return fail("sim: divergence_limit, reaching_tolerance and trim_max_iter must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasmcConfig {
    /// Adaptation rates γ.
    pub gamma: Vector3<f64>,
    /// Initial gains k0 [rad/s²].
    pub k0: Vector3<f64>,
}

/// One guidance setpoint, active from `t` until the next entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedCommand {
    pub t: f64,
    pub command: GuidanceCommand,
}

/// Settings of the verification harness.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Time after damage onset treated as transient [s].
    #[serde(default = "default_settle_time")]
    pub settle_time: f64,
    /// Length of the pre-damage window checked for steady tracking [s].
    #[serde(default = "default_quiet_window")]
    pub quiet_window: f64,
    /// Steady-state attitude error limit [deg].
    #[serde(default = "default_steady_tolerance")]
    pub steady_tolerance_deg: f64,
    /// Number of randomized damage draws.
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Smallest drawn damage amount.
    #[serde(default = "default_draw_damage_min")]
    pub draw_damage_min: f64,
    /// Largest drawn damage amount.
    #[serde(default = "default_draw_damage_max")]
    pub draw_damage_max: f64,
    /// Largest drawn bias magnitude.
    #[serde(default = "default_draw_bias_max")]
    pub draw_bias_max: f64,
    /// Post-damage error envelope for the randomized draws.
    #[serde(default = "default_envelope_altitude")]
    pub envelope_altitude_m: f64,
    #[serde(default = "default_envelope_airspeed")]
    pub envelope_airspeed_mps: f64,
    #[serde(default = "default_envelope_course")]
    pub envelope_course_deg: f64,
    /// Length of the final window the envelope is checked over [s].
    #[serde(default = "default_envelope_window")]
    pub envelope_window_s: f64,
}

fn default_settle_time() -> f64 {
    20.0
}
fn default_quiet_window() -> f64 {
    5.0
}
fn default_steady_tolerance() -> f64 {
    0.1
}
fn default_draws() -> usize {
    25
}
fn default_seed() -> u64 {
    2024
}
fn default_draw_damage_min() -> f64 {
    0.1
}
fn default_envelope_altitude() -> f64 {
    50.0
}
fn default_envelope_airspeed() -> f64 {
    10.0
}
fn default_envelope_course() -> f64 {
    30.0
}
fn default_envelope_window() -> f64 {
    10.0
}
fn default_draw_damage_max() -> f64 {
    0.9
}
fn default_draw_bias_max() -> f64 {
    0.03
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("verify: {m}")));
        if !(0.0..=1.0).contains(&self.draw_damage_min)
            || !(0.0..=1.0).contains(&self.draw_damage_max)
            || self.draw_damage_min > self.draw_damage_max
        {
            return fail("draw_damage_min <= draw_damage_max must both lie in [0, 1]");
        }
        if !(self.draw_bias_max >= 0.0) {
            return fail("draw_bias_max must be nonnegative");
        }
        if self.draws == 0 {
            return fail("draws must be at least 1");
        }
        let positive = [
            self.settle_time,
            self.quiet_window,
            self.steady_tolerance_deg,
            self.envelope_altitude_m,
            self.envelope_airspeed_mps,
            self.envelope_course_deg,
            self.envelope_window_s,
        ];
        if positive.iter().any(|x| !(*x > 0.0)) {
            return fail("windows, tolerances and envelope limits must be positive");
        }
        Ok(())
    }
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            settle_time: default_settle_time(),
            quiet_window: default_quiet_window(),
            steady_tolerance_deg: default_steady_tolerance(),
            draws: default_draws(),
            seed: default_seed(),
            draw_damage_min: default_draw_damage_min(),
            draw_damage_max: default_draw_damage_max(),
            draw_bias_max: default_draw_bias_max(),
            envelope_altitude_m: default_envelope_altitude(),
            envelope_airspeed_mps: default_envelope_airspeed(),
            envelope_course_deg: default_envelope_course(),
            envelope_window_s: default_envelope_window(),
        }
    }
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub airframe: AirframeParams,
    pub aero: AeroCoefficientSet,
    pub damage: DamageConfig,
    pub smc: SmcConfig,
    pub rasmc: RasmcConfig,
    pub autopilot: AutopilotConfig,
    pub turbine: TurbineParams,
    pub sim: SimConfig,
    pub commands: Vec<TimedCommand>,
    pub verify: VerifyConfig,
    /// SHA-256 of the source bytes.
    pub config_hash: String,
    /// Programmatic changes applied after parsing, in order.
    pub overrides: Vec<String>,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let text =
            String::from_utf8(bytes).map_err(|e| Error::Config(format!("{}: not UTF-8: {e}", path.display())))?;
        parse_scenario(&text)
    }

    pub fn shipped_default() -> Result<Self> {
        parse_scenario(DEFAULT_SCENARIO)
    }

    /// Guidance command in force at time `t`.
    pub fn command_at(&self, t: f64) -> GuidanceCommand {
        self.commands.iter().take_while(|c| c.t <= t).last().unwrap_or(&self.commands[0]).command
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.sim.t_end = t_end;
        self.overrides.push(format!("t_end={t_end}"));
        self
    }

    pub fn without_damage(mut self) -> Self {
        self.damage = DamageConfig { onset: self.damage.onset, ..DamageConfig::none() };
        self.overrides.push("no_damage".into());
        self
    }

    /// Validation of cross-section invariants that single sections cannot see.
    pub fn validate(&self) -> Result<()> {
        self.airframe.validate()?;
        self.aero.validate()?;
        self.check_control_effectiveness()?;
        self.damage.validate()?;
        self.smc.validate()?;
        self.autopilot.validate()?;
        self.turbine.validate()?;
        self.sim.validate()?;
        self.verify.validate()?;
        if self.rasmc.gamma.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::Config("rasmc.gamma entries must be positive".into()));
        }
        if self.rasmc.k0.iter().any(|k| !(*k >= 0.0)) {
            return Err(Error::Config("rasmc.k0 entries must be nonnegative".into()));
        }
        if self.commands.is_empty() {
            return Err(Error::Config("at least one [[command]] entry is required".into()));
        }
        if self.commands.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::Config("[[command]] entries must be sorted by t".into()));
        }
        if self.sim.v_trim < self.autopilot.v_min {
            return Err(Error::Config("sim.v_trim is below autopilot.v_min".into()));
        }
        Ok(())
    }
}

impl Scenario {
    /// The nominal control-effectiveness matrix is M_δ0 up to a rotation and
    /// the positive factor QS, so its conditioning decides invertibility at
    /// every flight condition.
    fn check_control_effectiveness(&self) -> Result<()> {
        let arms = Vector3::new(self.airframe.b_ref, self.airframe.c_ref, self.airframe.b_ref);
        let families = [Family::Roll, Family::Pitch, Family::Yaw];
        let m = Matrix3::from_fn(|i, j| arms[i] * self.aero.get(families[i], Derivative::CONTROL[j]));
        let condition = condition_number(&m);
        if !(condition <= MAX_EFFECTIVENESS_CONDITION) {
            return Err(Error::SingularEffectiveness { condition });
        }
        Ok(())
    }
}

pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AirframeSection {
    mass: f64,
    inertia: [[f64; 3]; 3],
    s_ref: f64,
    c_ref: f64,
    b_ref: f64,
    rho_air: f64,
    #[serde(default = "standard_gravity")]
    gravity: f64,
    oswald: f64,
    aspect_ratio: Option<f64>,
}

fn standard_gravity() -> f64 {
    STANDARD_GRAVITY
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixInput {
    Diagonal([f64; 3]),
    Nested([[f64; 3]; 3]),
    Flat([f64; 9]),
}

impl MatrixInput {
    fn into_matrix(self) -> Matrix3<f64> {
        match self {
            MatrixInput::Diagonal(d) => Matrix3::from_diagonal(&Vector3::from(d)),
            MatrixInput::Nested(rows) => Matrix3::from_fn(|i, j| rows[i][j]),
            MatrixInput::Flat(v) => Matrix3::from_row_slice(&v),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SmcSection {
    #[serde(rename = "Lambda")]
    lambda: MatrixInput,
    epsilon: [f64; 3],
    #[serde(rename = "B")]
    bounds: MatrixInput,
    a: [f64; 3],
    sigma: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RasmcSection {
    gamma: [f64; 3],
    #[serde(default = "unit_gains")]
    k0: [f64; 3],
}

fn unit_gains() -> [f64; 3] {
    [1.0; 3]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CommandEntry {
    t: f64,
    airspeed: f64,
    course_deg: f64,
    altitude: f64,
}

const SECTIONS: [&str; 10] =
    ["airframe", "aero", "damage", "smc", "rasmc", "autopilot", "turbine", "sim", "command", "verify"];

/// Parses and validates a scenario, collecting every schema problem.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let root: toml::Table = toml::from_str(text).map_err(|e| Error::Config(format!("TOML syntax: {e}")))?;
    let mut issues = Vec::new();

    for key in root.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            issues.push(issue(key, "unknown section"));
        }
    }

    let airframe = typed_section::<AirframeSection>(&root, "airframe", &mut issues).map(|a| AirframeParams {
        mass: a.mass,
        inertia: Matrix3::from_fn(|i, j| a.inertia[i][j]),
        s_ref: a.s_ref,
        c_ref: a.c_ref,
        b_ref: a.b_ref,
        rho_air: a.rho_air,
        gravity: a.gravity,
        oswald: a.oswald,
        aspect_ratio: a.aspect_ratio.unwrap_or(a.b_ref * a.b_ref / a.s_ref),
    });
    let aero = table_section(&root, "aero", &mut issues).and_then(|t| parse_aero(t, &mut issues));
    let damage = table_section(&root, "damage", &mut issues).and_then(|t| parse_damage(t, &mut issues));
    let smc = typed_section::<SmcSection>(&root, "smc", &mut issues).map(|s| SmcConfig {
        lambda: s.lambda.into_matrix(),
        epsilon: Vector3::from(s.epsilon),
        bounds: s.bounds.into_matrix(),
        accel_bounds: Vector3::from(s.a),
        sigma: Vector3::from(s.sigma),
        switching: Switching::Saturation,
    });
    let rasmc = typed_section::<RasmcSection>(&root, "rasmc", &mut issues)
        .map(|r| RasmcConfig { gamma: Vector3::from(r.gamma), k0: Vector3::from(r.k0) });
    let autopilot = typed_section::<AutopilotConfig>(&root, "autopilot", &mut issues);
    let turbine = typed_section::<TurbineSection>(&root, "turbine", &mut issues).map(|t| TurbineParams {
        thrust_max: t.thrust_max,
        thrust_idle: t.thrust_idle,
        tau: t.tau,
    });
    let sim = typed_section::<SimConfig>(&root, "sim", &mut issues);
    let verify = match root.get("verify") {
        None => Some(VerifyConfig::default()),
        Some(_) => typed_section::<VerifyConfig>(&root, "verify", &mut issues),
    };
    let commands = parse_commands(&root, &mut issues);

    if !issues.is_empty() {
        return Err(Error::Schema(issues));
    }
    let scenario = Scenario {
        airframe: airframe.unwrap(),
        aero: aero.unwrap(),
        damage: damage.unwrap(),
        smc: smc.unwrap(),
        rasmc: rasmc.unwrap(),
        autopilot: autopilot.unwrap(),
        turbine: turbine.unwrap(),
        sim: sim.unwrap(),
        commands: commands.unwrap(),
        verify: verify.unwrap(),
        config_hash: config_hash(text.as_bytes()),
        overrides: Vec::new(),
    };
    scenario.validate()?;
    Ok(scenario)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TurbineSection {
    thrust_max: f64,
    thrust_idle: f64,
    tau: f64,
}

fn issue(key: &str, message: &str) -> SchemaIssue {
    SchemaIssue { key: key.to_string(), message: message.to_string() }
}

fn table_section<'a>(root: &'a toml::Table, name: &str, issues: &mut Vec<SchemaIssue>) -> Option<&'a toml::Table> {
    match root.get(name) {
        None => {
            issues.push(issue(name, "missing section"));
            None
        }
        Some(toml::Value::Table(t)) => Some(t),
        Some(_) => {
            issues.push(issue(name, "expected a table"));
            None
        }
    }
}

fn typed_section<T: DeserializeOwned>(root: &toml::Table, name: &str, issues: &mut Vec<SchemaIssue>) -> Option<T> {
    let table = table_section(root, name, issues)?;
    deserialize_at(toml::Value::Table(table.clone()), name, issues)
}

fn deserialize_at<T: DeserializeOwned>(value: toml::Value, prefix: &str, issues: &mut Vec<SchemaIssue>) -> Option<T> {
    match serde_path_to_error::deserialize::<_, T>(value) {
        Ok(v) => Some(v),
        Err(err) => {
            let path = err.path().to_string();
            let message = err.inner().to_string();
            let mut key = if path.is_empty() || path == "." { prefix.to_string() } else { format!("{prefix}.{path}") };
            // Missing fields are reported against the field itself.
            if let Some(field) = message.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
                key = format!("{key}.{field}");
            }
            issues.push(SchemaIssue { key, message });
            None
        }
    }
}

fn number(value: &toml::Value) -> Option<f64> {
    match value {
        toml::Value::Float(f) => Some(*f),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn family_from_key(key: &str) -> Option<Family> {
    Family::ALL.into_iter().find(|f| f.key() == key)
}

fn derivative_from_key(key: &str) -> Option<Derivative> {
    Derivative::ALL.into_iter().find(|d| d.key() == key)
}

/// Splits `C_L_alpha`-style names into family and derivative.
fn split_coefficient(name: &str, prefix: &str) -> Option<(Family, Derivative)> {
    let rest = name.strip_prefix(prefix)?;
    let (family, derivative) = rest.split_once('_')?;
    Some((family_from_key(family)?, derivative_from_key(derivative)?))
}

fn parse_aero(table: &toml::Table, issues: &mut Vec<SchemaIssue>) -> Option<AeroCoefficientSet> {
    let mut derivatives = CoefficientTable::zeros();
    let mut lift_max = None;
    let mut induced_drag_lift = InducedDragLift::Damaged;
    let before = issues.len();
    for (key, value) in table {
        let path = format!("aero.{key}");
        match key.as_str() {
            "C_L_max" => match number(value) {
                Some(v) => lift_max = Some(v),
                None => issues.push(issue(&path, "expected a number")),
            },
            "induced_drag_lift" => match value.as_str() {
                Some("damaged") => induced_drag_lift = InducedDragLift::Damaged,
                Some("nominal") => induced_drag_lift = InducedDragLift::Nominal,
                _ => issues.push(issue(&path, "expected \"damaged\" or \"nominal\"")),
            },
            _ => match (split_coefficient(key, "C_"), number(value)) {
                (Some((Family::Drag, d)), Some(_)) if d != Derivative::Zero => {
                    issues.push(issue(&path, "drag carries only C_D_0"))
                }
                (Some(fd), Some(v)) => derivatives[fd] = v,
                (Some(_), None) => issues.push(issue(&path, "expected a number")),
                (None, _) => issues.push(issue(&path, "unknown coefficient")),
            },
        }
    }
    let Some(lift_max) = lift_max else {
        issues.push(issue("aero.C_L_max", "missing field"));
        return None;
    };
    (issues.len() == before).then_some(AeroCoefficientSet { derivatives, induced_drag_lift, lift_max })
}

fn parse_damage(table: &toml::Table, issues: &mut Vec<SchemaIssue>) -> Option<DamageConfig> {
    let mut damage = DamageConfig::none();
    let mut onset = None;
    let before = issues.len();
    for (key, value) in table {
        let path = format!("damage.{key}");
        let Some(v) = number(value) else {
            issues.push(issue(&path, "expected a number"));
            continue;
        };
        if key == "t_d" {
            if v < 0.0 {
                issues.push(issue(&path, &format!("must be >= 0, got {v}")));
            }
            onset = Some(v);
        } else if let Some(fd) = split_coefficient(key, "D_") {
            if !(0.0..=1.0).contains(&v) {
                issues.push(issue(&path, &format!("{key} out of [0,1], got {v}")));
            } else if fd.0 == Family::Drag {
                issues.push(issue(&path, "drag carries no scalable derivative"));
            }
            damage.scaling[fd] = v;
        } else if let Some(family) =
            key.strip_prefix("dC_").and_then(|k| k.strip_suffix("_asym")).and_then(family_from_key)
        {
            damage.asym[family.index()] = v;
        } else {
            issues.push(issue(&path, "unknown damage key"));
        }
    }
    let Some(onset) = onset else {
        issues.push(issue("damage.t_d", "missing field"));
        return None;
    };
    damage.onset = onset;
    (issues.len() == before).then_some(damage)
}

fn parse_commands(root: &toml::Table, issues: &mut Vec<SchemaIssue>) -> Option<Vec<TimedCommand>> {
    let Some(value) = root.get("command") else {
        issues.push(issue("command", "missing [[command]] schedule"));
        return None;
    };
    let Some(entries) = value.as_array() else {
        issues.push(issue("command", "expected an array of tables"));
        return None;
    };
    let mut out = Vec::new();
    for (i, entry) in entries.iter().enumerate() {
        let parsed: Option<CommandEntry> = deserialize_at(entry.clone(), &format!("command[{i}]"), issues);
        if let Some(c) = parsed {
            out.push(TimedCommand {
                t: c.t,
                command: GuidanceCommand {
                    airspeed: c.airspeed,
                    course: crate::flightdyn::wrap_angle(c.course_deg.to_radians()),
                    altitude: c.altitude,
                },
            });
        }
    }
    (out.len() == entries.len()).then_some(out)
}
