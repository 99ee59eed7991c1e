//! Per-tick telemetry records, CSV persistence and the run header.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::autopilot::TrimPoint;
use crate::error::{Error, Result};

/// Telemetry format version. Column names and units are fixed within a major
/// version.
pub const TELEMETRY_VERSION: &str = "1.0";

/// One control-tick snapshot. Field order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub t_s: f64,
    pub u_mps: f64,
    pub v_mps: f64,
    pub w_mps: f64,
    pub phi_rad: f64,
    pub theta_rad: f64,
    pub psi_rad: f64,
    pub p_radps: f64,
    pub q_radps: f64,
    pub r_radps: f64,
    pub h_m: f64,
    pub chi_rad: f64,
    pub v_tas_mps: f64,
    pub alpha_rad: f64,
    pub beta_rad: f64,
    pub qbar_pa: f64,
    /// Filtered guidance commands.
    pub v_c_mps: f64,
    pub chi_c_rad: f64,
    pub h_c_m: f64,
    /// Attitude commands before the reference model.
    pub phi_c_rad: f64,
    pub theta_c_rad: f64,
    pub psi_c_rad: f64,
    pub phi_r_rad: f64,
    pub theta_r_rad: f64,
    pub psi_r_rad: f64,
    pub phi_r_dot_radps: f64,
    pub theta_r_dot_radps: f64,
    pub psi_r_dot_radps: f64,
    pub phi_r_ddot_radps2: f64,
    pub theta_r_ddot_radps2: f64,
    pub psi_r_ddot_radps2: f64,
    /// Applied aileron, elevator, rudder including trim.
    pub aileron_rad: f64,
    pub elevator_rad: f64,
    pub rudder_rad: f64,
    pub throttle: f64,
    pub thrust_n: f64,
    pub s1_radps: f64,
    pub s2_radps: f64,
    pub s3_radps: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub v1: f64,
    pub v2: f64,
    /// sᵀṡ under the applied gains.
    pub sdot_s: f64,
    /// sᵀṡ had the gains been at k_d.
    pub sdot_s_kd: f64,
    /// −Σεᵢ|sᵢ|.
    pub reaching_bound: f64,
    pub v2_rate: f64,
    pub iota1_radps2: f64,
    pub iota2_radps2: f64,
    pub iota3_radps2: f64,
    /// max over entries of |Ξᵢⱼ|/Bᵢⱼ.
    pub xi_bound_ratio: f64,
    pub outside_layer: u8,
    pub reaching_violation: u8,
    pub xi_within_bounds: u8,
    pub iota_within_bounds: u8,
    pub damaged: u8,
    /// Bit set: filter rate, bank, climb, accel, pitch, throttle.
    pub clamp_flags: u8,
}

impl TelemetryRecord {
    pub fn attitude(&self) -> Vector3<f64> {
        Vector3::new(self.phi_rad, self.theta_rad, self.psi_rad)
    }

    pub fn attitude_reference(&self) -> Vector3<f64> {
        Vector3::new(self.phi_r_rad, self.theta_r_rad, self.psi_r_rad)
    }

    /// Wrapped Θ − Θ_r.
    pub fn attitude_error(&self) -> Vector3<f64> {
        (self.attitude() - self.attitude_reference()).map(crate::flightdyn::wrap_angle)
    }

    pub fn sliding(&self) -> Vector3<f64> {
        Vector3::new(self.s1_radps, self.s2_radps, self.s3_radps)
    }

    pub fn gains(&self) -> Vector3<f64> {
        Vector3::new(self.k1, self.k2, self.k3)
    }

    pub fn is_finite(&self) -> bool {
        [
            self.t_s,
            self.u_mps,
            self.v_mps,
            self.w_mps,
            self.phi_rad,
            self.theta_rad,
            self.psi_rad,
            self.p_radps,
            self.q_radps,
            self.r_radps,
            self.h_m,
            self.chi_rad,
            self.v_tas_mps,
            self.alpha_rad,
            self.beta_rad,
            self.qbar_pa,
            self.v_c_mps,
            self.chi_c_rad,
            self.h_c_m,
            self.phi_c_rad,
            self.theta_c_rad,
            self.psi_c_rad,
            self.phi_r_rad,
            self.theta_r_rad,
            self.psi_r_rad,
            self.phi_r_dot_radps,
            self.theta_r_dot_radps,
            self.psi_r_dot_radps,
            self.phi_r_ddot_radps2,
            self.theta_r_ddot_radps2,
            self.psi_r_ddot_radps2,
            self.aileron_rad,
            self.elevator_rad,
            self.rudder_rad,
            self.throttle,
            self.thrust_n,
            self.s1_radps,
            self.s2_radps,
            self.s3_radps,
            self.k1,
            self.k2,
            self.k3,
            self.v1,
            self.v2,
            self.sdot_s,
            self.sdot_s_kd,
            self.reaching_bound,
            self.v2_rate,
            self.iota1_radps2,
            self.iota2_radps2,
            self.iota3_radps2,
            self.xi_bound_ratio,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Column names in file order.
pub fn telemetry_header() -> Vec<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.serialize(TelemetryRecord::default()).expect("in-memory write");
    let bytes = writer.into_inner().expect("in-memory flush");
    let text = String::from_utf8(bytes).expect("ASCII header");
    text.lines().next().unwrap_or_default().split(',').map(str::to_owned).collect()
}

/// Writes records as CSV. Refuses to create a file for an empty run.
pub fn write_telemetry(records: &[TelemetryRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Telemetry("no telemetry records to write".into()));
    }
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_telemetry(path: &Path) -> Result<Vec<TelemetryRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != telemetry_header() {
        return Err(Error::Telemetry(format!(
            "{}: header does not match telemetry version {TELEMETRY_VERSION}",
            path.display()
        )));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// A named subset of telemetry columns for one plot panel.
#[derive(Debug, Clone, Copy)]
pub struct PlotSet {
    pub name: &'static str,
    pub columns: &'static [&'static str],
}

pub const PLOT_SETS: [PlotSet; 5] = [
    PlotSet {
        name: "attitude",
        columns: &["t_s", "phi_rad", "phi_r_rad", "theta_rad", "theta_r_rad", "psi_rad", "psi_r_rad"],
    },
    PlotSet {
        name: "outer_loop",
        columns: &["t_s", "v_tas_mps", "v_c_mps", "h_m", "h_c_m", "chi_rad", "chi_c_rad", "alpha_rad", "beta_rad"],
    },
    PlotSet { name: "inputs", columns: &["t_s", "aileron_rad", "elevator_rad", "rudder_rad", "throttle", "thrust_n"] },
    PlotSet { name: "sliding", columns: &["t_s", "s1_radps", "s2_radps", "s3_radps"] },
    PlotSet { name: "gains", columns: &["t_s", "k1", "k2", "k3"] },
];

/// Sibling metadata written next to each telemetry file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub version: String,
    pub telemetry_version: String,
    pub config_hash: String,
    pub overrides: Vec<String>,
    pub k_d: [f64; 3],
    pub rho: f64,
    pub trim: TrimPoint,
    pub f_ctrl: f64,
    pub dt_phys: f64,
}

pub fn write_run_header(header: &RunHeader, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, header).map_err(|e| Error::Telemetry(e.to_string()))
}
