//! Vehicle specification and per-edge energy accounting.

use std::path::Path;

use thiserror::Error;

use crate::network::{Edge, NodeId};
use crate::records::{self, Record, RecordError};

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<RecordError> for EnergyError {
    fn from(e: RecordError) -> Self {
        EnergyError::Parse {
            line: e.line,
            msg: e.msg,
        }
    }
}

/// Solar vehicle parameters.
///
/// Defaults describe a prototype with an 11 kW motor, two 0.726 m² panels
/// at 18 % efficiency and 957 W/m² incident on the panel at full sun (the
/// figure already excludes the ~30 % reflected share, so no further loss
/// is applied). `cruise_power_w` is the average traction draw while
/// driving, set to half the motor rating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleSpec {
    pub motor_power_w: f64,
    pub panel_area_m2: f64,
    pub panel_efficiency: f64,
    pub max_incident_wm2: f64,
    pub cruise_power_w: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        VehicleSpec {
            motor_power_w: 11_000.0,
            panel_area_m2: 2.0 * 0.726,
            panel_efficiency: 0.18,
            max_incident_wm2: 957.0,
            cruise_power_w: 5_500.0,
        }
    }
}

impl VehicleSpec {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let positive = [
            ("motor_power_w", self.motor_power_w),
            ("panel_area_m2", self.panel_area_m2),
            ("max_incident_wm2", self.max_incident_wm2),
            ("cruise_power_w", self.cruise_power_w),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EnergyError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.panel_efficiency > 0.0 && self.panel_efficiency < 1.0) {
            return Err(EnergyError::InvalidInput(format!(
                "panel_efficiency must be in (0, 1), got {}",
                self.panel_efficiency
            )));
        }
        Ok(())
    }

    /// Applies one `key=value` pair.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), EnergyError> {
        let slot = match key {
            "motor_power_w" => &mut self.motor_power_w,
            "panel_area_m2" => &mut self.panel_area_m2,
            "panel_efficiency" => &mut self.panel_efficiency,
            "max_incident_wm2" => &mut self.max_incident_wm2,
            "cruise_power_w" => &mut self.cruise_power_w,
            _ => return Err(EnergyError::InvalidInput(format!("unknown vehicle key `{key}`"))),
        };
        *slot = value;
        Ok(())
    }

    /// Parses `V key=value ...` records; later records override earlier ones
    /// and missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, EnergyError> {
        let mut spec = VehicleSpec::default();
        for rec in records::records(text) {
            let Record::Tagged { line, tag: "V", fields } = rec? else {
                continue;
            };
            for field in fields {
                let (key, value) = field.split_once('=').ok_or_else(|| EnergyError::Parse {
                    line,
                    msg: format!("expected key=value, got `{field}`"),
                })?;
                let value = records::parse_f64(line, key, value)?;
                spec.set(key, value).map_err(|e| EnergyError::Parse {
                    line,
                    msg: e.to_string(),
                })?;
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnergyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| EnergyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        VehicleSpec::parse(&text)
    }

    pub fn to_line(&self) -> String {
        format!(
            "V motor_power_w={} panel_area_m2={} panel_efficiency={} max_incident_wm2={} cruise_power_w={}",
            self.motor_power_w, self.panel_area_m2, self.panel_efficiency, self.max_incident_wm2, self.cruise_power_w
        )
    }
}

/// Electrical power harvested by the panels at normalized irradiance `r`.
pub fn harvest_power(spec: &VehicleSpec, r: f64) -> Result<f64, EnergyError> {
    if !(0.0..=1.0).contains(&r) {
        return Err(EnergyError::InvalidInput(format!("irradiance {r} outside [0, 1]")));
    }
    Ok(r * spec.max_incident_wm2 * spec.panel_area_m2 * spec.panel_efficiency)
}

/// Energy balance of one traversal of an edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEnergy {
    pub from: NodeId,
    pub to: NodeId,
    pub irradiance: f64,
    pub travel_time_s: f64,
    pub consumed_wh: f64,
    pub harvested_wh: f64,
    /// `consumed_wh - harvested_wh`; negative when the sun out-earns the motor.
    pub net_wh: f64,
}

pub fn edge_energy(spec: &VehicleSpec, edge: &Edge, r: f64) -> Result<EdgeEnergy, EnergyError> {
    if !(edge.length_m > 0.0 && edge.length_m.is_finite()) {
        return Err(EnergyError::InvalidInput(format!("edge length {} must be positive", edge.length_m)));
    }
    if !(edge.speed_kmh > 0.0 && edge.speed_kmh.is_finite()) {
        return Err(EnergyError::InvalidInput(format!("edge speed {} must be positive", edge.speed_kmh)));
    }
    let harvest_w = harvest_power(spec, r)?;
    let travel_time_s = edge.length_m / (edge.speed_kmh / 3.6);
    let hours = travel_time_s / 3600.0;
    let consumed_wh = spec.cruise_power_w * hours;
    let harvested_wh = harvest_w * hours;
    Ok(EdgeEnergy {
        from: edge.from,
        to: edge.to,
        irradiance: r,
        travel_time_s,
        consumed_wh,
        harvested_wh,
        net_wh: consumed_wh - harvested_wh,
    })
}
