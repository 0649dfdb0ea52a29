//! Online/offline irradiance fusion.
//!
//! The fused value at a node is a convex combination of the latest online
//! measurement and the offline prediction for the current hour of day:
//!
//! ```text
//! a = exp(-(t_curr - t_meas)^2 / D)
//! r = r_on * a + r_off * (1 - a)
//! ```
//!
//! with times in hours since the start of the year and `D` the decay
//! denominator (default 100 000 h², an empirical constant). The exponent is
//! negative: `a` decays from 1 at zero age towards 0, so fresh
//! measurements dominate and stale ones fade into the prediction.
//!
//! A single global calibration factor scales the fused value, after which
//! the result is clamped to `[0, 1]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::network::{Edge, NodeId, RoadNetwork};
use crate::records::{self, arity, parse_f64, parse_id, Record, RecordError};

pub const DEFAULT_DECAY_DENOMINATOR: f64 = 100_000.0;
pub const CALIBRATION_MIN: f64 = 0.5;
pub const CALIBRATION_MAX: f64 = 2.0;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} has no offline breakpoints")]
    MissingOffline(NodeId),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<RecordError> for FusionError {
    fn from(e: RecordError) -> Self {
        FusionError::Parse {
            line: e.line,
            msg: e.msg,
        }
    }
}

fn invalid(msg: impl Into<String>) -> FusionError {
    FusionError::InvalidInput(msg.into())
}

fn unit_range(what: &str, v: f64) -> Result<f64, FusionError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(invalid(format!("{what} {v} outside [0, 1]")))
    }
}

/// Trust in a measurement of age `t_curr - t_meas` hours, using the default
/// decay denominator.
pub fn temporal_weight(t_curr: f64, t_meas: f64) -> Result<f64, FusionError> {
    temporal_weight_with(t_curr, t_meas, DEFAULT_DECAY_DENOMINATOR)
}

/// Gaussian recency weight `exp(-(t_curr - t_meas)^2 / denominator)`.
///
/// The weight underflows to exactly 0 for ages beyond roughly 8600 h at
/// the default denominator.
pub fn temporal_weight_with(t_curr: f64, t_meas: f64, denominator: f64) -> Result<f64, FusionError> {
    if !(t_meas >= 0.0 && t_meas.is_finite() && t_curr.is_finite()) {
        return Err(invalid(format!("times must be finite and non-negative (t_curr {t_curr}, t_meas {t_meas})")));
    }
    if t_meas > t_curr {
        return Err(invalid(format!("measurement time {t_meas} is after current time {t_curr}")));
    }
    if !(denominator > 0.0 && denominator.is_finite()) {
        return Err(invalid(format!("decay denominator {denominator} must be positive")));
    }
    let dt = t_curr - t_meas;
    Ok((-(dt * dt) / denominator).exp())
}

/// Fused irradiance `r_on * a + r_off * (1 - a)`.
pub fn fuse(r_on: f64, r_off: f64, t_curr: f64, t_meas: f64) -> Result<f64, FusionError> {
    fuse_with(r_on, r_off, t_curr, t_meas, DEFAULT_DECAY_DENOMINATOR)
}

pub fn fuse_with(
    r_on: f64,
    r_off: f64,
    t_curr: f64,
    t_meas: f64,
    denominator: f64,
) -> Result<f64, FusionError> {
    unit_range("r_on", r_on)?;
    unit_range("r_off", r_off)?;
    let a = temporal_weight_with(t_curr, t_meas, denominator)?;
    // The exact blend lies between the inputs; rounding can push it an ulp out.
    Ok((r_on * a + r_off * (1.0 - a)).clamp(r_on.min(r_off), r_on.max(r_off)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrradianceObservation {
    pub node_id: NodeId,
    pub r_on: f64,
    pub t_meas: f64,
    pub source: String,
}

impl IrradianceObservation {
    pub fn new(node_id: NodeId, r_on: f64, t_meas: f64, source: impl Into<String>) -> Self {
        IrradianceObservation {
            node_id,
            r_on,
            t_meas,
            source: source.into(),
        }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        unit_range("r_on", self.r_on)?;
        if !(self.t_meas >= 0.0 && self.t_meas.is_finite()) {
            return Err(invalid(format!("t_meas {} must be finite and non-negative", self.t_meas)));
        }
        Ok(())
    }

    /// `B <node_id> <r_on> <t_meas> <source>`
    pub fn to_line(&self) -> String {
        let source = if self.source.is_empty() { "-" } else { &self.source };
        format!("B {} {} {} {}", self.node_id, self.r_on, self.t_meas, source)
    }

    /// Parses every `B` record of an observation dump, in file order.
    pub fn parse_all(text: &str) -> Result<Vec<IrradianceObservation>, FusionError> {
        let mut out = Vec::new();
        for rec in records::records(text) {
            if let Record::Tagged { line, tag: "B", fields } = rec? {
                arity(line, "B", &fields, 4, 4)?;
                let obs = IrradianceObservation {
                    node_id: parse_id(line, "node id", fields[0])?,
                    r_on: parse_f64(line, "r_on", fields[1])?,
                    t_meas: parse_f64(line, "t_meas", fields[2])?,
                    source: fields[3].to_string(),
                };
                obs.validate().map_err(|e| FusionError::Parse {
                    line,
                    msg: e.to_string(),
                })?;
                out.push(obs);
            }
        }
        Ok(out)
    }
}

/// Per-node hour-of-day breakpoints of predicted irradiance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OfflineTable {
    /// Breakpoints sorted by hour, hours unique and in `[0, 24)`.
    nodes: BTreeMap<NodeId, Vec<(f64, f64)>>,
}

impl OfflineTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Table giving every node of `network` the same constant value.
    pub fn uniform(network: &RoadNetwork, r_off: f64) -> Result<Self, FusionError> {
        let mut t = OfflineTable::new();
        for n in network.nodes() {
            t.insert(n.id, 0.0, r_off)?;
        }
        Ok(t)
    }

    /// Adds one breakpoint, replacing any existing one at the same hour.
    pub fn insert(&mut self, node_id: NodeId, hour_of_day: f64, r_off: f64) -> Result<(), FusionError> {
        if !(0.0..24.0).contains(&hour_of_day) {
            return Err(invalid(format!("hour of day {hour_of_day} outside [0, 24)")));
        }
        unit_range("r_off", r_off)?;
        let points = self.nodes.entry(node_id).or_default();
        match points.binary_search_by(|p| p.0.total_cmp(&hour_of_day)) {
            Ok(i) => points[i].1 = r_off,
            Err(i) => points.insert(i, (hour_of_day, r_off)),
        }
        Ok(())
    }

    /// Parses `O <node_id> <hour_of_day> <r_off>` records. Repeated hours for
    /// the same node are rejected.
    pub fn parse(text: &str) -> Result<Self, FusionError> {
        let mut table = OfflineTable::new();
        for rec in records::records(text) {
            let Record::Tagged { line, tag: "O", fields } = rec? else {
                continue;
            };
            arity(line, "O", &fields, 3, 3)?;
            let node = parse_id(line, "node id", fields[0])?;
            let hour = parse_f64(line, "hour of day", fields[1])?;
            let r = parse_f64(line, "r_off", fields[2])?;
            if table.breakpoints(node).iter().any(|p| p.0 == hour) {
                return Err(FusionError::Parse {
                    line,
                    msg: format!("duplicate breakpoint for node {node} at hour {hour}"),
                });
            }
            table.insert(node, hour, r).map_err(|e| FusionError::Parse {
                line,
                msg: e.to_string(),
            })?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FusionError> {
        Self::parse(&read(path.as_ref())?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (node, points) in &self.nodes {
            for (h, r) in points {
                let _ = writeln!(out, "O {node} {h} {r}");
            }
        }
        out
    }

    pub fn breakpoints(&self, node_id: NodeId) -> &[(f64, f64)] {
        self.nodes.get(&node_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, node_id: NodeId) -> bool {
        self.nodes.contains_key(&node_id)
    }

    /// Predicted irradiance at `t` hours since year start, interpolated
    /// linearly by hour of day and wrapping across midnight.
    pub fn value_at(&self, node_id: NodeId, t: f64) -> Result<f64, FusionError> {
        let points = self
            .nodes
            .get(&node_id)
            .filter(|p| !p.is_empty())
            .ok_or(FusionError::UnknownNode(node_id))?;
        if !t.is_finite() {
            return Err(invalid(format!("time {t} is not finite")));
        }
        Ok(interpolate_wrapping(points, t.rem_euclid(24.0)))
    }
}

fn interpolate_wrapping(points: &[(f64, f64)], hour: f64) -> f64 {
    let n = points.len();
    if n == 1 {
        return points[0].1;
    }
    let i = points.partition_point(|p| p.0 <= hour);
    let ((h0, r0), (h1, r1)) = if i == 0 {
        let (h, r) = points[n - 1];
        ((h - 24.0, r), points[0])
    } else if i == n {
        let (h, r) = points[0];
        (points[n - 1], (h + 24.0, r))
    } else {
        (points[i - 1], points[i])
    };
    r0 + (r1 - r0) * (hour - h0) / (h1 - h0)
}

fn read(path: &Path) -> Result<String, FusionError> {
    std::fs::read_to_string(path).map_err(|source| FusionError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IngestOutcome {
    Accepted,
    Superseded,
}

impl IngestOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            IngestOutcome::Accepted => "accepted",
            IngestOutcome::Superseded => "superseded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Calibration {
    Updated(f64),
    /// The prediction was zero; the factor is unchanged.
    Skipped,
}

/// Latest observation per node plus the offline table and calibration.
///
/// Plain data with `&mut self` writers; wrap it in a `RwLock` to share it
/// between ingest and query threads.
#[derive(Debug, Clone)]
pub struct FusionStore {
    offline: OfflineTable,
    latest: BTreeMap<NodeId, IrradianceObservation>,
    calibration_factor: f64,
    decay_denominator: f64,
}

impl FusionStore {
    pub fn new(offline: OfflineTable) -> Self {
        FusionStore {
            offline,
            latest: BTreeMap::new(),
            calibration_factor: 1.0,
            decay_denominator: DEFAULT_DECAY_DENOMINATOR,
        }
    }

    /// Builds a store whose offline table covers every node of `network`
    /// and nothing else.
    pub fn for_network(offline: OfflineTable, network: &RoadNetwork) -> Result<Self, FusionError> {
        for n in network.nodes() {
            if offline.breakpoints(n.id).is_empty() {
                return Err(FusionError::MissingOffline(n.id));
            }
        }
        if let Some(&extra) = offline.nodes.keys().find(|id| !network.contains(**id)) {
            return Err(FusionError::UnknownNode(extra));
        }
        Ok(FusionStore::new(offline))
    }

    pub fn with_decay_denominator(mut self, denominator: f64) -> Result<Self, FusionError> {
        if !(denominator > 0.0 && denominator.is_finite()) {
            return Err(invalid(format!("decay denominator {denominator} must be positive")));
        }
        self.decay_denominator = denominator;
        Ok(self)
    }

    pub fn offline(&self) -> &OfflineTable {
        &self.offline
    }

    pub fn calibration_factor(&self) -> f64 {
        self.calibration_factor
    }

    pub fn decay_denominator(&self) -> f64 {
        self.decay_denominator
    }

    pub fn observation(&self, node_id: NodeId) -> Option<&IrradianceObservation> {
        self.latest.get(&node_id)
    }

    /// Stored observations ordered by node id.
    pub fn observations(&self) -> impl Iterator<Item = &IrradianceObservation> {
        self.latest.values()
    }

    /// Observation dump, one `B` record per node.
    pub fn dump(&self) -> String {
        self.latest.values().map(|o| o.to_line() + "\n").collect()
    }

    /// Keeps `obs` if it is at least as recent as the stored one.
    pub fn ingest(&mut self, obs: IrradianceObservation) -> Result<IngestOutcome, FusionError> {
        obs.validate()?;
        if !self.offline.contains(obs.node_id) {
            return Err(FusionError::UnknownNode(obs.node_id));
        }
        match self.latest.get(&obs.node_id) {
            Some(cur) if obs.t_meas < cur.t_meas => Ok(IngestOutcome::Superseded),
            _ => {
                self.latest.insert(obs.node_id, obs);
                Ok(IngestOutcome::Accepted)
            }
        }
    }

    /// Sets the calibration factor from one predicted/measured pair.
    pub fn calibrate(&mut self, r_predicted: f64, r_measured: f64) -> Result<Calibration, FusionError> {
        unit_range("predicted irradiance", r_predicted)?;
        unit_range("measured irradiance", r_measured)?;
        if r_predicted == 0.0 {
            return Ok(Calibration::Skipped);
        }
        self.calibration_factor = (r_measured / r_predicted).clamp(CALIBRATION_MIN, CALIBRATION_MAX);
        Ok(Calibration::Updated(self.calibration_factor))
    }

    /// Fused, calibrated irradiance at a node, clamped to `[0, 1]`.
    pub fn node_irradiance(&self, node_id: NodeId, t_curr: f64) -> Result<f64, FusionError> {
        let r_off = self.offline.value_at(node_id, t_curr)?;
        let r = match self.latest.get(&node_id) {
            Some(obs) => fuse_with(obs.r_on, r_off, t_curr, obs.t_meas, self.decay_denominator)?,
            None => r_off,
        };
        Ok((r * self.calibration_factor).clamp(0.0, 1.0))
    }

    /// Mean of the two endpoint irradiances.
    pub fn edge_irradiance(&self, edge: &Edge, t_curr: f64) -> Result<f64, FusionError> {
        let a = self.node_irradiance(edge.from, t_curr)?;
        let b = self.node_irradiance(edge.to, t_curr)?;
        Ok((a + b) / 2.0)
    }
}
