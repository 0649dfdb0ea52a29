//! Sensor report lines and their ingestion into the fusion store.
//!
//! A report is an APRS-flavoured position line with the irradiance reading
//! and its measurement time in the comment field:
//!
//! ```text
//! T9ABC>SCORE:!4351.90N/01824.40E#IRR=0.83,T=4407.50
//! ^call  ^dest  ^DDMM.mmN ^DDDMM.mmE ^reading ^hours since year start
//! ```
//!
//! Callsigns are 3 to 9 characters: uppercase letters and digits with an
//! optional `-SSID` suffix of one or two alphanumerics.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;

use thiserror::Error;

use crate::fusion::{FusionError, FusionStore, IngestOutcome, IrradianceObservation};
use crate::network::RoadNetwork;

const DEST: &[u8] = b">SCORE:!";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PacketErrorKind {
    MalformedHeader,
    BadCoordinate,
    MissingField,
    OutOfRange,
    BadValue,
}

impl PacketErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketErrorKind::MalformedHeader => "malformed-header",
            PacketErrorKind::BadCoordinate => "bad-coordinate",
            PacketErrorKind::MissingField => "missing-field",
            PacketErrorKind::OutOfRange => "out-of-range",
            PacketErrorKind::BadValue => "bad-value",
        }
    }
}

impl fmt::Display for PacketErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}: {detail}")]
pub struct PacketError {
    pub kind: PacketErrorKind,
    pub offset: usize,
    pub detail: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorPacket {
    pub callsign: String,
    pub lat: f64,
    pub lon: f64,
    pub irr: f64,
    pub t_meas: f64,
}

impl SensorPacket {
    /// Formats the packet as a report line. Coordinates are rounded to the
    /// grammar's resolution of 1/100 minute.
    pub fn to_line(&self) -> String {
        let (lat_d, lat_m, lat_f) = split_hundredth_minutes(self.lat);
        let (lon_d, lon_m, lon_f) = split_hundredth_minutes(self.lon);
        format!(
            "{}>SCORE:!{:02}{:02}.{:02}{}/{:03}{:02}.{:02}{}#IRR={},T={}",
            self.callsign,
            lat_d,
            lat_m,
            lat_f,
            if self.lat < 0.0 { 'S' } else { 'N' },
            lon_d,
            lon_m,
            lon_f,
            if self.lon < 0.0 { 'W' } else { 'E' },
            self.irr,
            self.t_meas,
        )
    }
}

fn split_hundredth_minutes(deg: f64) -> (u64, u64, u64) {
    let n = (deg.abs() * 6000.0).round() as u64;
    (n / 6000, (n % 6000) / 100, n % 100)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, kind: PacketErrorKind, detail: &'static str) -> PacketError {
        PacketError {
            kind,
            offset: self.pos,
            detail,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, lit: &[u8], kind: PacketErrorKind, detail: &'static str) -> Result<(), PacketError> {
        for &b in lit {
            if self.peek() != Some(b) {
                return Err(self.err(kind, detail));
            }
            self.pos += 1;
        }
        Ok(())
    }

    fn digits(&mut self, n: usize) -> Result<u32, PacketError> {
        let mut v = 0u32;
        for _ in 0..n {
            match self.peek() {
                Some(b @ b'0'..=b'9') => {
                    v = v * 10 + u32::from(b - b'0');
                    self.pos += 1;
                }
                _ => return Err(self.err(PacketErrorKind::BadCoordinate, "expected digit")),
            }
        }
        Ok(v)
    }

    /// `<deg_digits>MM.mm<hemisphere>` in degrees.
    fn coordinate(&mut self, deg_digits: usize, hemis: [u8; 2], max_deg: u32) -> Result<f64, PacketError> {
        let start = self.pos;
        let deg = self.digits(deg_digits)?;
        let min = self.digits(2)?;
        self.expect(b".", PacketErrorKind::BadCoordinate, "expected '.' in minutes")?;
        let frac = self.digits(2)?;
        let sign = match self.peek() {
            Some(h) if h == hemis[0] => 1.0,
            Some(h) if h == hemis[1] => -1.0,
            _ => return Err(self.err(PacketErrorKind::BadCoordinate, "bad hemisphere")),
        };
        let hundredths = (deg * 60 + min) * 100 + frac;
        if min >= 60 || hundredths > max_deg * 6000 {
            return Err(PacketError {
                kind: PacketErrorKind::BadCoordinate,
                offset: start,
                detail: "coordinate out of range",
            });
        }
        self.pos += 1;
        Ok(sign * (f64::from(deg) + (f64::from(min) + f64::from(frac) / 100.0) / 60.0))
    }

    /// Non-negative decimal: `digits ['.' digits]`.
    fn decimal(&mut self) -> Result<(f64, usize), PacketError> {
        let start = self.pos;
        let int_digits = self.run_digits();
        if int_digits == 0 {
            return Err(self.err(PacketErrorKind::BadValue, "expected decimal"));
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            if self.run_digits() == 0 {
                return Err(self.err(PacketErrorKind::BadValue, "expected fraction digits"));
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok((v, start)),
            _ => Err(PacketError {
                kind: PacketErrorKind::BadValue,
                offset: start,
                detail: "value not representable",
            }),
        }
    }

    fn run_digits(&mut self) -> usize {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        self.pos - start
    }

    fn field(&mut self, lit: &[u8], detail: &'static str) -> Result<(), PacketError> {
        if self.bytes[self.pos..].starts_with(lit) {
            self.pos += lit.len();
            Ok(())
        } else {
            Err(self.err(PacketErrorKind::MissingField, detail))
        }
    }
}

fn callsign(cur: &mut Cursor<'_>) -> Result<String, PacketError> {
    let header = |offset, detail| PacketError {
        kind: PacketErrorKind::MalformedHeader,
        offset,
        detail,
    };
    let is_alnum = |b: u8| b.is_ascii_uppercase() || b.is_ascii_digit();
    let start = cur.pos;
    let mut base = 0;
    while cur.peek().is_some_and(is_alnum) {
        base += 1;
        cur.pos += 1;
    }
    if base == 0 {
        return Err(header(cur.pos, "expected callsign"));
    }
    if cur.peek() == Some(b'-') {
        cur.pos += 1;
        let ssid_start = cur.pos;
        while cur.peek().is_some_and(is_alnum) {
            cur.pos += 1;
        }
        let ssid = cur.pos - ssid_start;
        if !(1..=2).contains(&ssid) {
            return Err(header(ssid_start, "SSID must be 1-2 characters"));
        }
    }
    let len = cur.pos - start;
    if cur.peek() != Some(b'>') {
        return Err(header(cur.pos, "invalid callsign character"));
    }
    if !(3..=9).contains(&len) {
        return Err(header(start, "callsign must be 3-9 characters"));
    }
    Ok(String::from_utf8(cur.bytes[start..cur.pos].to_vec()).expect("ascii callsign"))
}

/// Parses one report line (without its line terminator).
pub fn parse_sensor_packet(line: &str) -> Result<SensorPacket, PacketError> {
    parse_sensor_bytes(line.as_bytes())
}

/// Byte-level [`parse_sensor_packet`]; accepts arbitrary input.
pub fn parse_sensor_bytes(bytes: &[u8]) -> Result<SensorPacket, PacketError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let callsign = callsign(&mut cur)?;
    cur.expect(DEST, PacketErrorKind::MalformedHeader, "expected >SCORE:!")?;
    let lat = cur.coordinate(2, *b"NS", 90)?;
    cur.expect(b"/", PacketErrorKind::BadCoordinate, "expected '/' between coordinates")?;
    let lon = cur.coordinate(3, *b"EW", 180)?;
    cur.field(b"#IRR=", "expected #IRR=")?;
    let (irr, irr_at) = cur.decimal()?;
    if irr > 1.0 {
        return Err(PacketError {
            kind: PacketErrorKind::OutOfRange,
            offset: irr_at,
            detail: "IRR above 1",
        });
    }
    cur.field(b",T=", "expected ,T=")?;
    let (t_meas, _) = cur.decimal()?;
    if cur.pos != bytes.len() {
        return Err(cur.err(PacketErrorKind::BadValue, "trailing characters"));
    }
    Ok(SensorPacket {
        callsign,
        lat,
        lon,
        irr,
        t_meas,
    })
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Packet(#[from] PacketError),
    #[error(transparent)]
    Store(#[from] FusionError),
}

impl IngestError {
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::Packet(e) => e.kind.as_str(),
            IngestError::Store(FusionError::UnknownNode(_)) => "unknown-node",
            IngestError::Store(_) => "invalid-input",
        }
    }
}

/// Parses one line, snaps it to the nearest node and offers it to the store.
pub fn ingest_line(
    line: &[u8],
    network: &RoadNetwork,
    store: &mut FusionStore,
) -> Result<IngestOutcome, IngestError> {
    let obs = observation_for(line, network)?;
    Ok(store.ingest(obs)?)
}

/// The observation a report line maps to, without touching any store.
pub fn observation_for(line: &[u8], network: &RoadNetwork) -> Result<IrradianceObservation, PacketError> {
    let p = parse_sensor_bytes(line)?;
    let node_id = network.nearest_node(p.lat, p.lon);
    Ok(IrradianceObservation::new(node_id, p.irr, p.t_meas, p.callsign))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub accepted: usize,
    pub superseded: usize,
    pub rejected: usize,
    pub rejected_by_kind: BTreeMap<&'static str, usize>,
    /// Set when the source failed mid-stream; counts cover the lines read
    /// before the failure.
    pub io_error: Option<String>,
}

impl IngestReport {
    pub fn record(&mut self, result: &Result<IngestOutcome, IngestError>) {
        match result {
            Ok(IngestOutcome::Accepted) => self.accepted += 1,
            Ok(IngestOutcome::Superseded) => self.superseded += 1,
            Err(e) => {
                self.rejected += 1;
                *self.rejected_by_kind.entry(e.kind()).or_default() += 1;
            }
        }
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "accepted={} superseded={} rejected={}",
            self.accepted, self.superseded, self.rejected
        )?;
        for (kind, n) in &self.rejected_by_kind {
            write!(f, " {kind}={n}")?;
        }
        if let Some(e) = &self.io_error {
            write!(f, " io-error=\"{e}\"")?;
        }
        Ok(())
    }
}

/// Strips a trailing `\n` or `\r\n`.
pub(crate) fn trim_line_end(mut line: &[u8]) -> &[u8] {
    if let Some(rest) = line.strip_suffix(b"\n") {
        line = rest;
    }
    line.strip_suffix(b"\r").unwrap_or(line)
}

/// Ingests every line of `source`. Blank lines are skipped; malformed ones
/// are counted and skipped.
pub fn ingest_stream<R: BufRead>(mut source: R, network: &RoadNetwork, store: &mut FusionStore) -> IngestReport {
    let mut report = IngestReport::default();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        match source.read_until(b'\n', &mut buf) {
            Ok(0) => break,
            Ok(_) => {
                let line = trim_line_end(&buf);
                if line.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                report.record(&ingest_line(line, network, store));
            }
            Err(e) => {
                report.io_error = Some(e.to_string());
                break;
            }
        }
    }
    report
}
