//! Long-running ingest and query service over newline-delimited TCP.
//!
//! Two listeners share one [`Engine`]:
//!
//! * ingest port: one sensor report per line, answered with `OK accepted`,
//!   `OK superseded` or `ERR <kind>`;
//! * query port: `ROUTE <src> <dst> <t>`, `PARK <lat> <lon> <t>`,
//!   `CAL <predicted> <measured>` and `STATS`, one answer line each.
//!
//! An ingest is applied under the store's write lock before it is
//! acknowledged, so any query sent after the acknowledgement observes it.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::thread::{self, JoinHandle};

use crate::config::ParkingDefaults;
use crate::energy::VehicleSpec;
use crate::exec::Exec;
use crate::fusion::{Calibration, FusionError, FusionStore, IngestOutcome};
use crate::ingest::{observation_for, trim_line_end, IngestError, IngestReport};
use crate::network::{ParkingLot, RoadNetwork};
use crate::parking::{rank_parking, ParkingChoice, ParkingError};
use crate::routing::{shortest_route, RoutePlan, RoutingError};

/// Lines longer than this are answered with `ERR too-long` and discarded.
pub const MAX_LINE_BYTES: usize = 8192;

/// Shared state behind the CLI and the service.
#[derive(Debug)]
pub struct Engine {
    pub network: RoadNetwork,
    pub store: RwLock<FusionStore>,
    pub spec: VehicleSpec,
    pub weights: crate::routing::WeightConfig,
    pub lots: Vec<ParkingLot>,
    pub parking: ParkingDefaults,
    pub stats: Stats,
}

#[derive(Debug, Default)]
pub struct Stats {
    pub accepted: AtomicU64,
    pub superseded: AtomicU64,
    pub rejected: AtomicU64,
    pub queries: AtomicU64,
    pub query_errors: AtomicU64,
}

impl Stats {
    pub fn snapshot(&self) -> [u64; 5] {
        [
            self.accepted.load(Ordering::Relaxed),
            self.superseded.load(Ordering::Relaxed),
            self.rejected.load(Ordering::Relaxed),
            self.queries.load(Ordering::Relaxed),
            self.query_errors.load(Ordering::Relaxed),
        ]
    }
}

/// Answer line for a route: node ids then total weight.
pub fn format_route(plan: &RoutePlan) -> String {
    let mut out = String::new();
    for id in &plan.nodes {
        out.push_str(&id.to_string());
        out.push(' ');
    }
    out.push_str(&format!("{:?}", plan.total_weight));
    out
}

/// Answer line for a parking choice: lot id then score.
pub fn format_park(choice: &ParkingChoice) -> String {
    format!("{} {:?}", choice.lot_id, choice.score)
}

pub fn routing_error_kind(e: &RoutingError) -> &'static str {
    match e {
        RoutingError::UnknownNode(_) | RoutingError::NotOnPlan(_) => "unknown-node",
        RoutingError::NoPath { .. } => "no-path",
        RoutingError::Fusion(FusionError::UnknownNode(_)) => "unknown-node",
        RoutingError::InvalidConfig(_) | RoutingError::Fusion(_) | RoutingError::Energy(_) => "invalid-input",
    }
}

pub fn parking_error_kind(e: &ParkingError) -> &'static str {
    match e {
        ParkingError::NoLots => "no-lots",
        ParkingError::UnknownNode { .. } | ParkingError::Fusion(FusionError::UnknownNode(_)) => "unknown-node",
        ParkingError::InvalidQuery(_) | ParkingError::Fusion(_) => "invalid-input",
    }
}

fn err(kind: &str) -> String {
    format!("ERR {kind}")
}

impl Engine {
    pub fn new(
        network: RoadNetwork,
        store: FusionStore,
        spec: VehicleSpec,
        weights: crate::routing::WeightConfig,
        lots: Vec<ParkingLot>,
        parking: ParkingDefaults,
    ) -> Self {
        Engine {
            network,
            store: RwLock::new(store),
            spec,
            weights,
            lots,
            parking,
            stats: Stats::default(),
        }
    }

    pub fn route(&self, src: u64, dst: u64, t: f64) -> Result<RoutePlan, RoutingError> {
        let store = self.store.read().expect("store lock poisoned");
        shortest_route(&self.network, &store, &self.spec, &self.weights, src, dst, t)
    }

    pub fn park(&self, lat: f64, lon: f64, t: f64) -> Result<Vec<ParkingChoice>, ParkingError> {
        let store = self.store.read().expect("store lock poisoned");
        let q = self.parking.query(lat, lon);
        rank_parking(&self.network, Some(&store), &self.lots, &q, t, Exec::default())
    }

    /// Parses and applies one ingest line.
    pub fn ingest(&self, line: &[u8]) -> Result<IngestOutcome, IngestError> {
        // Parse and snap outside the lock; only the store update is serialized.
        let obs = observation_for(line, &self.network)?;
        let outcome = self.store.write().expect("store lock poisoned").ingest(obs)?;
        Ok(outcome)
    }

    pub fn handle_ingest(&self, line: &[u8], report: &mut IngestReport) -> String {
        let result = self.ingest(line);
        report.record(&result);
        match &result {
            Ok(IngestOutcome::Accepted) => self.stats.accepted.fetch_add(1, Ordering::Relaxed),
            Ok(IngestOutcome::Superseded) => self.stats.superseded.fetch_add(1, Ordering::Relaxed),
            Err(_) => self.stats.rejected.fetch_add(1, Ordering::Relaxed),
        };
        match result {
            Ok(o) => format!("OK {}", o.as_str()),
            Err(e) => err(e.kind()),
        }
    }

    pub fn handle_query(&self, line: &[u8]) -> String {
        self.stats.queries.fetch_add(1, Ordering::Relaxed);
        let answer = self.answer(line);
        if answer.starts_with("ERR") {
            self.stats.query_errors.fetch_add(1, Ordering::Relaxed);
        }
        answer
    }

    fn answer(&self, line: &[u8]) -> String {
        let Ok(text) = std::str::from_utf8(line) else {
            return err("usage");
        };
        let mut parts = text.split_whitespace();
        let Some(cmd) = parts.next() else {
            return err("usage");
        };
        let args: Vec<&str> = parts.collect();
        match cmd {
            "ROUTE" => {
                let [src, dst, t] = args[..] else {
                    return err("usage");
                };
                let (Ok(src), Ok(dst), Some(t)) = (src.parse::<u64>(), dst.parse::<u64>(), finite(t)) else {
                    return err("usage");
                };
                match self.route(src, dst, t) {
                    Ok(plan) => format_route(&plan),
                    Err(e) => err(routing_error_kind(&e)),
                }
            }
            "PARK" => {
                let [lat, lon, t] = args[..] else {
                    return err("usage");
                };
                let (Some(lat), Some(lon), Some(t)) = (finite(lat), finite(lon), finite(t)) else {
                    return err("usage");
                };
                match self.park(lat, lon, t) {
                    Ok(ranked) => format_park(&ranked[0]),
                    Err(e) => err(parking_error_kind(&e)),
                }
            }
            "CAL" => {
                let [pred, meas] = args[..] else {
                    return err("usage");
                };
                let (Some(pred), Some(meas)) = (finite(pred), finite(meas)) else {
                    return err("usage");
                };
                match self.store.write().expect("store lock poisoned").calibrate(pred, meas) {
                    Ok(Calibration::Updated(f)) => format!("OK {f:?}"),
                    Ok(Calibration::Skipped) => "OK skipped".to_string(),
                    Err(_) => err("invalid-input"),
                }
            }
            "STATS" if args.is_empty() => {
                let [a, s, r, q, e] = self.stats.snapshot();
                format!("accepted={a} superseded={s} rejected={r} queries={q} query_errors={e}")
            }
            "STATS" => err("usage"),
            _ => err("unknown-command"),
        }
    }
}

fn finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads `\n`-terminated lines, handing each (without terminator) to
/// `handle` and writing its answer back. Overlong lines are skipped with
/// `ERR too-long`.
fn serve_lines<F>(stream: TcpStream, mut handle: F) -> std::io::Result<()>
where
    F: FnMut(&[u8]) -> String,
{
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = (&mut reader)
            .take(MAX_LINE_BYTES as u64 + 1)
            .read_until(b'\n', &mut buf)?;
        if n == 0 {
            return Ok(());
        }
        let answer = if buf.len() > MAX_LINE_BYTES {
            // Drain the rest of the oversized line.
            if buf.last() != Some(&b'\n') {
                let mut sink = Vec::new();
                reader.read_until(b'\n', &mut sink)?;
            }
            err("too-long")
        } else {
            handle(trim_line_end(&buf))
        };
        let mut out = answer.into_bytes();
        out.push(b'\n');
        writer.write_all(&out)?;
    }
}

/// Handle to a running listener set.
pub struct ServiceHandle {
    pub ingest_addr: Option<SocketAddr>,
    pub query_addr: Option<SocketAddr>,
    shutdown: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl ServiceHandle {
    /// Blocks until the acceptors exit (i.e. forever unless shut down).
    pub fn join(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Wake the blocking accept calls.
        for addr in [self.ingest_addr, self.query_addr].into_iter().flatten() {
            let _ = TcpStream::connect(addr);
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

fn accept_loop<F>(listener: TcpListener, shutdown: Arc<AtomicBool>, on_conn: F) -> JoinHandle<()>
where
    F: Fn(TcpStream) + Send + Sync + 'static,
{
    let on_conn = Arc::new(on_conn);
    thread::spawn(move || {
        for stream in listener.incoming() {
            if shutdown.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let on_conn = Arc::clone(&on_conn);
            thread::spawn(move || on_conn(stream));
        }
    })
}

/// Starts the acceptors on the given listeners (either may be omitted).
/// Each connection runs on its own thread.
pub fn spawn(engine: Arc<Engine>, ingest: Option<TcpListener>, query: Option<TcpListener>) -> std::io::Result<ServiceHandle> {
    let shutdown = Arc::new(AtomicBool::new(false));
    let mut threads = Vec::new();
    let ingest_addr = ingest.as_ref().map(TcpListener::local_addr).transpose()?;
    let query_addr = query.as_ref().map(TcpListener::local_addr).transpose()?;

    if let Some(listener) = ingest {
        let engine = Arc::clone(&engine);
        threads.push(accept_loop(listener, Arc::clone(&shutdown), move |stream| {
            let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
            let mut report = IngestReport::default();
            if let Err(e) = serve_lines(stream, |line| engine.handle_ingest(line, &mut report)) {
                report.io_error = Some(e.to_string());
            }
            if report != IngestReport::default() {
                eprintln!("ingest {peer}: {report}");
            }
        }));
    }
    if let Some(listener) = query {
        threads.push(accept_loop(listener, Arc::clone(&shutdown), move |stream| {
            let _ = serve_lines(stream, |line| engine.handle_query(line));
        }));
    }
    Ok(ServiceHandle {
        ingest_addr,
        query_addr,
        shutdown,
        threads,
    })
}
