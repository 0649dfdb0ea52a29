use std::io::{BufReader, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use chrono::{Datelike, TimeZone, Utc};
use clap::{Args, Parser, Subcommand};

use score::config::{AppConfig, ConfigError};
use score::fusion::{FusionStore, OfflineTable};
use score::network::{Node, RoadNetwork};
use score::parking::{rank_parking, ParkingError};
use score::routing::RoutingError;
use score::service::{self, format_park, format_route, Engine};
use score::{geojson, ingest_stream, Exec, VehicleSpec};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NO_PATH: u8 = 3;

#[derive(Parser)]
#[command(name = "score", version, about = "Solar-aware routing and parking")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the best route between two nodes.
    Route(RouteArgs),
    /// Rank parking lots around a destination.
    Park(ParkArgs),
    /// Ingest sensor report lines from stdin, a file or a TCP port.
    Ingest(IngestArgs),
    /// Run the ingest and query listeners.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Config file; explicit flags override its settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long)]
    offline: Option<PathBuf>,
    /// Observation dump (`B` records) replayed into the store.
    #[arg(long)]
    observations: Option<PathBuf>,
}

#[derive(Args)]
struct TimeArgs {
    /// Hours since the start of the year.
    #[arg(long, required_unless_present = "now", conflicts_with = "now")]
    time: Option<f64>,
    /// Use the current UTC time.
    #[arg(long)]
    now: bool,
}

impl TimeArgs {
    fn resolve(&self) -> f64 {
        self.time.unwrap_or_else(hours_since_year_start)
    }
}

#[derive(Args)]
struct RouteArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Vehicle spec file (`V key=value ...`).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    from: u64,
    #[arg(long)]
    to: u64,
    #[command(flatten)]
    time: TimeArgs,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    floor: Option<f64>,
    /// Write the route and node irradiance as a GeoJSON FeatureCollection.
    #[arg(long)]
    geojson: Option<PathBuf>,
}

#[derive(Args)]
struct ParkArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    lots: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    lat: f64,
    #[arg(long, allow_hyphen_values = true)]
    lon: f64,
    #[command(flatten)]
    time: TimeArgs,
    #[arg(long)]
    p_irr: Option<f64>,
    #[arg(long)]
    p_dist: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, conflicts_with = "file")]
    listen: Option<u16>,
    #[arg(long)]
    file: Option<PathBuf>,
    /// Write the resulting observation dump here.
    #[arg(long)]
    dump: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(String),
    NoPath(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn hours_since_year_start() -> f64 {
    let now = Utc::now();
    let start = Utc
        .with_ymd_and_hms(now.year(), 1, 1, 0, 0, 0)
        .single()
        .expect("January 1st exists");
    (now - start).num_milliseconds() as f64 / 3_600_000.0
}

fn base_config(data: &DataArgs) -> Result<AppConfig, Failure> {
    let mut cfg = match &data.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    if data.net.is_some() {
        cfg.network = data.net.clone();
    }
    if data.offline.is_some() {
        cfg.offline = data.offline.clone();
    }
    if data.observations.is_some() {
        cfg.observations = data.observations.clone();
    }
    Ok(cfg)
}

fn cmd_route(args: RouteArgs) -> Result<(), Failure> {
    let mut cfg = base_config(&args.data)?;
    if args.spec.is_some() {
        cfg.vehicle = args.spec.clone();
    }
    if let Some(a) = args.alpha {
        cfg.weights.alpha = a;
    }
    if let Some(b) = args.beta {
        cfg.weights.beta = b;
    }
    if let Some(f) = args.floor {
        cfg.weights.floor_wh = f;
    }
    let engine = cfg.build()?;
    let t = args.time.resolve();
    let plan = engine.route(args.from, args.to, t).map_err(|e| match e {
        RoutingError::NoPath { .. } => Failure::NoPath(e.to_string()),
        other => Failure::Data(other.to_string()),
    })?;

    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", format_route(&plan));
    let _ = writeln!(
        out,
        "{:<12} {:>6} {:>10} {:>12} {:>12} {:>10} {:>10}",
        "edge", "irr", "time_s", "consumed_wh", "harvested_wh", "net_wh", "weight"
    );
    for (e, w) in plan.energy_ledger.iter().zip(&plan.weights) {
        let _ = writeln!(
            out,
            "{:<12} {:>6.3} {:>10.1} {:>12.3} {:>12.3} {:>10.3} {:>10.3}",
            format!("{}->{}", e.from, e.to),
            e.irradiance,
            e.travel_time_s,
            e.consumed_wh,
            e.harvested_wh,
            e.net_wh,
            w
        );
    }
    let _ = writeln!(
        out,
        "total: consumed {:.3} Wh, harvested {:.3} Wh",
        plan.total_consumed_wh(),
        plan.total_harvested_wh()
    );

    if let Some(path) = args.geojson {
        let store = engine.store.read().expect("store lock poisoned");
        let fc = geojson::route_feature_collection(&engine.network, &store, &plan, t)
            .map_err(|e| Failure::Data(e.to_string()))?;
        let text = serde_json::to_string_pretty(&fc).expect("json values serialize");
        std::fs::write(&path, text).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Network made of one node per lot, for ranking lots that all carry a
/// static irradiance without loading a road network.
fn lots_only_engine(cfg: &AppConfig) -> Result<Engine, Failure> {
    let path = cfg
        .lots
        .as_ref()
        .ok_or_else(|| Failure::Usage("park needs --lots or a network with P records".into()))?;
    let lots = score::ParkingLot::load_all(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    if lots.is_empty() {
        return Err(Failure::Data(ParkingError::NoLots.to_string()));
    }
    if let Some(l) = lots.iter().find(|l| l.irradiance.is_none()) {
        return Err(Failure::Data(format!(
            "lot {} has no static irradiance; pass --net and --offline to read it from the fusion store",
            l.id
        )));
    }
    let mut nodes: Vec<Node> = Vec::new();
    for l in &lots {
        if !nodes.iter().any(|n| n.id == l.node_id) {
            nodes.push(Node::new(l.node_id, l.lat, l.lon));
        }
    }
    let network = RoadNetwork::new(nodes, vec![]).map_err(|e| Failure::Data(e.to_string()))?;
    let offline = OfflineTable::uniform(&network, 0.0).map_err(|e| Failure::Data(e.to_string()))?;
    let store = FusionStore::new(offline);
    Ok(Engine::new(network, store, VehicleSpec::default(), cfg.weights, lots, cfg.parking))
}

fn cmd_park(args: ParkArgs) -> Result<(), Failure> {
    let mut cfg = base_config(&args.data)?;
    if args.lots.is_some() {
        cfg.lots = args.lots.clone();
    }
    if let Some(p) = args.p_irr {
        cfg.parking.p_irr = p;
    }
    if let Some(p) = args.p_dist {
        cfg.parking.p_dist = p;
    }
    if let Some(e) = args.epsilon {
        cfg.parking.epsilon_m = e;
    }
    let has_network = cfg.network.is_some() || cfg.inline.lines().any(|l| l.starts_with("N "));
    let engine = if has_network { cfg.build()? } else { lots_only_engine(&cfg)? };
    let t = args.time.resolve();

    let store = engine.store.read().expect("store lock poisoned");
    let q = engine.parking.query(args.lat, args.lon);
    let ranked = rank_parking(&engine.network, Some(&store), &engine.lots, &q, t, Exec::default()).map_err(|e| match e {
        ParkingError::InvalidQuery(_) => Failure::Usage(e.to_string()),
        other => Failure::Data(other.to_string()),
    })?;

    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", format_park(&ranked[0]));
    let _ = writeln!(out, "{:>4} {:>8} {:>14} {:>10} {:>12}", "rank", "lot", "score", "irradiance", "distance_m");
    for (i, c) in ranked.iter().enumerate() {
        let flag = if i == 0 { " *" } else { "" };
        let _ = writeln!(
            out,
            "{:>4} {:>8} {:>14.6e} {:>10.4} {:>12.1}{}",
            i + 1,
            c.lot_id,
            c.score,
            c.irradiance,
            c.distance_m,
            flag
        );
    }
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> Result<(), Failure> {
    let cfg = base_config(&args.data)?;
    let engine = cfg.build()?;

    if let Some(port) = args.listen {
        let listener = TcpListener::bind(("0.0.0.0", port)).map_err(|e| Failure::Data(format!("cannot listen on {port}: {e}")))?;
        eprintln!("ingest listening on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or_default());
        let handle = service::spawn(Arc::new(engine), Some(listener), None).map_err(|e| Failure::Data(e.to_string()))?;
        handle.join();
        return Ok(());
    }

    let report = {
        let mut store = engine.store.write().expect("store lock poisoned");
        match &args.file {
            Some(p) => {
                let f = std::fs::File::open(p).map_err(|e| Failure::Data(format!("cannot open {}: {e}", p.display())))?;
                ingest_stream(BufReader::new(f), &engine.network, &mut store)
            }
            None => ingest_stream(std::io::stdin().lock(), &engine.network, &mut store),
        }
    };
    println!("{report}");
    if let Some(path) = args.dump {
        let dump = engine.store.read().expect("store lock poisoned").dump();
        std::fs::write(&path, dump).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))?;
    }
    if let Some(e) = report.io_error {
        return Err(Failure::Data(format!("input failed: {e}")));
    }
    Ok(())
}

fn cmd_serve(config: PathBuf) -> Result<(), Failure> {
    let cfg = AppConfig::load(&config)?;
    let port = cfg
        .listen_port
        .ok_or_else(|| Failure::Usage("config must set listen_port".into()))?;
    let query_port = cfg.query_port.unwrap_or(port.wrapping_add(1));
    let engine = Arc::new(cfg.build()?);
    let bind = |p: u16| TcpListener::bind(("0.0.0.0", p)).map_err(|e| Failure::Data(format!("cannot listen on {p}: {e}")));
    let ingest = bind(port)?;
    let query = bind(query_port)?;
    let handle = service::spawn(engine, Some(ingest), Some(query)).map_err(|e| Failure::Data(e.to_string()))?;
    eprintln!(
        "ingest on {}, queries on {}",
        handle.ingest_addr.map(|a| a.to_string()).unwrap_or_default(),
        handle.query_addr.map(|a| a.to_string()).unwrap_or_default()
    );
    handle.join();
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.cmd {
        Command::Route(a) => cmd_route(a),
        Command::Park(a) => cmd_park(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Serve { config } => cmd_serve(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::NoPath(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_NO_PATH)
        }
    }
}
