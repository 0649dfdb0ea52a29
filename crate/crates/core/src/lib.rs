//! Solar-aware vehicle routing.
//!
//! The crate fuses time-stamped irradiance observations with offline
//! hour-of-day irradiance tables, turns fused irradiance into per-edge net
//! energy for a solar vehicle, routes with Dijkstra over the resulting
//! weights and ranks parking lots by irradiance-to-distance ratio.
//!
//! Data flows in one direction:
//!
//! ```text
//! sensor lines ──ingest──▶ FusionStore ──irradiance──▶ energy ──weights──▶ routing
//!                                   └──────────────────────────────────▶ parking
//! ```
//!
//! Batch entry points ([`routing::route_batch`], [`parking::rank_parking`],
//! [`network::RoadNetwork::nearest_nodes`]) run on rayon when the `parallel`
//! feature is enabled (the default) and fall back to plain iterators
//! otherwise. Every batch function also accepts an explicit [`Exec`] so the
//! two paths can be compared side by side.

pub mod config;
pub mod energy;
pub mod exec;
pub mod fusion;
pub mod geo;
pub mod geojson;
pub mod ingest;
pub mod network;
pub mod parking;
mod records;
pub mod routing;
pub mod service;

pub use energy::{edge_energy, harvest_power, EdgeEnergy, VehicleSpec};
pub use exec::Exec;
pub use fusion::{
    fuse, temporal_weight, FusionStore, IngestOutcome, IrradianceObservation, OfflineTable,
    DEFAULT_DECAY_DENOMINATOR,
};
pub use ingest::{ingest_stream, parse_sensor_packet, IngestReport, SensorPacket};
pub use network::{Edge, Node, ParkingLot, RoadNetwork};
pub use parking::{parking_score, select_parking, ParkingChoice, ParkingQuery};
pub use routing::{edge_weight, replan, shortest_route, ReplanOutcome, RoutePlan, WeightConfig};
