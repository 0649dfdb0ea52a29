//! Parking lot ranking by irradiance-to-distance ratio.

use std::cmp::Ordering;

use thiserror::Error;

use crate::exec::Exec;
use crate::fusion::{FusionError, FusionStore};
use crate::geo::haversine_m;
use crate::network::{ParkingLot, RoadNetwork};

#[derive(Debug, Error)]
pub enum ParkingError {
    #[error("no parking lots to choose from")]
    NoLots,
    #[error("invalid parking query: {0}")]
    InvalidQuery(String),
    #[error("parking lot {lot}: unknown node {node}")]
    UnknownNode { lot: u64, node: u64 },
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

/// Destination and the emphasis exponents. `p_irr > p_dist` favors sunny
/// lots, `p_dist > p_irr` favors close ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParkingQuery {
    pub dest_lat: f64,
    pub dest_lon: f64,
    pub p_irr: f64,
    pub p_dist: f64,
    /// Distances below this are treated as this, so a lot at the
    /// destination scores finitely.
    pub epsilon_m: f64,
}

impl ParkingQuery {
    pub fn new(dest_lat: f64, dest_lon: f64) -> Self {
        ParkingQuery {
            dest_lat,
            dest_lon,
            p_irr: 1.0,
            p_dist: 1.0,
            epsilon_m: 1.0,
        }
    }

    pub fn with_exponents(mut self, p_irr: f64, p_dist: f64) -> Self {
        self.p_irr = p_irr;
        self.p_dist = p_dist;
        self
    }

    pub fn validate(&self) -> Result<(), ParkingError> {
        let bad = |m: &str| Err(ParkingError::InvalidQuery(m.into()));
        if !((-90.0..=90.0).contains(&self.dest_lat) && (-180.0..=180.0).contains(&self.dest_lon)) {
            return bad("destination out of range");
        }
        if !(self.p_irr >= 0.0 && self.p_dist >= 0.0 && self.p_irr.is_finite() && self.p_dist.is_finite()) {
            return bad("exponents must be finite and >= 0");
        }
        if self.p_irr + self.p_dist <= 0.0 {
            return bad("p_irr + p_dist must be positive");
        }
        if !(self.epsilon_m > 0.0 && self.epsilon_m.is_finite()) {
            return bad("epsilon_m must be positive");
        }
        Ok(())
    }
}

pub fn parking_score(q: &ParkingQuery, irradiance: f64, distance_m: f64) -> f64 {
    irradiance.powf(q.p_irr) / distance_m.max(q.epsilon_m).powf(q.p_dist)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParkingChoice {
    pub lot_id: u64,
    pub node_id: u64,
    pub score: f64,
    pub irradiance: f64,
    pub distance_m: f64,
}

/// Best first; equal scores ordered by lot id.
fn rank_order(a: &ParkingChoice, b: &ParkingChoice) -> Ordering {
    b.score.total_cmp(&a.score).then(a.lot_id.cmp(&b.lot_id))
}

/// Scores every lot and returns them best first. Lot irradiance comes from
/// its static override when present, otherwise from the store at the lot's
/// node.
pub fn rank_parking(
    network: &RoadNetwork,
    store: Option<&FusionStore>,
    lots: &[ParkingLot],
    q: &ParkingQuery,
    t_curr: f64,
    exec: Exec,
) -> Result<Vec<ParkingChoice>, ParkingError> {
    q.validate()?;
    if lots.is_empty() {
        return Err(ParkingError::NoLots);
    }
    let mut ranked = exec.try_map(lots, |lot| {
        if !network.contains(lot.node_id) {
            return Err(ParkingError::UnknownNode {
                lot: lot.id,
                node: lot.node_id,
            });
        }
        let irradiance = match (lot.irradiance, store) {
            (Some(r), _) => r,
            (None, Some(store)) => store.node_irradiance(lot.node_id, t_curr)?,
            (None, None) => return Err(FusionError::UnknownNode(lot.node_id).into()),
        };
        let distance_m = haversine_m(q.dest_lat, q.dest_lon, lot.lat, lot.lon);
        Ok(ParkingChoice {
            lot_id: lot.id,
            node_id: lot.node_id,
            score: parking_score(q, irradiance, distance_m),
            irradiance,
            distance_m,
        })
    })?;
    ranked.sort_by(rank_order);
    Ok(ranked)
}

/// The highest-scoring lot.
pub fn select_parking(
    network: &RoadNetwork,
    store: &FusionStore,
    lots: &[ParkingLot],
    q: &ParkingQuery,
    t_curr: f64,
) -> Result<ParkingChoice, ParkingError> {
    let ranked = rank_parking(network, Some(store), lots, q, t_curr, Exec::default())?;
    Ok(ranked.into_iter().next().expect("non-empty ranking"))
}
