//! Application configuration.
//!
//! A config file is line-oriented: `key=value` settings plus, optionally,
//! any records of the data formats (`N`, `E`, `P`, `O`, `B`, `V`) inlined
//! directly. Relative paths resolve against the config file's directory.
//!
//! ```text
//! network = sarajevo.net
//! offline = forecast.off
//! alpha = 0
//! beta = 1
//! listen_port = 7401
//! V cruise_power_w=4800
//! ```

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::energy::{EnergyError, VehicleSpec};
use crate::fusion::{FusionError, FusionStore, IrradianceObservation, OfflineTable};
use crate::network::{NetworkError, ParkingLot, RoadNetwork};
use crate::parking::{ParkingError, ParkingQuery};
use crate::records::{self, Record};
use crate::routing::{RoutingError, WeightConfig};
use crate::service::Engine;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("{path}: {source}")]
    Network {
        path: String,
        #[source]
        source: NetworkError,
    },
    #[error("{path}: {source}")]
    Fusion {
        path: String,
        #[source]
        source: FusionError,
    },
    #[error("{path}: {source}")]
    Energy {
        path: String,
        #[source]
        source: EnergyError,
    },
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Parking(#[from] ParkingError),
}

/// Parking emphasis shared by every query of a session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParkingDefaults {
    pub p_irr: f64,
    pub p_dist: f64,
    pub epsilon_m: f64,
}

impl Default for ParkingDefaults {
    fn default() -> Self {
        let q = ParkingQuery::new(0.0, 0.0);
        ParkingDefaults {
            p_irr: q.p_irr,
            p_dist: q.p_dist,
            epsilon_m: q.epsilon_m,
        }
    }
}

impl ParkingDefaults {
    pub fn query(&self, lat: f64, lon: f64) -> ParkingQuery {
        ParkingQuery {
            dest_lat: lat,
            dest_lon: lon,
            p_irr: self.p_irr,
            p_dist: self.p_dist,
            epsilon_m: self.epsilon_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub network: Option<PathBuf>,
    pub offline: Option<PathBuf>,
    pub vehicle: Option<PathBuf>,
    pub lots: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    pub weights: WeightConfig,
    pub parking: ParkingDefaults,
    pub replan_interval_h: f64,
    pub decay_denominator: f64,
    pub listen_port: Option<u16>,
    pub query_port: Option<u16>,
    /// Data records written directly in the config file.
    pub inline: String,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            network: None,
            offline: None,
            vehicle: None,
            lots: None,
            observations: None,
            weights: WeightConfig::default(),
            parking: ParkingDefaults::default(),
            replan_interval_h: 0.25,
            decay_denominator: crate::fusion::DEFAULT_DECAY_DENOMINATOR,
            listen_port: None,
            query_port: None,
            inline: String::new(),
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl AppConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        AppConfig::parse(&read(path)?, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg = AppConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let Some(rec) = records::records(raw).next() else {
                continue;
            };
            let rec = rec.map_err(|e| ConfigError::Parse { line, msg: e.msg })?;
            match rec {
                Record::Tagged { .. } => {
                    cfg.inline.push_str(records::strip_comment(raw).trim());
                    cfg.inline.push('\n');
                }
                Record::Setting { key, value, .. } => cfg.set(key, value, base_dir).map_err(|msg| ConfigError::Parse { line, msg })?,
            }
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), String> {
        let num = |v: &str| -> Result<f64, String> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("`{key}` expects a number, got `{v}`"))
        };
        let port = |v: &str| -> Result<u16, String> { v.parse::<u16>().map_err(|_| format!("`{key}` expects a port, got `{v}`")) };
        let path = |v: &str| Some(base.join(v));
        match key {
            "network" => self.network = path(value),
            "offline" => self.offline = path(value),
            "vehicle" | "spec" => self.vehicle = path(value),
            "lots" => self.lots = path(value),
            "observations" => self.observations = path(value),
            "alpha" => self.weights.alpha = num(value)?,
            "beta" => self.weights.beta = num(value)?,
            "floor_wh" => self.weights.floor_wh = num(value)?,
            "p_irr" => self.parking.p_irr = num(value)?,
            "p_dist" => self.parking.p_dist = num(value)?,
            "epsilon_m" => self.parking.epsilon_m = num(value)?,
            "replan_interval_h" => self.replan_interval_h = num(value)?,
            "decay_denominator" => self.decay_denominator = num(value)?,
            "listen_port" => self.listen_port = Some(port(value)?),
            "query_port" => self.query_port = Some(port(value)?),
            _ => return Err(format!("unknown setting `{key}`")),
        }
        Ok(())
    }

    /// Loads every referenced file (falling back to inline records) and
    /// assembles a ready-to-query engine.
    pub fn build(&self) -> Result<Engine, ConfigError> {
        self.weights.validate()?;
        self.parking.query(0.0, 0.0).validate()?;
        if self.replan_interval_h.is_nan() || self.replan_interval_h < 0.0 {
            return Err(ConfigError::Parse {
                line: 0,
                msg: "replan_interval_h must be >= 0".into(),
            });
        }

        let inline_src = "<config>".to_string();
        let (net_src, net_text) = self.source(&self.network, Some((&["N"], "network (set `network=` or inline N records)")))?;
        let network = RoadNetwork::parse(&net_text).map_err(|source| ConfigError::Network {
            path: net_src.clone().unwrap_or_else(|| inline_src.clone()),
            source,
        })?;

        let (off_src, off_text) = self.source(&self.offline, Some((&["O"], "offline table (set `offline=` or inline O records)")))?;
        let fusion_err = |src: &Option<String>| {
            let path = src.clone().unwrap_or_else(|| inline_src.clone());
            move |source| ConfigError::Fusion { path, source }
        };
        let offline = OfflineTable::parse(&off_text).map_err(fusion_err(&off_src))?;
        let mut store = FusionStore::for_network(offline, &network)
            .and_then(|s| s.with_decay_denominator(self.decay_denominator))
            .map_err(fusion_err(&off_src))?;

        let (obs_src, obs_text) = self.source(&self.observations, None)?;
        for obs in IrradianceObservation::parse_all(&obs_text).map_err(fusion_err(&obs_src))? {
            store.ingest(obs).map_err(fusion_err(&obs_src))?;
        }

        let (veh_src, veh_text) = self.source(&self.vehicle, None)?;
        let spec = VehicleSpec::parse(&veh_text).map_err(|source| ConfigError::Energy {
            path: veh_src.unwrap_or_else(|| inline_src.clone()),
            source,
        })?;

        let lots = match &self.lots {
            Some(p) => ParkingLot::load_all(p).map_err(|source| ConfigError::Network {
                path: p.display().to_string(),
                source,
            })?,
            None => network.lots().to_vec(),
        };

        Ok(Engine::new(network, store, spec, self.weights, lots, self.parking))
    }

    /// Text of `path` if set, otherwise the inline records; each parser
    /// picks out the tags it understands. With `required`, missing inline
    /// records of those tags is an error.
    fn source(
        &self,
        path: &Option<PathBuf>,
        required: Option<(&[&str], &'static str)>,
    ) -> Result<(Option<String>, String), ConfigError> {
        if let Some(p) = path {
            return Ok((Some(p.display().to_string()), read(p)?));
        }
        if let Some((tags, what)) = required {
            let present = self
                .inline
                .lines()
                .any(|l| l.split_whitespace().next().is_some_and(|t| tags.contains(&t)));
            if !present {
                return Err(ConfigError::Missing(what));
            }
        }
        Ok((None, self.inline.clone()))
    }
}
