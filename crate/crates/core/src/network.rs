//! Road network graph, parking lots and their text file format.
//!
//! ```text
//! N <id> <lat> <lon> [label]
//! E <from> <to> <length_m> [speed_kmh]
//! P <id> <node_id> <lat> <lon> [irradiance]
//! ```
//!
//! The graph is directed; a two-way road is two `E` records. Edges without
//! a speed default to [`DEFAULT_SPEED_KMH`]. The optional fifth `P` field
//! pins a lot's irradiance instead of reading it from the fusion store.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::exec::Exec;
use crate::geo::haversine_m;
use crate::records::{self, arity, parse_f64, parse_id, Record, RecordError};

pub type NodeId = u64;

pub const DEFAULT_SPEED_KMH: f64 = 50.0;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty network")]
    Empty,
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("node {id}: coordinates ({lat}, {lon}) out of range")]
    CoordinateOutOfRange { id: NodeId, lat: f64, lon: f64 },
    #[error("edge {from}->{to}: dangling endpoint {missing}")]
    DanglingEndpoint {
        from: NodeId,
        to: NodeId,
        missing: NodeId,
    },
    #[error("edge {0}->{0}: self loop")]
    SelfLoop(NodeId),
    #[error("duplicate edge {from}->{to}")]
    DuplicateEdge { from: NodeId, to: NodeId },
    #[error("edge {from}->{to}: non-positive length {length_m}")]
    NonPositiveLength {
        from: NodeId,
        to: NodeId,
        length_m: f64,
    },
    #[error("edge {from}->{to}: non-positive speed {speed_kmh}")]
    NonPositiveSpeed {
        from: NodeId,
        to: NodeId,
        speed_kmh: f64,
    },
    #[error("duplicate parking lot id {0}")]
    DuplicateLot(u64),
    #[error("parking lot {id}: unknown node {node_id}")]
    LotUnknownNode { id: u64, node_id: NodeId },
    #[error("parking lot {id}: invalid location or irradiance")]
    LotOutOfRange { id: u64 },
}

impl From<RecordError> for NetworkError {
    fn from(e: RecordError) -> Self {
        NetworkError::Parse {
            line: e.line,
            msg: e.msg,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub lat: f64,
    pub lon: f64,
    pub label: Option<String>,
}

impl Node {
    pub fn new(id: NodeId, lat: f64, lon: f64) -> Self {
        Node {
            id,
            lat,
            lon,
            label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub length_m: f64,
    pub speed_kmh: f64,
}

impl Edge {
    pub fn new(from: NodeId, to: NodeId, length_m: f64) -> Self {
        Edge {
            from,
            to,
            length_m,
            speed_kmh: DEFAULT_SPEED_KMH,
        }
    }

    pub fn with_speed(mut self, speed_kmh: f64) -> Self {
        self.speed_kmh = speed_kmh;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParkingLot {
    pub id: u64,
    pub node_id: NodeId,
    pub lat: f64,
    pub lon: f64,
    /// Static irradiance override; `None` reads the fusion store at `node_id`.
    pub irradiance: Option<f64>,
}

impl ParkingLot {
    fn validate(&self) -> Result<(), NetworkError> {
        let irr_ok = self
            .irradiance
            .is_none_or(|r| (0.0..=1.0).contains(&r));
        if !valid_coords(self.lat, self.lon) || !irr_ok {
            return Err(NetworkError::LotOutOfRange { id: self.id });
        }
        Ok(())
    }

    /// Parses a lots file (`P` records only; other known records are ignored).
    pub fn parse_all(text: &str) -> Result<Vec<ParkingLot>, NetworkError> {
        let mut lots = Vec::new();
        for rec in records::records(text) {
            if let Record::Tagged { line, tag: "P", fields } = rec? {
                lots.push(parse_lot(line, &fields)?);
            }
        }
        check_lot_ids(&lots)?;
        Ok(lots)
    }

    pub fn load_all(path: impl AsRef<Path>) -> Result<Vec<ParkingLot>, NetworkError> {
        ParkingLot::parse_all(&read(path.as_ref())?)
    }
}

fn valid_coords(lat: f64, lon: f64) -> bool {
    (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)
}

fn check_lot_ids(lots: &[ParkingLot]) -> Result<(), NetworkError> {
    let mut seen = std::collections::HashSet::new();
    for lot in lots {
        if !seen.insert(lot.id) {
            return Err(NetworkError::DuplicateLot(lot.id));
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, NetworkError> {
    std::fs::read_to_string(path).map_err(|source| NetworkError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_lot(line: usize, fields: &[&str]) -> Result<ParkingLot, NetworkError> {
    arity(line, "P", fields, 4, 5)?;
    let lot = ParkingLot {
        id: parse_id(line, "lot id", fields[0])?,
        node_id: parse_id(line, "node id", fields[1])?,
        lat: parse_f64(line, "latitude", fields[2])?,
        lon: parse_f64(line, "longitude", fields[3])?,
        irradiance: fields
            .get(4)
            .map(|s| parse_f64(line, "irradiance", s))
            .transpose()?,
    };
    lot.validate()?;
    Ok(lot)
}

/// Directed road graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    /// Sorted by id.
    nodes: Vec<Node>,
    index: HashMap<NodeId, usize>,
    edges: Vec<Edge>,
    /// Per node position: outgoing edge indices sorted by target id.
    adjacency: Vec<Vec<usize>>,
    /// Per node position: incoming edge indices sorted by source id.
    reverse: Vec<Vec<usize>>,
    lots: Vec<ParkingLot>,
}

impl RoadNetwork {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, NetworkError> {
        RoadNetwork::with_lots(nodes, edges, Vec::new())
    }

    pub fn with_lots(
        mut nodes: Vec<Node>,
        edges: Vec<Edge>,
        lots: Vec<ParkingLot>,
    ) -> Result<Self, NetworkError> {
        if nodes.is_empty() {
            return Err(NetworkError::Empty);
        }
        nodes.sort_by_key(|n| n.id);
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if n.id == 0 {
                return Err(NetworkError::Parse {
                    line: 0,
                    msg: "node id 0 is not allowed".into(),
                });
            }
            if index.insert(n.id, i).is_some() {
                return Err(NetworkError::DuplicateNode(n.id));
            }
            if !valid_coords(n.lat, n.lon) {
                return Err(NetworkError::CoordinateOutOfRange {
                    id: n.id,
                    lat: n.lat,
                    lon: n.lon,
                });
            }
        }

        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut reverse = vec![Vec::new(); nodes.len()];
        let mut pairs = BTreeMap::new();
        for (ei, e) in edges.iter().enumerate() {
            if e.from == e.to {
                return Err(NetworkError::SelfLoop(e.from));
            }
            for end in [e.from, e.to] {
                if !index.contains_key(&end) {
                    return Err(NetworkError::DanglingEndpoint {
                        from: e.from,
                        to: e.to,
                        missing: end,
                    });
                }
            }
            if !(e.length_m > 0.0 && e.length_m.is_finite()) {
                return Err(NetworkError::NonPositiveLength {
                    from: e.from,
                    to: e.to,
                    length_m: e.length_m,
                });
            }
            if !(e.speed_kmh > 0.0 && e.speed_kmh.is_finite()) {
                return Err(NetworkError::NonPositiveSpeed {
                    from: e.from,
                    to: e.to,
                    speed_kmh: e.speed_kmh,
                });
            }
            if pairs.insert((e.from, e.to), ei).is_some() {
                return Err(NetworkError::DuplicateEdge {
                    from: e.from,
                    to: e.to,
                });
            }
            adjacency[index[&e.from]].push(ei);
            reverse[index[&e.to]].push(ei);
        }
        for out in &mut adjacency {
            out.sort_by_key(|&ei| edges[ei].to);
        }
        for inc in &mut reverse {
            inc.sort_by_key(|&ei| edges[ei].from);
        }

        check_lot_ids(&lots)?;
        for lot in &lots {
            lot.validate()?;
            if !index.contains_key(&lot.node_id) {
                return Err(NetworkError::LotUnknownNode {
                    id: lot.id,
                    node_id: lot.node_id,
                });
            }
        }

        Ok(RoadNetwork {
            nodes,
            index,
            edges,
            adjacency,
            reverse,
            lots,
        })
    }

    /// Parses the network text format. Records other than `N`, `E` and `P`
    /// that belong to sibling formats (`O`, `B`, `V`) and `key=value`
    /// settings are ignored so a combined config file can be fed in whole.
    pub fn parse(text: &str) -> Result<Self, NetworkError> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let mut lots = Vec::new();
        for rec in records::records(text) {
            let Record::Tagged { line, tag, fields } = rec? else {
                continue;
            };
            match tag {
                "N" => {
                    if fields.len() < 3 {
                        arity(line, tag, &fields, 3, 4)?;
                    }
                    let label = (fields.len() > 3).then(|| fields[3..].join(" "));
                    nodes.push(Node {
                        id: parse_id(line, "node id", fields[0])?,
                        lat: parse_f64(line, "latitude", fields[1])?,
                        lon: parse_f64(line, "longitude", fields[2])?,
                        label,
                    });
                }
                "E" => {
                    arity(line, tag, &fields, 3, 4)?;
                    edges.push(Edge {
                        from: parse_id(line, "node id", fields[0])?,
                        to: parse_id(line, "node id", fields[1])?,
                        length_m: parse_f64(line, "length", fields[2])?,
                        speed_kmh: match fields.get(3) {
                            Some(s) => parse_f64(line, "speed", s)?,
                            None => DEFAULT_SPEED_KMH,
                        },
                    });
                }
                "P" => lots.push(parse_lot(line, &fields)?),
                _ => {}
            }
        }
        RoadNetwork::with_lots(nodes, edges, lots)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        RoadNetwork::parse(&read(path.as_ref())?)
    }

    /// Serializes back to the text format; [`RoadNetwork::parse`] of the
    /// output reproduces the same node, edge and lot sets.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let _ = write!(out, "N {} {} {}", n.id, n.lat, n.lon);
            if let Some(label) = &n.label {
                let _ = write!(out, " {label}");
            }
            out.push('\n');
        }
        for e in &self.edges {
            let _ = writeln!(out, "E {} {} {} {}", e.from, e.to, e.length_m, e.speed_kmh);
        }
        for l in &self.lots {
            let _ = write!(out, "P {} {} {} {}", l.id, l.node_id, l.lat, l.lon);
            if let Some(r) = l.irradiance {
                let _ = write!(out, " {r}");
            }
            out.push('\n');
        }
        out
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn lots(&self) -> &[ParkingLot] {
        &self.lots
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    /// Dense position of a node in [`RoadNetwork::nodes`].
    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Outgoing edges of `id`, ordered by target id.
    pub fn outgoing(&self, id: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        let list = self
            .index
            .get(&id)
            .map(|&i| self.adjacency[i].as_slice())
            .unwrap_or(&[]);
        list.iter().map(move |&ei| &self.edges[ei])
    }

    /// Outgoing edge indices (into [`RoadNetwork::edges`]) by node position.
    pub(crate) fn outgoing_indices(&self, pos: usize) -> &[usize] {
        &self.adjacency[pos]
    }

    /// Incoming edge indices by node position.
    pub(crate) fn incoming_indices(&self, pos: usize) -> &[usize] {
        &self.reverse[pos]
    }

    pub fn edge(&self, from: NodeId, to: NodeId) -> Option<&Edge> {
        self.outgoing(from).find(|e| e.to == to)
    }

    /// Node closest to `(lat, lon)` by great-circle distance, smallest id on
    /// ties.
    pub fn nearest_node(&self, lat: f64, lon: f64) -> NodeId {
        self.nearest_node_with(Exec::default(), lat, lon)
    }

    pub fn nearest_node_with(&self, exec: Exec, lat: f64, lon: f64) -> NodeId {
        exec.min_by_key(&self.nodes, |n| (haversine_m(lat, lon, n.lat, n.lon), n.id))
            .map(|(_, id)| id)
            .expect("network is never empty")
    }

    /// Batch [`RoadNetwork::nearest_node`]; each query is scanned
    /// sequentially, queries are spread across threads.
    pub fn nearest_nodes(&self, exec: Exec, queries: &[(f64, f64)]) -> Vec<NodeId> {
        exec.map(queries, |&(lat, lon)| {
            self.nearest_node_with(Exec::Sequential, lat, lon)
        })
    }
}
