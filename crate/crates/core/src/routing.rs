//! Energy-weighted shortest routes.
//!
//! Each edge gets the weight `max(floor, alpha * length_m + beta * net_wh)`
//! where `net_wh` is consumption minus solar harvest at the edge's fused
//! irradiance. Weights are frozen at the query time for the whole search.
//! Among equally cheap routes the lexicographically smallest node sequence
//! wins.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::energy::{edge_energy, EdgeEnergy, EnergyError, VehicleSpec};
use crate::exec::Exec;
use crate::fusion::{FusionError, FusionStore};
use crate::network::{Edge, NodeId, RoadNetwork};

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no path from {from} to {to}")]
    NoPath { from: NodeId, to: NodeId },
    #[error("node {0} is not on the current plan")]
    NotOnPlan(NodeId),
    #[error("invalid weight config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Blend of distance and net energy into one edge weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightConfig {
    /// Weight per meter.
    pub alpha: f64,
    /// Weight per watt-hour of net consumption.
    pub beta: f64,
    /// Lower bound on every edge weight; keeps Dijkstra valid when harvest
    /// exceeds consumption.
    pub floor_wh: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            alpha: 0.0,
            beta: 1.0,
            floor_wh: 0.001,
        }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<(), RoutingError> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(self.alpha) || !ok(self.beta) {
            return Err(RoutingError::InvalidConfig("alpha and beta must be finite and >= 0".into()));
        }
        if self.alpha + self.beta <= 0.0 {
            return Err(RoutingError::InvalidConfig("alpha + beta must be positive".into()));
        }
        if !(self.floor_wh > 0.0 && self.floor_wh.is_finite()) {
            return Err(RoutingError::InvalidConfig("floor_wh must be positive".into()));
        }
        Ok(())
    }
}

pub fn edge_weight(cfg: &WeightConfig, edge: &Edge, energy: &EdgeEnergy) -> f64 {
    cfg.floor_wh
        .max(cfg.alpha * edge.length_m + cfg.beta * energy.net_wh)
}

/// Per-edge weights and energy, indexed like [`RoadNetwork::edges`].
#[derive(Debug, Clone)]
pub struct EdgeCosts {
    pub weights: Vec<f64>,
    pub energy: Vec<EdgeEnergy>,
    pub computed_at: f64,
}

impl EdgeCosts {
    /// Evaluates every edge of `network` at `t_curr`.
    pub fn compute(
        network: &RoadNetwork,
        store: &FusionStore,
        spec: &VehicleSpec,
        cfg: &WeightConfig,
        t_curr: f64,
        exec: Exec,
    ) -> Result<Self, RoutingError> {
        cfg.validate()?;
        let evaluated = exec.try_map(network.edges(), |edge| {
            let r = store.edge_irradiance(edge, t_curr)?;
            let energy = edge_energy(spec, edge, r)?;
            Ok::<_, RoutingError>((edge_weight(cfg, edge, &energy), energy))
        })?;
        let (weights, energy) = evaluated.into_iter().unzip();
        Ok(EdgeCosts {
            weights,
            energy,
            computed_at: t_curr,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutePlan {
    pub nodes: Vec<NodeId>,
    /// One entry per traversed edge.
    pub weights: Vec<f64>,
    pub energy_ledger: Vec<EdgeEnergy>,
    pub total_weight: f64,
    /// Hours since year start at which the weights were frozen.
    pub computed_at: f64,
}

impl RoutePlan {
    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn destination(&self) -> NodeId {
        *self.nodes.last().expect("plan has at least one node")
    }

    /// `(from, to)` pairs of the traversed edges.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn total_consumed_wh(&self) -> f64 {
        self.energy_ledger.iter().map(|e| e.consumed_wh).fold(0.0, |a, b| a + b)
    }

    pub fn total_harvested_wh(&self) -> f64 {
        self.energy_ledger.iter().map(|e| e.harvested_wh).fold(0.0, |a, b| a + b)
    }
}

#[derive(Copy, Clone, PartialEq)]
struct State {
    cost: f64,
    pos: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.pos.cmp(&self.pos))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cheapest path under fixed non-negative edge `weights` (indexed like
/// [`RoadNetwork::edges`]), returning the node sequence and its edge
/// indices.
///
/// Runs Dijkstra backwards from `dst`, then walks forward from `src`
/// always taking the smallest-id successor that stays on a cheapest path,
/// which yields the lexicographically smallest optimal sequence.
pub fn cheapest_path(
    network: &RoadNetwork,
    weights: &[f64],
    src: NodeId,
    dst: NodeId,
) -> Result<(Vec<NodeId>, Vec<usize>), RoutingError> {
    let src_pos = network.position(src).ok_or(RoutingError::UnknownNode(src))?;
    let dst_pos = network.position(dst).ok_or(RoutingError::UnknownNode(dst))?;
    if src_pos == dst_pos {
        return Ok((vec![src], Vec::new()));
    }

    let edges = network.edges();
    let n = network.nodes().len();
    let mut dist = vec![f64::INFINITY; n];
    let mut next_edge = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[dst_pos] = 0.0;
    heap.push(State { cost: 0.0, pos: dst_pos });

    while let Some(State { cost, pos }) = heap.pop() {
        if cost > dist[pos] {
            continue;
        }
        if cost > dist[src_pos] {
            break;
        }
        for &ei in network.incoming_indices(pos) {
            let prev = network.position(edges[ei].from).expect("validated endpoint");
            let cand = cost + weights[ei];
            if cand < dist[prev] {
                dist[prev] = cand;
                next_edge[prev] = ei;
                heap.push(State { cost: cand, pos: prev });
            }
        }
    }
    if !dist[src_pos].is_finite() {
        return Err(RoutingError::NoPath { from: src, to: dst });
    }

    let mut path = vec![src];
    let mut used = Vec::new();
    let mut visited = vec![false; n];
    let mut cur = src_pos;
    visited[cur] = true;
    while cur != dst_pos {
        // Outgoing lists are sorted by target id, so the first match is the
        // smallest successor.
        let step = network
            .outgoing_indices(cur)
            .iter()
            .copied()
            .find(|&ei| {
                let to = network.position(edges[ei].to).expect("validated endpoint");
                !visited[to] && dist[to].is_finite() && weights[ei] + dist[to] == dist[cur]
            })
            .unwrap_or(next_edge[cur]);
        let to = network.position(edges[step].to).expect("validated endpoint");
        visited[to] = true;
        path.push(edges[step].to);
        used.push(step);
        cur = to;
    }
    Ok((path, used))
}

fn plan_from_costs(
    network: &RoadNetwork,
    costs: &EdgeCosts,
    src: NodeId,
    dst: NodeId,
) -> Result<RoutePlan, RoutingError> {
    let (nodes, used) = cheapest_path(network, &costs.weights, src, dst)?;
    let weights: Vec<f64> = used.iter().map(|&ei| costs.weights[ei]).collect();
    Ok(RoutePlan {
        nodes,
        total_weight: weights.iter().fold(0.0, |acc, w| acc + w),
        weights,
        energy_ledger: used.iter().map(|&ei| costs.energy[ei]).collect(),
        computed_at: costs.computed_at,
    })
}

/// Minimum-weight route from `src` to `dst` with irradiance evaluated at
/// `t_curr`.
pub fn shortest_route(
    network: &RoadNetwork,
    store: &FusionStore,
    spec: &VehicleSpec,
    cfg: &WeightConfig,
    src: NodeId,
    dst: NodeId,
    t_curr: f64,
) -> Result<RoutePlan, RoutingError> {
    for id in [src, dst] {
        if !network.contains(id) {
            return Err(RoutingError::UnknownNode(id));
        }
    }
    let costs = EdgeCosts::compute(network, store, spec, cfg, t_curr, Exec::default())?;
    plan_from_costs(network, &costs, src, dst)
}

/// Routes many `(src, dst)` pairs against one weight snapshot.
pub fn route_batch(
    network: &RoadNetwork,
    store: &FusionStore,
    spec: &VehicleSpec,
    cfg: &WeightConfig,
    queries: &[(NodeId, NodeId)],
    t_curr: f64,
    exec: Exec,
) -> Result<Vec<Result<RoutePlan, RoutingError>>, RoutingError> {
    let costs = EdgeCosts::compute(network, store, spec, cfg, t_curr, exec)?;
    Ok(exec.map(queries, |&(src, dst)| plan_from_costs(network, &costs, src, dst)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplanOutcome {
    Unchanged,
    Replanned(RoutePlan),
}

/// Recomputes the rest of `plan` from `current_node` once `interval_h` hours
/// have passed since it was computed.
#[allow(clippy::too_many_arguments)]
pub fn replan(
    plan: &RoutePlan,
    network: &RoadNetwork,
    store: &FusionStore,
    spec: &VehicleSpec,
    cfg: &WeightConfig,
    current_node: NodeId,
    t_curr: f64,
    interval_h: f64,
) -> Result<ReplanOutcome, RoutingError> {
    if !plan.nodes.contains(&current_node) {
        return Err(RoutingError::NotOnPlan(current_node));
    }
    if t_curr - plan.computed_at < interval_h {
        return Ok(ReplanOutcome::Unchanged);
    }
    let fresh = shortest_route(network, store, spec, cfg, current_node, plan.destination(), t_curr)?;
    Ok(ReplanOutcome::Replanned(fresh))
}
