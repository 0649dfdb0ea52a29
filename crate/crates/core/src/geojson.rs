//! GeoJSON export of a route over the irradiance map.
//!
//! The collection holds one `LineString` per traversed edge followed by one
//! `Point` per network node. Every feature carries its irradiance and a
//! `marker-color`/`stroke` hex color fading from green (0) to red (1).

use serde_json::{json, Value};

use crate::exec::Exec;
use crate::fusion::{FusionError, FusionStore};
use crate::network::RoadNetwork;
use crate::routing::RoutePlan;

/// `#rrgg00` with red rising and green falling as `r` goes 0 → 1.
pub fn irradiance_color(r: f64) -> String {
    let r = r.clamp(0.0, 1.0);
    let red = (r * 255.0).round() as u8;
    let green = ((1.0 - r) * 255.0).round() as u8;
    format!("#{red:02x}{green:02x}00")
}

pub fn route_feature_collection(
    network: &RoadNetwork,
    store: &FusionStore,
    plan: &RoutePlan,
    t_curr: f64,
) -> Result<Value, FusionError> {
    let node_irr = Exec::default().try_map(network.nodes(), |n| store.node_irradiance(n.id, t_curr))?;

    let mut features = Vec::with_capacity(plan.energy_ledger.len() + network.nodes().len());
    for (i, ((from, to), energy)) in plan.edges().zip(&plan.energy_ledger).enumerate() {
        let a = network.node(from).expect("plan nodes belong to the network");
        let b = network.node(to).expect("plan nodes belong to the network");
        features.push(json!({
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": [[a.lon, a.lat], [b.lon, b.lat]],
            },
            "properties": {
                "kind": "route-edge",
                "seq": i,
                "from": from,
                "to": to,
                "irradiance": energy.irradiance,
                "weight": plan.weights[i],
                "travel_time_s": energy.travel_time_s,
                "consumed_wh": energy.consumed_wh,
                "harvested_wh": energy.harvested_wh,
                "net_wh": energy.net_wh,
                "stroke": irradiance_color(energy.irradiance),
            },
        }));
    }
    for (n, r) in network.nodes().iter().zip(node_irr) {
        let mut props = json!({
            "kind": "node",
            "id": n.id,
            "irradiance": r,
            "on_route": plan.nodes.contains(&n.id),
            "marker-color": irradiance_color(r),
        });
        if let Some(label) = &n.label {
            props["label"] = json!(label);
        }
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Point", "coordinates": [n.lon, n.lat] },
            "properties": props,
        }));
    }

    Ok(json!({
        "type": "FeatureCollection",
        "properties": {
            "total_weight": plan.total_weight,
            "computed_at": plan.computed_at,
            "nodes": plan.nodes,
        },
        "features": features,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn color_endpoints() {
        assert_eq!(irradiance_color(0.0), "#00ff00");
        assert_eq!(irradiance_color(1.0), "#ff0000");
        assert_eq!(irradiance_color(0.5), "#808000");
        assert_eq!(irradiance_color(7.0), "#ff0000");
    }
}
