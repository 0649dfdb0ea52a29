mod common;

use proptest::prelude::*;

use common::{brute_force_route, network_from_weights};
use score::energy::edge_energy;
use score::fusion::{fuse, fuse_with, temporal_weight, FusionStore, IrradianceObservation, OfflineTable};
use score::geo::haversine_m;
use score::ingest::{parse_sensor_packet, SensorPacket};
use score::network::{Edge, Node, ParkingLot, RoadNetwork};
use score::parking::{rank_parking, ParkingQuery};
use score::routing::{cheapest_path, shortest_route, WeightConfig};
use score::{Exec, VehicleSpec};

fn digraph() -> impl Strategy<Value = (u64, Vec<(u64, u64, f64)>)> {
    (2..=7u64).prop_flat_map(|n| {
        let pairs: Vec<(u64, u64)> = (1..=n).flat_map(|a| (1..=n).filter(move |&b| b != a).map(move |b| (a, b))).collect();
        let k = pairs.len();
        (Just(n), proptest::collection::vec(proptest::option::weighted(0.45, 1..=9u32), k)).prop_map(move |(n, ws)| {
            let edges = pairs
                .iter()
                .zip(ws)
                .filter_map(|(&(a, b), w)| w.map(|w| (a, b, w as f64)))
                .collect();
            (n, edges)
        })
    })
}

fn dark_store(net: &RoadNetwork) -> FusionStore {
    FusionStore::for_network(OfflineTable::uniform(net, 0.0).unwrap(), net).unwrap()
}

fn length_cfg() -> WeightConfig {
    WeightConfig {
        alpha: 1.0,
        beta: 0.0,
        floor_wh: 0.001,
    }
}

fn packet() -> impl Strategy<Value = SensorPacket> {
    (
        "[A-Z0-9]{3,6}(-[0-9]{1,2})?",
        -90.0..=90.0f64,
        -180.0..=180.0f64,
        0..=1000u32,
        0..=876_000u32,
    )
        .prop_map(|(callsign, lat, lon, irr, t)| SensorPacket {
            callsign,
            lat,
            lon,
            irr: irr as f64 / 1000.0,
            t_meas: t as f64 / 100.0,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn nearest_node_matches_linear_scan(
        pts in proptest::collection::vec((43.0..44.0f64, 18.0..19.0f64), 1..40),
        q in (42.5..44.5f64, 17.5..19.5f64),
    ) {
        let nodes: Vec<Node> = pts.iter().enumerate().map(|(i, &(la, lo))| Node::new(i as u64 + 1, la, lo)).collect();
        let net = RoadNetwork::new(nodes.clone(), vec![]).unwrap();
        let want = nodes
            .iter()
            .map(|n| (haversine_m(q.0, q.1, n.lat, n.lon), n.id))
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .unwrap()
            .1;
        prop_assert_eq!(net.nearest_node_with(Exec::Sequential, q.0, q.1), want);
        prop_assert_eq!(net.nearest_node_with(Exec::Parallel, q.0, q.1), want);
    }

    #[test]
    fn network_text_round_trips((n, weighted) in digraph()) {
        let net = network_from_weights(n, &weighted);
        let back = RoadNetwork::parse(&net.to_text()).unwrap();
        prop_assert_eq!(back.nodes(), net.nodes());
        prop_assert_eq!(back.edges(), net.edges());
    }

    #[test]
    fn dangling_edges_are_rejected((n, weighted) in digraph(), extra in 1..5u64) {
        let nodes: Vec<Node> = (1..=n).map(|i| Node::new(i, 43.8, 18.3 + i as f64 * 0.01)).collect();
        let mut edges: Vec<Edge> = weighted.iter().map(|&(a, b, w)| Edge::new(a, b, w)).collect();
        edges.push(Edge::new(1, n + extra, 10.0));
        prop_assert!(RoadNetwork::new(nodes, edges).is_err());
    }

    #[test]
    fn weight_decreases_with_age(t_meas in 0.0..5000.0f64, d1 in 0.0..500.0f64, d2 in 0.0..500.0f64) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a_lo = temporal_weight(t_meas + lo, t_meas).unwrap();
        let a_hi = temporal_weight(t_meas + hi, t_meas).unwrap();
        prop_assert!(a_hi <= a_lo);
        prop_assert!((0.0..=1.0).contains(&a_lo));
        prop_assert_eq!(temporal_weight(t_meas, t_meas).unwrap(), 1.0);
    }

    #[test]
    fn fusion_stays_between_inputs(
        r_on in 0.0..=1.0f64, r_off in 0.0..=1.0f64,
        t_meas in 0.0..5000.0f64, dt in 0.0..1000.0f64, denom in 1.0..1e6f64,
    ) {
        let r = fuse_with(r_on, r_off, t_meas + dt, t_meas, denom).unwrap();
        prop_assert!(r_on.min(r_off) <= r && r <= r_on.max(r_off));
    }

    #[test]
    fn fusion_rejects_future_and_out_of_range(r in 1.0001..5.0f64, t in 1.0..100.0f64) {
        prop_assert!(fuse(r, 0.5, t, 0.0).is_err());
        prop_assert!(fuse(0.5, -r, t, 0.0).is_err());
        prop_assert!(fuse(0.5, 0.5, 0.0, t).is_err());
    }

    #[test]
    fn calibration_factor_is_clamped(pred in 0.001..1.0f64, meas in 0.0..1.0f64) {
        let net = network_from_weights(2, &[]);
        let mut store = dark_store(&net);
        store.calibrate(pred, meas).unwrap();
        let f = store.calibration_factor();
        prop_assert!((0.5..=2.0).contains(&f));
        prop_assert_eq!(f, (meas / pred).clamp(0.5, 2.0));
    }

    #[test]
    fn offline_interpolation_is_continuous_across_midnight(
        pts in proptest::collection::btree_map(0..24u32, 0.0..=1.0f64, 1..6),
    ) {
        let mut table = OfflineTable::new();
        for (&h, &r) in &pts {
            table.insert(1, h as f64, r).unwrap();
        }
        let before = table.value_at(1, 24.0 * 40.0 - 1e-9).unwrap();
        let after = table.value_at(1, 24.0 * 40.0).unwrap();
        prop_assert!((before - after).abs() < 1e-6);
        for (&h, &r) in &pts {
            prop_assert!((table.value_at(1, 24.0 * 7.0 + h as f64).unwrap() - r).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_energy_is_linear_in_length(len in 1.0..5000.0f64, k in 1u32..8, r in 0.0..=1.0f64, v in 5.0..130.0f64) {
        let spec = VehicleSpec::default();
        let one = edge_energy(&spec, &Edge::new(1, 2, len).with_speed(v), r).unwrap();
        let many = edge_energy(&spec, &Edge::new(1, 2, len * k as f64).with_speed(v), r).unwrap();
        let tol = 1e-9 * many.consumed_wh.abs().max(1.0);
        prop_assert!((many.consumed_wh - k as f64 * one.consumed_wh).abs() < tol);
        prop_assert!((many.harvested_wh - k as f64 * one.harvested_wh).abs() < tol);
        prop_assert!((many.net_wh - k as f64 * one.net_wh).abs() < tol);
    }

    #[test]
    fn route_matches_brute_force((n, weighted) in digraph(), s in 1..=7u64, d in 1..=7u64) {
        let (s, d) = ((s - 1) % n + 1, (d - 1) % n + 1);
        let net = network_from_weights(n, &weighted);
        let got = shortest_route(&net, &dark_store(&net), &VehicleSpec::default(), &length_cfg(), s, d, 0.0);
        match brute_force_route(n, &weighted, s, d) {
            None => prop_assert!(got.is_err()),
            Some((w, path)) => {
                let plan = got.unwrap();
                prop_assert_eq!(plan.total_weight, w);
                prop_assert_eq!(plan.nodes, path);
            }
        }
    }

    #[test]
    fn subpaths_of_optimal_routes_are_optimal((n, weighted) in digraph(), s in 1..=7u64, d in 1..=7u64) {
        let (s, d) = ((s - 1) % n + 1, (d - 1) % n + 1);
        let net = network_from_weights(n, &weighted);
        let weights: Vec<f64> = net.edges().iter().map(|e| e.length_m).collect();
        if let Ok((nodes, _)) = cheapest_path(&net, &weights, s, d) {
            for i in 0..nodes.len() {
                for j in i..nodes.len() {
                    let (sub, _) = cheapest_path(&net, &weights, nodes[i], nodes[j]).unwrap();
                    prop_assert_eq!(&sub[..], &nodes[i..=j]);
                }
            }
        }
    }

    #[test]
    fn raising_an_edge_never_lowers_the_cost(
        (n, weighted) in digraph(), s in 1..=7u64, d in 1..=7u64, pick in any::<prop::sample::Index>(), bump in 1..20u32,
    ) {
        prop_assume!(!weighted.is_empty());
        let (s, d) = ((s - 1) % n + 1, (d - 1) % n + 1);
        let net = network_from_weights(n, &weighted);
        let mut weights: Vec<f64> = net.edges().iter().map(|e| e.length_m).collect();
        let cost = |w: &[f64]| cheapest_path(&net, w, s, d).ok().map(|(_, idx)| idx.iter().map(|&i| w[i]).sum::<f64>());
        let before = cost(&weights);
        let at = pick.index(weights.len());
        weights[at] += bump as f64;
        let after = cost(&weights);
        prop_assert_eq!(before.is_some(), after.is_some());
        if let (Some(b), Some(a)) = (before, after) {
            prop_assert!(a >= b);
        }
    }

    #[test]
    fn scaling_the_weights_keeps_the_route(
        (n, weighted) in digraph(), s in 1..=7u64, d in 1..=7u64, shift in -4i32..=4, r in 0.0..=1.0f64,
    ) {
        let (s, d) = ((s - 1) % n + 1, (d - 1) % n + 1);
        let net = network_from_weights(n, &weighted);
        let store = FusionStore::for_network(OfflineTable::uniform(&net, r).unwrap(), &net).unwrap();
        let spec = VehicleSpec::default();
        // Powers of two scale every weight exactly.
        let k = 2f64.powi(shift);
        let base = WeightConfig { alpha: 0.5, beta: 1.0, floor_wh: 1e-3 };
        let scaled = WeightConfig { alpha: 0.5 * k, beta: k, floor_wh: 1e-3 * k };
        let a = shortest_route(&net, &store, &spec, &base, s, d, 12.0);
        let b = shortest_route(&net, &store, &spec, &scaled, s, d, 12.0);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.nodes, b.nodes);
                prop_assert_eq!(a.total_weight * k, b.total_weight);
            }
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn parking_argmax_survives_shuffling_and_sequential_exec(
        lots in proptest::collection::vec((-0.01..0.01f64, -0.01..0.01f64, 0.0..=1.0f64), 1..20),
        p_irr in 0.0..4.0f64, p_dist in 0.0..4.0f64, rot in 0..20usize,
    ) {
        let lots: Vec<ParkingLot> = lots
            .iter()
            .enumerate()
            .map(|(i, &(dl, dn, irr))| ParkingLot { id: i as u64 + 1, node_id: 1, lat: 43.85 + dl, lon: 18.4 + dn, irradiance: Some(irr) })
            .collect();
        let net = network_from_weights(1, &[]);
        let q = ParkingQuery::new(43.85, 18.4).with_exponents(p_irr, p_dist);
        let a = rank_parking(&net, None, &lots, &q, 0.0, Exec::Parallel).unwrap();
        let mut rotated = lots.clone();
        rotated.rotate_left(rot % lots.len());
        let b = rank_parking(&net, None, &rotated, &q, 0.0, Exec::Sequential).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sunnier_lot_scores_no_lower(
        d in 10.0..2000.0f64, irr in 0.0..0.9f64, extra in 0.0..0.1f64, p_irr in 0.0..4.0f64, p_dist in 0.0..4.0f64,
    ) {
        let q = ParkingQuery::new(0.0, 0.0).with_exponents(p_irr, p_dist);
        prop_assert!(score::parking_score(&q, irr + extra, d) >= score::parking_score(&q, irr, d));
        prop_assert!(score::parking_score(&q, irr, d + 10.0) <= score::parking_score(&q, irr, d));
    }

    #[test]
    fn packet_round_trips(p in packet()) {
        let line = p.to_line();
        let q = parse_sensor_packet(&line).unwrap();
        prop_assert_eq!(&q.callsign, &p.callsign);
        prop_assert!((q.lat - p.lat).abs() <= 1.0 / 6000.0);
        prop_assert!((q.lon - p.lon).abs() <= 1.0 / 6000.0);
        prop_assert_eq!(q.irr, p.irr);
        prop_assert_eq!(q.t_meas, p.t_meas);
        prop_assert_eq!(q.to_line(), line);
    }

    #[test]
    fn observation_dump_round_trips(obs in proptest::collection::vec((1..=5u64, 0.0..=1.0f64, 0.0..9000.0f64), 0..20)) {
        let net = network_from_weights(5, &[]);
        let mut store = dark_store(&net);
        for (i, &(node, r, t)) in obs.iter().enumerate() {
            store.ingest(IrradianceObservation::new(node, r, t, format!("S{i}"))).unwrap();
        }
        let parsed = IrradianceObservation::parse_all(&store.dump()).unwrap();
        let mut replayed = dark_store(&net);
        for o in parsed {
            replayed.ingest(o).unwrap();
        }
        prop_assert_eq!(replayed.dump(), store.dump());
    }
}
