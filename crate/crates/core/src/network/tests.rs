use super::*;
use crate::testutil::{demo_net, random_net, DEMO_NET};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tt(net: &RoadNetwork, from: &str, to: &str) -> Option<u64> {
    net.shortest_travel_time(net.state_id(from).unwrap(), net.state_id(to).unwrap())
        .unwrap()
        .map(|d| d.ticks())
}

#[test]
fn demo_map_loads_and_answers_queries() {
    let net = demo_net();
    assert_eq!(net.num_states(), 6);
    // A -> C -> D -> E.
    assert_eq!(tt(&net, "A", "E"), Some(11));
    assert_eq!(tt(&net, "B", "F"), Some(5));
    assert_eq!(tt(&net, "D", "D"), Some(0));
    // A has no incoming roads other than C -> A.
    assert_eq!(tt(&net, "E", "A"), Some(11));
}

#[test]
fn lexicographic_path_tie_break() {
    let net = demo_net();
    let path = net
        .shortest_path(net.state_id("A").unwrap(), net.state_id("E").unwrap())
        .unwrap()
        .unwrap();
    let names: Vec<&str> = path.iter().map(|&s| net.state_name(s)).collect();
    assert_eq!(names, ["A", "C", "D", "E"]);
}

#[test]
fn single_state_no_roads() {
    let net = load_network("[states]\nonly\n").unwrap();
    assert_eq!(net.num_states(), 1);
    let s = net.state_id("only").unwrap();
    assert_eq!(net.shortest_travel_time(s, s).unwrap(), Some(Duration::ZERO));
}

#[test]
fn unreachable_pairs_report_unreachable() {
    let net = load_network("[states]\na\nb\n").unwrap();
    let a = net.state_id("a").unwrap();
    let b = net.state_id("b").unwrap();
    assert_eq!(net.shortest_travel_time(a, b).unwrap(), None);
    assert_eq!(net.shortest_path(a, b).unwrap(), None);
}

#[test]
fn zero_weight_is_rejected() {
    let err = load_network("[states]\na\nb\n[roads]\na -> b 0\n").unwrap_err();
    assert!(matches!(err, NetworkError::Validation(_)), "{err}");
    assert!(err.to_string().contains("a -> b"));
}

#[test]
fn duplicate_road_is_rejected() {
    let src = "[states]\na\nb\n[roads]\na -> b 1\na -> b 2\n";
    let err = load_network(src).unwrap_err();
    assert!(err.to_string().contains("duplicate road"));
    // Two-way expansion can also collide with an explicit reverse road.
    let src = "[states]\na\nb\n[roads]\na <-> b 1\nb -> a 1\n";
    assert!(load_network(src).is_err());
}

#[test]
fn undeclared_endpoint_is_rejected() {
    let err = load_network("[states]\na\n[roads]\na -> ghost 1\n").unwrap_err();
    assert!(err.to_string().contains("ghost"));
}

#[test]
fn parse_errors_carry_line_numbers() {
    let err = load_network("[roads]\nnot a road\n").unwrap_err();
    match err {
        NetworkError::Parse { line, .. } => assert_eq!(line, 2),
        other => panic!("expected parse error, got {other}"),
    }
}

#[test]
fn unknown_state_query() {
    let net = demo_net();
    assert!(net.state_id("Z").is_err());
}

#[test]
fn serialize_round_trip_is_identity() {
    let net = demo_net();
    let text = net.serialize();
    let again = load_network(&text).unwrap();
    assert_eq!(text, again.serialize());
    assert_eq!(net.num_states(), again.num_states());
    assert_eq!(net.roads(), again.roads());
    // The demo source is not canonical, but content round-trips.
    let _ = DEMO_NET;
}

#[test]
fn grid_generator_is_deterministic_and_valid() {
    let spec = GridSpec {
        rows: 4,
        cols: 5,
        weight_min: 2,
        weight_max: 9,
        label_density: 0.5,
        seed: 11,
    };
    let a = generate_grid(&spec).unwrap();
    let b = generate_grid(&spec).unwrap();
    assert_eq!(a.serialize(), b.serialize());
    assert_eq!(a.num_states(), 20);
    // Fully connected grid: everything reachable.
    for s in a.states() {
        for t in a.states() {
            assert!(a.shortest_travel_time(s, t).unwrap().is_some());
        }
    }
    let c = generate_grid(&GridSpec { seed: 12, ..spec }).unwrap();
    assert_ne!(a.serialize(), c.serialize());
}

/// Exhaustive minimum over simple paths. Weights are positive, so an
/// optimal path never repeats a state and this bounds the search.
fn brute_force_time(net: &RoadNetwork, from: StateId, to: StateId) -> Option<u64> {
    fn go(
        net: &RoadNetwork,
        here: StateId,
        to: StateId,
        seen: &mut Vec<bool>,
        cost: u64,
        best: &mut Option<u64>,
    ) {
        if here == to {
            if best.is_none_or(|b| cost < b) {
                *best = Some(cost);
            }
            return;
        }
        for &(v, w) in net.roads_from(here) {
            if !seen[v.idx()] {
                seen[v.idx()] = true;
                go(net, v, to, seen, cost + w, best);
                seen[v.idx()] = false;
            }
        }
    }
    let mut best = None;
    let mut seen = vec![false; net.num_states()];
    seen[from.idx()] = true;
    go(net, from, to, &mut seen, 0, &mut best);
    best
}

#[test]
fn agrees_with_brute_force_on_small_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..60 {
        let net = random_net(&mut rng, 8);
        for s in net.states() {
            for t in net.states() {
                assert_eq!(
                    tt(&net, net.state_name(s), net.state_name(t)),
                    brute_force_time(&net, s, t),
                    "map:\n{}",
                    net.serialize()
                );
            }
        }
    }
}

proptest! {
    #[test]
    fn triangle_property(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&mut rng, 7);
        for a in net.states() {
            for b in net.states() {
                for c in net.states() {
                    if let (Some(ab), Some(bc), Some(ac)) = (
                        net.dist(a, b),
                        net.dist(b, c),
                        net.dist(a, c),
                    ) {
                        prop_assert!(ac <= ab + bc);
                    }
                }
            }
        }
    }
}
