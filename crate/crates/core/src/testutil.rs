//! Shared fixtures for unit tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::network::{load_network, NetworkSpec, RoadDecl, RoadNetwork, StateDecl};

/// Six-intersection demo map. Each intersection carries a lowercase
/// location proposition; `X`, `U`, and `F` are formula keywords, so labels
/// stay lowercase.
pub const DEMO_NET: &str = "\
[states]
A: a
B: b
C: c
D: d
E: e
F: f
[roads]
A -> C 2
C -> A 2
C -> D 4
D -> C 4
D -> B 2
B -> D 2
D -> F 3
F -> D 3
D -> E 5
E -> D 5
F -> E 4
";

pub fn demo_net() -> RoadNetwork {
    load_network(DEMO_NET).unwrap()
}

/// Random connected-ish directed map with up to `max_states` states, every
/// state labeled with its own lowercase proposition.
pub fn random_net(rng: &mut ChaCha8Rng, max_states: usize) -> RoadNetwork {
    let n = rng.gen_range(2..=max_states);
    let mut spec = NetworkSpec::default();
    for i in 0..n {
        spec.states.push(StateDecl {
            name: format!("s{i}"),
            props: vec![format!("l{i}")],
        });
    }
    // A random spanning chain keeps most pairs reachable, then extra roads.
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut roads: Vec<(usize, usize)> = Vec::new();
    for w in order.windows(2) {
        roads.push((w[0], w[1]));
    }
    let extra = rng.gen_range(0..=n * 2);
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && !roads.contains(&(a, b)) {
            roads.push((a, b));
        }
    }
    for (a, b) in roads {
        spec.roads.push(RoadDecl {
            from: format!("s{a}"),
            to: format!("s{b}"),
            weight: rng.gen_range(1..=6),
            two_way: rng.gen_bool(0.5) && !spec.roads.iter().any(|r| r.from == format!("s{b}") && r.to == format!("s{a}")),
        });
    }
    // Two-way expansion may still collide; drop exact duplicates.
    let mut seen = std::collections::HashSet::new();
    spec.roads.retain(|r| {
        let mut keep = seen.insert((r.from.clone(), r.to.clone()));
        if r.two_way {
            keep &= seen.insert((r.to.clone(), r.from.clone()));
        }
        keep
    });
    RoadNetwork::from_spec(&spec).unwrap()
}
