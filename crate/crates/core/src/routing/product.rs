//! Earliest-arrival search on the product of the road map with one DFA per
//! request, plus a picked/not-picked bit per request (pick-up time is
//! path-dependent, so it must live in the state). Pick-up is mandatory on
//! the first visit to a request's pick-up state; boarding feeds the state's
//! label to the request's DFA, and every later arrival advances it. A
//! request's drop-off is the arrival that first turns its DFA accepting.
//!
//! All deadline checks are monotone in time, so arriving at a product
//! state earlier is always at least as good: earliest-arrival search is
//! exact, and every minimum-completion plan is "tight" (it passes each
//! product state at that state's earliest arrival). The search runs A*
//! ordered by arrival time plus an admissible completion bound (each
//! request's exact remaining time from its precomputed reverse-product
//! table; waiting requests add their approach distance), expanding every
//! state whose bound does not exceed the optimum so that the
//! lexicographically smallest minimum-completion route can then be
//! extracted by a greedy walk over the tight edges that still reach an
//! accepting state.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use smallvec::SmallVec;

use crate::network::{RoadNetwork, StateId};
use crate::routing::Request;
use crate::scltl::Dfa;
use crate::time::Tick;

/// Product states pack into one u128 (32-bit map state, 16 bits of DFA
/// state per party, one picked bit per party), which caps concurrent
/// requests per vehicle. Serving more would mean vehicles with capacity
/// over four; extend the packing if that ever becomes a need.
pub(crate) const MAX_PARTIES: usize = 4;

/// One obligation in a plan: an onboard request mid-formula or a new
/// request waiting for pick-up.
pub(crate) struct Party {
    /// Present for real requests: (request, was_onboard, onboard pick-up
    /// time). `None` for the virtual party used to compute optimal
    /// satisfaction times.
    pub request: Option<(Arc<Request>, bool, Tick)>,
    pub dfa: Arc<Dfa>,
    pub sym_at: Vec<u16>,
    pub dfa_state: u32,
    pub picked: bool,
    pub pick_state: StateId,
    pub pickup_deadline: Tick,
    pub drop_deadline: Tick,
    pub t_star: u64,
    /// Exact minimum remaining travel time to acceptance per (map state,
    /// DFA state), or `None` to search without a heuristic.
    pub remaining: Option<Arc<Vec<u64>>>,
}

impl Party {
    /// Admissible completion bound for this party at map state `s` with
    /// the packed per-party data from `key`.
    fn bound(&self, net: &RoadNetwork, s: StateId, dfa_state: u16, unpicked: bool) -> u64 {
        if unpicked {
            let approach = net.dist(s, self.pick_state).unwrap_or(u64::MAX);
            return approach.saturating_add(self.t_star);
        }
        if self.dfa.is_accepting(dfa_state as u32) {
            return 0;
        }
        match &self.remaining {
            Some(table) => table[s.idx() * self.dfa.num_states() + dfa_state as usize],
            None => 0,
        }
    }
}

/// Packed product state: bits 0..32 map state, 32 + 16i..32 + 16(i+1) the
/// i-th party's DFA state, top byte the not-yet-picked mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Key(u128);

impl Key {
    fn new(state: StateId, dfa: &SmallVec<[u16; 4]>, unpicked: u8) -> Key {
        let mut bits = state.0 as u128;
        for (i, &q) in dfa.iter().enumerate() {
            bits |= (q as u128) << (32 + 16 * i);
        }
        bits |= (unpicked as u128) << 120;
        Key(bits)
    }

    fn state(self) -> StateId {
        StateId(self.0 as u32)
    }

    fn dfa(self, i: usize) -> u16 {
        (self.0 >> (32 + 16 * i)) as u16
    }

    fn unpicked(self) -> u8 {
        (self.0 >> 120) as u8
    }

    fn is_unpicked(self, i: usize) -> bool {
        self.unpicked() & (1 << i) != 0
    }

    fn accepting(self, parties: &[Party]) -> bool {
        self.unpicked() == 0
            && parties
                .iter()
                .enumerate()
                .all(|(i, p)| p.dfa.is_accepting(self.dfa(i) as u32))
    }
}

pub(crate) struct Found {
    pub route: Vec<(Tick, StateId)>,
    pub completion: Tick,
    /// Per-party (pickup, drop) along the returned route. For parties that
    /// started onboard the pickup entry is the plan start time.
    pub timings: Vec<(Tick, Tick)>,
}

/// One party's transition when the vehicle arrives at `s2` at `t2`.
/// Returns the new (dfa state, picked) or `None` when any deadline can no
/// longer be met — which also covers a mandatory pick-up arriving too late.
fn party_step(
    net: &RoadNetwork,
    p: &Party,
    dfa_state: u16,
    picked: bool,
    s2: StateId,
    t2: Tick,
) -> Option<(u16, bool)> {
    if picked {
        let was_accepting = p.dfa.is_accepting(dfa_state as u32);
        let ns = p.dfa.step(dfa_state as u32, p.sym_at[s2.idx()]) as u16;
        if !was_accepting {
            if p.dfa.is_accepting(ns as u32) {
                // Drop-off happens here.
                if t2 > p.drop_deadline {
                    return None;
                }
            } else if t2 >= p.drop_deadline {
                // Any future drop arrives at t2 + 1 at the earliest.
                return None;
            }
        }
        Some((ns, true))
    } else if s2 == p.pick_state {
        if t2 > p.pickup_deadline {
            return None;
        }
        let ns = p.dfa.step(p.dfa.init(), p.sym_at[s2.idx()]) as u16;
        if p.dfa.is_accepting(ns as u32) {
            if t2 > p.drop_deadline {
                return None;
            }
        } else if t2 >= p.drop_deadline {
            return None;
        }
        Some((ns, true))
    } else {
        // Still waiting: the vehicle must eventually detour to the pick-up
        // state, so map distances give admissible deadline bounds.
        let approach = net.dist(s2, p.pick_state)?;
        if t2.saturating_add(approach) > p.pickup_deadline {
            return None;
        }
        if t2.saturating_add(approach).saturating_add(p.t_star) > p.drop_deadline {
            return None;
        }
        Some((dfa_state, false))
    }
}

/// The product state for standing at `start` at `start_time`, before any
/// road is taken. Requests whose pick-up state is the starting position
/// board immediately.
fn initial_key(
    net: &RoadNetwork,
    parties: &[Party],
    start: StateId,
    start_time: Tick,
) -> Option<Key> {
    let mut dfa = SmallVec::new();
    let mut unpicked = 0u8;
    for (i, p) in parties.iter().enumerate() {
        if p.picked {
            if !p.dfa.is_accepting(p.dfa_state) && start_time >= p.drop_deadline {
                return None;
            }
            dfa.push(p.dfa_state as u16);
        } else {
            let (q, picked) = party_step(net, p, p.dfa.init() as u16, false, start, start_time)?;
            if !picked {
                unpicked |= 1 << i;
            }
            dfa.push(q);
        }
    }
    Some(Key::new(start, &dfa, unpicked))
}

fn successor(net: &RoadNetwork, parties: &[Party], key: Key, s2: StateId, t2: Tick) -> Option<Key> {
    let mut dfa: SmallVec<[u16; 4]> = SmallVec::new();
    let mut unpicked = 0u8;
    for (i, p) in parties.iter().enumerate() {
        let (q, picked) = party_step(net, p, key.dfa(i), !key.is_unpicked(i), s2, t2)?;
        if !picked {
            unpicked |= 1 << i;
        }
        dfa.push(q);
    }
    Some(Key::new(s2, &dfa, unpicked))
}

/// Earliest accepting run from `start` at `start_time`; `None` when no
/// deadline-respecting run exists.
pub(crate) fn search(
    net: &RoadNetwork,
    parties: &[Party],
    start: StateId,
    start_time: Tick,
) -> Option<Found> {
    debug_assert!(parties.len() <= MAX_PARTIES);
    let key0 = initial_key(net, parties, start, start_time)?;

    // Admissible completion bound: every party still has to finish.
    let estimate = |key: Key, t: Tick| -> Tick {
        let mut f = t;
        for (i, p) in parties.iter().enumerate() {
            let b = p.bound(net, key.state(), key.dfa(i), key.is_unpicked(i));
            f = f.max(t.saturating_add(b));
        }
        f
    };

    let mut keys: Vec<Key> = vec![key0];
    let mut ids: HashMap<Key, u32> = HashMap::new();
    ids.insert(key0, 0);
    let mut dist: Vec<Tick> = vec![start_time];
    let mut heap: BinaryHeap<Reverse<(Tick, Tick, u32)>> = BinaryHeap::new();
    heap.push(Reverse((estimate(key0, start_time), start_time, 0)));
    let mut best: Option<Tick> = None;
    let mut settled = 0usize;
    let mut peak_frontier = 0usize;

    while let Some(Reverse((f, t, kid))) = heap.pop() {
        if t > dist[kid as usize] {
            continue;
        }
        // Everything left has a completion bound past the optimum; the
        // tight states of every optimal plan are already settled.
        if best.is_some_and(|b| f > b) {
            break;
        }
        settled += 1;
        peak_frontier = peak_frontier.max(heap.len());
        let key = keys[kid as usize];
        if key.accepting(parties) {
            best.get_or_insert(t);
            continue;
        }
        for &(s2, w) in net.roads_from(key.state()) {
            let t2 = t.saturating_add(w);
            if best.is_some_and(|b| t2 > b) {
                continue;
            }
            let Some(succ) = successor(net, parties, key, s2, t2) else {
                continue;
            };
            // The exact remaining-time tables also sharpen the deadline
            // pruning beyond the per-step checks.
            let infeasible = parties.iter().enumerate().any(|(i, p)| {
                !succ.is_unpicked(i)
                    && !p.dfa.is_accepting(succ.dfa(i) as u32)
                    && t2.saturating_add(p.bound(net, s2, succ.dfa(i), false))
                        > p.drop_deadline
            });
            if infeasible {
                continue;
            }
            let f2 = estimate(succ, t2);
            if best.is_some_and(|b| f2 > b) {
                continue;
            }
            let sid = match ids.get(&succ) {
                Some(&sid) => sid,
                None => {
                    let sid = keys.len() as u32;
                    keys.push(succ);
                    ids.insert(succ, sid);
                    dist.push(Tick::MAX);
                    sid
                }
            };
            if t2 < dist[sid as usize] {
                dist[sid as usize] = t2;
                heap.push(Reverse((f2, t2, sid)));
            }
        }
    }

    let completion = best?;
    log::debug!(
        "product search: {} parties, {} states interned, {} settled, peak frontier {}",
        parties.len(),
        keys.len(),
        settled,
        peak_frontier
    );

    // Tight edges: u -> v with dist[u] + w == dist[v] <= completion. Walk
    // backward from the optimal accepting states to find every tight state
    // that can still finish, then greedily follow the smallest next road.
    let accepting_at_best: Vec<u32> = (0..keys.len() as u32)
        .filter(|&k| dist[k as usize] == completion && keys[k as usize].accepting(parties))
        .collect();
    let mut rev: HashMap<u32, Vec<u32>> = HashMap::new();
    for kid in 0..keys.len() as u32 {
        let t = dist[kid as usize];
        if t > completion || keys[kid as usize].accepting(parties) {
            continue;
        }
        let key = keys[kid as usize];
        for &(s2, w) in net.roads_from(key.state()) {
            let t2 = t.saturating_add(w);
            if t2 > completion {
                continue;
            }
            if let Some(succ) = successor(net, parties, key, s2, t2) {
                if let Some(&sid) = ids.get(&succ) {
                    if dist[sid as usize] == t2 {
                        rev.entry(sid).or_default().push(kid);
                    }
                }
            }
        }
    }
    let mut reach = vec![false; keys.len()];
    let mut queue: Vec<u32> = accepting_at_best.clone();
    for &k in &accepting_at_best {
        reach[k as usize] = true;
    }
    while let Some(k) = queue.pop() {
        if let Some(preds) = rev.get(&k) {
            for &p in preds {
                if !reach[p as usize] {
                    reach[p as usize] = true;
                    queue.push(p);
                }
            }
        }
    }
    assert!(reach[0], "optimal plan exists but start cannot reach it tightly");

    let mut route: Vec<(Tick, StateId)> = vec![(start_time, start)];
    let mut cur = 0u32;
    while !keys[cur as usize].accepting(parties) {
        let key = keys[cur as usize];
        let t = dist[cur as usize];
        let mut stepped = false;
        for &(s2, w) in net.roads_from(key.state()) {
            let t2 = t.saturating_add(w);
            if t2 > completion {
                continue;
            }
            let Some(succ) = successor(net, parties, key, s2, t2) else {
                continue;
            };
            let Some(&sid) = ids.get(&succ) else {
                continue;
            };
            if dist[sid as usize] == t2 && reach[sid as usize] {
                route.push((t2, s2));
                cur = sid;
                stepped = true;
                break;
            }
        }
        assert!(stepped, "tight walk stalled before reaching the plan end");
    }

    // Replay the route to recover pick-up and drop-off times per party.
    let mut timings: Vec<(Tick, Tick)> = Vec::with_capacity(parties.len());
    let mut per_party: Vec<(u16, bool, Option<Tick>, Option<Tick>)> = parties
        .iter()
        .map(|p| {
            let (q, picked) = if p.picked {
                (p.dfa_state as u16, true)
            } else if p.pick_state == start {
                (p.dfa.step(p.dfa.init(), p.sym_at[start.idx()]) as u16, true)
            } else {
                (p.dfa.init() as u16, false)
            };
            let pickup = picked.then_some(start_time);
            let drop = (picked && p.dfa.is_accepting(q as u32)).then_some(start_time);
            (q, picked, pickup, drop)
        })
        .collect();
    for &(t, s) in &route[1..] {
        for (i, p) in parties.iter().enumerate() {
            let (q, picked, pickup, drop) = &mut per_party[i];
            if drop.is_some() {
                continue;
            }
            let (nq, npicked) =
                party_step(net, p, *q, *picked, s, t).expect("replay follows a valid plan");
            if npicked && !*picked {
                *pickup = Some(t);
            }
            *q = nq;
            *picked = npicked;
            if *picked && p.dfa.is_accepting(*q as u32) {
                *drop = Some(t);
            }
        }
    }
    for (q, picked, pickup, drop) in per_party {
        let _ = q;
        assert!(picked, "replay left a request unboarded");
        timings.push((
            pickup.expect("picked parties have pickup times"),
            drop.expect("completed plans drop every request"),
        ));
    }

    Some(Found {
        route,
        completion,
        timings,
    })
}
