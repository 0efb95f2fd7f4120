//! Route planning for one vehicle and a set of requests on the product of
//! the road map with each request's DFA. Plans minimize completion time
//! subject to per-request pickup and delay deadlines.

mod product;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::network::{PropId, RoadNetwork, StateId};
use crate::scltl::{to_dfa, Dfa, Formula};
use crate::time::{Duration, Tick};

use product::{search, Party};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct RequestId(pub u32);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Sub-requests split from one original request share a group; assignment
/// treats a group all-or-none.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct GroupId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RoutingError {
    /// No deadline-respecting accepting run exists.
    #[error("no feasible route")]
    Infeasible,
    #[error("capacity exceeded: {needed} seats requested, {available} available")]
    CapacityExceeded { needed: u32, available: u32 },
    #[error("bad request: {0}")]
    BadRequest(String),
}

/// A transportation request bound to a network: pick-up proposition plus a
/// body formula describing what must happen after boarding. The full
/// request `F (pick & body)` is compiled to its DFA once, at construction.
#[derive(Debug)]
pub struct Request {
    pub id: RequestId,
    /// Display name from the scenario ("r3", "r3.1" for sub-requests).
    pub name: String,
    pub group: GroupId,
    pub pick_prop: PropId,
    pub pick_state: StateId,
    pub body: Formula,
    pub full: Formula,
    pub dfa: Arc<Dfa>,
    pub t_req: Tick,
    pub seats: u32,
    pub max_wait: Duration,
    pub max_delay: Duration,
    /// Optimal unshared satisfaction duration from the pick-up state.
    pub t_star: Duration,
    /// Per-network-state DFA input symbol, precomputed.
    pub(crate) sym_at: Vec<u16>,
    /// Exact minimum travel time from (map state, DFA state) to
    /// acceptance, from one reverse sweep over the request's own product;
    /// `u64::MAX` where acceptance is unreachable. Drives the planner's
    /// A* bound and yields the optimal satisfaction time for free.
    pub(crate) remaining: Arc<Vec<u64>>,
    /// The unshared optimal route from the pick-up state: waypoints as
    /// (offset from pick-up, state), starting at (0, pick_state) and
    /// ending at the drop-off, `t_star` ticks later. Single-request plans
    /// for empty vehicles splice this onto the approach path.
    pub(crate) unshared_route: Arc<Vec<(u64, StateId)>>,
}

impl Request {
    /// Validates and builds a request. The pick-up proposition must mark
    /// exactly one state, every body atom must exist in the network's
    /// universe, and the request must be satisfiable from its pick-up
    /// state (otherwise `Infeasible`).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        net: &RoadNetwork,
        id: RequestId,
        name: impl Into<String>,
        group: GroupId,
        pick: &str,
        body: Formula,
        t_req: Tick,
        seats: u32,
        max_wait: Duration,
        max_delay: Duration,
    ) -> Result<Request, RoutingError> {
        let name = name.into();
        if seats == 0 {
            return Err(RoutingError::BadRequest(format!(
                "request {name}: seats must be >= 1"
            )));
        }
        let pick_prop = net
            .prop_id(pick)
            .ok_or_else(|| RoutingError::BadRequest(format!(
                "request {name}: pick-up proposition `{pick}` not in the network"
            )))?;
        let carriers = net.states_with_prop(pick_prop);
        if carriers.len() != 1 {
            return Err(RoutingError::BadRequest(format!(
                "request {name}: pick-up proposition `{pick}` marks {} states, need exactly 1",
                carriers.len()
            )));
        }
        let pick_state = carriers[0];
        let full = Formula::eventually(Formula::and(Formula::atom(pick), body.clone()));
        for atom in full.atoms() {
            if net.prop_id(&atom).is_none() {
                return Err(RoutingError::BadRequest(format!(
                    "request {name}: formula atom `{atom}` not in the network"
                )));
            }
        }
        let dfa = to_dfa(&full)
            .map_err(|e| RoutingError::BadRequest(format!("request {name}: {e}")))?;
        let sym_at = sym_table(net, &dfa);
        let remaining = remaining_table(net, &dfa, &sym_at);
        let seeded = dfa.step(dfa.init(), sym_at[pick_state.idx()]);
        let shortest = remaining[pick_state.idx() * dfa.num_states() + seeded as usize];
        if shortest == u64::MAX {
            return Err(RoutingError::Infeasible);
        }
        let dfa = Arc::new(dfa);
        let unshared = unshared_search(net, &dfa, &sym_at, pick_state)
            .ok_or(RoutingError::Infeasible)?;
        assert_eq!(
            unshared.completion, shortest,
            "unshared route duration must match the reverse-sweep table"
        );
        Ok(Request {
            id,
            name,
            group,
            pick_prop,
            pick_state,
            body,
            full,
            dfa,
            t_req,
            seats,
            max_wait,
            max_delay,
            t_star: Duration::new(shortest),
            sym_at,
            remaining: Arc::new(remaining),
            unshared_route: Arc::new(unshared.route),
        })
    }

    /// Latest admissible pick-up time.
    pub fn pickup_deadline(&self) -> Tick {
        self.t_req + self.max_wait
    }

    /// Latest admissible drop-off time (arrival + optimal duration + slack).
    pub fn drop_deadline(&self) -> Tick {
        self.t_req + (self.t_star + self.max_delay)
    }

    pub(crate) fn sym(&self, s: StateId) -> u16 {
        self.sym_at[s.idx()]
    }
}

/// Minimum travel time to acceptance from every (map state, DFA state),
/// by one multi-source reverse sweep over the request's product graph.
fn remaining_table(net: &RoadNetwork, dfa: &Dfa, sym_at: &[u16]) -> Vec<u64> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let nq = dfa.num_states();
    let idx = |s: usize, q: usize| s * nq + q;
    let mut rev: Vec<Vec<(u32, u64)>> = vec![Vec::new(); net.num_states() * nq];
    for &(from, to, w) in net.roads() {
        for q in 0..nq {
            let q2 = dfa.step(q as u32, sym_at[to.idx()]);
            rev[idx(to.idx(), q2 as usize)].push((idx(from.idx(), q) as u32, w));
        }
    }
    let mut dist = vec![u64::MAX; net.num_states() * nq];
    let mut heap = BinaryHeap::new();
    for s in 0..net.num_states() {
        for q in 0..nq {
            if dfa.is_accepting(q as u32) {
                dist[idx(s, q)] = 0;
                heap.push(Reverse((0u64, idx(s, q) as u32)));
            }
        }
    }
    while let Some(Reverse((d, node))) = heap.pop() {
        if d > dist[node as usize] {
            continue;
        }
        for &(pred, w) in &rev[node as usize] {
            let nd = d.saturating_add(w);
            if nd < dist[pred as usize] {
                dist[pred as usize] = nd;
                heap.push(Reverse((nd, pred)));
            }
        }
    }
    dist
}

fn sym_table(net: &RoadNetwork, dfa: &Dfa) -> Vec<u16> {
    let atom_props: Vec<Option<PropId>> =
        dfa.atoms().iter().map(|a| net.prop_id(a)).collect();
    net.states()
        .map(|s| {
            let mut sym = 0u16;
            for (bit, p) in atom_props.iter().enumerate() {
                if let Some(p) = p {
                    if net.has_prop(s, *p) {
                        sym |= 1 << bit;
                    }
                }
            }
            sym
        })
        .collect()
}

/// An in-progress request riding a vehicle: its DFA state reflects the
/// labels seen since pick-up.
#[derive(Debug, Clone)]
pub struct Onboard {
    pub request: Arc<Request>,
    pub dfa_state: u32,
    pub pickup_time: Tick,
}

/// Planner-facing snapshot of one vehicle.
///
/// `position`/`available_at` encode commitment to the current road: a
/// vehicle mid-road reports the road's head intersection and its arrival
/// time there.
#[derive(Debug, Clone)]
pub struct VehicleState {
    pub id: VehicleId,
    pub capacity: u32,
    pub position: StateId,
    pub available_at: Tick,
    pub onboard: Vec<Onboard>,
    /// Seat-ticks accumulated over the whole run so far (utility history).
    pub utility_history: u64,
}

impl VehicleState {
    pub fn new(id: VehicleId, capacity: u32, position: StateId) -> VehicleState {
        VehicleState {
            id,
            capacity,
            position,
            available_at: 0,
            onboard: Vec::new(),
            utility_history: 0,
        }
    }

    pub fn seats_onboard(&self) -> u32 {
        self.onboard.iter().map(|o| o.request.seats).sum()
    }

    /// Available capacity; the vehicle is "available" while this is > 0.
    pub fn free_seats(&self) -> u32 {
        self.capacity - self.seats_onboard()
    }
}

/// Timed outcome for one request within a plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanOutcome {
    pub request: RequestId,
    pub seats: u32,
    pub was_onboard: bool,
    pub pickup: Tick,
    pub drop: Tick,
    /// `drop - t_req - t_star`.
    pub delay: u64,
}

/// A committed timed route for one vehicle, completing every onboard and
/// newly assigned request.
#[derive(Debug, Clone)]
pub struct RoutePlan {
    pub vehicle: VehicleId,
    pub start_time: Tick,
    /// Waypoints (arrival tick, state); the first entry is the starting
    /// position at `start_time`.
    pub route: Vec<(Tick, StateId)>,
    /// Per-request timings, sorted by request id.
    pub outcomes: Vec<PlanOutcome>,
    /// Trip cost: sum of delays over the newly assigned requests.
    pub trip_cost: u64,
    /// Occupied seat-ticks over the plan horizon (onboard requests count
    /// from the plan start, new ones from their pick-up, each until drop).
    pub trip_utility: u64,
    pub completion: Tick,
}

impl RoutePlan {
    pub fn outcome(&self, r: RequestId) -> Option<&PlanOutcome> {
        self.outcomes.iter().find(|o| o.request == r)
    }

    /// Route as state names, for reports and tests.
    pub fn route_names(&self, net: &RoadNetwork) -> Vec<String> {
        self.route
            .iter()
            .map(|&(_, s)| net.state_name(s).to_string())
            .collect()
    }
}

struct Unshared {
    completion: u64,
    route: Vec<(u64, StateId)>,
}

/// Optimal unshared run: board at the pick-up state at offset 0, complete
/// as fast as the map allows, no deadlines. Searched without the A*
/// heuristic, so it stays an independent check of the reverse-sweep table.
fn unshared_search(
    net: &RoadNetwork,
    dfa: &Arc<Dfa>,
    sym_at: &[u16],
    pick_state: StateId,
) -> Option<Unshared> {
    let parties = vec![Party {
        request: None,
        dfa: Arc::clone(dfa),
        sym_at: sym_at.to_vec(),
        dfa_state: dfa.init(),
        picked: false,
        pick_state,
        pickup_deadline: Tick::MAX,
        drop_deadline: Tick::MAX,
        t_star: 0,
        remaining: None,
    }];
    let found = search(net, &parties, pick_state, 0)?;
    Some(Unshared {
        completion: found.completion,
        route: found.route,
    })
}

/// Minimal unshared satisfaction duration: a vehicle standing at the
/// pick-up state boards the request immediately and completes it as fast
/// as the map allows. Deadlines do not apply.
pub fn optimal_satisfaction_time(
    net: &RoadNetwork,
    r: &Request,
) -> Result<Duration, RoutingError> {
    let found = unshared_search(net, &r.dfa, &r.sym_at, r.pick_state)
        .ok_or(RoutingError::Infeasible)?;
    Ok(Duration::new(found.completion))
}

/// Plans the minimum-completion-time route for `vehicle` that completes
/// all its onboard requests plus `new_requests`, respecting every pickup
/// and delay deadline. Pick-up happens on the first visit to a request's
/// pick-up state at or after `now`.
pub fn plan_trip(
    net: &RoadNetwork,
    vehicle: &VehicleState,
    new_requests: &[Arc<Request>],
    now: Tick,
) -> Result<RoutePlan, RoutingError> {
    let needed: u32 = vehicle.seats_onboard()
        + new_requests.iter().map(|r| r.seats).sum::<u32>();
    if needed > vehicle.capacity {
        return Err(RoutingError::CapacityExceeded {
            needed,
            available: vehicle.capacity,
        });
    }
    let start_time = now.max(vehicle.available_at);
    let mut parties: Vec<Party> = Vec::with_capacity(vehicle.onboard.len() + new_requests.len());
    for ob in &vehicle.onboard {
        parties.push(Party {
            request: Some((Arc::clone(&ob.request), true, ob.pickup_time)),
            dfa: Arc::clone(&ob.request.dfa),
            sym_at: ob.request.sym_at.clone(),
            dfa_state: ob.dfa_state,
            picked: true,
            pick_state: ob.request.pick_state,
            pickup_deadline: Tick::MAX,
            drop_deadline: ob.request.drop_deadline(),
            t_star: ob.request.t_star.ticks(),
            remaining: Some(Arc::clone(&ob.request.remaining)),
        });
    }
    for r in new_requests {
        parties.push(Party {
            request: Some((Arc::clone(r), false, 0)),
            dfa: Arc::clone(&r.dfa),
            sym_at: r.sym_at.clone(),
            dfa_state: r.dfa.init(),
            picked: false,
            pick_state: r.pick_state,
            pickup_deadline: r.pickup_deadline(),
            drop_deadline: r.drop_deadline(),
            t_star: r.t_star.ticks(),
            remaining: Some(Arc::clone(&r.remaining)),
        });
    }
    if parties.len() > product::MAX_PARTIES {
        return Err(RoutingError::BadRequest(format!(
            "{} concurrent requests on one vehicle exceeds the supported {}",
            parties.len(),
            product::MAX_PARTIES
        )));
    }
    let found = search(net, &parties, vehicle.position, start_time)
        .ok_or(RoutingError::Infeasible)?;

    let mut outcomes: Vec<PlanOutcome> = Vec::new();
    let mut trip_cost = 0u64;
    let mut trip_utility = 0u64;
    for (i, party) in parties.iter().enumerate() {
        let (request, was_onboard, onboard_pickup) = match &party.request {
            Some((r, ob, pt)) => (r, *ob, *pt),
            None => continue,
        };
        let (pickup, drop) = found.timings[i];
        let pickup = if was_onboard { onboard_pickup } else { pickup };
        assert!(
            was_onboard || pickup <= request.pickup_deadline(),
            "plan violates pickup deadline for {}",
            request.name
        );
        assert!(
            drop <= request.drop_deadline(),
            "plan violates drop deadline for {}",
            request.name
        );
        let delay = drop - request.t_req - request.t_star.ticks();
        if !was_onboard {
            trip_cost += delay;
        }
        let occupied_from = if was_onboard { start_time } else { pickup };
        trip_utility += request.seats as u64 * (drop - occupied_from);
        outcomes.push(PlanOutcome {
            request: request.id,
            seats: request.seats,
            was_onboard,
            pickup,
            drop,
            delay,
        });
    }
    outcomes.sort_by_key(|o| o.request);
    Ok(RoutePlan {
        vehicle: vehicle.id,
        start_time,
        route: found.route,
        outcomes,
        trip_cost,
        trip_utility,
        completion: found.completion,
    })
}

/// Can `r` and `r2` share one ride? Tries a virtual empty vehicle placed
/// at either pick-up position, available from `now`.
pub fn check_share(net: &RoadNetwork, r: &Arc<Request>, r2: &Arc<Request>, now: Tick) -> bool {
    let requests = [Arc::clone(r), Arc::clone(r2)];
    [r.pick_state, r2.pick_state].iter().any(|&start| {
        let virtual_vehicle = VehicleState {
            id: VehicleId(u32::MAX),
            capacity: r.seats + r2.seats,
            position: start,
            available_at: now,
            onboard: Vec::new(),
            utility_history: 0,
        };
        plan_trip(net, &virtual_vehicle, &requests, now).is_ok()
    })
}

/// Feasibility of `vehicle` serving `r` alone (on top of its onboard
/// requests), with the real-time vehicle position.
///
/// An empty vehicle takes the closed-form optimum (any minimum-completion
/// plan is a shortest approach to the pick-up followed by the request's
/// unshared optimal route, since completion is pick-up time plus at least
/// `t_star`); occupied vehicles run the general product search.
pub fn check_vehicle_request(
    net: &RoadNetwork,
    vehicle: &VehicleState,
    r: &Arc<Request>,
    now: Tick,
) -> Result<RoutePlan, RoutingError> {
    if r.seats > vehicle.free_seats() {
        return Err(RoutingError::CapacityExceeded {
            needed: r.seats,
            available: vehicle.free_seats(),
        });
    }
    if !vehicle.onboard.is_empty() {
        return plan_trip(net, vehicle, std::slice::from_ref(r), now);
    }

    let start_time = now.max(vehicle.available_at);
    let Some(approach) = net.dist(vehicle.position, r.pick_state) else {
        return Err(RoutingError::Infeasible);
    };
    let pickup = start_time.saturating_add(approach);
    if pickup > r.pickup_deadline() {
        return Err(RoutingError::Infeasible);
    }
    let drop = pickup.saturating_add(r.t_star.ticks());
    if drop > r.drop_deadline() {
        return Err(RoutingError::Infeasible);
    }
    let mut route: Vec<(Tick, StateId)> = Vec::new();
    let path = net
        .shortest_path(vehicle.position, r.pick_state)
        .expect("endpoints validated")
        .expect("distance exists");
    let mut at = start_time;
    let mut prev = vehicle.position;
    for (i, &s) in path.iter().enumerate() {
        if i > 0 {
            let w = net
                .roads_from(prev)
                .iter()
                .find(|&&(to, _)| to == s)
                .map(|&(_, w)| w)
                .expect("path follows roads");
            at += w;
        }
        route.push((at, s));
        prev = s;
    }
    debug_assert_eq!(at, pickup);
    for &(offset, s) in r.unshared_route.iter().skip(1) {
        route.push((pickup + offset, s));
    }
    let delay = drop - r.t_req - r.t_star.ticks();
    Ok(RoutePlan {
        vehicle: vehicle.id,
        start_time,
        route,
        outcomes: vec![PlanOutcome {
            request: r.id,
            seats: r.seats,
            was_onboard: false,
            pickup,
            drop,
            delay,
        }],
        trip_cost: delay,
        trip_utility: r.seats as u64 * r.t_star.ticks(),
        completion: drop,
    })
}
