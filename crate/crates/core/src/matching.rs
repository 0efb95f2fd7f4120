//! Assignment graph construction: which requests can share a ride, which
//! vehicles can serve which requests, and which (trip, vehicle) pairs are
//! feasible with what cost. Feasibility checks fan out to parallel workers
//! and are reassembled in a fixed order, so graphs are deterministic.

use std::sync::Arc;

use rayon::prelude::*;

use crate::network::RoadNetwork;
use crate::routing::{
    check_share, check_vehicle_request, plan_trip, Request, RoutePlan, VehicleId, VehicleState,
};
use crate::time::Tick;

/// Request-vehicle shareability graph: share edges between requests that
/// could ride together, serve edges between vehicles and requests they can
/// serve alone.
#[derive(Debug)]
pub struct RvGraph {
    /// Active requests, sorted by id.
    pub requests: Vec<Arc<Request>>,
    /// Available vehicles (free seats > 0), sorted by id.
    pub vehicles: Vec<VehicleId>,
    /// Index pairs (i, j) with i < j into `requests`.
    pub share_edges: Vec<(usize, usize)>,
    /// (request index, vehicle index, witnessing single-request plan).
    pub serve_edges: Vec<ServeEdge>,
}

#[derive(Debug)]
pub struct ServeEdge {
    pub request: usize,
    pub vehicle: usize,
    pub plan: RoutePlan,
}

impl RvGraph {
    pub fn has_share(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.share_edges.binary_search(&key).is_ok()
    }

    pub fn serve(&self, request: usize, vehicle: usize) -> Option<&ServeEdge> {
        self.serve_edges
            .iter()
            .find(|e| e.request == request && e.vehicle == vehicle)
    }
}

/// A set of requests considered for service by one vehicle. Only built
/// from share-connected cliques; with two-seat vehicles that means
/// singletons and pairs (larger capacities would extend this enumeration).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trip {
    /// Sorted indices into the graph's request list.
    pub members: Vec<usize>,
}

/// Request-trip-vehicle graph: trip membership is implicit in
/// [`Trip::members`]; `edges` are the feasible (trip, vehicle) pairs with
/// their plans and costs.
#[derive(Debug)]
pub struct RtvGraph {
    pub requests: Vec<Arc<Request>>,
    pub vehicles: Vec<VehicleId>,
    pub trips: Vec<Trip>,
    /// Sorted by (vehicle, trip).
    pub edges: Vec<RtvEdge>,
}

#[derive(Debug)]
pub struct RtvEdge {
    pub trip: usize,
    pub vehicle: usize,
    pub plan: RoutePlan,
    /// Trip cost: sum of the trip requests' delays.
    pub cost_raw: u64,
    /// Trip utility: occupied seat-ticks over the plan.
    pub utility: u64,
    /// Cost used by the assignment objective; equals `cost_raw` until
    /// [`RtvGraph::apply_weight_correction`] adjusts it. May go negative.
    pub cost: f64,
}

/// Builds the RV graph for the active requests and available vehicles.
/// A share edge means a virtual vehicle from either pick-up position could
/// serve both requests in time; a serve edge means the concrete vehicle,
/// from its live position and load, can serve the request alone.
pub fn build_rv_graph(
    net: &RoadNetwork,
    active: &[Arc<Request>],
    avail: &[VehicleState],
    now: Tick,
) -> RvGraph {
    let mut requests: Vec<Arc<Request>> = active.to_vec();
    requests.sort_by_key(|r| r.id);
    let mut vehicles: Vec<&VehicleState> = avail.iter().collect();
    vehicles.sort_by_key(|v| v.id);

    let mut pair_candidates = Vec::new();
    for i in 0..requests.len() {
        for j in i + 1..requests.len() {
            pair_candidates.push((i, j));
        }
    }
    let share_edges: Vec<(usize, usize)> = pair_candidates
        .into_par_iter()
        .filter(|&(i, j)| check_share(net, &requests[i], &requests[j], now))
        .collect();

    let mut serve_candidates = Vec::new();
    for (ri, r) in requests.iter().enumerate() {
        for (vi, v) in vehicles.iter().enumerate() {
            if r.seats > v.free_seats() {
                continue;
            }
            // Cheap admissible prefilter: skip vehicles that cannot make
            // the pick-up deadline even on a direct drive.
            let start = now.max(v.available_at);
            match net.dist(v.position, r.pick_state) {
                Some(d) if start.saturating_add(d) <= r.pickup_deadline() => {}
                _ => continue,
            }
            serve_candidates.push((ri, vi));
        }
    }
    let serve_edges: Vec<ServeEdge> = serve_candidates
        .into_par_iter()
        .filter_map(|(ri, vi)| {
            check_vehicle_request(net, vehicles[vi], &requests[ri], now)
                .ok()
                .map(|plan| ServeEdge {
                    request: ri,
                    vehicle: vi,
                    plan,
                })
        })
        .collect();

    RvGraph {
        requests,
        vehicles: vehicles.iter().map(|v| v.id).collect(),
        share_edges,
        serve_edges,
    }
}

/// Trips from the RV graph: singletons for every servable request, pairs
/// for share-connected requests with at least one vehicle serving both.
/// Deterministic order: singletons by request, then pairs.
pub fn enumerate_trips(rv: &RvGraph) -> Vec<Trip> {
    let mut trips = Vec::new();
    for r in 0..rv.requests.len() {
        if rv.serve_edges.iter().any(|e| e.request == r) {
            trips.push(Trip { members: vec![r] });
        }
    }
    for &(i, j) in &rv.share_edges {
        let common_server =
            (0..rv.vehicles.len()).any(|v| rv.serve(i, v).is_some() && rv.serve(j, v).is_some());
        if common_server {
            trips.push(Trip {
                members: vec![i, j],
            });
        }
    }
    trips
}

/// Builds the RTV graph: every feasible (trip, vehicle) edge with its
/// witnessing plan. Pair trips are only attempted for vehicles holding
/// both single-request serve edges (the RV pruning); singleton edges reuse
/// the RV plan.
pub fn build_rtv_graph(
    net: &RoadNetwork,
    rv: &RvGraph,
    trips: &[Trip],
    avail: &[VehicleState],
    now: Tick,
) -> RtvGraph {
    let mut vehicles: Vec<&VehicleState> = avail.iter().collect();
    vehicles.sort_by_key(|v| v.id);
    debug_assert!(vehicles.iter().map(|v| v.id).eq(rv.vehicles.iter().copied()));

    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for (ti, trip) in trips.iter().enumerate() {
        let seats: u32 = trip.members.iter().map(|&r| rv.requests[r].seats).sum();
        for (vi, vehicle) in vehicles.iter().enumerate() {
            if seats > vehicle.free_seats() {
                continue;
            }
            if trip.members.iter().all(|&r| rv.serve(r, vi).is_some()) {
                candidates.push((ti, vi));
            }
        }
    }
    let mut edges: Vec<RtvEdge> = candidates
        .into_par_iter()
        .filter_map(|(ti, vi)| {
            let trip = &trips[ti];
            let plan = if trip.members.len() == 1 {
                Some(rv.serve(trip.members[0], vi).unwrap().plan.clone())
            } else {
                let members: Vec<Arc<Request>> = trip
                    .members
                    .iter()
                    .map(|&r| Arc::clone(&rv.requests[r]))
                    .collect();
                plan_trip(net, vehicles[vi], &members, now).ok()
            };
            plan.map(|plan| RtvEdge {
                trip: ti,
                vehicle: vi,
                cost_raw: plan.trip_cost,
                utility: plan.trip_utility,
                cost: plan.trip_cost as f64,
                plan,
            })
        })
        .collect();
    edges.sort_by_key(|e| (e.vehicle, e.trip));

    RtvGraph {
        requests: rv.requests.clone(),
        vehicles: rv.vehicles.clone(),
        trips: trips.to_vec(),
        edges,
    }
}

impl RtvGraph {
    /// Adjusts every edge cost by `alpha * (vehicle history - fleet
    /// average)`, steering assignments toward vehicles with low
    /// accumulated utility. The average runs over the whole fleet,
    /// occupied vehicles included. Raw costs stay available in `cost_raw`.
    pub fn apply_weight_correction(&mut self, fleet: &[VehicleState], alpha: f64) {
        if fleet.is_empty() {
            return;
        }
        let avg = fleet.iter().map(|v| v.utility_history as f64).sum::<f64>() / fleet.len() as f64;
        for edge in &mut self.edges {
            let vid = self.vehicles[edge.vehicle];
            let hist = fleet
                .iter()
                .find(|v| v.id == vid)
                .map(|v| v.utility_history as f64)
                .expect("graph vehicles come from the fleet");
            edge.cost = edge.cost_raw as f64 + alpha * (hist - avg);
        }
    }

    /// Structured text dump of trips and edges for debugging and golden
    /// tests.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "rtv graph: {} requests, {} trips, {} vehicles, {} edges\n",
            self.requests.len(),
            self.trips.len(),
            self.vehicles.len(),
            self.edges.len()
        ));
        for (ti, trip) in self.trips.iter().enumerate() {
            let names: Vec<&str> = trip
                .members
                .iter()
                .map(|&r| self.requests[r].name.as_str())
                .collect();
            out.push_str(&format!("trip {ti}: {{{}}}\n", names.join(", ")));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "edge trip {} -> {}: sigma {} utility {} cost {}\n",
                e.trip, self.vehicles[e.vehicle], e.cost_raw, e.utility, e.cost
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::{GroupId, RequestId};
    use crate::scltl::parse;
    use crate::testutil::demo_net;
    use crate::time::Duration;

    const LOOSE: Duration = Duration::new(1_000);

    fn req(net: &RoadNetwork, id: u32, pick: &str, body: &str, wait: Duration) -> Arc<Request> {
        Arc::new(
            Request::new(
                net,
                RequestId(id),
                format!("r{id}"),
                GroupId(id),
                pick,
                parse(body).unwrap(),
                0,
                1,
                wait,
                LOOSE,
            )
            .unwrap(),
        )
    }

    fn demo_instance() -> (RoadNetwork, Vec<Arc<Request>>, Vec<VehicleState>) {
        let net = demo_net();
        let r1 = req(&net, 1, "c", "F (d & F e)", LOOSE);
        let r2 = req(&net, 2, "b", "F (d & F f)", LOOSE);
        let v = VehicleState::new(VehicleId(1), 2, net.state_id("A").unwrap());
        (net, vec![r1, r2], vec![v])
    }

    #[test]
    fn demo_rv_graph_has_all_three_edges() {
        let (net, requests, vehicles) = demo_instance();
        let rv = build_rv_graph(&net, &requests, &vehicles, 0);
        assert_eq!(rv.share_edges, vec![(0, 1)]);
        assert_eq!(rv.serve_edges.len(), 2);
        assert!(rv.serve(0, 0).is_some());
        assert!(rv.serve(1, 0).is_some());
    }

    #[test]
    fn no_vehicles_leaves_only_share_edges() {
        let (net, requests, _) = demo_instance();
        let rv = build_rv_graph(&net, &requests, &[], 0);
        assert_eq!(rv.share_edges, vec![(0, 1)]);
        assert!(rv.serve_edges.is_empty());
        assert_eq!(enumerate_trips(&rv), Vec::<Trip>::new());
    }

    #[test]
    fn incompatible_deadlines_drop_the_share_edge() {
        let net = demo_net();
        let r1 = req(&net, 1, "c", "F d", Duration::ZERO);
        let r2 = req(&net, 2, "b", "F d", Duration::ZERO);
        let v = VehicleState::new(VehicleId(1), 2, net.state_id("A").unwrap());
        let rv = build_rv_graph(&net, &[r1, r2], &[v], 0);
        assert!(rv.share_edges.is_empty());
    }

    #[test]
    fn demo_trips_are_both_singletons_and_the_pair() {
        let (net, requests, vehicles) = demo_instance();
        let rv = build_rv_graph(&net, &requests, &vehicles, 0);
        let trips = enumerate_trips(&rv);
        let members: Vec<Vec<usize>> = trips.iter().map(|t| t.members.clone()).collect();
        assert_eq!(members, vec![vec![0], vec![1], vec![0, 1]]);
    }

    #[test]
    fn three_way_sharing_is_capped_at_pairs() {
        let net = demo_net();
        let requests = vec![
            req(&net, 1, "c", "F d", LOOSE),
            req(&net, 2, "b", "F d", LOOSE),
            req(&net, 3, "d", "F e", LOOSE),
        ];
        let v = VehicleState::new(VehicleId(1), 2, net.state_id("A").unwrap());
        let rv = build_rv_graph(&net, &requests, std::slice::from_ref(&v), 0);
        assert_eq!(rv.share_edges.len(), 3);
        let trips = enumerate_trips(&rv);
        assert_eq!(trips.len(), 6, "three singletons plus three pairs");
        assert!(trips.iter().all(|t| t.members.len() <= 2));
    }

    #[test]
    fn demo_rtv_graph_costs() {
        let (net, requests, vehicles) = demo_instance();
        let rv = build_rv_graph(&net, &requests, &vehicles, 0);
        let trips = enumerate_trips(&rv);
        let rtv = build_rtv_graph(&net, &rv, &trips, &vehicles, 0);
        assert_eq!(rtv.edges.len(), 3);
        let pair_edge = rtv
            .edges
            .iter()
            .find(|e| rtv.trips[e.trip].members.len() == 2)
            .unwrap();
        assert_eq!(pair_edge.cost_raw, 16);
        let single_r1 = rtv
            .edges
            .iter()
            .find(|e| rtv.trips[e.trip].members == vec![0])
            .unwrap();
        assert_eq!(single_r1.cost_raw, 2);
        let text = rtv.dump();
        assert!(text.contains("sigma 16"));
    }

    #[test]
    fn capacity_blocks_pair_edges() {
        let (net, requests, _) = demo_instance();
        let small = VehicleState::new(VehicleId(1), 1, net.state_id("A").unwrap());
        let rv = build_rv_graph(&net, &requests, std::slice::from_ref(&small), 0);
        let trips = enumerate_trips(&rv);
        let rtv = build_rtv_graph(&net, &rv, &trips, std::slice::from_ref(&small), 0);
        assert!(!rtv.edges.is_empty());
        assert!(rtv
            .edges
            .iter()
            .all(|e| rtv.trips[e.trip].members.len() == 1));
    }

    #[test]
    fn weight_correction_arithmetic() {
        // Histories 5 and 1, so the fleet average is 3; alpha 1 shifts a
        // cost of 10 to 12 and 8 respectively.
        let net = demo_net();
        let r = req(&net, 1, "c", "c", LOOSE);
        let mut v1 = VehicleState::new(VehicleId(1), 2, net.state_id("C").unwrap());
        v1.utility_history = 5;
        let mut v2 = VehicleState::new(VehicleId(2), 2, net.state_id("C").unwrap());
        v2.utility_history = 1;
        let fleet = vec![v1, v2];
        let rv = build_rv_graph(&net, &[r], &fleet, 0);
        let trips = enumerate_trips(&rv);
        let mut rtv = build_rtv_graph(&net, &rv, &trips, &fleet, 0);
        for e in &mut rtv.edges {
            e.cost_raw = 10;
            e.cost = 10.0;
        }
        rtv.apply_weight_correction(&fleet, 1.0);
        assert_eq!(rtv.edges[0].cost, 12.0);
        assert_eq!(rtv.edges[1].cost, 8.0);

        let mut no_correction = build_rtv_graph(&net, &rv, &trips, &fleet, 0);
        no_correction.apply_weight_correction(&fleet, 0.0);
        assert!(no_correction
            .edges
            .iter()
            .all(|e| e.cost == e.cost_raw as f64));
    }

    #[test]
    fn correction_favors_low_history_vehicles() {
        let net = demo_net();
        let r = req(&net, 1, "c", "c", LOOSE);
        let mut v1 = VehicleState::new(VehicleId(1), 2, net.state_id("C").unwrap());
        v1.utility_history = 0;
        let mut v2 = VehicleState::new(VehicleId(2), 2, net.state_id("C").unwrap());
        v2.utility_history = 10;
        let fleet = vec![v1, v2];
        let rv = build_rv_graph(&net, &[r], &fleet, 0);
        let trips = enumerate_trips(&rv);
        let mut rtv = build_rtv_graph(&net, &rv, &trips, &fleet, 0);
        for e in &mut rtv.edges {
            e.cost_raw = 4;
            e.cost = 4.0;
        }
        rtv.apply_weight_correction(&fleet, 0.5);
        assert_eq!(rtv.edges[0].cost, 1.5);
        assert_eq!(rtv.edges[1].cost, 6.5);
        // Corrections are mean-centered: they cancel across the fleet.
        let total_shift: f64 = rtv.edges.iter().map(|e| e.cost - e.cost_raw as f64).sum();
        assert!(total_shift.abs() < 1e-9);
    }

    #[test]
    fn correction_can_go_negative_but_preserves_per_vehicle_order() {
        let net = demo_net();
        let r1 = req(&net, 1, "c", "F (d & F e)", LOOSE);
        let r2 = req(&net, 2, "b", "F (d & F f)", LOOSE);
        let mut v = VehicleState::new(VehicleId(1), 2, net.state_id("A").unwrap());
        v.utility_history = 0;
        let mut other = VehicleState::new(VehicleId(2), 2, net.state_id("E").unwrap());
        other.utility_history = 60;
        let fleet = vec![v, other];
        let rv = build_rv_graph(&net, &[r1, r2], &fleet, 0);
        let trips = enumerate_trips(&rv);
        let mut rtv = build_rtv_graph(&net, &rv, &trips, &fleet, 0);
        let before: Vec<(usize, u64)> = rtv
            .edges
            .iter()
            .filter(|e| rtv.vehicles[e.vehicle] == VehicleId(1))
            .map(|e| (e.trip, e.cost_raw))
            .collect();
        rtv.apply_weight_correction(&fleet, 1.0);
        assert!(rtv.edges.iter().any(|e| e.cost < 0.0));
        // Within one vehicle the correction is a constant shift: the
        // cheapest trip stays the cheapest.
        let after: Vec<(usize, f64)> = rtv
            .edges
            .iter()
            .filter(|e| rtv.vehicles[e.vehicle] == VehicleId(1))
            .map(|e| (e.trip, e.cost))
            .collect();
        let min_before = before.iter().min_by_key(|&&(_, c)| c).unwrap().0;
        let min_after = after.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert_eq!(min_before, min_after);
    }
}
