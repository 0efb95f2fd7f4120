//! Discrete-event loop: arrivals and vehicle-availability events trigger a
//! batch rebuild of the assignment graphs and a fresh exact solve;
//! committed plans then advance tick by tick. Requests that have boarded
//! are never reassigned; assigned-but-waiting requests may be, and a
//! vehicle whose waiting request was taken away falls back to a plan that
//! completes its remaining passengers.
//!
//! Invariants are asserted inline on every tick: phase conservation,
//! capacity bounds, deadline compliance at pick-up and drop-off, and the
//! immutability of boarded assignments.

use std::collections::HashMap;
use std::time::Instant;

use crate::assign::{formulate, greedy_warm_start, solve};
use crate::matching::{build_rtv_graph, build_rv_graph, enumerate_trips};
use crate::routing::{plan_trip, Onboard, RequestId, RoutePlan, VehicleState};
use crate::time::Tick;

use super::metrics::{MetricsTrace, PhaseTimings, RequestFate, RequestReport, TickRow};
use super::scenario::ResolvedScenario;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Phase {
    Pending,
    Active,
    InProgress,
    Completed,
    Expired,
}

struct ReqState {
    phase: Phase,
    vehicle: Option<crate::routing::VehicleId>,
    pickup: Option<Tick>,
    drop: Option<Tick>,
    delay: Option<u64>,
}

struct ActivePlan {
    plan: RoutePlan,
    /// Next unprocessed waypoint. Waypoint 0 is the starting position; its
    /// label was already consumed by everyone onboard, so only pick-up and
    /// drop-off events run there.
    cursor: usize,
}

struct Car {
    state: VehicleState,
    plan: Option<ActivePlan>,
}

impl Car {
    fn busy(&self) -> bool {
        self.plan.is_some() || !self.state.onboard.is_empty()
    }
}

/// Runs the scenario to its horizon and reports the trace.
pub fn run(scn: &ResolvedScenario) -> MetricsTrace {
    let net = &scn.net;
    let params = scn.params;
    let mut cars: Vec<Car> = scn
        .fleet
        .iter()
        .map(|v| Car {
            state: VehicleState::new(v.id, v.capacity, v.position),
            plan: None,
        })
        .collect();
    cars.sort_by_key(|c| c.state.id);
    let mut req_state: Vec<ReqState> = scn
        .requests
        .iter()
        .map(|_| ReqState {
            phase: Phase::Pending,
            vehicle: None,
            pickup: None,
            drop: None,
            delay: None,
        })
        .collect();
    let by_id: HashMap<RequestId, usize> = scn
        .requests
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id, i))
        .collect();

    let mut ticks: Vec<TickRow> = Vec::with_capacity(params.horizon as usize);
    let mut timings = PhaseTimings::default();
    let mut next_arrival = 0usize;

    for t in 0..params.horizon {
        let mut events = advance_all(scn, &mut cars, &by_id, &mut req_state, t);

        while next_arrival < scn.requests.len() && scn.requests[next_arrival].t_req == t {
            let idx = next_arrival;
            assert_eq!(req_state[idx].phase, Phase::Pending);
            req_state[idx].phase = Phase::Active;
            events = true;
            next_arrival += 1;
        }

        for (i, r) in scn.requests.iter().enumerate() {
            if req_state[i].phase == Phase::Active && t > r.pickup_deadline() {
                req_state[i].phase = Phase::Expired;
            }
        }

        let mut rounds = 0usize;
        while events {
            events = false;
            let active: Vec<_> = scn
                .requests
                .iter()
                .enumerate()
                .filter(|(i, _)| req_state[*i].phase == Phase::Active)
                .map(|(_, r)| std::sync::Arc::clone(r))
                .collect();
            let avail: Vec<VehicleState> = cars
                .iter()
                .filter(|c| c.state.free_seats() > 0)
                .map(|c| c.state.clone())
                .collect();
            if active.is_empty() || avail.is_empty() {
                break;
            }

            let build_start = Instant::now();
            let rv = build_rv_graph(net, &active, &avail, t);
            let trips = enumerate_trips(&rv);
            let mut rtv = build_rtv_graph(net, &rv, &trips, &avail, t);
            let fleet_snapshot: Vec<VehicleState> =
                cars.iter().map(|c| c.state.clone()).collect();
            rtv.apply_weight_correction(&fleet_snapshot, params.alpha);
            timings.graph_build += build_start.elapsed().as_nanos();

            let solve_start = Instant::now();
            let model = formulate(&rtv, params.lambda_ko, params.lambda);
            let warm = greedy_warm_start(&model);
            let assignment = solve(&model, &warm);
            let solve_elapsed = solve_start.elapsed();
            log::debug!(
                "batch at t={t}: {} requests, {} vehicles, {} trips, {} edges, solved in {:?}",
                model.num_requests,
                model.num_vehicles,
                model.trips.len(),
                model.edges.len(),
                solve_elapsed
            );
            timings.solve += solve_elapsed.as_nanos();
            timings.batches += 1;

            // Commit: winners take their fresh plans; available losers
            // abandon pick-up legs but keep completing their passengers.
            let mut chosen_plan: HashMap<crate::routing::VehicleId, &crate::matching::RtvEdge> =
                HashMap::new();
            for &e in &assignment.chosen {
                chosen_plan.insert(rtv.vehicles[rtv.edges[e].vehicle], &rtv.edges[e]);
            }
            for car in cars.iter_mut() {
                if let Some(edge) = chosen_plan.get(&car.state.id) {
                    let plan = edge.plan.clone();
                    for ob in &car.state.onboard {
                        assert!(
                            plan.outcome(ob.request.id).is_some(),
                            "committed plan must finish boarded requests"
                        );
                    }
                    car.plan = Some(ActivePlan { plan, cursor: 0 });
                } else if car.state.free_seats() > 0 {
                    let pending_pickup = car.plan.as_ref().is_some_and(|ap| {
                        ap.plan
                            .outcomes
                            .iter()
                            .any(|o| !o.was_onboard && o.pickup > t)
                    });
                    if pending_pickup {
                        if car.state.onboard.is_empty() {
                            car.plan = None;
                        } else {
                            let plan = plan_trip(net, &car.state, &[], t)
                                .expect("completing boarded requests stays feasible");
                            car.plan = Some(ActivePlan { plan, cursor: 0 });
                        }
                    }
                }
            }
            events = advance_all(scn, &mut cars, &by_id, &mut req_state, t);
            rounds += 1;
            assert!(
                rounds <= scn.requests.len() + cars.len() + 1,
                "assignment/event cascade failed to settle"
            );
        }

        // Bookkeeping for this tick, after all events settled.
        let occupied: Vec<u32> = cars.iter().map(|c| c.state.seats_onboard()).collect();
        for (car, &occ) in cars.iter_mut().zip(&occupied) {
            assert!(occ <= car.state.capacity, "capacity bound violated");
            car.state.utility_history += occ as u64;
        }
        let arrived = req_state.iter().filter(|r| r.phase != Phase::Pending).count() as u32;
        let completed = req_state.iter().filter(|r| r.phase == Phase::Completed).count() as u32;
        let busy = cars.iter().filter(|c| c.busy()).count() as u32;
        // Conservation over phases.
        let (active_n, in_progress, expired) = req_state.iter().fold((0, 0, 0), |acc, r| {
            match r.phase {
                Phase::Active => (acc.0 + 1, acc.1, acc.2),
                Phase::InProgress => (acc.0, acc.1 + 1, acc.2),
                Phase::Expired => (acc.0, acc.1, acc.2 + 1),
                _ => acc,
            }
        });
        assert_eq!(
            arrived,
            active_n + in_progress + completed + expired,
            "request conservation violated"
        );
        ticks.push(TickRow {
            tick: t,
            arrived,
            completed,
            busy_vehicles: busy,
            occupied_seats: occupied,
        });
    }

    finish(scn, cars, req_state, ticks, timings)
}

/// Advances every vehicle's plan through all waypoints due at or before
/// `t`. Returns true if any seat was freed or any plan completed (the
/// availability events that trigger re-assignment).
fn advance_all(
    scn: &ResolvedScenario,
    cars: &mut [Car],
    by_id: &HashMap<RequestId, usize>,
    req_state: &mut [ReqState],
    t: Tick,
) -> bool {
    let mut events = false;
    for car in cars.iter_mut() {
        let Some(ap) = &mut car.plan else {
            continue;
        };
        while ap.cursor < ap.plan.route.len() && ap.plan.route[ap.cursor].0 <= t {
            let (tau, s) = ap.plan.route[ap.cursor];
            for outcome in &ap.plan.outcomes {
                if !outcome.was_onboard && outcome.pickup == tau {
                    let idx = by_id[&outcome.request];
                    let request = &scn.requests[idx];
                    assert_eq!(
                        req_state[idx].phase,
                        Phase::Active,
                        "pick-up of a non-active request"
                    );
                    assert_eq!(request.pick_state, s, "pick-up away from the pick state");
                    assert!(tau <= request.pickup_deadline(), "late pick-up executed");
                    let seeded = request.dfa.step(request.dfa.init(), request.sym(s));
                    car.state.onboard.push(Onboard {
                        request: std::sync::Arc::clone(request),
                        dfa_state: seeded,
                        pickup_time: tau,
                    });
                    assert!(
                        car.state.seats_onboard() <= car.state.capacity,
                        "boarding beyond capacity"
                    );
                    req_state[idx].phase = Phase::InProgress;
                    req_state[idx].vehicle = Some(car.state.id);
                    req_state[idx].pickup = Some(tau);
                }
            }
            for outcome in &ap.plan.outcomes {
                if outcome.drop == tau {
                    let idx = by_id[&outcome.request];
                    let request = &scn.requests[idx];
                    let pos = car
                        .state
                        .onboard
                        .iter()
                        .position(|ob| ob.request.id == outcome.request)
                        .expect("drop of a passenger not onboard");
                    let ob = car.state.onboard.remove(pos);
                    assert!(
                        ob.request.dfa.is_accepting(ob.dfa_state),
                        "drop before the request formula is satisfied"
                    );
                    assert!(tau <= request.drop_deadline(), "late drop executed");
                    assert_eq!(req_state[idx].phase, Phase::InProgress);
                    assert_eq!(
                        req_state[idx].vehicle,
                        Some(car.state.id),
                        "boarded request changed vehicles"
                    );
                    let delay = tau - request.t_req - request.t_star.ticks();
                    assert_eq!(delay, outcome.delay, "executed delay differs from plan");
                    req_state[idx].phase = Phase::Completed;
                    req_state[idx].drop = Some(tau);
                    req_state[idx].delay = Some(delay);
                    events = true;
                }
            }
            ap.cursor += 1;
            if ap.cursor < ap.plan.route.len() {
                // Departing toward the next waypoint: everyone aboard
                // absorbs its label now, mirroring the planner's view
                // that the committed position's label is already
                // consumed. Mid-road replanning therefore loses nothing.
                let (_, ahead) = ap.plan.route[ap.cursor];
                for ob in &mut car.state.onboard {
                    ob.dfa_state = ob.request.dfa.step(ob.dfa_state, ob.request.sym(ahead));
                }
            }
        }
        if ap.cursor < ap.plan.route.len() {
            // Committed to the road toward the next waypoint.
            car.state.position = ap.plan.route[ap.cursor].1;
            car.state.available_at = ap.plan.route[ap.cursor].0;
        } else {
            car.state.position = ap.plan.route.last().expect("routes are non-empty").1;
            car.state.available_at = t;
            assert!(
                car.state.onboard.is_empty(),
                "plan completed with passengers aboard"
            );
            car.plan = None;
            events = true;
        }
    }
    events
}

fn finish(
    scn: &ResolvedScenario,
    cars: Vec<Car>,
    req_state: Vec<ReqState>,
    ticks: Vec<TickRow>,
    timings: PhaseTimings,
) -> MetricsTrace {
    let params = scn.params;
    let vehicle_utilities: Vec<_> = cars
        .iter()
        .map(|c| (c.state.id, c.state.utility_history))
        .collect();

    // Cross-check accumulated utilities against per-request ride spans.
    let mut from_requests: HashMap<crate::routing::VehicleId, u64> = HashMap::new();
    for (i, r) in scn.requests.iter().enumerate() {
        let st = &req_state[i];
        if let (Some(v), Some(pickup)) = (st.vehicle, st.pickup) {
            let end = st.drop.unwrap_or(params.horizon).min(params.horizon);
            let span = end.saturating_sub(pickup.min(params.horizon));
            *from_requests.entry(v).or_default() += r.seats as u64 * span;
        }
    }
    for &(vid, total) in &vehicle_utilities {
        assert_eq!(
            total,
            from_requests.get(&vid).copied().unwrap_or(0),
            "utility accounting mismatch for {vid}"
        );
    }

    let mut delays = 0u64;
    let mut completed = 0u32;
    let mut lost_groups: Vec<crate::routing::GroupId> = Vec::new();
    let mut reports = Vec::with_capacity(scn.requests.len());
    for (i, r) in scn.requests.iter().enumerate() {
        let st = &req_state[i];
        let fate = match st.phase {
            Phase::Completed => {
                completed += 1;
                delays += st.delay.unwrap();
                RequestFate::Completed {
                    vehicle: st.vehicle.unwrap(),
                    pickup: st.pickup.unwrap(),
                    drop: st.drop.unwrap(),
                    delay: st.delay.unwrap(),
                }
            }
            Phase::Expired => {
                lost_groups.push(r.group);
                RequestFate::Expired
            }
            _ => RequestFate::Open,
        };
        reports.push(RequestReport {
            id: r.id,
            name: r.name.clone(),
            t_req: r.t_req,
            fate,
        });
    }
    lost_groups.sort_unstable();
    lost_groups.dedup();
    let arrived = ticks.last().map_or(0, |r| r.arrived);

    MetricsTrace {
        ticks,
        vehicle_utilities,
        requests: reports,
        total_cost: delays as f64 + params.lambda_ko * lost_groups.len() as f64,
        unassigned_groups: lost_groups.len() as u32,
        arrived,
        completed,
        timings,
    }
}
