//! Batch assignment as a 0-1 integer program, solved exactly.
//!
//! One binary per feasible (trip, vehicle) edge, one binary per request
//! group for "not served". Coverage is an equality per sub-request (so a
//! split group is assigned all-or-none via its shared drop variable),
//! vehicles take at most one trip, and approximate envy-freeness couples
//! selected edge pairs across vehicles: `U_i >= lambda * U_j` whenever both
//! are chosen, encoded big-M style so unselected pairs stay slack. The
//! solver is a deterministic depth-first branch-and-bound over vehicles
//! with a combinatorial lower bound; batches are small, so exactness is
//! cheap.

use std::sync::Arc;

use thiserror::Error;

use crate::matching::RtvGraph;
use crate::network::RoadNetwork;
use crate::routing::{Request, RequestId, RoutingError};
use crate::scltl::Formula;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("request {name}: {seats} seats exceed the fleet capacity {cap} and no decomposition was given")]
    MissingDecomposition { name: String, seats: u32, cap: u32 },
    #[error("request {name}: decomposition has {got} formulas for {seats} seats")]
    DecompositionSize { name: String, got: usize, seats: u32 },
    #[error(transparent)]
    Routing(#[from] RoutingError),
}

/// Splits a multi-seat request into single-seat sub-requests sharing its
/// group, using the per-seat formulas supplied by the scenario. Requests
/// that fit one vehicle and carry no decomposition pass through unchanged;
/// a request wider than every vehicle must come with a decomposition.
pub fn split_subrequests(
    net: &RoadNetwork,
    base: &Arc<Request>,
    decomposition: &[Formula],
    cap: u32,
    next_id: &mut u32,
) -> Result<Vec<Arc<Request>>, SplitError> {
    if base.seats > 1 && !decomposition.is_empty() {
        if decomposition.len() != base.seats as usize {
            return Err(SplitError::DecompositionSize {
                name: base.name.clone(),
                got: decomposition.len(),
                seats: base.seats,
            });
        }
        let pick = net.prop_name(base.pick_prop).to_string();
        let mut subs = Vec::with_capacity(decomposition.len());
        for (k, body) in decomposition.iter().enumerate() {
            let id = RequestId(*next_id);
            *next_id += 1;
            subs.push(Arc::new(Request::new(
                net,
                id,
                format!("{}.{}", base.name, k + 1),
                base.group,
                &pick,
                body.clone(),
                base.t_req,
                1,
                base.max_wait,
                base.max_delay,
            )?));
        }
        return Ok(subs);
    }
    if base.seats <= cap {
        return Ok(vec![Arc::clone(base)]);
    }
    Err(SplitError::MissingDecomposition {
        name: base.name.clone(),
        seats: base.seats,
        cap,
    })
}

/// One assignable (trip, vehicle) edge of the model.
#[derive(Debug, Clone)]
pub struct IlpEdge {
    pub vehicle: usize,
    pub trip: usize,
    /// Objective coefficient (corrected trip cost; may be negative).
    pub cost: f64,
    /// Trip utility granted to the vehicle if selected.
    pub utility: u64,
}

/// Materialized 0-1 program for one batch.
#[derive(Debug)]
pub struct IlpModel {
    /// Sub-requests; index = coverage row.
    pub num_requests: usize,
    pub num_vehicles: usize,
    /// Trip -> member sub-requests, sorted.
    pub trips: Vec<Vec<usize>>,
    /// Edges sorted by (vehicle, trip); index = binary variable.
    pub edges: Vec<IlpEdge>,
    /// Group -> member sub-requests; one drop variable per group.
    pub groups: Vec<Vec<usize>>,
    /// Sub-request -> group.
    pub group_of: Vec<usize>,
    /// Ordered edge-index pairs on distinct vehicles; empty when
    /// `lambda == 0` since utilities are non-negative and the rows can
    /// never bind.
    pub envy_rows: Vec<(usize, usize)>,
    pub big_m: f64,
    pub lambda: f64,
    pub lambda_ko: f64,
}

impl IlpModel {
    /// Assembles the model from raw parts; `formulate` is the adapter from
    /// an RTV graph. Test instances construct models directly.
    pub fn from_parts(
        num_requests: usize,
        num_vehicles: usize,
        trips: Vec<Vec<usize>>,
        edges: Vec<IlpEdge>,
        group_of: Vec<usize>,
        lambda_ko: f64,
        lambda: f64,
    ) -> IlpModel {
        assert_eq!(group_of.len(), num_requests);
        let mut edges = edges;
        edges.sort_by_key(|a| (a.vehicle, a.trip));
        let num_groups = group_of.iter().copied().max().map_or(0, |g| g + 1);
        let mut groups = vec![Vec::new(); num_groups];
        for (k, &g) in group_of.iter().enumerate() {
            groups[g].push(k);
        }
        let max_u = edges.iter().map(|e| e.utility).max().unwrap_or(0) as f64;
        let big_m = 1.0 + max_u + lambda * max_u;
        let mut envy_rows = Vec::new();
        if lambda > 0.0 {
            for (i, a) in edges.iter().enumerate() {
                for (j, b) in edges.iter().enumerate() {
                    if i != j && a.vehicle != b.vehicle {
                        envy_rows.push((i, j));
                    }
                }
            }
        }
        IlpModel {
            num_requests,
            num_vehicles,
            trips,
            edges,
            groups,
            group_of,
            envy_rows,
            big_m,
            lambda,
            lambda_ko,
        }
    }

    pub fn num_epsilon_vars(&self) -> usize {
        self.edges.len()
    }

    pub fn num_chi_vars(&self) -> usize {
        self.groups.len()
    }

    pub fn coverage_rows(&self) -> usize {
        self.num_requests
    }

    pub fn vehicle_rows(&self) -> usize {
        let mut seen = vec![false; self.num_vehicles];
        for e in &self.edges {
            seen[e.vehicle] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }

    /// Objective of a selection, summed in edge order (the one canonical
    /// order, so solver and enumeration agree bit-for-bit).
    pub fn objective_of(&self, chosen_edges: &[usize], dropped_groups: usize) -> f64 {
        let mut sorted = chosen_edges.to_vec();
        sorted.sort_unstable();
        let edge_sum: f64 = sorted.iter().map(|&e| self.edges[e].cost).sum();
        edge_sum + self.lambda_ko * dropped_groups as f64
    }

    /// Serializes the program in LP text format for cross-checks with
    /// external solvers.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::from("Minimize\n obj:");
        for (i, e) in self.edges.iter().enumerate() {
            out.push_str(&format!(" + {} e_{i}", e.cost));
        }
        for g in 0..self.groups.len() {
            out.push_str(&format!(" + {} x_{g}", self.lambda_ko));
        }
        out.push_str("\nSubject To\n");
        for k in 0..self.num_requests {
            let mut row = format!(" cover_{k}:");
            for (i, e) in self.edges.iter().enumerate() {
                if self.trips[e.trip].contains(&k) {
                    row.push_str(&format!(" + e_{i}"));
                }
            }
            row.push_str(&format!(" + x_{} = 1\n", self.group_of[k]));
            out.push_str(&row);
        }
        for v in 0..self.num_vehicles {
            let mine: Vec<String> = self
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.vehicle == v)
                .map(|(i, _)| format!("+ e_{i}"))
                .collect();
            if !mine.is_empty() {
                out.push_str(&format!(" veh_{v}: {} <= 1\n", mine.join(" ")));
            }
        }
        for (n, &(i, j)) in self.envy_rows.iter().enumerate() {
            // U_i - lambda U_j >= M (e_i + e_j - 2), constants moved right.
            let rhs = self.lambda * self.edges[j].utility as f64
                - self.edges[i].utility as f64
                - 2.0 * self.big_m;
            out.push_str(&format!(
                " envy_{n}: - {m} e_{i} - {m} e_{j} >= {rhs}\n",
                m = self.big_m
            ));
        }
        out.push_str("Binary\n");
        for i in 0..self.edges.len() {
            out.push_str(&format!(" e_{i}\n"));
        }
        for g in 0..self.groups.len() {
            out.push_str(&format!(" x_{g}\n"));
        }
        out.push_str("End\n");
        out
    }
}

/// Builds the batch model from a weight-corrected RTV graph.
pub fn formulate(rtv: &RtvGraph, lambda_ko: f64, lambda: f64) -> IlpModel {
    let trips: Vec<Vec<usize>> = rtv.trips.iter().map(|t| t.members.clone()).collect();
    let edges: Vec<IlpEdge> = rtv
        .edges
        .iter()
        .map(|e| IlpEdge {
            vehicle: e.vehicle,
            trip: e.trip,
            cost: e.cost,
            utility: e.utility,
        })
        .collect();
    // Dense group indices in order of each group's first member.
    let mut group_ids: Vec<crate::routing::GroupId> = Vec::new();
    let mut group_of = Vec::with_capacity(rtv.requests.len());
    for r in &rtv.requests {
        let g = match group_ids.iter().position(|&g| g == r.group) {
            Some(g) => g,
            None => {
                group_ids.push(r.group);
                group_ids.len() - 1
            }
        };
        group_of.push(g);
    }
    IlpModel::from_parts(
        rtv.requests.len(),
        rtv.vehicles.len(),
        trips,
        edges,
        group_of,
        lambda_ko,
        lambda,
    )
}

/// A solved (or greedy) batch assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Chosen edge indices, ascending (at most one per vehicle).
    pub chosen: Vec<usize>,
    /// Sub-requests not covered by any chosen trip.
    pub unassigned_requests: Vec<usize>,
    /// Groups left fully unserved; these pay the drop penalty.
    pub unassigned_groups: Vec<usize>,
    pub objective: f64,
}

impl Assignment {
    fn from_chosen(model: &IlpModel, mut chosen: Vec<usize>) -> Assignment {
        chosen.sort_unstable();
        let mut covered = vec![false; model.num_requests];
        for &e in &chosen {
            for &k in &model.trips[model.edges[e].trip] {
                covered[k] = true;
            }
        }
        let unassigned_requests: Vec<usize> =
            (0..model.num_requests).filter(|&k| !covered[k]).collect();
        let unassigned_groups: Vec<usize> = (0..model.groups.len())
            .filter(|&g| model.groups[g].iter().all(|&k| !covered[k]))
            .collect();
        let objective = model.objective_of(&chosen, unassigned_groups.len());
        Assignment {
            chosen,
            unassigned_requests,
            unassigned_groups,
            objective,
        }
    }

    /// Utility granted per vehicle by the chosen edges.
    pub fn granted(&self, model: &IlpModel) -> Vec<(usize, u64)> {
        self.chosen
            .iter()
            .map(|&e| (model.edges[e].vehicle, model.edges[e].utility))
            .collect()
    }
}

fn coverage_ok(model: &IlpModel, chosen: &[usize]) -> bool {
    let mut count = vec![0u8; model.num_requests];
    let mut per_vehicle = vec![0u8; model.num_vehicles];
    for &e in chosen {
        per_vehicle[model.edges[e].vehicle] += 1;
        for &k in &model.trips[model.edges[e].trip] {
            count[k] += 1;
        }
    }
    if per_vehicle.iter().any(|&c| c > 1) || count.iter().any(|&c| c > 1) {
        return false;
    }
    // Groups must be covered all-or-none.
    model.groups.iter().all(|members| {
        let covered = members.iter().filter(|&&k| count[k] == 1).count();
        covered == 0 || covered == members.len()
    })
}

fn envy_ok(model: &IlpModel, chosen: &[usize]) -> bool {
    if model.lambda == 0.0 || chosen.len() < 2 {
        return true;
    }
    let min = chosen
        .iter()
        .map(|&e| model.edges[e].utility)
        .min()
        .unwrap() as f64;
    let max = chosen
        .iter()
        .map(|&e| model.edges[e].utility)
        .max()
        .unwrap() as f64;
    min >= model.lambda * max
}

/// Greedy seed: scan edges by (trip size descending, cost ascending,
/// vehicle/trip order) and take whatever fits. Group completeness is
/// repaired afterwards; envy rows are deliberately not enforced here, the
/// greedy only seeds the solver's upper bound.
pub fn greedy_warm_start(model: &IlpModel) -> Assignment {
    let mut order: Vec<usize> = (0..model.edges.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&model.edges[a], &model.edges[b]);
        let size = model.trips[eb.trip].len().cmp(&model.trips[ea.trip].len());
        size.then(ea.cost.total_cmp(&eb.cost))
            .then((ea.vehicle, ea.trip).cmp(&(eb.vehicle, eb.trip)))
    });
    let mut vehicle_used = vec![false; model.num_vehicles];
    let mut covered = vec![false; model.num_requests];
    let mut chosen = Vec::new();
    for e in order {
        let edge = &model.edges[e];
        if vehicle_used[edge.vehicle] {
            continue;
        }
        if model.trips[edge.trip].iter().any(|&k| covered[k]) {
            continue;
        }
        vehicle_used[edge.vehicle] = true;
        for &k in &model.trips[edge.trip] {
            covered[k] = true;
        }
        chosen.push(e);
    }
    // Drop edges of any partially covered group until feasible.
    loop {
        let bad_group = model.groups.iter().find(|members| {
            let n = members.iter().filter(|&&k| covered[k]).count();
            n != 0 && n != members.len()
        });
        let Some(members) = bad_group else { break };
        let members = members.clone();
        chosen.retain(|&e| {
            let keep = !model.trips[model.edges[e].trip]
                .iter()
                .any(|k| members.contains(k));
            if !keep {
                for &k in &model.trips[model.edges[e].trip] {
                    covered[k] = false;
                }
            }
            keep
        });
    }
    Assignment::from_chosen(model, chosen)
}

/// Objective improvements at or below this are treated as ties. Batch
/// objectives are sums of trip costs and drop penalties; real differences
/// between distinct assignments sit far above this scale.
const TIE_CUSHION: f64 = 1e-6;

/// Exact optimum of the batch program by depth-first branch-and-bound.
/// Branching runs over sub-requests in ascending order: cover the next
/// pending one with each admissible edge (edge order), or drop its whole
/// group (last option, only while no member is covered yet). Every
/// decision immediately charges the objective, so the drop penalty prunes
/// aggressively. Deterministic throughout; first-found optimum kept on
/// ties. The all-dropped assignment is always feasible, so a solution
/// always exists.
pub fn solve(model: &IlpModel, warm: &Assignment) -> Assignment {
    // Edges covering each sub-request, ascending (= vehicle, trip order).
    let mut covering: Vec<Vec<usize>> = vec![Vec::new(); model.num_requests];
    for (i, e) in model.edges.iter().enumerate() {
        for &k in &model.trips[e.trip] {
            covering[k].push(i);
        }
    }
    // Branch options per request, cheapest first (deterministic: ties by
    // edge index). Good incumbents early are what make the bound bite.
    let options: Vec<Vec<usize>> = covering
        .iter()
        .map(|list| {
            let mut sorted = list.clone();
            sorted.sort_by(|&a, &b| {
                model.edges[a]
                    .cost
                    .total_cmp(&model.edges[b].cost)
                    .then(a.cmp(&b))
            });
            sorted
        })
        .collect();

    struct Search<'m> {
        model: &'m IlpModel,
        covering: &'m [Vec<usize>],
        options: &'m [Vec<usize>],
        vehicle_used: Vec<bool>,
        covered: Vec<bool>,
        group_dropped: Vec<bool>,
        chosen: Vec<usize>,
        cost: f64,
        best: Assignment,
    }

    impl Search<'_> {
        /// Admissible lower bound on the final objective from this node.
        /// Every future selection covers only still-pending requests, so
        /// its cost can be spread over its trip members; each pending
        /// request therefore contributes at least the cheapest cost share
        /// among edges that are still usable (vehicle free and utility
        /// inside the envy window implied by the current selection),
        /// capped by its share of the group drop penalty. `None` when a
        /// partially covered group has become uncoverable (infeasible
        /// branch).
        fn bound(&self, from: usize) -> Option<f64> {
            let (u_lo, u_hi) = self.envy_window();
            let mut total = self.cost;
            for k in from..self.model.num_requests {
                let g = self.model.group_of[k];
                if self.covered[k] || self.group_dropped[g] {
                    continue;
                }
                let mut cheapest_share = f64::INFINITY;
                for &e in &self.covering[k] {
                    let edge = &self.model.edges[e];
                    let u = edge.utility as f64;
                    if !self.vehicle_used[edge.vehicle] && u >= u_lo && u <= u_hi {
                        let share = edge.cost / self.model.trips[edge.trip].len() as f64;
                        if share < cheapest_share {
                            cheapest_share = share;
                        }
                    }
                }
                let drop_share = self.model.lambda_ko / self.model.groups[g].len() as f64;
                if cheapest_share.is_infinite()
                    && self.model.groups[g].iter().any(|&m| self.covered[m])
                {
                    return None;
                }
                total += cheapest_share.min(drop_share);
            }
            Some(total)
        }

        /// Utility interval future selections must fall in to keep the
        /// chosen set envy-feasible.
        fn envy_window(&self) -> (f64, f64) {
            if self.model.lambda == 0.0 || self.chosen.is_empty() {
                return (f64::NEG_INFINITY, f64::INFINITY);
            }
            let (mut lo, mut hi) = (0u64, u64::MAX);
            for &e in &self.chosen {
                let u = self.model.edges[e].utility;
                lo = lo.max(u);
                hi = hi.min(u);
            }
            // lo is the max selected utility, hi the min.
            let lower = self.model.lambda * lo as f64;
            let upper = if self.model.lambda > 0.0 {
                hi as f64 / self.model.lambda
            } else {
                f64::INFINITY
            };
            (lower, upper)
        }

        fn selectable(&self, e: usize) -> bool {
            let edge = &self.model.edges[e];
            if self.vehicle_used[edge.vehicle] {
                return false;
            }
            self.model.trips[edge.trip]
                .iter()
                .all(|&k| !self.covered[k] && !self.group_dropped[self.model.group_of[k]])
        }

        fn envy_allows(&self, e: usize) -> bool {
            if self.model.lambda == 0.0 {
                return true;
            }
            let u = self.model.edges[e].utility as f64;
            self.chosen.iter().all(|&o| {
                let ou = self.model.edges[o].utility as f64;
                u >= self.model.lambda * ou && ou >= self.model.lambda * u
            })
        }

        fn dfs(&mut self, from: usize) {
            // Fail-first: branch on the pending request with the fewest
            // usable edges (ties by id). Highly constrained requests
            // collapse the tree early; determinism is unaffected.
            let (u_lo, u_hi) = self.envy_window();
            let next = (from..self.model.num_requests)
                .filter(|&k| !self.covered[k] && !self.group_dropped[self.model.group_of[k]])
                .min_by_key(|&k| {
                    (
                        self.covering[k]
                            .iter()
                            .filter(|&&e| {
                                let edge = &self.model.edges[e];
                                let u = edge.utility as f64;
                                !self.vehicle_used[edge.vehicle] && u >= u_lo && u <= u_hi
                            })
                            .count(),
                        k,
                    )
                });
            let Some(k) = next else {
                let dropped = self.group_dropped.iter().filter(|&&d| d).count();
                let objective = self.model.objective_of(&self.chosen, dropped);
                if objective < self.best.objective {
                    self.best = Assignment::from_chosen(self.model, self.chosen.clone());
                }
                return;
            };
            match self.bound(from) {
                // A branch is explored only if it promises a strict
                // improvement: the first-found optimum is kept on ties,
                // so equal-bound branches have nothing to add.
                // Improvements smaller than the cushion are treated as
                // ties, which also absorbs rounding in the bound
                // arithmetic.
                Some(b) if b >= self.best.objective - TIE_CUSHION => return,
                None => return,
                _ => {}
            }
            for &e in &self.options[k] {
                if !self.selectable(e) || !self.envy_allows(e) {
                    continue;
                }
                let edge = &self.model.edges[e];
                self.vehicle_used[edge.vehicle] = true;
                for &m in &self.model.trips[edge.trip] {
                    self.covered[m] = true;
                }
                self.chosen.push(e);
                self.cost += edge.cost;
                self.dfs(from);
                self.cost -= edge.cost;
                self.chosen.pop();
                for &m in &self.model.trips[edge.trip] {
                    self.covered[m] = false;
                }
                self.vehicle_used[edge.vehicle] = false;
            }
            // Dropping is only open while no group member is covered.
            let g = self.model.group_of[k];
            if !self.model.groups[g].iter().any(|&m| self.covered[m]) {
                self.group_dropped[g] = true;
                self.cost += self.model.lambda_ko;
                self.dfs(from);
                self.cost -= self.model.lambda_ko;
                self.group_dropped[g] = false;
            }
        }
    }

    let mut best = Assignment::from_chosen(model, Vec::new());
    // Seed the incumbent: the raw greedy if it happens to satisfy the envy
    // rows, otherwise the greedy with its lowest-utility edges stripped
    // until it does. A tight incumbent is what makes the search fast.
    let mut seed = warm.chosen.clone();
    if !coverage_ok(model, &seed) {
        seed.clear();
    }
    while !envy_ok(model, &seed) {
        let weakest = seed
            .iter()
            .enumerate()
            .min_by_key(|(_, &e)| model.edges[e].utility)
            .map(|(i, _)| i)
            .unwrap();
        seed.remove(weakest);
    }
    if coverage_ok(model, &seed) {
        let cand = Assignment::from_chosen(model, seed);
        if cand.objective < best.objective {
            best = cand;
        }
    }

    let mut search = Search {
        model,
        covering: &covering,
        options: &options,
        vehicle_used: vec![false; model.num_vehicles],
        covered: vec![false; model.num_requests],
        group_dropped: vec![false; model.groups.len()],
        chosen: Vec::new(),
        cost: 0.0,
        best,
    };
    search.dfs(0);

    // Recompute through the canonical path so the reported objective is
    // exactly `objective_of` of the chosen set.
    Assignment::from_chosen(model, search.best.chosen)
}
