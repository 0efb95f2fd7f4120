//! Road environment as a weighted transition system: intersections carry
//! label propositions, directed roads carry positive integer travel
//! durations. Networks are immutable after load and all queries are pure,
//! so they can be shared freely across planner workers.

mod format;
mod grid;

pub use format::{load_network, parse_spec, NetworkSpec, RoadDecl, StateDecl};
pub use grid::{generate_grid, GridSpec};

use std::collections::BinaryHeap;
use std::collections::HashMap;
use std::fmt;

use crate::time::Duration;
use thiserror::Error;

/// Index of an intersection. Ids are assigned by sorting state names, so
/// comparing id sequences is the same as comparing name sequences.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct StateId(pub u32);

impl StateId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Index of an atomic proposition in the network's universe.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PropId(pub u32);

impl PropId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid network: {0}")]
    Validation(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
}

/// Immutable road map. Construct with [`RoadNetwork::from_spec`],
/// [`load_network`], or [`generate_grid`].
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    /// State names, sorted; index = `StateId`.
    state_names: Vec<String>,
    /// Proposition names, sorted; index = `PropId`.
    prop_names: Vec<String>,
    /// Per-state label set, each sorted by `PropId`.
    labels: Vec<Vec<PropId>>,
    /// Out-adjacency, sorted by target id.
    out: Vec<Vec<(StateId, u64)>>,
    /// All roads, sorted by (from, to); kept for serialization.
    roads: Vec<(StateId, StateId, u64)>,
    /// All-pairs shortest travel times, indexed [from][to].
    dist: Vec<Vec<Option<u64>>>,
    state_index: HashMap<String, StateId>,
    prop_index: HashMap<String, PropId>,
    /// Proposition -> states carrying it, sorted.
    prop_states: Vec<Vec<StateId>>,
}

impl RoadNetwork {
    /// Validates a parsed description and builds the network, including the
    /// all-pairs travel-time table. Two-way road declarations are expanded
    /// into two directed roads before validation.
    pub fn from_spec(spec: &NetworkSpec) -> Result<RoadNetwork, NetworkError> {
        let mut state_names: Vec<String> = spec.states.iter().map(|s| s.name.clone()).collect();
        state_names.sort();
        state_names.dedup();
        if state_names.len() != spec.states.len() {
            let mut seen = HashMap::new();
            for s in &spec.states {
                if seen.insert(&s.name, ()).is_some() {
                    return Err(NetworkError::Validation(format!(
                        "duplicate state `{}`",
                        s.name
                    )));
                }
            }
        }
        if state_names.is_empty() {
            return Err(NetworkError::Validation("no states declared".into()));
        }
        let state_index: HashMap<String, StateId> = state_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), StateId(i as u32)))
            .collect();

        let mut prop_names: Vec<String> = spec
            .states
            .iter()
            .flat_map(|s| s.props.iter().cloned())
            .collect();
        prop_names.sort();
        prop_names.dedup();
        let prop_index: HashMap<String, PropId> = prop_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), PropId(i as u32)))
            .collect();

        let mut labels = vec![Vec::new(); state_names.len()];
        for s in &spec.states {
            let sid = state_index[&s.name];
            let mut props: Vec<PropId> = s.props.iter().map(|p| prop_index[p]).collect();
            props.sort();
            props.dedup();
            labels[sid.idx()] = props;
        }

        let mut roads: Vec<(StateId, StateId, u64)> = Vec::new();
        for r in &spec.roads {
            let from = *state_index.get(&r.from).ok_or_else(|| {
                NetworkError::Validation(format!(
                    "road {} -> {}: undeclared state `{}`",
                    r.from, r.to, r.from
                ))
            })?;
            let to = *state_index.get(&r.to).ok_or_else(|| {
                NetworkError::Validation(format!(
                    "road {} -> {}: undeclared state `{}`",
                    r.from, r.to, r.to
                ))
            })?;
            if r.weight == 0 {
                return Err(NetworkError::Validation(format!(
                    "road {} -> {}: weight must be >= 1",
                    r.from, r.to
                )));
            }
            roads.push((from, to, r.weight));
            if r.two_way {
                roads.push((to, from, r.weight));
            }
        }
        roads.sort();
        for w in roads.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(NetworkError::Validation(format!(
                    "duplicate road {} -> {}",
                    state_names[w[0].0.idx()],
                    state_names[w[0].1.idx()]
                )));
            }
        }

        let mut out = vec![Vec::new(); state_names.len()];
        for &(f, t, w) in &roads {
            out[f.idx()].push((t, w));
        }

        let mut prop_states = vec![Vec::new(); prop_names.len()];
        for (i, lbl) in labels.iter().enumerate() {
            for p in lbl {
                prop_states[p.idx()].push(StateId(i as u32));
            }
        }

        let dist = all_pairs(&out);

        Ok(RoadNetwork {
            state_names,
            prop_names,
            labels,
            out,
            roads,
            dist,
            state_index,
            prop_index,
            prop_states,
        })
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.state_names.len() as u32).map(StateId)
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s.idx()]
    }

    pub fn state_id(&self, name: &str) -> Result<StateId, NetworkError> {
        self.state_index
            .get(name)
            .copied()
            .ok_or_else(|| NetworkError::UnknownState(name.to_string()))
    }

    pub fn num_props(&self) -> usize {
        self.prop_names.len()
    }

    pub fn prop_name(&self, p: PropId) -> &str {
        &self.prop_names[p.idx()]
    }

    pub fn prop_id(&self, name: &str) -> Option<PropId> {
        self.prop_index.get(name).copied()
    }

    /// States whose label carries `p`, sorted.
    pub fn states_with_prop(&self, p: PropId) -> &[StateId] {
        &self.prop_states[p.idx()]
    }

    pub fn label(&self, s: StateId) -> &[PropId] {
        &self.labels[s.idx()]
    }

    pub fn has_prop(&self, s: StateId, p: PropId) -> bool {
        self.labels[s.idx()].binary_search(&p).is_ok()
    }

    /// Outgoing roads from `s`, sorted by target id.
    pub fn roads_from(&self, s: StateId) -> &[(StateId, u64)] {
        &self.out[s.idx()]
    }

    pub fn roads(&self) -> &[(StateId, StateId, u64)] {
        &self.roads
    }

    fn check_state(&self, s: StateId) -> Result<(), NetworkError> {
        if s.idx() >= self.state_names.len() {
            return Err(NetworkError::UnknownState(format!("#{}", s.0)));
        }
        Ok(())
    }

    /// Minimal total travel time over directed paths, `None` if `to` is
    /// unreachable from `from`. Zero when `from == to`.
    pub fn shortest_travel_time(
        &self,
        from: StateId,
        to: StateId,
    ) -> Result<Option<Duration>, NetworkError> {
        self.check_state(from)?;
        self.check_state(to)?;
        Ok(self.dist[from.idx()][to.idx()].map(Duration::new))
    }

    /// Shortest travel time without endpoint validation; for internal use
    /// where ids are known good.
    pub(crate) fn dist(&self, from: StateId, to: StateId) -> Option<u64> {
        self.dist[from.idx()][to.idx()]
    }

    /// Minimum-duration path from `from` to `to`; among equal-duration
    /// paths, the lexicographically smallest state sequence. Returns the
    /// full state sequence including both endpoints.
    pub fn shortest_path(
        &self,
        from: StateId,
        to: StateId,
    ) -> Result<Option<Vec<StateId>>, NetworkError> {
        self.check_state(from)?;
        self.check_state(to)?;
        let total = match self.dist[from.idx()][to.idx()] {
            Some(d) => d,
            None => return Ok(None),
        };
        let mut path = vec![from];
        let mut here = from;
        let mut used = 0u64;
        while here != to {
            // Smallest successor that still lies on some shortest path.
            let next = self.out[here.idx()]
                .iter()
                .find(|&&(v, w)| {
                    self.dist[v.idx()][to.idx()]
                        .is_some_and(|rest| used + w + rest == total)
                })
                .map(|&(v, w)| (v, w))
                .expect("tight successor exists while target not reached");
            used += next.1;
            here = next.0;
            path.push(here);
        }
        Ok(Some(path))
    }

    /// Canonical text form; `load_network(serialize(net))` reproduces the
    /// validated content exactly.
    pub fn serialize(&self) -> String {
        let mut s = String::from("[states]\n");
        for (i, name) in self.state_names.iter().enumerate() {
            let props: Vec<&str> = self.labels[i].iter().map(|p| self.prop_name(*p)).collect();
            if props.is_empty() {
                s.push_str(&format!("{name}\n"));
            } else {
                s.push_str(&format!("{name}: {}\n", props.join(", ")));
            }
        }
        s.push_str("[roads]\n");
        for &(f, t, w) in &self.roads {
            s.push_str(&format!(
                "{} -> {} {}\n",
                self.state_name(f),
                self.state_name(t),
                w
            ));
        }
        s
    }
}

impl fmt::Display for RoadNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "road network: {} states, {} roads, {} propositions",
            self.state_names.len(),
            self.roads.len(),
            self.prop_names.len()
        )
    }
}

fn all_pairs(out: &[Vec<(StateId, u64)>]) -> Vec<Vec<Option<u64>>> {
    (0..out.len())
        .map(|src| single_source(out, StateId(src as u32)))
        .collect()
}

fn single_source(out: &[Vec<(StateId, u64)>], src: StateId) -> Vec<Option<u64>> {
    let mut dist = vec![None; out.len()];
    let mut heap = BinaryHeap::new();
    dist[src.idx()] = Some(0);
    heap.push(std::cmp::Reverse((0u64, src)));
    while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
        if dist[u.idx()] != Some(d) {
            continue;
        }
        for &(v, w) in &out[u.idx()] {
            let nd = d.saturating_add(w);
            if dist[v.idx()].is_none_or(|cur| nd < cur) {
                dist[v.idx()] = Some(nd);
                heap.push(std::cmp::Reverse((nd, v)));
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests;
