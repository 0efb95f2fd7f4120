//! Scenario files: one TOML document holding the network reference, the
//! fleet, run parameters, and either an explicit request list or a
//! generator spec. Explicit lists keep hand-built fixtures exact;
//! generator specs drive the synthetic studies.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::assign::{split_subrequests, SplitError};
use crate::network::{generate_grid, load_network, GridSpec, NetworkError, RoadNetwork, StateId};
use crate::routing::{GroupId, Request, RequestId, RoutingError, VehicleId};
use crate::scltl::{parse, FormulaError};
use crate::sim::generate::{generate_requests, GeneratorDefaults, GeneratorSpec};
use crate::time::{Duration, Tick};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("scenario error: {0}")]
    Config(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    network: NetworkRef,
    fleet: FleetSection,
    params: ParamsSection,
    #[serde(default)]
    requests: Vec<RequestEntry>,
    generator: Option<GeneratorSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRef {
    /// Path to a network file, relative to the scenario file.
    path: Option<PathBuf>,
    /// Network text embedded directly.
    inline: Option<String>,
    /// Generated grid map.
    grid: Option<GridSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    rows: u32,
    cols: u32,
    weight_min: u64,
    weight_max: u64,
    #[serde(default = "default_density")]
    label_density: f64,
    seed: u64,
}

fn default_density() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FleetSection {
    /// Explicit vehicles.
    vehicles: Option<Vec<VehicleEntry>>,
    /// Or a seeded uniform placement.
    count: Option<u32>,
    #[serde(default = "default_capacity")]
    capacity: u32,
    seed: Option<u64>,
}

fn default_capacity() -> u32 {
    2
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleEntry {
    id: String,
    #[serde(default = "default_capacity")]
    capacity: u32,
    position: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsSection {
    /// Run horizon in ticks.
    horizon: Tick,
    #[serde(default = "default_tpm")]
    ticks_per_minute: u64,
    /// Default waiting tolerance in ticks (2 minutes if omitted).
    max_wait: Option<u64>,
    /// Default delay tolerance in ticks (4 minutes if omitted).
    max_delay: Option<u64>,
    #[serde(default = "default_lambda_ko")]
    lambda_ko: f64,
    #[serde(default = "default_lambda")]
    lambda: f64,
    #[serde(default = "default_alpha")]
    alpha: f64,
}

fn default_tpm() -> u64 {
    60
}

fn default_lambda_ko() -> f64 {
    1_000.0
}

fn default_lambda() -> f64 {
    0.5
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestEntry {
    name: String,
    pick: String,
    formula: String,
    arrival: Tick,
    #[serde(default = "default_seats")]
    seats: u32,
    max_wait: Option<u64>,
    max_delay: Option<u64>,
    /// Per-seat formulas for multi-vehicle service.
    #[serde(default)]
    decomposition: Vec<String>,
}

fn default_seats() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorSection {
    seed: u64,
    count: Option<u32>,
    rate_per_minute: Option<f64>,
    #[serde(default = "default_templates")]
    templates: Vec<u8>,
}

fn default_templates() -> Vec<u8> {
    vec![1, 2, 3, 4]
}

/// A parsed scenario document, not yet bound to a network.
#[derive(Debug)]
pub struct Scenario {
    file: ScenarioFile,
    base_dir: PathBuf,
}

/// Knobs that callers may override without editing the scenario file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda_ko: Option<f64>,
    /// Replaces the generator and fleet seeds (derived deterministically).
    pub seed: Option<u64>,
    /// Replaces the generated fleet size.
    pub vehicle_count: Option<u32>,
    /// Replaces the generated request count.
    pub request_count: Option<u32>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimParams {
    pub horizon: Tick,
    pub ticks_per_minute: u64,
    pub lambda: f64,
    pub alpha: f64,
    pub lambda_ko: f64,
}

#[derive(Debug, Clone)]
pub struct VehicleSpec {
    pub id: VehicleId,
    pub name: String,
    pub capacity: u32,
    pub position: StateId,
}

/// Everything the engine needs: network, fleet, the concrete (already
/// split) request stream sorted by arrival, and parameters.
#[derive(Debug)]
pub struct ResolvedScenario {
    pub net: Arc<RoadNetwork>,
    pub fleet: Vec<VehicleSpec>,
    pub requests: Vec<Arc<Request>>,
    pub params: SimParams,
}

/// Splitmix-style mixer for deriving per-purpose seeds from one master.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Scenario {
    pub fn from_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Scenario, ScenarioError> {
        Ok(Scenario {
            file: toml::from_str(text)?,
            base_dir: base_dir.into(),
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Scenario::from_str(&text, base)
    }

    fn load_net(&self, over: &Overrides) -> Result<RoadNetwork, ScenarioError> {
        let n = &self.file.network;
        let given = [n.path.is_some(), n.inline.is_some(), n.grid.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(ScenarioError::Config(
                "network: give exactly one of `path`, `inline`, `grid`".into(),
            ));
        }
        if let Some(p) = &n.path {
            let full = self.base_dir.join(p);
            let text = std::fs::read_to_string(&full).map_err(|source| ScenarioError::Io {
                path: full.clone(),
                source,
            })?;
            return Ok(load_network(&text)?);
        }
        if let Some(text) = &n.inline {
            return Ok(load_network(text)?);
        }
        let g = n.grid.as_ref().unwrap();
        let _ = over;
        Ok(generate_grid(&GridSpec {
            rows: g.rows,
            cols: g.cols,
            weight_min: g.weight_min,
            weight_max: g.weight_max,
            label_density: g.label_density,
            seed: g.seed,
        })?)
    }

    fn build_fleet(
        &self,
        net: &RoadNetwork,
        over: &Overrides,
    ) -> Result<Vec<VehicleSpec>, ScenarioError> {
        let f = &self.file.fleet;
        match (&f.vehicles, f.count) {
            (Some(list), None) => {
                if over.vehicle_count.is_some() {
                    return Err(ScenarioError::Config(
                        "cannot sweep vehicle count over an explicit fleet".into(),
                    ));
                }
                let mut fleet = Vec::with_capacity(list.len());
                for (i, v) in list.iter().enumerate() {
                    fleet.push(VehicleSpec {
                        id: VehicleId(i as u32),
                        name: v.id.clone(),
                        capacity: v.capacity,
                        position: net.state_id(&v.position)?,
                    });
                }
                let mut names: Vec<&str> = list.iter().map(|v| v.id.as_str()).collect();
                names.sort_unstable();
                names.dedup();
                if names.len() != list.len() {
                    return Err(ScenarioError::Config("duplicate vehicle id".into()));
                }
                Ok(fleet)
            }
            (None, Some(count)) => {
                let count = over.vehicle_count.unwrap_or(count);
                let base_seed = f.seed.unwrap_or(0);
                let seed = match over.seed {
                    Some(s) => mix_seed(s, 1),
                    None => base_seed,
                };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let states: Vec<StateId> = net.states().collect();
                Ok((0..count)
                    .map(|i| VehicleSpec {
                        id: VehicleId(i),
                        name: format!("v{}", i + 1),
                        capacity: f.capacity,
                        position: states[rng.gen_range(0..states.len())],
                    })
                    .collect())
            }
            _ => Err(ScenarioError::Config(
                "fleet: give either `vehicles` or `count`".into(),
            )),
        }
    }

    /// Binds the scenario to a concrete network, fleet, and request
    /// stream. Multi-seat requests with decompositions are split here, so
    /// the engine only ever sees assignable requests.
    pub fn resolve(&self, over: &Overrides) -> Result<ResolvedScenario, ScenarioError> {
        let p = &self.file.params;
        if p.horizon == 0 {
            return Err(ScenarioError::Config("horizon must be positive".into()));
        }
        if p.ticks_per_minute == 0 {
            return Err(ScenarioError::Config("ticks_per_minute must be positive".into()));
        }
        let params = SimParams {
            horizon: p.horizon,
            ticks_per_minute: p.ticks_per_minute,
            lambda: over.lambda.unwrap_or(p.lambda),
            alpha: over.alpha.unwrap_or(p.alpha),
            lambda_ko: over.lambda_ko.unwrap_or(p.lambda_ko),
        };
        if !(0.0..=1.0).contains(&params.lambda) {
            return Err(ScenarioError::Config(format!(
                "lambda {} outside [0, 1]",
                params.lambda
            )));
        }
        if params.alpha < 0.0 {
            return Err(ScenarioError::Config("alpha must be >= 0".into()));
        }
        let net = Arc::new(self.load_net(over)?);
        let fleet = self.build_fleet(&net, over)?;
        if fleet.is_empty() {
            return Err(ScenarioError::Config("fleet is empty".into()));
        }
        let cap = fleet.iter().map(|v| v.capacity).max().unwrap_or(0);
        let default_wait = Duration::new(p.max_wait.unwrap_or(2 * p.ticks_per_minute));
        let default_delay = Duration::new(p.max_delay.unwrap_or(4 * p.ticks_per_minute));

        let mut requests: Vec<Arc<Request>> = Vec::new();
        let mut next_id = 0u32;
        if !self.file.requests.is_empty() && self.file.generator.is_some() {
            return Err(ScenarioError::Config(
                "give either an explicit request list or a generator, not both".into(),
            ));
        }
        for entry in &self.file.requests {
            let body = parse(&entry.formula)?;
            let id = next_id;
            next_id += 1;
            let base = Arc::new(Request::new(
                &net,
                RequestId(id),
                entry.name.clone(),
                GroupId(id),
                &entry.pick,
                body,
                entry.arrival,
                entry.seats,
                entry.max_wait.map(Duration::new).unwrap_or(default_wait),
                entry.max_delay.map(Duration::new).unwrap_or(default_delay),
            )?);
            let decomposition = entry
                .decomposition
                .iter()
                .map(|t| parse(t))
                .collect::<Result<Vec<_>, _>>()?;
            let subs = split_subrequests(&net, &base, &decomposition, cap, &mut next_id)?;
            requests.extend(subs);
        }
        if let Some(g) = &self.file.generator {
            let spec = GeneratorSpec {
                seed: over.seed.map(|s| mix_seed(s, 2)).unwrap_or(g.seed),
                count: over.request_count.or(g.count),
                rate_per_minute: if over.request_count.is_some() {
                    None
                } else {
                    g.rate_per_minute
                },
                templates: g.templates.clone(),
            };
            let defaults = GeneratorDefaults {
                max_wait: default_wait,
                max_delay: default_delay,
                first_id: next_id,
            };
            requests.extend(generate_requests(
                &net,
                &spec,
                params.horizon,
                params.ticks_per_minute,
                &defaults,
            )?);
        }
        requests.sort_by_key(|r| (r.t_req, r.id));

        ResolvedScenario::new(net, fleet, requests, params)
    }
}

impl ResolvedScenario {
    /// Direct constructor for programmatic scenarios (tests, sweeps).
    /// Requests must already be split; they are sorted here.
    pub fn new(
        net: Arc<RoadNetwork>,
        fleet: Vec<VehicleSpec>,
        mut requests: Vec<Arc<Request>>,
        params: SimParams,
    ) -> Result<ResolvedScenario, ScenarioError> {
        let mut ids: Vec<u32> = fleet.iter().map(|v| v.id.0).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != fleet.len() {
            return Err(ScenarioError::Config("duplicate vehicle id".into()));
        }
        for v in &fleet {
            if v.capacity == 0 {
                return Err(ScenarioError::Config(format!(
                    "vehicle {} has zero capacity",
                    v.name
                )));
            }
            if v.position.idx() >= net.num_states() {
                return Err(ScenarioError::Config(format!(
                    "vehicle {} starts off-map",
                    v.name
                )));
            }
        }
        let mut rids: Vec<u32> = requests.iter().map(|r| r.id.0).collect();
        rids.sort_unstable();
        rids.dedup();
        if rids.len() != requests.len() {
            return Err(ScenarioError::Config("duplicate request id".into()));
        }
        requests.sort_by_key(|r| (r.t_req, r.id));
        Ok(ResolvedScenario {
            net,
            fleet,
            requests,
            params,
        })
    }
}
