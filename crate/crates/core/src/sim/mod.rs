//! Scenario loading, request-stream generation, the discrete-event fleet
//! simulation, and run metrics.

mod engine;
mod generate;
mod metrics;
mod scenario;


pub use engine::run;
pub use generate::{generate_requests, GeneratorDefaults, GeneratorSpec};
pub use metrics::{MetricsTrace, PhaseTimings, RequestFate, RequestReport, TickRow};
pub use scenario::{
    mix_seed, Overrides, ResolvedScenario, Scenario, ScenarioError, SimParams, VehicleSpec,
};

use std::sync::Arc;

use crate::routing::Request;

/// Stable fingerprint of a request stream (FNV-1a over the canonical
/// request fields). Paired fair/baseline runs must agree on it.
pub fn stream_hash(requests: &[Arc<Request>]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for r in requests {
        eat(r.name.as_bytes());
        eat(&r.t_req.to_le_bytes());
        eat(&r.seats.to_le_bytes());
        eat(&r.max_wait.ticks().to_le_bytes());
        eat(&r.max_delay.ticks().to_le_bytes());
        eat(r.full.to_string().as_bytes());
        eat(&[0xff]);
    }
    h
}
