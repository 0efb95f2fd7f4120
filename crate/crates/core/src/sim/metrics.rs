//! Run metrics: per-tick occupancy rows plus end-of-run service and
//! fairness summaries. Exports are plain CSV and are deterministic
//! functions of the scenario and seed; wall-clock phase timings are kept
//! in memory for diagnostics but never written into exports.

use crate::routing::{RequestId, VehicleId};
use crate::time::Tick;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickRow {
    pub tick: Tick,
    /// Requests arrived so far (cumulative).
    pub arrived: u32,
    /// Requests completed so far (cumulative).
    pub completed: u32,
    /// Vehicles with passengers or a plan in execution.
    pub busy_vehicles: u32,
    /// Occupied seats per vehicle, fleet order.
    pub occupied_seats: Vec<u32>,
}

/// Final state of one request after the run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestFate {
    /// Still waiting or riding when the horizon ended.
    Open,
    Completed {
        vehicle: VehicleId,
        pickup: Tick,
        drop: Tick,
        delay: u64,
    },
    /// Never picked up within its waiting tolerance.
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestReport {
    pub id: RequestId,
    pub name: String,
    pub t_req: Tick,
    pub fate: RequestFate,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PhaseTimings {
    /// Nanoseconds spent building RV/RTV graphs.
    pub graph_build: u128,
    /// Nanoseconds spent formulating and solving assignment programs.
    pub solve: u128,
    /// Number of assignment batches solved.
    pub batches: u64,
}

#[derive(Debug, Clone)]
pub struct MetricsTrace {
    pub ticks: Vec<TickRow>,
    /// Final accumulated utility per vehicle, fleet order.
    pub vehicle_utilities: Vec<(VehicleId, u64)>,
    pub requests: Vec<RequestReport>,
    /// Total cost: completed delays plus the drop penalty per lost group.
    pub total_cost: f64,
    /// Number of request groups that expired unserved.
    pub unassigned_groups: u32,
    pub arrived: u32,
    pub completed: u32,
    /// Diagnostics only; excluded from every export.
    pub timings: PhaseTimings,
}

impl MetricsTrace {
    /// Fraction of vehicle-ticks spent with no passengers and no plan in
    /// execution.
    pub fn vacancy_rate(&self) -> f64 {
        let vehicles = self.vehicle_utilities.len();
        if vehicles == 0 || self.ticks.is_empty() {
            return 1.0;
        }
        let busy: u64 = self.ticks.iter().map(|r| r.busy_vehicles as u64).sum();
        let total = (vehicles * self.ticks.len()) as f64;
        (total - busy as f64) / total
    }

    /// Population standard deviation and max-min spread of per-vehicle
    /// accumulated utility.
    pub fn utility_deviation(&self) -> (f64, f64) {
        if self.vehicle_utilities.is_empty() {
            return (0.0, 0.0);
        }
        let us: Vec<f64> = self
            .vehicle_utilities
            .iter()
            .map(|&(_, u)| u as f64)
            .collect();
        let mean = us.iter().sum::<f64>() / us.len() as f64;
        let var = us.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>() / us.len() as f64;
        let max = us.iter().cloned().fold(f64::MIN, f64::max);
        let min = us.iter().cloned().fold(f64::MAX, f64::min);
        (var.sqrt(), max - min)
    }

    /// Per-tick rows as CSV.
    pub fn export_ticks(&self) -> String {
        let mut out = String::from("tick,arrived,completed,busy_vehicles\n");
        for r in &self.ticks {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.tick, r.arrived, r.completed, r.busy_vehicles
            ));
        }
        out
    }

    /// One-row run summary as CSV.
    pub fn export_summary(&self) -> String {
        let (std, range) = self.utility_deviation();
        let mut out = String::from(
            "total_cost,unassigned,arrived,completed,vacancy_rate,utility_stddev,utility_range\n",
        );
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{:.6}\n",
            self.total_cost,
            self.unassigned_groups,
            self.arrived,
            self.completed,
            self.vacancy_rate(),
            std,
            range
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_with_utilities(us: &[u64]) -> MetricsTrace {
        MetricsTrace {
            ticks: vec![],
            vehicle_utilities: us
                .iter()
                .enumerate()
                .map(|(i, &u)| (VehicleId(i as u32), u))
                .collect(),
            requests: vec![],
            total_cost: 0.0,
            unassigned_groups: 0,
            arrived: 0,
            completed: 0,
            timings: PhaseTimings::default(),
        }
    }

    #[test]
    fn deviation_of_equal_utilities_is_zero() {
        assert_eq!(trace_with_utilities(&[4, 4, 4]).utility_deviation(), (0.0, 0.0));
    }

    #[test]
    fn deviation_of_two_point_spread() {
        let (std, range) = trace_with_utilities(&[0, 10]).utility_deviation();
        assert_eq!((std, range), (5.0, 10.0));
    }

    #[test]
    fn deviation_of_three_values() {
        let (std, range) = trace_with_utilities(&[2, 4, 6]).utility_deviation();
        assert!((std - 1.632993).abs() < 1e-5);
        assert_eq!(range, 4.0);
    }

    #[test]
    fn vacancy_of_half_busy_vehicle() {
        let mut t = trace_with_utilities(&[1]);
        t.ticks = (0..10)
            .map(|tick| TickRow {
                tick,
                arrived: 0,
                completed: 0,
                busy_vehicles: u32::from(tick < 5),
                occupied_seats: vec![0],
            })
            .collect();
        assert_eq!(t.vacancy_rate(), 0.5);
    }
}
