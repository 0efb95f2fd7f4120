//! Paired comparison runs: for every sweep point and repetition, the same
//! request stream is played once under the configured fair planning
//! (envy constraints plus history correction) and once under the baseline
//! with both disabled. Points and repetitions run on parallel workers;
//! the report is assembled in sorted order and is a deterministic
//! function of the scenario, sweep, and master seed.

use std::path::PathBuf;

use anyhow::{bail, Context};
use rayon::prelude::*;

use fleetfair_core::sim::{mix_seed, run, stream_hash, Overrides, Scenario};

#[derive(clap::Args, Debug)]
pub struct AbArgs {
    /// Scenario file (TOML); must use a generated fleet and a request
    /// generator so sweep points can resize them.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for ab_report.csv.
    #[arg(long)]
    out: PathBuf,
    /// Vehicle counts to sweep, e.g. 25,50,75.
    #[arg(long, value_delimiter = ',')]
    sweep_vehicles: Option<Vec<u32>>,
    /// Request counts to sweep, e.g. 50,100,150.
    #[arg(long, value_delimiter = ',')]
    sweep_requests: Option<Vec<u32>>,
    /// Repetitions per sweep point.
    #[arg(long, default_value_t = 10)]
    reps: u32,
    /// Master seed; per-repetition seeds derive from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fair-arm envy approximation (baseline always runs 0).
    #[arg(long)]
    lambda: Option<f64>,
    /// Fair-arm history-correction strength (baseline always runs 0).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda_ko: Option<f64>,
}

struct Row {
    point: u32,
    rep: u32,
    arm: &'static str,
    stream: u64,
    total_cost: f64,
    unassigned: u32,
    completed: u32,
    vacancy: f64,
    utility_stddev: f64,
    utility_range: f64,
}

impl Row {
    fn csv(&self, rep: &str) -> String {
        format!(
            "{},{},{},{:016x},{},{},{},{:.6},{:.6},{:.6}\n",
            self.point,
            rep,
            self.arm,
            self.stream,
            self.total_cost,
            self.unassigned,
            self.completed,
            self.vacancy,
            self.utility_stddev,
            self.utility_range
        )
    }
}

pub fn cmd_ab(args: AbArgs) -> anyhow::Result<()> {
    let (points, sweep_vehicles) = match (&args.sweep_vehicles, &args.sweep_requests) {
        (Some(v), None) => (v.clone(), true),
        (None, Some(r)) => (r.clone(), false),
        _ => bail!("give exactly one of --sweep-vehicles or --sweep-requests"),
    };
    if points.is_empty() {
        bail!("sweep list is empty");
    }
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let scenario = Scenario::from_path(&args.scenario)
        .with_context(|| format!("loading scenario {}", args.scenario.display()))?;

    let mut jobs: Vec<(u32, u32)> = Vec::new();
    for &point in &points {
        for rep in 0..args.reps {
            jobs.push((point, rep));
        }
    }
    let rows: Vec<(Row, Row)> = jobs
        .par_iter()
        .map(|&(point, rep)| -> anyhow::Result<(Row, Row)> {
            let rep_seed = mix_seed(args.seed, (point as u64) << 32 | rep as u64);
            let base_over = Overrides {
                seed: Some(rep_seed),
                vehicle_count: sweep_vehicles.then_some(point),
                request_count: (!sweep_vehicles).then_some(point),
                ..Default::default()
            };
            let fair_scn = scenario.resolve(&Overrides {
                lambda: args.lambda,
                alpha: args.alpha,
                lambda_ko: args.lambda_ko,
                ..base_over
            })?;
            let base_scn = scenario.resolve(&Overrides {
                lambda: Some(0.0),
                alpha: Some(0.0),
                lambda_ko: args.lambda_ko,
                ..base_over
            })?;
            let fair_hash = stream_hash(&fair_scn.requests);
            let base_hash = stream_hash(&base_scn.requests);
            if fair_hash != base_hash {
                bail!("paired arms diverged: request streams differ at point {point} rep {rep}");
            }
            let make = |arm: &'static str, trace: fleetfair_core::sim::MetricsTrace| {
                let (utility_stddev, utility_range) = trace.utility_deviation();
                Row {
                    point,
                    rep,
                    arm,
                    stream: fair_hash,
                    total_cost: trace.total_cost,
                    unassigned: trace.unassigned_groups,
                    completed: trace.completed,
                    vacancy: trace.vacancy_rate(),
                    utility_stddev,
                    utility_range,
                }
            };
            let fair = make("fair", run(&fair_scn));
            let base = make("baseline", run(&base_scn));
            Ok((fair, base))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let mut report = String::from(
        "point,rep,arm,stream_hash,total_cost,unassigned,completed,vacancy,utility_stddev,utility_range\n",
    );
    for (fair, base) in &rows {
        report.push_str(&fair.csv(&fair.rep.to_string()));
        report.push_str(&base.csv(&base.rep.to_string()));
    }
    // Per-point means for each arm.
    for &point in &points {
        for arm in ["fair", "baseline"] {
            let mine: Vec<&Row> = rows
                .iter()
                .flat_map(|(f, b)| [f, b])
                .filter(|r| r.point == point && r.arm == arm)
                .collect();
            let n = mine.len() as f64;
            let mean = |f: &dyn Fn(&Row) -> f64| mine.iter().map(|r| f(r)).sum::<f64>() / n;
            let row = Row {
                point,
                rep: 0,
                arm: if arm == "fair" { "fair" } else { "baseline" },
                stream: 0,
                total_cost: mean(&|r| r.total_cost),
                unassigned: 0,
                completed: 0,
                vacancy: mean(&|r| r.vacancy),
                utility_stddev: mean(&|r| r.utility_stddev),
                utility_range: mean(&|r| r.utility_range),
            };
            report.push_str(&row.csv("mean"));
        }
    }

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let path = args.out.join("ab_report.csv");
    std::fs::write(&path, &report)?;

    for &point in &points {
        let pick = |arm: &str, f: &dyn Fn(&Row) -> f64| {
            let mine: Vec<f64> = rows
                .iter()
                .flat_map(|(fr, br)| [fr, br])
                .filter(|r| r.point == point && r.arm == arm)
                .map(f)
                .collect();
            mine.iter().sum::<f64>() / mine.len() as f64
        };
        println!(
            "point {point}: vacancy fair {:.4} vs baseline {:.4}; utility stddev fair {:.2} vs baseline {:.2}",
            pick("fair", &|r| r.vacancy),
            pick("baseline", &|r| r.vacancy),
            pick("fair", &|r| r.utility_stddev),
            pick("baseline", &|r| r.utility_stddev),
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}
