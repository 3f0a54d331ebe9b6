//! Benchmark harness: independent trials over a problem suite, run in
//! parallel, one CSV row per trial.
//!
//! CSV columns: `problem,algorithm,heuristic,trial,success,runtime,backtracks,plan_length,status`.
//! `runtime` is wall seconds (0 when timing is suppressed); `plan_length` is
//! the configuration-space length of the validated plan, or the number of
//! elements in stiffness-only mode; `status` is the search status.

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frame::{is_valid_sequence, orient_sequence, FrameProblem};
use crate::heuristics::{stiffness_only_search, Direction, HeuristicKind, StiffnessPlanOutcome};
use crate::kinematics::FreeFlyingExtruder;
use crate::search::{heuristic_table, plan, Algorithm, SearchConfig, SearchLimits, SearchStatus};
use crate::stiffness::StiffnessChecker;
use crate::validate::validate_plan;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub problem: String,
    pub algorithm: Algorithm,
    pub heuristic: HeuristicKind,
    pub trial: usize,
    pub success: bool,
    pub runtime: f64,
    pub backtracks: u64,
    pub plan_length: f64,
    pub status: SearchStatus,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub algorithms: Vec<Algorithm>,
    pub heuristics: Vec<HeuristicKind>,
    pub trials: usize,
    pub seed: u64,
    pub limits: SearchLimits,
    /// Robot-free runs under the stiffness constraint only.
    pub stiffness_only: bool,
    pub timing: bool,
    pub smooth: bool,
}

impl BenchConfig {
    pub fn new(algorithms: Vec<Algorithm>, heuristics: Vec<HeuristicKind>) -> Self {
        BenchConfig {
            algorithms,
            heuristics,
            trials: 1,
            seed: 0,
            limits: SearchLimits::timeout(60.0),
            stiffness_only: false,
            timing: true,
            smooth: true,
        }
    }
}

/// Seed of one trial, independent of scheduling.
pub fn trial_seed(base: u64, problem: usize, trial: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (problem as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (trial as u64).wrapping_mul(0x94D0_49BB_1331_11EB)
}

/// One full planning trial; successes count only after validation.
pub fn run_trial(
    name: &str,
    index: usize,
    problem: &FrameProblem,
    algorithm: Algorithm,
    heuristic: HeuristicKind,
    trial: usize,
    config: &BenchConfig,
) -> BenchRow {
    let seed = trial_seed(config.seed, index, trial);
    if config.stiffness_only {
        return stiffness_trial(name, problem, algorithm, heuristic, trial, seed, config);
    }
    let mut sc = SearchConfig::new(algorithm, heuristic, seed);
    sc.limits = config.limits;
    sc.smooth = config.smooth;
    let out = plan(problem, &sc);
    let model = FreeFlyingExtruder::for_problem(problem);
    let (success, plan_length) = match &out.plan {
        Some(p) if validate_plan(problem, p).valid => {
            (true, p.trajectories.iter().map(|t| t.length(&model)).sum::<f64>())
        }
        Some(_) => {
            log::error!("{name}: {algorithm}/{heuristic} trial {trial} produced a plan that fails validation");
            (false, 0.0)
        }
        None => (false, 0.0),
    };
    log::info!(
        "{name} {algorithm}/{heuristic} trial {trial}: {:?} in {:.2}s, {} backtracks",
        out.status,
        out.stats.wall_time,
        out.stats.backtracks
    );
    BenchRow {
        problem: name.to_string(),
        algorithm,
        heuristic,
        trial,
        success,
        runtime: if config.timing { out.stats.wall_time } else { 0.0 },
        backtracks: out.stats.backtracks,
        plan_length,
        status: out.status,
    }
}

fn stiffness_trial(
    name: &str,
    problem: &FrameProblem,
    algorithm: Algorithm,
    heuristic: HeuristicKind,
    trial: usize,
    seed: u64,
    config: &BenchConfig,
) -> BenchRow {
    let clock = std::time::Instant::now();
    let mut checker = StiffnessChecker::new(problem);
    let row = |success, backtracks, status, plan_length| BenchRow {
        problem: name.to_string(),
        algorithm,
        heuristic,
        trial,
        success,
        runtime: if config.timing { clock.elapsed().as_secs_f64() } else { 0.0 },
        backtracks,
        plan_length,
        status,
    };
    let table = match heuristic_table(problem, heuristic, seed, &mut checker, &config.limits) {
        Ok(t) => t,
        Err(status) => return row(false, 0, status, 0.0),
    };
    let direction = match algorithm {
        Algorithm::Regression => Direction::Backward,
        _ => Direction::Forward,
    };
    let limits = SearchLimits {
        timeout: config.limits.timeout.map(|t| t.saturating_sub(clock.elapsed()).max(Duration::ZERO)),
        ..config.limits
    };
    let (outcome, stats) = stiffness_only_search(problem, direction, &table, &mut checker, &limits);
    match outcome {
        StiffnessPlanOutcome::Found(order) => {
            let mut fresh = StiffnessChecker::new(problem);
            let ok = orient_sequence(problem, &order)
                .is_some_and(|seq| is_valid_sequence(problem, &seq, &mut fresh).is_ok());
            row(ok, stats.backtracks, SearchStatus::Solved, order.len() as f64)
        }
        StiffnessPlanOutcome::Infeasible => row(false, stats.backtracks, SearchStatus::Exhausted, 0.0),
        StiffnessPlanOutcome::Exhausted => row(false, stats.backtracks, SearchStatus::Timeout, 0.0),
    }
}

/// Worker count from `EXTRUPLAN_THREADS`, else the machine's parallelism.
pub fn thread_count() -> usize {
    std::env::var("EXTRUPLAN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Run every (problem, algorithm, heuristic, trial) combination. Rows are
/// sorted by problem, algorithm, heuristic and trial.
pub fn run_bench(problems: &[(String, FrameProblem)], config: &BenchConfig) -> Vec<BenchRow> {
    let mut jobs = Vec::new();
    for (i, _) in problems.iter().enumerate() {
        for &a in &config.algorithms {
            for &h in &config.heuristics {
                for t in 0..config.trials {
                    jobs.push((i, a, h, t));
                }
            }
        }
    }
    let work = || {
        jobs.par_iter()
            .map(|&(i, a, h, t)| run_trial(&problems[i].0, i, &problems[i].1, a, h, t, config))
            .collect::<Vec<_>>()
    };
    let mut rows = match rayon::ThreadPoolBuilder::new().num_threads(thread_count()).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    };
    rows.sort_by(|a, b| {
        (&a.problem, a.algorithm, a.heuristic, a.trial).cmp(&(&b.problem, b.algorithm, b.heuristic, b.trial))
    });
    rows
}

pub fn write_csv<W: std::io::Write>(rows: &[BenchRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<BenchRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryLine {
    pub algorithm: Algorithm,
    pub heuristic: HeuristicKind,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_runtime: f64,
}

/// Success rate and mean runtime per configuration.
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryLine> {
    let mut keys: Vec<(Algorithm, HeuristicKind)> = rows.iter().map(|r| (r.algorithm, r.heuristic)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(a, h)| {
            let sel: Vec<&BenchRow> = rows.iter().filter(|r| r.algorithm == a && r.heuristic == h).collect();
            let successes = sel.iter().filter(|r| r.success).count();
            SummaryLine {
                algorithm: a,
                heuristic: h,
                trials: sel.len(),
                successes,
                success_rate: successes as f64 / sel.len().max(1) as f64,
                mean_runtime: sel.iter().map(|r| r.runtime).sum::<f64>() / sel.len().max(1) as f64,
            }
        })
        .collect()
}

/// A deterministic generator for auxiliary per-trial randomness.
pub fn trial_rng(base: u64, problem: usize, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(base, problem, trial))
}
