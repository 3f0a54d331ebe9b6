use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use extruplan::bench::{run_bench, summarize, write_csv, BenchConfig};
use extruplan::export::{scene_json, write_ply, ExportFormat};
use extruplan::frame::{load_problem, FrameError, FrameProblem};
use extruplan::generate::{desk_suite, generate_benchmark, trap_suite, BenchmarkSpec, Family, GeneratedProblem};
use extruplan::heuristics::{plan_stiffness_with, HeuristicKind, StiffnessPlanOutcome};
use extruplan::plan::{Plan, PlanError};
use extruplan::search::{plan, Algorithm, SearchConfig, SearchLimits, SearchStats, SearchStatus};
use extruplan::stiffness::{analyze, StiffnessChecker};
use extruplan::validate::validate_plan;
use extruplan::{ElementId, PartialStructure};

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(String),
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

#[derive(Parser)]
#[command(name = "extruplan", version, about = "Sequence and motion planning for spatial extrusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a full extrusion: sequence, orientations and trajectories.
    Plan(PlanArgs),
    /// Check a plan against a problem; prints the verdict as JSON.
    Validate {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Frame analysis of the full structure or a subset of elements.
    CheckStiffness {
        #[arg(long)]
        problem: PathBuf,
        /// Comma-separated element ids (default: all elements).
        #[arg(long, value_delimiter = ',')]
        elements: Option<Vec<usize>>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Robot-free stiffness sequencing.
    Sequence {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timeout: Option<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run planners over a generated suite or a list of problem files.
    Bench(BenchArgs),
    /// Write element capsules colored by extrusion order.
    Export {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value = "ply")]
        format: ExportFormat,
        /// Color only the first N extrusions; the rest are left black.
        #[arg(long)]
        upto: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate benchmark problems.
    Generate {
        /// tower, pyramid, cantilever, arch or cage.
        #[arg(long, conflicts_with = "suite")]
        family: Option<Family>,
        /// Size parameters, comma separated.
        #[arg(long, value_delimiter = ',')]
        size: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// `desk` or `trap`.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write each problem's witness order.
        #[arg(long)]
        witness: bool,
    },
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Translational tolerance (m).
    #[arg(long)]
    trans: Option<f64>,
    /// Rotational tolerance (rad).
    #[arg(long)]
    rot: Option<f64>,
    /// Extrusion constraint violation bound.
    #[arg(long)]
    eps: Option<f64>,
    /// Retraction distance (m).
    #[arg(long)]
    retraction: Option<f64>,
}

impl Overrides {
    fn load(&self, path: &Path) -> Result<FrameProblem, CliError> {
        let mut p = load_problem(path)?;
        let t = &mut p.tolerances;
        for (value, slot, name) in [
            (self.trans, &mut t.trans, "trans"),
            (self.eps, &mut t.eps, "eps"),
        ] {
            if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::Usage(format!("--{name} must be positive")));
                }
                *slot = v;
            }
        }
        if let Some(r) = self.rot {
            if !(r > 0.0) {
                return Err(CliError::Usage("--rot must be positive".into()));
            }
            t.rot = Some(r);
        }
        if let Some(r) = self.retraction {
            if !(r.is_finite() && r >= 0.0) {
                return Err(CliError::Usage("--retraction must be nonnegative".into()));
            }
            t.retraction = r;
        }
        Ok(p)
    }
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, default_value = "regression")]
    algorithm: Algorithm,
    #[arg(long, default_value = "euclidean")]
    heuristic: HeuristicKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    max_expansions: Option<u64>,
    #[arg(long)]
    no_smooth: bool,
    /// Report zero wall time so stats files are reproducible.
    #[arg(long)]
    no_timing: bool,
    #[arg(long, default_value = "plan.json")]
    out: PathBuf,
    #[arg(long)]
    stats: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct BenchArgs {
    /// Generated suite: `desk` or `trap`.
    #[arg(long, default_value = "desk")]
    suite: String,
    /// Problem files; replaces the generated suite.
    #[arg(long, num_args = 1..)]
    problems: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "progression,regression")]
    algorithms: Vec<Algorithm>,
    #[arg(long, value_delimiter = ',', default_value = "euclidean")]
    heuristics: Vec<HeuristicKind>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds per trial.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long)]
    max_expansions: Option<u64>,
    /// Robot-free runs under the stiffness constraint only.
    #[arg(long)]
    stiffness_only: bool,
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    no_smooth: bool,
    /// Restrict the generated suite to these families.
    #[arg(long, value_delimiter = ',')]
    families: Vec<Family>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct StatsFile<'a> {
    status: SearchStatus,
    algorithm: Algorithm,
    heuristic: HeuristicKind,
    seed: u64,
    stats: &'a SearchStats,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn cmd_plan(a: &PlanArgs) -> Result<ExitCode, CliError> {
    let problem = a.overrides.load(&a.problem)?;
    let mut config = SearchConfig::new(a.algorithm, a.heuristic, a.seed);
    config.limits = SearchLimits { timeout: a.timeout.map(Duration::from_secs_f64), max_expansions: a.max_expansions };
    config.smooth = !a.no_smooth;
    let mut out = plan(&problem, &config);
    if a.no_timing {
        out.stats.wall_time = 0.0;
    }
    let stats_path = a.stats.clone().unwrap_or_else(|| a.out.with_extension("stats.json"));
    let stats = StatsFile { status: out.status, algorithm: a.algorithm, heuristic: a.heuristic, seed: a.seed, stats: &out.stats };
    let stats_json = serde_json::to_string_pretty(&stats).expect("stats serialize");
    write_file(&stats_path, stats_json.as_bytes())?;
    match out.plan {
        Some(p) => {
            let verdict = validate_plan(&problem, &p);
            if !verdict.valid {
                eprintln!("planner produced an invalid plan; not written\n{}", verdict.to_json());
                return Ok(ExitCode::from(1));
            }
            write_file(&a.out, p.to_json().as_bytes())?;
            log::info!("plan with {} extrusions written to {}", p.sequence.len(), a.out.display());
            Ok(ExitCode::SUCCESS)
        }
        None => {
            eprintln!("no plan: {:?} after {} expansions", out.status, out.stats.expansions);
            Ok(ExitCode::from(2))
        }
    }
}

fn cmd_validate(problem: &Path, plan_path: &Path, overrides: &Overrides) -> Result<ExitCode, CliError> {
    let problem = overrides.load(problem)?;
    let plan = Plan::load(plan_path)?;
    let verdict = validate_plan(&problem, &plan);
    println!("{}", verdict.to_json());
    Ok(if verdict.valid { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_check_stiffness(path: &Path, elements: Option<&[usize]>, overrides: &Overrides) -> Result<ExitCode, CliError> {
    let problem = overrides.load(path)?;
    let partial = match elements {
        None => PartialStructure::full(&problem),
        Some(ids) => {
            if let Some(bad) = ids.iter().find(|&&e| e >= problem.num_elements()) {
                return Err(CliError::Usage(format!("element {bad} does not exist")));
            }
            PartialStructure::from_elements(&problem, ids.iter().map(|&e| ElementId(e)))
        }
    };
    match analyze(&problem, &partial) {
        Ok(report) => {
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Err(e) => {
            println!("{}", serde_json::json!({"pass": false, "error": e.to_string()}));
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_sequence(path: &Path, out: Option<&Path>, timeout: Option<f64>, overrides: &Overrides) -> Result<ExitCode, CliError> {
    let problem = overrides.load(path)?;
    let mut checker = StiffnessChecker::new(&problem);
    let limits = SearchLimits { timeout: timeout.map(Duration::from_secs_f64), max_expansions: None };
    let (outcome, stats) = plan_stiffness_with(&problem, &mut checker, &limits);
    let (status, seq, code) = match outcome {
        StiffnessPlanOutcome::Found(order) => {
            let seq = extruplan::frame::orient_sequence(&problem, &order);
            (SearchStatus::Solved, seq, ExitCode::SUCCESS)
        }
        StiffnessPlanOutcome::Infeasible => (SearchStatus::Infeasible, None, ExitCode::from(2)),
        StiffnessPlanOutcome::Exhausted => (SearchStatus::Timeout, None, ExitCode::from(2)),
    };
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "status": status,
        "sequence": seq,
        "stats": stats,
    }))
    .expect("sequence serializes");
    match out {
        Some(p) => write_file(p, json.as_bytes())?,
        None => println!("{json}"),
    }
    Ok(code)
}

fn suite(name: &str, seed: u64) -> Result<Vec<GeneratedProblem>, CliError> {
    match name {
        "desk" => Ok(desk_suite(seed)),
        "trap" => Ok(trap_suite(seed, 6)),
        _ => Err(CliError::Usage(format!("unknown suite '{name}' (desk|trap)"))),
    }
}

fn cmd_bench(a: &BenchArgs) -> Result<ExitCode, CliError> {
    let problems: Vec<(String, FrameProblem)> = if a.problems.is_empty() {
        suite(&a.suite, a.seed)?
            .into_iter()
            .filter(|g| a.families.is_empty() || a.families.contains(&g.family))
            .map(|g| (g.name, g.problem))
            .collect()
    } else {
        a.problems
            .iter()
            .map(|p| {
                let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
                Ok((name, load_problem(p)?))
            })
            .collect::<Result<_, CliError>>()?
    };
    let mut config = BenchConfig::new(a.algorithms.clone(), a.heuristics.clone());
    config.trials = a.trials;
    config.seed = a.seed;
    config.limits = SearchLimits { timeout: Some(Duration::from_secs_f64(a.timeout)), max_expansions: a.max_expansions };
    config.stiffness_only = a.stiffness_only;
    config.timing = !a.no_timing;
    config.smooth = !a.no_smooth;
    let rows = run_bench(&problems, &config);
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).map_err(|e| CliError::Csv(e.to_string()))?;
    match &a.out {
        Some(p) => write_file(p, &buf)?,
        None => std::io::stdout().write_all(&buf).map_err(io_err(Path::new("<stdout>")))?,
    }
    for s in summarize(&rows) {
        eprintln!(
            "{:<14} {:<10} {:>3}/{:<3} solved ({:5.1}%)  mean runtime {:.2}s",
            s.algorithm.name(),
            s.heuristic.name(),
            s.successes,
            s.trials,
            100.0 * s.success_rate,
            s.mean_runtime
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(problem: &Path, plan_path: &Path, format: ExportFormat, upto: Option<usize>, out: &Path) -> Result<ExitCode, CliError> {
    let problem = load_problem(problem)?;
    let plan = Plan::load(plan_path)?;
    let verdict = validate_plan(&problem, &plan);
    if !verdict.valid {
        eprintln!("plan does not validate against the problem\n{}", verdict.to_json());
        return Ok(ExitCode::from(1));
    }
    let mut order: Vec<ElementId> = plan.sequence.iter().map(|d| d.element).collect();
    if let Some(k) = upto {
        order.truncate(k);
    }
    match format {
        ExportFormat::Ply => {
            let mut buf = Vec::new();
            write_ply(&problem, &order, &mut buf).map_err(io_err(out))?;
            write_file(out, &buf)?;
        }
        ExportFormat::Json => write_file(out, scene_json(&problem, &order).as_bytes())?,
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    family: Option<Family>,
    size: &[usize],
    count: usize,
    suite_name: Option<&str>,
    seed: u64,
    out_dir: &Path,
    witness: bool,
) -> Result<ExitCode, CliError> {
    let problems = match (family, suite_name) {
        (_, Some(s)) => suite(s, seed)?,
        (Some(f), None) => generate_benchmark(&BenchmarkSpec { family: f, size: size.to_vec(), count, seed })?,
        (None, None) => return Err(CliError::Usage("pass --family or --suite".into())),
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for g in &problems {
        write_file(&out_dir.join(format!("{}.json", g.name)), g.problem.to_json().as_bytes())?;
        if witness {
            let ids: Vec<usize> = g.witness.iter().map(|e| e.0).collect();
            let text = serde_json::to_string(&ids).expect("witness serializes");
            write_file(&out_dir.join(format!("{}.witness.json", g.name)), text.as_bytes())?;
        }
        println!("{} ({} elements)", g.name, g.problem.num_elements());
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Plan(a) => cmd_plan(&a),
        Command::Validate { problem, plan, overrides } => cmd_validate(&problem, &plan, &overrides),
        Command::CheckStiffness { problem, elements, overrides } => {
            cmd_check_stiffness(&problem, elements.as_deref(), &overrides)
        }
        Command::Sequence { problem, out, timeout, overrides } => {
            cmd_sequence(&problem, out.as_deref(), timeout, &overrides)
        }
        Command::Bench(a) => cmd_bench(&a),
        Command::Export { problem, plan, format, upto, out } => cmd_export(&problem, &plan, format, upto, &out),
        Command::Generate { family, size, count, suite, seed, out_dir, witness } => {
            cmd_generate(family, &size, count, suite.as_deref(), seed, &out_dir, witness)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
