//! Command-line front end. Lengths are centimeters and angles degrees at
//! this boundary; the library itself works in meters and radians.
//!
//! Exit codes: 0 on success, 1 when the computation itself fails (solver,
//! IK, gradient check, every run failing), 2 for usage and input errors.

use crate::gradcheck;
use crate::hand::{ik_fingertips, HandError, HandModel, IkOptions};
use crate::pipeline::{
    experiment_presets, mean_std, run_scenario, summarize, write_csv, ErrorMetric, ExperimentGroup, Formulation, GroupSummary,
    PipelineError, ScenarioRun, Waypoint, PRESET_NAMES,
};
use crate::plant::PerturbationConfig;
use crate::scenario::{cylinder_grasp, default_ik_seed, Scenario, BUILTIN_HAND};
use crate::trajopt::{solve, solve_baseline, TrajProblem};
use clap::{Args, Parser, Subcommand};
use nalgebra::{DVector, Vector3};
use rayon::prelude::*;
use serde::Serialize;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "ingrasp", version, about = "Plan and simulate in-grasp object motions for multi-fingered hands")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one trajectory optimization and write the plan as JSON.
    Plan(PlanArgs),
    /// Run closed-loop executions on the simulated plant; writes CSV rows and a JSON summary.
    Run(RunArgs),
    /// Compare every analytical gradient with central differences.
    Gradcheck(GradcheckArgs),
    /// Solve fingertip inverse kinematics.
    Ik(IkArgs),
    /// List the built-in experiment presets.
    Presets,
}

#[derive(Debug, Args)]
pub struct OutDir {
    /// Output directory.
    #[arg(long, env = "INGRASP_OUT", default_value = "results")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Scenario file; the built-in competition scenario when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Waypoint index (0-based, as in the results CSV).
    #[arg(long, default_value_t = 0, conflicts_with = "offset_cm")]
    pub goal: usize,
    /// Explicit goal offset from the initial object position, `x,y,z` in cm.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub offset_cm: Option<Vec<f64>>,
    /// Use the rigid-thumb baseline formulation.
    #[arg(long)]
    pub baseline: bool,
    /// Override the horizon of the first plan.
    #[arg(long)]
    pub steps: Option<usize>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file; the built-in competition scenario when neither this nor a preset is given.
    #[arg(long, conflicts_with = "preset")]
    pub scenario: Option<PathBuf>,
    /// Built-in experiment preset (see `ingrasp presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Seeds to run, replacing the scenario's list. Repeatable or comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub seed: Vec<u64>,
    /// Worker threads for seed-parallel runs; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Override the replan budget of every run.
    #[arg(long)]
    pub replan_max: Option<usize>,
    /// Override the noise preset (`zero` or `paper_like`).
    #[arg(long)]
    pub noise_preset: Option<String>,
    /// Write zero in the wall-time column so that output files are reproducible byte for byte.
    #[arg(long)]
    pub no_wall_time: bool,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct IkArgs {
    /// Hand description file.
    #[arg(long, default_value = BUILTIN_HAND)]
    pub hand: String,
    /// Fingertip-center target `x,y,z` in cm, one per finger in finger order.
    #[arg(long = "target", required = true, allow_hyphen_values = true)]
    pub targets: Vec<String>,
    /// Initial joint vector in radians, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub seed_rad: Option<Vec<f64>>,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unreadable inputs.
    Input(String),
    /// The computation ran and failed.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Failure(format!("cannot write {}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    let r = match command {
        Command::Plan(a) => cmd_plan(&a, out),
        Command::Run(a) => cmd_run(&a, out),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out),
        Command::Ik(a) => cmd_ik(&a, out),
        Command::Presets => cmd_presets(out),
    };
    out.flush().map_err(|e| CliError::Failure(e.to_string()))?;
    r
}

fn load_scenario(path: &Option<PathBuf>) -> Result<Scenario, CliError> {
    match path {
        Some(p) => Scenario::load(p).map_err(input),
        None => Ok(Scenario::competition()),
    }
}

fn cm3(v: &Vector3<f64>) -> [f64; 3] {
    [v.x * 100.0, v.y * 100.0, v.z * 100.0]
}

fn deg3(v: &Vector3<f64>) -> [f64; 3] {
    [v.x.to_degrees(), v.y.to_degrees(), v.z.to_degrees()]
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Failure(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_failure(&path))?;
    Ok((path, BufWriter::new(file)))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
    let (path, mut w) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Failure(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_failure(&path))?;
    Ok(path)
}

#[derive(Serialize)]
struct PlanStep {
    step: usize,
    q_rad: Vec<f64>,
    object_position_cm: [f64; 3],
    object_rotation_deg: [f64; 3],
}

#[derive(Serialize)]
struct CostOut {
    object: f64,
    finger: f64,
    joint: f64,
    total: f64,
}

#[derive(Serialize)]
struct PlanOut {
    schema: &'static str,
    scenario_id: String,
    goal_idx: Option<usize>,
    formulation: Formulation,
    steps: usize,
    lambda: f64,
    goal_position_cm: [f64; 3],
    goal_rotation_deg: [f64; 3],
    planned_error_cm: f64,
    planned_rotation_error_deg: f64,
    grasp_drift_mm: f64,
    cost: CostOut,
    initial_cost: f64,
    iterations: usize,
    trajectory: Vec<PlanStep>,
}

fn cmd_plan(a: &PlanArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let sc = load_scenario(&a.scenario)?;
    let (goal, goal_idx) = match &a.offset_cm {
        Some(o) if o.len() != 3 => return Err(CliError::Input(format!("--offset-cm needs three values, got {}", o.len()))),
        Some(o) => (Waypoint::position(Vector3::new(o[0], o[1], o[2]) * 0.01).goal(&sc.grasp.object_pose0), None),
        None => {
            let g = sc.goal(a.goal).ok_or_else(|| {
                CliError::Input(format!("goal index {} out of range: scenario `{}` has {} waypoints", a.goal, sc.id, sc.waypoints.len()))
            })?;
            (g, Some(a.goal))
        }
    };
    let steps = a.steps.unwrap_or(sc.loop_cfg.first_steps);
    let params = sc.planner.params(steps, sc.planner.first_lambda);
    let prob = TrajProblem::new(sc.hand.clone(), sc.grasp.clone(), goal, &params).map_err(input)?;
    let formulation = if a.baseline { Formulation::Baseline } else { sc.planner.formulation };
    let sol = match formulation {
        Formulation::Proposed => solve(&prob, None),
        Formulation::Baseline => solve_baseline(&prob, None),
    }
    .map_err(|e| CliError::Failure(format!("planning failed: {e}")))?;
    let drift = sol.vars.grasp_drift(&prob.hand, &prob.grasp).map_err(|e| CliError::Failure(e.to_string()))?;

    let record = PlanOut {
        schema: "ingrasp-plan v1",
        scenario_id: sc.id.clone(),
        goal_idx,
        formulation,
        steps,
        lambda: params.lambda,
        goal_position_cm: cm3(&(goal.p - sc.grasp.object_pose0.p)),
        goal_rotation_deg: deg3(&goal.r.0),
        planned_error_cm: sol.planned_error * 100.0,
        planned_rotation_error_deg: sol.planned_rotation_error(&goal).to_degrees(),
        grasp_drift_mm: drift * 1e3,
        cost: CostOut { object: sol.cost.object, finger: sol.cost.finger, joint: sol.cost.joint, total: sol.cost.total() },
        initial_cost: sol.initial_cost,
        iterations: sol.stats.iterations,
        trajectory: (0..steps)
            .map(|t| {
                let pose = sol.vars.object_pose(t);
                PlanStep {
                    step: t + 1,
                    q_rad: sol.vars.q[t].iter().copied().collect(),
                    object_position_cm: cm3(&pose.p),
                    object_rotation_deg: deg3(&pose.r.0),
                }
            })
            .collect(),
    };
    let tag = goal_idx.map_or("offset".to_string(), |k| k.to_string());
    let path = write_json(&a.out.out_dir, &format!("plan_{}_{tag}.json", sc.id), &record)?;
    let w = |e: std::io::Error| CliError::Failure(e.to_string());
    writeln!(out, "scenario {} goal {tag} ({:?}, T = {steps})", sc.id, formulation).map_err(w)?;
    writeln!(out, "planned error {:.6} cm, rotation {:.4} deg", record.planned_error_cm, record.planned_rotation_error_deg).map_err(w)?;
    writeln!(
        out,
        "cost object {:.6e} finger {:.6e} joint {:.6e} total {:.6e}",
        record.cost.object, record.cost.finger, record.cost.joint, record.cost.total
    )
    .map_err(w)?;
    writeln!(out, "wrote {}", path.display()).map_err(w)?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryOut {
    label: String,
    runs: usize,
    failed_runs: usize,
    waypoints: usize,
    planned_mean_cm: f64,
    planned_std_cm: f64,
    open_loop_mean_cm: f64,
    open_loop_std_cm: f64,
    closed_loop_mean_cm: f64,
    closed_loop_std_cm: f64,
    closed_loop_rotation_mean_deg: f64,
    closed_loop_rotation_std_deg: f64,
    drop_rate: f64,
    mean_replans: f64,
    mean_cumulative_drift_mm: f64,
}

impl SummaryOut {
    fn new(s: GroupSummary, runs: &[Result<ScenarioRun, PipelineError>]) -> Self {
        let ok: Vec<&ScenarioRun> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
        let rot: Vec<f64> = ok.iter().flat_map(|r| r.results.iter().map(|w| w.closed_loop_rotation_error.to_degrees())).filter(|v| v.is_finite()).collect();
        let (rot_mean, rot_std) = mean_std(&rot);
        let drift = mean_std(&ok.iter().map(|r| r.cumulative_drift * 1e3).collect::<Vec<_>>()).0;
        Self {
            label: s.label,
            runs: s.runs,
            failed_runs: s.failed_runs,
            waypoints: s.waypoints,
            planned_mean_cm: s.planned_mean * 100.0,
            planned_std_cm: s.planned_std * 100.0,
            open_loop_mean_cm: s.open_loop_mean * 100.0,
            open_loop_std_cm: s.open_loop_std * 100.0,
            closed_loop_mean_cm: s.closed_loop_mean * 100.0,
            closed_loop_std_cm: s.closed_loop_std * 100.0,
            closed_loop_rotation_mean_deg: rot_mean,
            closed_loop_rotation_std_deg: rot_std,
            drop_rate: s.drop_rate,
            mean_replans: s.mean_replans,
            mean_cumulative_drift_mm: drift,
        }
    }
}

#[derive(Serialize)]
struct RunFailure {
    group: String,
    seed: u64,
    error: String,
}

#[derive(Serialize)]
struct RunSummary {
    schema: &'static str,
    name: String,
    seeds: Vec<u64>,
    groups: Vec<SummaryOut>,
    failures: Vec<RunFailure>,
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let noise_override = match &a.noise_preset {
        Some(n) => Some(PerturbationConfig::preset(n, 0).ok_or_else(|| CliError::Input(format!("unknown noise preset `{n}` (use zero or paper_like)")))?),
        None => None,
    };
    // One origin and grasp per invocation; presets use the shipped cylinder grasp.
    let (name, hand, grasp, mut groups, mut seeds) = match &a.preset {
        Some(p) => {
            let bundle = experiment_presets(p).map_err(|_| CliError::Input(format!("unknown preset `{p}`; available: {}", PRESET_NAMES.join(", "))))?;
            let hand = HandModel::synth_3x4();
            let grasp = cylinder_grasp(&hand).map_err(|e| CliError::Failure(e.to_string()))?;
            (bundle.name, hand, grasp, bundle.groups, bundle.seeds)
        }
        None => {
            let sc = load_scenario(&a.scenario)?;
            let group = ExperimentGroup { label: sc.id.clone(), waypoints: sc.waypoints, loop_cfg: sc.loop_cfg, planner: sc.planner, noise: sc.noise };
            (sc.id, sc.hand, sc.grasp, vec![group], sc.seeds)
        }
    };
    if !a.seed.is_empty() {
        seeds = a.seed.clone();
    }
    for g in &mut groups {
        if let Some(n) = a.replan_max {
            g.loop_cfg.n_replan = n;
        }
        if let Some(noise) = noise_override {
            g.noise = noise;
        }
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build().map_err(|e| CliError::Failure(e.to_string()))?;
    let results: Vec<Vec<Result<ScenarioRun, PipelineError>>> = pool.install(|| {
        groups
            .iter()
            .map(|g| {
                seeds
                    .par_iter()
                    .map(|&seed| run_scenario(&hand, &grasp, &g.waypoints, &g.loop_cfg, &g.planner, PerturbationConfig { seed, ..g.noise }))
                    .collect()
            })
            .collect()
    });

    let single = groups.len() == 1;
    let row_id = |label: &str| if single { label.to_string() } else { format!("{name}:{label}") };
    let mut rows: Vec<(String, &ScenarioRun)> = vec![];
    let mut failures = vec![];
    let mut summaries = vec![];
    for (g, runs) in groups.iter().zip(&results) {
        for (seed, r) in seeds.iter().zip(runs) {
            match r {
                Ok(run) => rows.push((row_id(&g.label), run)),
                Err(e) => failures.push(RunFailure { group: g.label.clone(), seed: *seed, error: e.to_string() }),
            }
        }
        summaries.push(SummaryOut::new(summarize(&g.label, runs), runs));
    }

    let (csv_path, mut w) = create(&a.out.out_dir, &format!("{name}.csv"))?;
    write_csv(&mut w, &rows, &grasp.object_pose0.p, !a.no_wall_time).and_then(|_| w.flush()).map_err(io_failure(&csv_path))?;
    let summary = RunSummary { schema: "ingrasp-summary v1", name: name.clone(), seeds: seeds.clone(), groups: summaries, failures };
    let json_path = write_json(&a.out.out_dir, &format!("{name}_summary.json"), &summary)?;

    let w = |e: std::io::Error| CliError::Failure(e.to_string());
    let full_pose = groups.iter().any(|g| g.loop_cfg.error_metric == ErrorMetric::FullPose);
    writeln!(out, "{name}: {} group(s) x {} seed(s)", groups.len(), seeds.len()).map_err(w)?;
    writeln!(
        out,
        "{:<22} {:>16} {:>16} {:>16} {:>6} {:>8}{}",
        "group",
        "planned [cm]",
        "open loop [cm]",
        "closed loop [cm]",
        "drops",
        "replans",
        if full_pose { "  rotation [deg]" } else { "" }
    )
    .map_err(w)?;
    for s in &summary.groups {
        let pm = |m: f64, s: f64| format!("{m:.3} ± {s:.3}");
        write!(
            out,
            "{:<22} {:>16} {:>16} {:>16} {:>6.2} {:>8.2}",
            s.label,
            pm(s.planned_mean_cm, s.planned_std_cm),
            pm(s.open_loop_mean_cm, s.open_loop_std_cm),
            pm(s.closed_loop_mean_cm, s.closed_loop_std_cm),
            s.drop_rate,
            s.mean_replans
        )
        .map_err(w)?;
        if full_pose {
            write!(out, "  {}", pm(s.closed_loop_rotation_mean_deg, s.closed_loop_rotation_std_deg)).map_err(w)?;
        }
        writeln!(out).map_err(w)?;
    }
    for f in &summary.failures {
        writeln!(out, "failed: {} seed {}: {}", f.group, f.seed, f.error).map_err(w)?;
    }
    writeln!(out, "wrote {} and {}", csv_path.display(), json_path.display()).map_err(w)?;

    if rows.is_empty() {
        return Err(CliError::Failure("every run failed".into()));
    }
    Ok(())
}

fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.tolerance > 0.0) {
        return Err(CliError::Input("tolerance must be positive".into()));
    }
    if a.trials == 0 {
        eprintln!("warning: zero trials requested; nothing was checked");
    }
    let report = gradcheck::run(a.trials, a.tolerance, a.seed);
    let w = |e: std::io::Error| CliError::Failure(e.to_string());
    writeln!(out, "{} trial(s), tolerance {:.1e}, seed {}", report.trials, report.tolerance, report.seed).map_err(w)?;
    for c in &report.checks {
        let status = if c.worst <= report.tolerance { "ok" } else { "FAIL" };
        writeln!(out, "{:<10} worst rel. err {:.3e} (trial {}, {} evaluations) {status}", c.name, c.worst, c.worst_trial, c.evaluations).map_err(w)?;
    }
    writeln!(out, "max rel. err {:.3e}", report.max_error()).map_err(w)?;
    if report.passed() {
        writeln!(out, "PASS").map_err(w)?;
        Ok(())
    } else {
        let worst = report.worst().expect("a failing report has checks");
        writeln!(out, "FAIL").map_err(w)?;
        Err(CliError::Failure(format!("gradient check failed: {} at trial {} with relative error {:.3e}", worst.name, worst.worst_trial, worst.worst)))
    }
}

fn parse_target(s: &str) -> Result<Vector3<f64>, CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || CliError::Input(format!("target `{s}` must be three comma-separated numbers in cm"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut v = Vector3::zeros();
    for (k, p) in parts.iter().enumerate() {
        v[k] = p.parse::<f64>().map_err(|_| bad())?;
    }
    Ok(v * 0.01)
}

fn load_hand(spec: &str) -> Result<HandModel, CliError> {
    if spec == BUILTIN_HAND {
        Ok(HandModel::synth_3x4())
    } else {
        HandModel::from_file(spec).map_err(input)
    }
}

fn cmd_ik(a: &IkArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let hand = load_hand(&a.hand)?;
    let targets = a.targets.iter().map(|t| parse_target(t)).collect::<Result<Vec<_>, _>>()?;
    if targets.len() != hand.num_fingers() {
        return Err(CliError::Input(format!("got {} targets, the hand has {} fingers", targets.len(), hand.num_fingers())));
    }
    let seed = match &a.seed_rad {
        Some(s) if s.len() != hand.dof() => return Err(CliError::Input(format!("seed has {} entries, the hand has {} joints", s.len(), hand.dof()))),
        Some(s) => DVector::from_column_slice(s),
        None => default_ik_seed(&hand),
    };
    let w = |e: std::io::Error| CliError::Failure(e.to_string());
    let (q, residuals, converged) = match ik_fingertips(&hand, &targets, &seed, &IkOptions::default()) {
        Ok(sol) => (sol.q, sol.residuals, true),
        Err(HandError::IkNotConverged { residuals, q, .. }) => (q, residuals, false),
        Err(e) => return Err(input(e)),
    };
    // `+ 0.0` folds negative zero.
    let joined: Vec<String> = q.iter().map(|v| format!("{:.9}", v + 0.0)).collect();
    writeln!(out, "q_rad {}", joined.join(",")).map_err(w)?;
    for (f, r) in residuals.iter().enumerate() {
        writeln!(out, "finger {f} residual {:.6} mm", r * 1e3).map_err(w)?;
    }
    if converged {
        Ok(())
    } else {
        let worst = residuals.iter().copied().fold(0.0, f64::max);
        Err(CliError::Failure(format!("IK did not converge: max residual {:.3} mm", worst * 1e3)))
    }
}

fn cmd_presets(out: &mut dyn Write) -> Result<(), CliError> {
    let w = |e: std::io::Error| CliError::Failure(e.to_string());
    for name in PRESET_NAMES {
        let b = experiment_presets(name).expect("listed presets exist");
        let labels: Vec<&str> = b.groups.iter().map(|g| g.label.as_str()).collect();
        writeln!(out, "{name}: {} goals x {} seeds; groups {}", b.num_goals(), b.seeds.len(), labels.join(", ")).map_err(w)?;
    }
    Ok(())
}

