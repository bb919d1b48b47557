//! Closed-loop execution: plan, execute, sense, replan.
//!
//! Each waypoint gets one plan with the long horizon, followed by short
//! replans from the sensed state until the sensed error drops below the
//! error the latest plan promised, the replan budget is spent or the time
//! budget runs out. Between waypoints the hand can retrace its forward
//! trajectory back to the grasp configuration.

use crate::hand::{make_grasp, GraspState, HandError, HandModel};
use crate::plant::{reset, PerturbationConfig, PlantError, PlantState};
use crate::se3::{exp_so3, spatial_error, Pose, RotVec, WeightMatrix};
use crate::trajopt::{default_initialization, solve, solve_baseline, TrajError, TrajParams, TrajProblem, TrajSolution, TrajVariables};
use nalgebra::{DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("object dropped while reaching waypoint")]
    DroppedObject(Box<WaypointResult>),
    #[error("planning failed twice: {reason}")]
    PlanFailed { reason: String, partial: Box<WaypointResult> },
    #[error("unknown experiment preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Hand(#[from] HandError),
    #[error(transparent)]
    Traj(#[from] TrajError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    /// Distance between object positions.
    #[default]
    Position,
    /// Position distance and rotation angle must both beat the plan.
    FullPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    #[default]
    Proposed,
    /// Joint-only optimization with the object rigidly attached to the thumb.
    Baseline,
}

/// Replanning loop settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub n_replan: usize,
    /// Wall-clock seconds per waypoint, solves included.
    pub time_budget: f64,
    pub first_steps: usize,
    pub replan_steps: usize,
    pub return_to_initial: bool,
    pub error_metric: ErrorMetric,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            n_replan: 4,
            time_budget: 20.0,
            first_steps: 3,
            replan_steps: 1,
            return_to_initial: true,
            error_metric: ErrorMetric::Position,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.time_budget > 0.0) || self.first_steps == 0 || self.replan_steps == 0 {
            return Err(PipelineError::InvalidConfig("budgets and horizons must be positive".into()));
        }
        Ok(())
    }
}

/// Optimizer settings shared by every plan in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub formulation: Formulation,
    pub first_lambda: f64,
    pub replan_lambda: f64,
    pub object_weights: WeightMatrix,
    pub finger_weights: WeightMatrix,
    pub collision_enabled: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let first = TrajParams::paper_first_plan();
        Self {
            formulation: Formulation::Proposed,
            first_lambda: first.lambda,
            replan_lambda: TrajParams::paper_replan().lambda,
            object_weights: first.w_o,
            finger_weights: first.w_f,
            collision_enabled: first.collision_enabled,
        }
    }
}

impl PlannerConfig {
    /// Defaults with orientation-weighted object cost, for pose goals.
    pub fn pose_goals() -> Self {
        Self { object_weights: TrajParams::pose_goal_object_weights(), ..Self::default() }
    }

    pub fn baseline() -> Self {
        Self { formulation: Formulation::Baseline, ..Self::default() }
    }

    /// Optimizer parameters for a plan with the given horizon and penalty.
    pub fn params(&self, steps: usize, lambda: f64) -> TrajParams {
        TrajParams {
            steps,
            lambda,
            w_o: self.object_weights,
            w_f: self.finger_weights,
            collision_enabled: self.collision_enabled,
        }
    }
}

/// A goal given relative to the initial object pose: a world-frame
/// translation and an optional world-frame rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub offset: Vector3<f64>,
    pub rotation: Option<RotVec>,
}

impl Waypoint {
    pub fn position(offset: Vector3<f64>) -> Self {
        Self { offset, rotation: None }
    }

    pub fn pose(offset: Vector3<f64>, rotation: RotVec) -> Self {
        Self { offset, rotation: Some(rotation) }
    }

    /// Absolute goal for an object that started at `initial`.
    pub fn goal(&self, initial: &Pose) -> Pose {
        let rot = match self.rotation {
            Some(r) => exp_so3(&r) * initial.rotation(),
            None => initial.rotation(),
        };
        Pose::from_parts(initial.p + self.offset, &rot)
    }
}

/// Outcome of one waypoint. Errors are ground truth, in meters and radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaypointResult {
    pub goal: Pose,
    pub planned_error: f64,
    pub open_loop_error: f64,
    pub closed_loop_error: f64,
    pub open_loop_rotation_error: f64,
    pub closed_loop_rotation_error: f64,
    pub replans_used: usize,
    pub dropped: bool,
    pub plan_failed: bool,
    pub wall_time: f64,
}

impl WaypointResult {
    fn empty(goal: Pose) -> Self {
        Self {
            goal,
            planned_error: f64::NAN,
            open_loop_error: f64::NAN,
            closed_loop_error: f64::NAN,
            open_loop_rotation_error: f64::NAN,
            closed_loop_rotation_error: f64::NAN,
            replans_used: 0,
            dropped: false,
            plan_failed: false,
            wall_time: 0.0,
        }
    }
}

fn errors(pose: &Pose, goal: &Pose) -> (f64, f64) {
    let e = spatial_error(pose, goal);
    (e.pos.norm(), e.rot.norm())
}

/// Planning grasp at the plant's current measured joints and sensed pose.
fn current_grasp(plant: &PlantState, sensed: &Pose) -> Result<GraspState, HandError> {
    make_grasp(&plant.hand, &plant.q_true, sensed, 0.0)
}

fn plan_once(prob: &TrajProblem, formulation: Formulation, seed: Option<&TrajVariables>) -> Result<TrajSolution, TrajError> {
    match formulation {
        Formulation::Proposed => solve(prob, seed),
        Formulation::Baseline => solve_baseline(prob, seed),
    }
}

/// Plans from the default start; on failure retries once from a jittered
/// copy of it.
fn plan(prob: &TrajProblem, formulation: Formulation, rng: &mut ChaCha8Rng) -> Result<TrajSolution, TrajError> {
    match plan_once(prob, formulation, None) {
        Ok(s) => Ok(s),
        Err(_) => {
            let mut seed = default_initialization(prob);
            let jitter = Normal::new(0.0, 1e-3).expect("valid std");
            for xi in &mut seed.xi_o {
                for v in xi.iter_mut() {
                    *v += jitter.sample(rng);
                }
            }
            plan_once(prob, formulation, Some(&seed))
        }
    }
}

/// Drives the object toward `goal`. The executed joint commands are
/// appended to `commands`.
pub fn reach_waypoint(
    plant: &mut PlantState,
    goal: &Pose,
    loop_cfg: &LoopConfig,
    planner: &PlannerConfig,
    rng: &mut ChaCha8Rng,
    commands: &mut Vec<DVector<f64>>,
) -> Result<WaypointResult, PipelineError> {
    loop_cfg.validate()?;
    if plant.dropped {
        return Err(PlantError::DroppedObject { residual: f64::NAN }.into());
    }
    let clock = Instant::now();
    let mut result = WaypointResult::empty(*goal);
    let mut sensed = plant.sense();
    let truth = |plant: &PlantState| errors(&plant.object_pose_true, goal);
    (result.closed_loop_error, result.closed_loop_rotation_error) = truth(plant);

    let mut replans = 0;
    let mut latest_plan: Option<(f64, f64)> = None;
    loop {
        let first = latest_plan.is_none();
        let params = if first {
            planner.params(loop_cfg.first_steps, planner.first_lambda)
        } else {
            planner.params(loop_cfg.replan_steps, planner.replan_lambda)
        };
        let grasp = current_grasp(plant, &sensed)?;
        let prob = TrajProblem::new(plant.hand.clone(), grasp, *goal, &params)?;
        let sol = match plan(&prob, planner.formulation, rng) {
            Ok(s) => s,
            Err(e) => {
                result.plan_failed = true;
                result.wall_time = clock.elapsed().as_secs_f64();
                if first {
                    result.open_loop_error = result.closed_loop_error;
                    result.open_loop_rotation_error = result.closed_loop_rotation_error;
                }
                return Err(PipelineError::PlanFailed { reason: e.to_string(), partial: Box::new(result) });
            }
        };
        let planned = (sol.planned_error, sol.planned_rotation_error(goal));
        if first {
            result.planned_error = planned.0;
        }
        latest_plan = Some(planned);

        for q in &sol.vars.q {
            match plant.execute_step(q) {
                Ok(report) => {
                    sensed = report.sensed;
                    commands.push(q.clone());
                }
                Err(PlantError::DroppedObject { .. }) => {
                    result.dropped = true;
                    result.replans_used = replans;
                    (result.closed_loop_error, result.closed_loop_rotation_error) = errors(&sensed, goal);
                    if first {
                        result.open_loop_error = result.closed_loop_error;
                        result.open_loop_rotation_error = result.closed_loop_rotation_error;
                    }
                    result.wall_time = clock.elapsed().as_secs_f64();
                    return Err(PipelineError::DroppedObject(Box::new(result)));
                }
                Err(e) => return Err(e.into()),
            }
        }
        (result.closed_loop_error, result.closed_loop_rotation_error) = truth(plant);
        if first {
            result.open_loop_error = result.closed_loop_error;
            result.open_loop_rotation_error = result.closed_loop_rotation_error;
        }

        let (pos, rot) = errors(&sensed, goal);
        let (plan_pos, plan_rot) = latest_plan.expect("set above");
        let beat_plan = match loop_cfg.error_metric {
            ErrorMetric::Position => pos < plan_pos.max(1e-6),
            ErrorMetric::FullPose => pos < plan_pos.max(1e-6) && rot < plan_rot.max(1e-6),
        };
        if beat_plan || replans >= loop_cfg.n_replan || clock.elapsed().as_secs_f64() > loop_cfg.time_budget {
            break;
        }
        replans += 1;
    }
    result.replans_used = replans;
    result.wall_time = clock.elapsed().as_secs_f64();
    Ok(result)
}

/// All results of one seeded run over a waypoint list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub seed: u64,
    pub results: Vec<WaypointResult>,
    /// Index of the waypoint during which the object fell.
    pub dropped_at: Option<usize>,
    /// Plant-internal contact creep accumulated over the run (m).
    pub cumulative_drift: f64,
    pub executed_steps: usize,
}

/// Runs the waypoints in order from the grasp. Waypoint offsets are
/// relative to the initial object pose. After a drop the remaining
/// waypoints are scored against the last sensed pose.
pub fn run_scenario(
    hand: &HandModel,
    grasp: &GraspState,
    waypoints: &[Waypoint],
    loop_cfg: &LoopConfig,
    planner: &PlannerConfig,
    noise: PerturbationConfig,
) -> Result<ScenarioRun, PipelineError> {
    loop_cfg.validate()?;
    let mut plant = reset(hand, grasp, noise)?;
    // Independent stream for planner restarts so the plant's noise does not
    // depend on how often the solver failed.
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed ^ 0x9e37_79b9_7f4a_7c15);
    let initial = grasp.object_pose0;
    let mut results = Vec::with_capacity(waypoints.len());
    let mut dropped_at = None;
    let mut last_sensed = plant.sense();

    for (k, wp) in waypoints.iter().enumerate() {
        let goal = wp.goal(&initial);
        if dropped_at.is_some() {
            let mut r = WaypointResult::empty(goal);
            let (pos, rot) = errors(&last_sensed, &goal);
            (r.open_loop_error, r.closed_loop_error) = (pos, pos);
            (r.open_loop_rotation_error, r.closed_loop_rotation_error) = (rot, rot);
            r.dropped = true;
            results.push(r);
            continue;
        }
        // With returns every waypoint starts from the grasp configuration.
        let start = if loop_cfg.return_to_initial { grasp.q0.clone() } else { plant.q_true.clone() };
        let mut commands = vec![start];
        let outcome = reach_waypoint(&mut plant, &goal, loop_cfg, planner, &mut rng, &mut commands);
        match outcome {
            Ok(r) => results.push(r),
            Err(PipelineError::PlanFailed { partial, .. }) => results.push(*partial),
            Err(PipelineError::DroppedObject(partial)) => {
                results.push(*partial);
                dropped_at = Some(k);
                continue;
            }
            Err(e) => return Err(e),
        }
        last_sensed = plant.sense();
        if loop_cfg.return_to_initial && k + 1 < waypoints.len() {
            // Retrace the forward commands back to the grasp configuration.
            for q in commands.iter().rev().skip(1) {
                if plant.execute_step(q).is_err() {
                    dropped_at = Some(k + 1);
                    break;
                }
            }
            if dropped_at.is_none() {
                last_sensed = plant.sense();
            }
        }
    }
    Ok(ScenarioRun {
        seed: noise.seed,
        results,
        dropped_at,
        cumulative_drift: plant.cumulative_drift,
        executed_steps: plant.steps,
    })
}

/// The eight corners of an axis-aligned cube of the given side, centered
/// on the initial object position.
pub fn cube_corners(side: f64) -> Vec<Waypoint> {
    let h = 0.5 * side;
    (0..8)
        .map(|k| {
            let s = |bit: usize| if k & bit == 0 { h } else { -h };
            Waypoint::position(Vector3::new(s(1), s(2), s(4)))
        })
        .collect()
}

/// Waypoints of the competition task (meters, relative to the start).
pub fn competition_waypoints() -> Vec<Waypoint> {
    [
        [2.5, 2.5, 0.0],
        [2.5, 2.5, 2.5],
        [-2.5, -2.5, -2.5],
        [-1.3, -2.0, 0.6],
        [-1.2, 0.7, 0.6],
        [0.6, 0.4, 0.2],
        [0.9, -1.2, -1.3],
        [-2.0, 2.0, 2.0],
        [0.0, 0.0, 2.0],
        [0.0, 0.0, 0.0],
    ]
    .iter()
    .map(|c| Waypoint::position(Vector3::from(*c) * 0.01))
    .collect()
}

/// Position-plus-orientation goals: centimeters and a rotation vector in
/// degrees.
pub fn pose_goal_waypoints() -> Vec<Waypoint> {
    [([0.0, -1.0, -1.0], [0.0, 20.0, 0.0]), ([-2.0, 0.0, 0.0], [30.0, 0.0, 0.0]), ([0.0, 0.0, 2.0], [0.0, 0.0, 40.0])]
        .iter()
        .map(|(t, r)| Waypoint::pose(Vector3::from(*t) * 0.01, RotVec(Vector3::from(*r).map(f64::to_radians))))
        .collect()
}

/// One cell of an experiment: a waypoint list run under fixed settings for
/// every seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentGroup {
    pub label: String,
    pub waypoints: Vec<Waypoint>,
    pub loop_cfg: LoopConfig,
    pub planner: PlannerConfig,
    pub noise: PerturbationConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentBundle {
    pub name: String,
    pub groups: Vec<ExperimentGroup>,
    pub seeds: Vec<u64>,
}

impl ExperimentBundle {
    pub fn num_goals(&self) -> usize {
        self.groups.iter().map(|g| g.waypoints.len()).sum()
    }
}

pub const PRESET_NAMES: [&str; 5] = ["traj_steps_study", "replan_study", "baseline_compare", "reachable_space", "pose_goals"];

fn repeated(wps: &[Waypoint], times: usize) -> Vec<Waypoint> {
    (0..times).flat_map(|_| wps.iter().copied()).collect()
}

/// Named experiment set.
///
/// * `traj_steps_study`: open-loop runs over 5 cm cube corners with first
///   horizons 1, 3, 5 and 10.
/// * `replan_study`: 5 cm cube corners, five passes, replan budgets 0, 1, 4
///   and 8.
/// * `baseline_compare`: proposed and baseline planners on 3 cm and 5 cm
///   cubes.
/// * `reachable_space`: cubes of side 1 to 9 cm, five passes each.
/// * `pose_goals`: the three position-and-orientation goals.
pub fn experiment_presets(name: &str) -> Result<ExperimentBundle, PipelineError> {
    let seeds: Vec<u64> = (0..5).collect();
    let noise = PerturbationConfig::paper_like(0);
    let group = |label: String, waypoints: Vec<Waypoint>, loop_cfg: LoopConfig, planner: PlannerConfig| ExperimentGroup {
        label,
        waypoints,
        loop_cfg,
        planner,
        noise,
    };
    let groups = match name {
        "traj_steps_study" => [1, 3, 5, 10]
            .iter()
            .map(|&t| {
                let cfg = LoopConfig { n_replan: 0, first_steps: t, ..LoopConfig::default() };
                group(format!("T={t}"), cube_corners(0.05), cfg, PlannerConfig::default())
            })
            .collect(),
        "replan_study" => [0, 1, 4, 8]
            .iter()
            .map(|&n| {
                let cfg = LoopConfig { n_replan: n, ..LoopConfig::default() };
                group(format!("N_replan={n}"), repeated(&cube_corners(0.05), 5), cfg, PlannerConfig::default())
            })
            .collect(),
        "baseline_compare" => {
            let mut out = vec![];
            for side_cm in [3, 5] {
                let corners = cube_corners(side_cm as f64 * 0.01);
                out.push(group(format!("proposed/{side_cm}cm"), corners.clone(), LoopConfig::default(), PlannerConfig::default()));
                out.push(group(format!("baseline/{side_cm}cm"), corners, LoopConfig::default(), PlannerConfig::baseline()));
            }
            out
        }
        "reachable_space" => [1, 3, 5, 7, 9]
            .iter()
            .map(|&side_cm| {
                let wps = repeated(&cube_corners(side_cm as f64 * 0.01), 5);
                group(format!("side={side_cm}cm"), wps, LoopConfig::default(), PlannerConfig::default())
            })
            .collect(),
        "pose_goals" => {
            let cfg = LoopConfig { error_metric: ErrorMetric::FullPose, ..LoopConfig::default() };
            vec![group("pose_goals".into(), pose_goal_waypoints(), cfg, PlannerConfig::pose_goals())]
        }
        other => return Err(PipelineError::UnknownPreset(other.to_string())),
    };
    Ok(ExperimentBundle { name: name.to_string(), groups, seeds })
}

/// Runs one group for every seed, in parallel over seeds.
pub fn run_group(hand: &HandModel, grasp: &GraspState, group: &ExperimentGroup, seeds: &[u64]) -> Vec<Result<ScenarioRun, PipelineError>> {
    use rayon::prelude::*;
    seeds
        .par_iter()
        .map(|&seed| {
            let noise = PerturbationConfig { seed, ..group.noise };
            run_scenario(hand, grasp, &group.waypoints, &group.loop_cfg, &group.planner, noise)
        })
        .collect()
}

/// Mean and sample standard deviation; `(NaN, NaN)` for no samples.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Aggregate statistics of one group over all seeds (meters).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub runs: usize,
    pub failed_runs: usize,
    pub waypoints: usize,
    pub planned_mean: f64,
    pub planned_std: f64,
    pub open_loop_mean: f64,
    pub open_loop_std: f64,
    pub closed_loop_mean: f64,
    pub closed_loop_std: f64,
    pub drop_rate: f64,
    pub mean_replans: f64,
}

pub fn summarize(label: &str, runs: &[Result<ScenarioRun, PipelineError>]) -> GroupSummary {
    let ok: Vec<&ScenarioRun> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let rows: Vec<&WaypointResult> = ok.iter().flat_map(|r| r.results.iter()).collect();
    let finite = |f: fn(&WaypointResult) -> f64| rows.iter().map(|r| f(r)).filter(|v| v.is_finite()).collect::<Vec<_>>();
    let (planned_mean, planned_std) = mean_std(&finite(|r| r.planned_error));
    let (open_loop_mean, open_loop_std) = mean_std(&finite(|r| r.open_loop_error));
    let (closed_loop_mean, closed_loop_std) = mean_std(&finite(|r| r.closed_loop_error));
    let drops = ok.iter().filter(|r| r.dropped_at.is_some()).count();
    GroupSummary {
        label: label.to_string(),
        runs: runs.len(),
        failed_runs: runs.len() - ok.len(),
        waypoints: rows.len(),
        planned_mean,
        planned_std,
        open_loop_mean,
        open_loop_std,
        closed_loop_mean,
        closed_loop_std,
        drop_rate: if ok.is_empty() { f64::NAN } else { drops as f64 / ok.len() as f64 },
        mean_replans: mean_std(&rows.iter().map(|r| r.replans_used as f64).collect::<Vec<_>>()).0,
    }
}

/// First line of every results CSV.
pub const CSV_SCHEMA: &str = "# ingrasp-results v1";

pub const CSV_COLUMNS: [&str; 12] = [
    "scenario_id",
    "seed",
    "waypoint_idx",
    "goal_x_cm",
    "goal_y_cm",
    "goal_z_cm",
    "planned_err_cm",
    "open_loop_err_cm",
    "closed_loop_err_cm",
    "replans",
    "dropped",
    "wall_time_s",
];

/// Writes waypoint rows. Goal coordinates are relative to `origin`. With
/// `wall_time` off the timing column is zeroed so that output depends only
/// on the inputs.
pub fn write_csv<W: std::io::Write>(
    mut out: W,
    rows: &[(String, &ScenarioRun)],
    origin: &Vector3<f64>,
    wall_time: bool,
) -> std::io::Result<()> {
    writeln!(out, "{CSV_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    let cm = |v: f64| format!("{:.6}", v * 100.0);
    for (id, run) in rows {
        for (k, r) in run.results.iter().enumerate() {
            let g = r.goal.p - origin;
            w.write_record([
                id.clone(),
                run.seed.to_string(),
                k.to_string(),
                cm(g.x),
                cm(g.y),
                cm(g.z),
                cm(r.planned_error),
                cm(r.open_loop_error),
                cm(r.closed_loop_error),
                r.replans_used.to_string(),
                r.dropped.to_string(),
                if wall_time { format!("{:.6}", r.wall_time) } else { "0".into() },
            ])?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_has_eight_distinct_corners() {
        let c = cube_corners(0.05);
        assert_eq!(c.len(), 8);
        for (i, a) in c.iter().enumerate() {
            assert!(a.offset.iter().all(|v| (v.abs() - 0.025).abs() < 1e-15));
            for b in &c[i + 1..] {
                assert!((a.offset - b.offset).norm() > 0.0);
            }
        }
    }

    #[test]
    fn preset_sizes() {
        assert_eq!(experiment_presets("reachable_space").unwrap().num_goals(), 200);
        assert_eq!(experiment_presets("replan_study").unwrap().groups.len(), 4);
        assert_eq!(experiment_presets("traj_steps_study").unwrap().groups.len(), 4);
        assert_eq!(experiment_presets("baseline_compare").unwrap().groups.len(), 4);
        let pose = experiment_presets("pose_goals").unwrap();
        let g3 = pose.groups[0].waypoints[2];
        assert!((g3.offset - Vector3::new(0.0, 0.0, 0.02)).norm() < 1e-15);
        assert!((g3.rotation.unwrap().0 - Vector3::new(0.0, 0.0, 40f64.to_radians())).norm() < 1e-15);
        assert!(matches!(experiment_presets("nope"), Err(PipelineError::UnknownPreset(_))));
    }

    #[test]
    fn competition_list_matches_the_task() {
        let w = competition_waypoints();
        assert_eq!(w.len(), 10);
        assert!((w[2].offset - Vector3::new(-0.025, -0.025, -0.025)).norm() < 1e-15);
        assert_eq!(w[9].offset, Vector3::zeros());
    }

    #[test]
    fn waypoint_goal_applies_rotation_in_world() {
        let initial = Pose::new(Vector3::new(0.1, 0.0, 0.0), RotVec::new(0.0, 0.0, 0.3));
        let wp = Waypoint::pose(Vector3::new(0.0, 0.01, 0.0), RotVec::new(0.0, 0.0, 0.2));
        let g = wp.goal(&initial);
        assert!((g.r.0 - Vector3::new(0.0, 0.0, 0.5)).norm() < 1e-12);
        assert!((g.p - Vector3::new(0.1, 0.01, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn mean_std_basics() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert!(mean_std(&[]).0.is_nan());
    }
}
