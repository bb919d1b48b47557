//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Every check runs even after an earlier failure.

use ingrasp::gradcheck;
use ingrasp::hand::HandModel;
use ingrasp::pipeline::{
    cube_corners, experiment_presets, run_group, run_scenario, summarize, ExperimentBundle, ExperimentGroup, GroupSummary,
    PipelineError, ScenarioRun,
};
use ingrasp::plant::{register_rigid, PerturbationConfig};
use ingrasp::scenario::{cylinder_grasp, Scenario};
use ingrasp::se3::{exp_so3, left_jacobian, left_jacobian_inv, log_so3, pose_distance, Pose, RotVec, WeightMatrix};
use ingrasp::trajopt::{solve, solve_baseline, TrajParams, TrajProblem};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

type Outcome = Result<String, String>;

struct Fixture {
    hand: HandModel,
    grasp: ingrasp::hand::GraspState,
}

impl Fixture {
    fn new() -> Self {
        let hand = HandModel::synth_3x4();
        let grasp = cylinder_grasp(&hand).expect("shipped grasp is reachable");
        Self { hand, grasp }
    }

    fn offset_goal(&self, offset: Vector3<f64>) -> Pose {
        Pose::new(self.grasp.object_pose0.p + offset, self.grasp.object_pose0.r)
    }

    fn problem(&self, goal: Pose, params: &TrajParams) -> TrajProblem {
        TrajProblem::new(self.hand.clone(), self.grasp.clone(), goal, params).expect("valid problem")
    }

    fn run(&self, group: &ExperimentGroup, seeds: &[u64]) -> (GroupSummary, Vec<Result<ScenarioRun, PipelineError>>) {
        let runs = run_group(&self.hand, &self.grasp, group, seeds);
        (summarize(&group.label, &runs), runs)
    }
}

fn preset(name: &str) -> ExperimentBundle {
    experiment_presets(name).expect("known preset")
}

fn mm(v: f64) -> String {
    format!("{:.2} mm", v * 1e3)
}

fn random_rotvec(rng: &mut ChaCha8Rng, max_angle: f64) -> RotVec {
    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
    RotVec(axis * rng.gen_range(0.0..max_angle))
}

fn random_point(rng: &mut ChaCha8Rng, half: f64) -> Vector3<f64> {
    Vector3::new(rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(-half..half))
}

fn gradient_suite(_: &Fixture) -> Outcome {
    let clock = Instant::now();
    let report = gradcheck::run(200, 1e-5, 2024);
    let elapsed = clock.elapsed().as_secs_f64();
    let detail = format!("max rel. err {:.2e} over {} instances in {elapsed:.1} s", report.max_error(), report.trials);
    let all_checked = report.checks.iter().all(|c| c.evaluations > 0);
    if report.passed() && elapsed < 60.0 && all_checked {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lie_identities(_: &Fixture) -> Outcome {
    let (mut round, mut jac, mut bch, mut fixed, mut sym) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_rotvec(&mut rng, 3.0);
        round = round.max((log_so3(&exp_so3(&r)).expect("rotation").0 - r.0).norm());
        jac = jac.max((left_jacobian(&r) * left_jacobian_inv(&r) - Matrix3::identity()).norm());
        // log(exp(φ) exp(r)) against its first-order expansion r + J_l⁻¹ φ.
        let phi = random_rotvec(&mut rng, 1.0).0.normalize() * 1e-5;
        let composed = log_so3(&(exp_so3(&RotVec(phi)) * exp_so3(&r))).expect("rotation");
        bch = bch.max((composed.0 - (r.0 + left_jacobian_inv(&r) * phi)).norm());
        fixed = fixed.max((r.0.transpose() * left_jacobian_inv(&r) - r.0.transpose()).norm());
        let a = Pose::new(random_point(&mut rng, 0.1), random_rotvec(&mut rng, 3.0));
        let b = Pose::new(random_point(&mut rng, 0.1), random_rotvec(&mut rng, 3.0));
        let w = WeightMatrix::new(
            [rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)],
            [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)],
        );
        sym = sym.max((pose_distance(&a, &b, &w).0 - pose_distance(&b, &a, &w).0).abs());
    }
    let detail = format!("round trip {round:.1e}, J_l J_l^-1 {jac:.1e}, BCH {bch:.1e}, r^T J_l^-1 {fixed:.1e}, symmetry {sym:.1e}");
    if round < 1e-9 && jac < 1e-10 && bch < 1e-8 && fixed < 1e-10 && sym < 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn registration(_: &Fixture) -> Outcome {
    let (mut worst, mut det_err, mut count) = (0.0f64, 0.0f64, 0);
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src: Vec<Vector3<f64>> = (0..3).map(|_| random_point(&mut rng, 0.05)).collect();
        if (src[1] - src[0]).cross(&(src[2] - src[0])).norm() < 1e-4 {
            continue;
        }
        let g = Pose::new(random_point(&mut rng, 0.2), random_rotvec(&mut rng, 3.1));
        let dst: Vec<Vector3<f64>> = src.iter().map(|p| g.transform_point(p)).collect();
        let fit = register_rigid(&src, &dst).map_err(|e| format!("seed {seed}: {e}"))?;
        worst = worst.max((fit.p - g.p).norm()).max((fit.rotation() - g.rotation()).norm());
        det_err = det_err.max((fit.rotation().determinant() - 1.0).abs());
        count += 1;
    }
    let detail = format!("{count} triangles, worst transform error {worst:.1e}, |det - 1| {det_err:.1e}");
    if worst < 1e-10 && det_err < 1e-12 && count > 900 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn zero_displacement(f: &Fixture) -> Outcome {
    let prob = f.problem(f.grasp.object_pose0, &TrajParams::paper_first_plan());
    let clock = Instant::now();
    let sol = solve(&prob, None).map_err(|e| e.to_string())?;
    let elapsed = clock.elapsed().as_secs_f64();
    let detail = format!("planned error {:.1e} m in {elapsed:.3} s", sol.planned_error);
    if sol.planned_error < 1e-6 && elapsed < 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn planner_quality(f: &Fixture) -> Outcome {
    let (mut err, mut drift) = (0.0f64, 0.0f64);
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut offset = Vector3::zeros();
            offset[axis] = 0.01 * sign;
            let prob = f.problem(f.offset_goal(offset), &TrajParams::paper_first_plan());
            let sol = solve(&prob, None).map_err(|e| e.to_string())?;
            err = err.max(sol.planned_error);
            drift = drift.max(sol.vars.grasp_drift(&prob.hand, &prob.grasp).map_err(|e| e.to_string())?);
        }
    }
    let detail = format!("worst planned error {}, worst fingertip drift {}", mm(err), mm(drift));
    if err < 1e-3 && drift < 2e-3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn baseline_dominance(f: &Fixture) -> Outcome {
    let mut parts = vec![];
    let mut ok = true;
    for side in [0.03, 0.05] {
        let (mut ours, mut base) = (0.0, 0.0);
        for w in cube_corners(side) {
            let prob = f.problem(w.goal(&f.grasp.object_pose0), &TrajParams::paper_first_plan());
            ours += solve(&prob, None).map_err(|e| e.to_string())?.planned_error / 8.0;
            base += solve_baseline(&prob, None).map_err(|e| e.to_string())?.planned_error / 8.0;
        }
        ok &= ours < base;
        parts.push(format!("planned {} cm cube {} vs {}", side * 100.0, mm(ours), mm(base)));
    }
    let bundle = preset("baseline_compare");
    for pair in bundle.groups.chunks(2) {
        let (ours, _) = f.run(&pair[0], &bundle.seeds);
        let (base, _) = f.run(&pair[1], &bundle.seeds);
        ok &= ours.closed_loop_mean < base.closed_loop_mean;
        parts.push(format!("closed loop {} vs {} ({} vs {})", mm(ours.closed_loop_mean), mm(base.closed_loop_mean), ours.label, base.label));
    }
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn closed_loop_benefit(f: &Fixture) -> Outcome {
    let bundle = preset("replan_study");
    let mut means = vec![];
    let mut clean_seeds = vec![true; bundle.seeds.len()];
    for group in bundle.groups.iter().filter(|g| g.loop_cfg.n_replan <= 4) {
        let (s, runs) = f.run(group, &bundle.seeds);
        for (k, r) in runs.iter().enumerate() {
            clean_seeds[k] &= matches!(r, Ok(run) if run.dropped_at.is_none());
        }
        means.push((group.loop_cfg.n_replan, s.closed_loop_mean));
    }
    let at = |n: usize| means.iter().find(|(m, _)| *m == n).map(|(_, v)| *v).expect("group present");
    let reduction = 1.0 - at(4) / at(0);
    let clean = clean_seeds.iter().filter(|c| **c).count();
    let detail = format!("N=0 {}, N=4 {}, reduction {:.0}%, drop-free seeds {clean}/5", mm(at(0)), mm(at(4)), reduction * 100.0);
    if reduction >= 0.25 && clean >= 4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn difficulty_monotone(f: &Fixture) -> Outcome {
    let bundle = preset("reachable_space");
    let mut means = vec![];
    for group in bundle.groups.iter().take(3) {
        means.push(f.run(group, &bundle.seeds).0.closed_loop_mean);
    }
    let detail = format!("sides 1/3/5 cm: {}", means.iter().map(|m| mm(*m)).collect::<Vec<_>>().join(", "));
    if means.windows(2).all(|w| w[0] <= w[1]) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn trajectory_steps(f: &Fixture) -> Outcome {
    let horizons = [1, 3, 5, 10];
    let corners = cube_corners(0.05);
    // Least total planning time over three passes, to damp scheduler noise.
    let mut times = vec![];
    let mut slowest_t3: f64 = 0.0;
    for &t in &horizons {
        let params = TrajParams { steps: t, ..TrajParams::paper_first_plan() };
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let mut total = 0.0;
            for w in &corners {
                let prob = f.problem(w.goal(&f.grasp.object_pose0), &params);
                let clock = Instant::now();
                solve(&prob, None).map_err(|e| e.to_string())?;
                let dt = clock.elapsed().as_secs_f64();
                total += dt;
                if t == 3 {
                    slowest_t3 = slowest_t3.max(dt);
                }
            }
            best = best.min(total);
        }
        times.push(best);
    }
    let bundle = preset("traj_steps_study");
    let open: Vec<f64> = bundle.groups.iter().map(|g| f.run(g, &bundle.seeds).0.open_loop_mean).collect();
    let (lo, hi) = open.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let spread = (hi - lo) / lo;
    let detail = format!(
        "planning time for 8 goals {} s; open-loop error {} (spread {:.0}%); slowest T=3 plan {:.3} s",
        times.iter().map(|t| format!("{t:.4}")).collect::<Vec<_>>().join("/"),
        open.iter().map(|m| mm(*m)).collect::<Vec<_>>().join("/"),
        spread * 100.0,
        slowest_t3
    );
    if times.windows(2).all(|w| w[0] <= w[1]) && spread < 0.5 && slowest_t3 < 5.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pose_goals(f: &Fixture) -> Outcome {
    let bundle = preset("pose_goals");
    let mut group = bundle.groups[0].clone();
    group.noise = PerturbationConfig::zero(0);
    let (_, runs) = f.run(&group, &[0]);
    let run = runs.into_iter().next().expect("one seed").map_err(|e| e.to_string())?;
    let mut ok = run.dropped_at.is_none();
    let mut parts = vec![];
    for (k, r) in run.results.iter().enumerate() {
        ok &= r.closed_loop_error < 0.003 && r.closed_loop_rotation_error.to_degrees() < 5.0;
        parts.push(format!("goal {}: {:.3} cm, {:.2} deg", k + 1, r.closed_loop_error * 100.0, r.closed_loop_rotation_error.to_degrees()));
    }
    let detail = parts.join("; ");
    if ok && run.results.len() == 3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn competition(_: &Fixture) -> Outcome {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/scenarios/competition.json");
    let sc = Scenario::load(path).map_err(|e| e.to_string())?;
    let clock = Instant::now();
    let mut errors = vec![];
    let mut drops = 0;
    for &seed in &sc.seeds {
        let run = run_scenario(&sc.hand, &sc.grasp, &sc.waypoints, &sc.loop_cfg, &sc.planner, PerturbationConfig { seed, ..sc.noise })
            .map_err(|e| format!("seed {seed}: {e}"))?;
        drops += run.dropped_at.is_some() as usize;
        errors.extend(run.results.iter().map(|r| r.closed_loop_error));
    }
    let elapsed = clock.elapsed().as_secs_f64();
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let detail = format!("{} waypoints over {} seeds, mean closed-loop {:.3} cm, {drops} drops, {elapsed:.1} s", errors.len(), sc.seeds.len(), mean * 100.0);
    if drops == 0 && mean < 0.01 && elapsed < 300.0 && errors.len() == 10 * sc.seeds.len() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let fixture = Fixture::new();
    let criteria: [(&str, fn(&Fixture) -> Outcome); 11] = [
        ("trajectory-step study", trajectory_steps),
        ("gradient suite", gradient_suite),
        ("lie-group identities", lie_identities),
        ("registration oracle", registration),
        ("zero-displacement fixed point", zero_displacement),
        ("planner quality", planner_quality),
        ("baseline dominance", baseline_dominance),
        ("closed-loop benefit", closed_loop_benefit),
        ("difficulty monotonicity", difficulty_monotone),
        ("pose goals", pose_goals),
        ("competition smoke test", competition),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = std::panic::catch_unwind(|| check(&fixture)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
