//! One trajectory optimization: move the grasped cylinder 2 cm along +x.

use ingrasp::hand::HandModel;
use ingrasp::scenario::cylinder_grasp;
use ingrasp::se3::Pose;
use ingrasp::trajopt::{solve, TrajParams, TrajProblem};
use nalgebra::Vector3;

fn main() {
    let hand = HandModel::synth_3x4();
    let grasp = cylinder_grasp(&hand).unwrap();
    let start = grasp.object_pose0;
    let goal = Pose::new(start.p + Vector3::new(0.02, 0.0, 0.0), start.r);
    let prob = TrajProblem::new(hand, grasp, goal, &TrajParams::paper_first_plan()).unwrap();

    let sol = solve(&prob, None).expect("solver converges");
    println!("{} SQP iterations in {:.3} s", sol.stats.iterations, sol.stats.wall_time);
    println!("cost {:.3e} -> {:.3e} (object {:.2e}, finger {:.2e}, joint {:.2e})",
        sol.initial_cost, sol.cost.total(), sol.cost.object, sol.cost.finger, sol.cost.joint);
    for t in 0..prob.steps {
        println!("step {}: object at {:.4?}", t + 1, sol.vars.object_pose(t).p.as_slice());
    }
    println!("planned error {:.3} mm, grasp drift {:.3} mm",
        sol.planned_error * 1e3, sol.vars.grasp_drift(&prob.hand, &prob.grasp).unwrap() * 1e3);
}
