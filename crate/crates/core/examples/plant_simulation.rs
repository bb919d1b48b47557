//! Drives the simulated plant directly: a planned trajectory carries the
//! object, an inconsistent squeeze makes it fall.

use ingrasp::hand::HandModel;
use ingrasp::plant::{reset, PerturbationConfig, PlantError};
use ingrasp::scenario::cylinder_grasp;
use ingrasp::se3::Pose;
use ingrasp::trajopt::{solve, TrajParams, TrajProblem};
use nalgebra::Vector3;

fn main() {
    let hand = HandModel::synth_3x4();
    let grasp = cylinder_grasp(&hand).unwrap();
    let start = grasp.object_pose0;
    let goal = Pose::new(start.p + Vector3::new(0.0, 0.015, 0.015), start.r);
    let prob = TrajProblem::new(hand.clone(), grasp.clone(), goal, &TrajParams::paper_first_plan()).unwrap();
    let plan = solve(&prob, None).unwrap();

    let mut plant = reset(&hand, &grasp, PerturbationConfig::paper_like(7)).unwrap();
    for (t, q) in plan.vars.q.iter().enumerate() {
        let report = plant.execute_step(q).unwrap();
        println!("step {}: planned {:.4?}, actual {:.4?}, sensed {:.4?}, fit residual {:.2} mm",
            t + 1,
            plan.vars.object_pose(t).p.as_slice(),
            plant.object_pose_true.p.as_slice(),
            report.sensed.p.as_slice(),
            report.max_residual * 1e3);
    }
    println!("error to goal {:.2} mm, contact creep {:.3} mm",
        (plant.object_pose_true.p - goal.p).norm() * 1e3, plant.cumulative_drift * 1e3);

    // Opposing fingers move apart: the rigid fit no longer explains the contacts.
    let mut q = plant.q_true.clone();
    q[2] -= 1.0;
    q[1] -= 0.3;
    match plant.execute_step(&q) {
        Err(PlantError::DroppedObject { residual }) => println!("dropped, residual {:.1} mm", residual * 1e3),
        other => println!("still held: {other:?}"),
    }
}
