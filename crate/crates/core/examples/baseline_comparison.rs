//! Planned error of the full formulation against the rigid-thumb baseline
//! over the corners of a cube.

use ingrasp::hand::HandModel;
use ingrasp::pipeline::cube_corners;
use ingrasp::scenario::cylinder_grasp;
use ingrasp::trajopt::{solve, solve_baseline, TrajParams, TrajProblem};

fn main() {
    let side: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5.0);
    let hand = HandModel::synth_3x4();
    let grasp = cylinder_grasp(&hand).unwrap();
    let (mut ours, mut base) = (0.0, 0.0);
    for (k, w) in cube_corners(side * 0.01).iter().enumerate() {
        let goal = w.goal(&grasp.object_pose0);
        let prob = TrajProblem::new(hand.clone(), grasp.clone(), goal, &TrajParams::paper_first_plan()).unwrap();
        let a = solve(&prob, None).unwrap().planned_error;
        let b = solve_baseline(&prob, None).unwrap().planned_error;
        println!("corner {k}: proposed {:.2} mm, baseline {:.2} mm", a * 1e3, b * 1e3);
        ours += a / 8.0;
        base += b / 8.0;
    }
    println!("mean over the {side} cm cube: proposed {:.2} mm, baseline {:.2} mm", ours * 1e3, base * 1e3);
}
