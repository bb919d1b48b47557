//! Builds the shipped cylinder grasp and shows the stored grasp points.

use ingrasp::hand::HandModel;
use ingrasp::scenario::{cylinder_grasp, cylinder_targets};

fn main() {
    let hand = HandModel::synth_3x4();
    let grasp = cylinder_grasp(&hand).expect("grasp is reachable");
    println!("q0 = {:.4?}", grasp.q0.as_slice());
    println!("object at {:.4?}", grasp.object_pose0.p.as_slice());
    for (i, (g, t)) in grasp.grasp_points.iter().zip(cylinder_targets()).enumerate() {
        println!("finger {i}: grasp point {:.4?} (object frame), target {:.4?} (world)", g.as_slice(), t.as_slice());
    }
    println!("consistency error {:.2e} m", grasp.consistency_error(&hand).unwrap());
}
