//! Forward kinematics, fingertip Jacobians and fingertip IK on the bundled
//! three-finger hand.

use ingrasp::hand::{ik_fingertips, HandModel, IkOptions};

fn main() {
    let hand = HandModel::synth_3x4();
    let q = hand.mid_configuration();
    println!("{} fingers, {} joints", hand.num_fingers(), hand.dof());
    for (f, tip) in hand.fingertip_poses(&q).unwrap().iter().enumerate() {
        let j = hand.space_jacobian(f, &q.as_slice()[hand.joint_range(f)]).unwrap();
        println!("finger {f}: tip at {:.4?} m, jacobian {}x{}", tip.p.as_slice(), j.nrows(), j.ncols());
    }

    // Recover the configuration from its own fingertip positions.
    let targets = hand.fingertip_positions(&q).unwrap();
    let seed = hand.lower_limits().lerp(&hand.upper_limits(), 0.3);
    let sol = ik_fingertips(&hand, &targets, &seed, &IkOptions::default()).expect("reachable targets");
    println!("IK: {} iterations, worst residual {:.2e} m", sol.iterations, sol.max_residual());
    println!("pairwise clearances {:.4?}", hand.collision_distances(&sol.q).unwrap());
}
