//! Rotation vectors, pose composition and the weighted pose distance.

use ingrasp::se3::{exp_so3, left_jacobian, left_jacobian_inv, log_so3, pose_distance, Pose, RotVec, WeightMatrix};
use nalgebra::Vector3;

fn main() {
    let r = RotVec::from_axis_angle(&Vector3::new(0.0, 0.0, 1.0), 40f64.to_radians());
    let rot = exp_so3(&r);
    let back = log_so3(&rot).expect("valid rotation");
    println!("angle {:.3} deg, round trip error {:.2e}", r.angle().to_degrees(), (back.0 - r.0).norm());
    println!("|J_l J_l^-1 - I| = {:.2e}", (left_jacobian(&r) * left_jacobian_inv(&r) - nalgebra::Matrix3::identity()).norm());

    let a = Pose::new(Vector3::new(0.1, 0.0, 0.05), r);
    let b = a.compose(&Pose::new(Vector3::new(0.0, 0.02, 0.0), RotVec::new(0.1, 0.0, 0.0)));
    let w = WeightMatrix::new([10.0; 3], [1.0; 3]);
    let (d, e) = pose_distance(&b, &a, &w);
    println!("distance {d:.6}, position error {:.4} m, rotation error {:.4} rad", e.pos.norm(), e.rot.norm());
    println!("inverse check {:.2e}", (a.compose(&a.inverse()).to_vector()).norm());
}
