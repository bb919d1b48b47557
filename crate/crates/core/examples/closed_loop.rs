//! The competition waypoints run closed loop with and without replanning.

use ingrasp::pipeline::{run_scenario, LoopConfig};
use ingrasp::plant::PerturbationConfig;
use ingrasp::scenario::Scenario;

fn main() {
    let sc = Scenario::competition();
    for n_replan in [0, 4] {
        let cfg = LoopConfig { n_replan, ..sc.loop_cfg };
        let run = run_scenario(&sc.hand, &sc.grasp, &sc.waypoints, &cfg, &sc.planner, PerturbationConfig::paper_like(3)).unwrap();
        println!("N_replan = {n_replan}");
        for (k, r) in run.results.iter().enumerate() {
            println!("  waypoint {k}: planned {:.2} mm, open loop {:.2} mm, closed loop {:.2} mm, {} replans",
                r.planned_error * 1e3, r.open_loop_error * 1e3, r.closed_loop_error * 1e3, r.replans_used);
        }
        let mean = run.results.iter().map(|r| r.closed_loop_error).sum::<f64>() / run.results.len() as f64;
        println!("  mean closed-loop error {:.2} mm, dropped: {}", mean * 1e3, run.dropped_at.is_some());
    }
}
