//! Loads a scenario file and prints the results CSV to stdout.
//!
//! `cargo run --release --example scenario_file -- crates/core/data/scenarios/pose_goals.json`

use ingrasp::pipeline::{run_scenario, write_csv};
use ingrasp::plant::PerturbationConfig;
use ingrasp::scenario::Scenario;

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/scenarios/competition.json").into());
    let sc = Scenario::load(&path).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(2);
    });
    let runs: Vec<_> = sc
        .seeds
        .iter()
        .map(|&seed| run_scenario(&sc.hand, &sc.grasp, &sc.waypoints, &sc.loop_cfg, &sc.planner, PerturbationConfig { seed, ..sc.noise }).unwrap())
        .collect();
    let rows: Vec<_> = runs.iter().map(|r| (sc.id.clone(), r)).collect();
    write_csv(std::io::stdout().lock(), &rows, &sc.grasp.object_pose0.p, false).unwrap();
}
