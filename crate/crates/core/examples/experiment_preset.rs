//! Runs a named experiment preset and prints one summary line per group.
//!
//! `cargo run --release --example experiment_preset -- replan_study`

use ingrasp::hand::HandModel;
use ingrasp::pipeline::{experiment_presets, run_group, summarize, PRESET_NAMES};
use ingrasp::scenario::cylinder_grasp;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "baseline_compare".into());
    let Ok(bundle) = experiment_presets(&name) else {
        eprintln!("unknown preset {name}; choose from {PRESET_NAMES:?}");
        std::process::exit(2);
    };
    let hand = HandModel::synth_3x4();
    let grasp = cylinder_grasp(&hand).unwrap();
    for group in &bundle.groups {
        let s = summarize(&group.label, &run_group(&hand, &grasp, group, &bundle.seeds));
        println!("{:<16} planned {:5.2} mm  open {:5.2} mm  closed {:5.2} ± {:4.2} mm  drop rate {:.2}",
            s.label, s.planned_mean * 1e3, s.open_loop_mean * 1e3, s.closed_loop_mean * 1e3, s.closed_loop_std * 1e3, s.drop_rate);
    }
}
