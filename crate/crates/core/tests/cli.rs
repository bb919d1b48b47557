use ingrasp::hand::HandModel;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ingrasp");

fn scenario(name: &str) -> String {
    format!("{}/data/scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn ingrasp(args: &[&str], out_dir: &Path) -> Output {
    Command::new(BIN).args(args).env("INGRASP_OUT", out_dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn plan_for_a_zero_offset_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let o = ingrasp(&["plan", "--offset-cm", "0,0,0"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let plan = read_json(&dir.path().join("plan_competition_offset.json"));
    assert!(plan["planned_error_cm"].as_f64().unwrap() < 1e-4);
}

#[test]
fn plan_for_a_competition_waypoint() {
    let dir = tempfile::tempdir().unwrap();
    let o = ingrasp(&["plan", "--scenario", &scenario("competition"), "--goal", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let plan = read_json(&dir.path().join("plan_competition_2.json"));
    assert_eq!(plan["steps"], 3);
    assert_eq!(plan["trajectory"].as_array().unwrap().len(), 3);
    assert_eq!(plan["trajectory"][0]["q_rad"].as_array().unwrap().len(), 12);
    for k in ["object", "finger", "joint", "total"] {
        assert!(plan["cost"][k].as_f64().unwrap().is_finite());
    }
    for v in plan["goal_position_cm"].as_array().unwrap() {
        assert!((v.as_f64().unwrap() + 2.5).abs() < 1e-9);
    }

    let o = ingrasp(&["plan", "--goal", "2", "--baseline"], dir.path());
    assert!(o.status.success());
    assert_eq!(read_json(&dir.path().join("plan_competition_2.json"))["formulation"], "baseline");
}

#[test]
fn missing_hand_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("competition")).unwrap().replace("../synth-3x4.json", "no_such_hand.json");
    let path = dir.path().join("broken.json");
    std::fs::write(&path, text).unwrap();
    let o = ingrasp(&["plan", "--scenario", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_hand.json"), "{}", stderr(&o));

    let o = ingrasp(&["run", "--scenario", dir.path().join("absent.json").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.json"));
}

#[test]
fn run_without_noise_gives_ten_clean_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = ingrasp(&["run", "--scenario", &scenario("competition"), "--seed", "0", "--noise-preset", "zero"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("competition.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], ingrasp::pipeline::CSV_SCHEMA);
    assert_eq!(lines[1], ingrasp::pipeline::CSV_COLUMNS.join(","));
    assert_eq!(lines.len(), 12);
    assert!(lines[2..].iter().all(|l| l.split(',').nth(10) == Some("false")));
    let summary = read_json(&dir.path().join("competition_summary.json"));
    assert_eq!(summary["groups"][0]["drop_rate"], 0.0);
}

#[test]
fn same_seed_gives_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["run", "--scenario", &scenario("competition"), "--seed", "3,4", "--no-wall-time"];
    assert!(ingrasp(&args, a.path()).status.success());
    let mut serial = args.to_vec();
    serial.extend(["--jobs", "1"]);
    assert!(ingrasp(&serial, b.path()).status.success());
    for f in ["competition.csv", "competition_summary.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn out_dir_flag_and_environment() {
    let (env_dir, flag_dir) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(ingrasp(&["plan", "--offset-cm", "1,0,0"], env_dir.path()).status.success());
    assert!(env_dir.path().join("plan_competition_offset.json").exists());
    let o = ingrasp(&["plan", "--offset-cm", "1,0,0", "--out-dir", flag_dir.path().to_str().unwrap()], env_dir.path());
    assert!(o.status.success());
    assert!(flag_dir.path().join("plan_competition_offset.json").exists());
}

#[test]
fn replan_study_preset_prints_grouped_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = ingrasp(&["run", "--preset", "replan_study", "--seed", "0"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for n in [0, 1, 4, 8] {
        assert!(text.contains(&format!("N_replan={n}")), "{text}");
    }
    let summary = read_json(&dir.path().join("replan_study_summary.json"));
    assert_eq!(summary["groups"].as_array().unwrap().len(), 4);
    let csv = std::fs::read_to_string(dir.path().join("replan_study.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 4 * 40);
}

#[test]
fn replan_override_applies_to_every_group() {
    let dir = tempfile::tempdir().unwrap();
    let o = ingrasp(&["run", "--seed", "1", "--replan-max", "0"], dir.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("competition.csv")).unwrap();
    for line in csv.lines().skip(2) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[9], "0");
        assert_eq!(f[7], f[8], "open and closed loop differ without replans");
    }
}

#[test]
fn unknown_names_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ingrasp(&["run", "--preset", "nope"], dir.path()).status.code(), Some(2));
    assert_eq!(ingrasp(&["run", "--noise-preset", "loud"], dir.path()).status.code(), Some(2));
    assert_eq!(ingrasp(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(ingrasp(&["plan", "--goal", "10"], dir.path()).status.code(), Some(2));
}

#[test]
fn gradcheck_pass_fail_and_vacuous() {
    let dir = tempfile::tempdir().unwrap();
    let o = ingrasp(&["gradcheck", "--trials", "20"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("max rel. err"));

    let o = ingrasp(&["gradcheck", "--trials", "5", "--tolerance", "1e-12"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));

    let o = ingrasp(&["gradcheck", "--trials", "0"], dir.path());
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn ik_recovers_a_known_configuration() {
    let hand = HandModel::synth_3x4();
    let q = nalgebra::DVector::from_column_slice(&[0.1, 0.5, 1.2, 0.9, -0.1, 0.6, 1.0, 1.1, 0.05, 0.2, 0.9, 0.8]);
    let targets: Vec<String> = hand
        .fingertip_positions(&q)
        .unwrap()
        .iter()
        .map(|p| format!("{},{},{}", p.x * 100.0, p.y * 100.0, p.z * 100.0))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["ik"];
    for t in &targets {
        args.extend(["--target", t.as_str()]);
    }
    let o = ingrasp(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let residuals: Vec<f64> = text
        .lines()
        .filter(|l| l.starts_with("finger"))
        .map(|l| l.split_whitespace().nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(residuals.len(), 3);
    assert!(residuals.iter().all(|r| *r < 0.1), "{text}");
}

#[test]
fn ik_failures() {
    let dir = tempfile::tempdir().unwrap();
    let far = ingrasp(&["ik", "--target", "3,-4,2", "--target", "-3,-4,2", "--target", "0,80,0"], dir.path());
    assert_eq!(far.status.code(), Some(1));
    let short = ingrasp(&["ik", "--target", "3,-4,2"], dir.path());
    assert_eq!(short.status.code(), Some(2));
    let malformed = ingrasp(&["ik", "--target", "3,-4", "--target", "-3,-4,2", "--target", "0,-9,7"], dir.path());
    assert_eq!(malformed.status.code(), Some(2));
}

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let o = ingrasp(&["presets"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ingrasp::pipeline::PRESET_NAMES {
        assert!(text.contains(name));
    }
    assert!(text.contains("reachable_space: 200 goals"));
}
