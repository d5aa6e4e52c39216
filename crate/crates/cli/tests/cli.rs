use std::path::Path;
use std::process::Command;

fn nop(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nop")).args(args).current_dir(dir).env("RUST_LOG", "warn").output().expect("spawn nop")
}

#[test]
fn ilc_writes_rms_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = nop(&["ilc", "--joint", "left_knee_pitch", "--iterations", "10", "--out", "rms.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("rms.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iteration,rms_rad"));
    let rms: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(rms.len(), 11);
    assert!(rms[10] <= 0.25 * rms[0]);
}

#[test]
fn unknown_joint_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = nop(&["ilc", "--joint", "tail", "--out", "rms.csv"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tail"));
}

#[test]
fn render_then_vision_finds_the_ball() {
    let dir = tempfile::tempdir().unwrap();
    let out = nop(&["render", "--pose", "-2,0,0", "--out", "frame.ppm"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lut = nop_core::vision::ColorLut::canonical().to_file_bytes();
    std::fs::write(dir.path().join("field.lut"), lut).unwrap();
    let out = nop(&["vision", "--image", "frame.ppm", "--lut", "field.lut", "--out", "det.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let det: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("det.json")).unwrap()).unwrap();
    // ball on the kickoff spot, straight ahead
    let az = det["ball"]["bearing"]["azimuth"].as_f64().unwrap();
    assert!(az.abs() < 0.02, "{az}");
    assert_eq!(det["goal_posts"].as_array().unwrap().len(), 2);
}

#[test]
fn headless_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("scenario.json"), r#"[{"at_s": 0.5, "event": {"type": "set_ball", "x": -1.0, "y": 0.3}}]"#).unwrap();
    for name in ["a.jsonl", "b.jsonl"] {
        let out = nop(&["run", "--headless", "--seconds", "2", "--seed", "9", "--scenario", "scenario.json", "--record", name], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(summary["cycles"], 250);
    }
    let a = std::fs::read(dir.path().join("a.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.jsonl")).unwrap());
    assert_eq!(a.iter().filter(|&&b| b == b'\n').count(), 250 / 12);
}
