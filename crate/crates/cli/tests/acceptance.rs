//! CLI acceptance: the compare command must emit the text correlation
//! table (two metric blocks by strengths) and the stacked session figure,
//! with byte-identical output across repeated runs; exit codes must
//! distinguish input errors from numerical failures.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_avprosody"))
}

fn write_spec(dir: &Path) -> std::path::PathBuf {
    let spec = r#"{
        "duration": 3.0,
        "fps": 60.0,
        "focus_start": 1.2,
        "focus_end": 2.2,
        "pre_raise_amp": 1.75,
        "focal_pitch_amp": 4.0,
        "brow_raise_amp": 2.5,
        "idiosyncrasy_seed": 7
    }"#;
    let path = dir.join("spec.json");
    std::fs::write(&path, spec).unwrap();
    path
}

fn synth_sessions(dir: &Path) {
    let spec = write_spec(dir);
    let out = bin()
        .args(["synth"])
        .arg(&spec)
        .args(["--strengths", "50,100,150,200", "--audio", "--out-dir"])
        .arg(dir.join("sessions"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "synth failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn run_compare(dir: &Path, out_name: &str) -> std::path::PathBuf {
    let out_dir = dir.join(out_name);
    let sessions = dir.join("sessions");
    let depth = format!("{}", avprosody::synthesis::SYNTH_CAMERA_DEPTH_MM);
    let out = bin()
        .args([
            "--fx", &depth, "--fy", &depth, "--cx", "640.0", "--cy", "360.0",
        ])
        .arg("compare")
        .arg(sessions.join("real.json"))
        .arg(sessions.join("vh_50.json"))
        .arg(sessions.join("vh_100.json"))
        .arg(sessions.join("vh_150.json"))
        .arg(sessions.join("vh_200.json"))
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "compare failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out_dir
}

#[test]
fn criterion_7_compare_emits_table_and_figure_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    synth_sessions(dir.path());

    let first = run_compare(dir.path(), "out1");
    let second = run_compare(dir.path(), "out2");

    // Table shape: two metric blocks with the strengths as columns.
    let table = std::fs::read_to_string(first.join("report.txt")).unwrap();
    assert!(table.contains("Head rotation (pitch)"), "{table}");
    assert!(table.contains("Eyebrow raise"), "{table}");
    let header_lines: Vec<&str> = table
        .lines()
        .filter(|l| l.starts_with("Strength [%]"))
        .collect();
    assert_eq!(header_lines.len(), 2, "one strengths header per block");
    for line in header_lines {
        for s in ["200", "150", "100", "50"] {
            assert!(line.contains(s), "missing strength {s} in '{line}'");
        }
    }
    assert!(table.contains("All p < 0.001."), "{table}");

    // Figure shape: three panels (audio contours + pitch + eyebrow), the
    // real series plus one overlay per strength in each motion panel.
    let figure = std::fs::read_to_string(first.join("figure.svg")).unwrap();
    assert!(figure.contains("Audio: F0"), "audio panel missing");
    assert!(figure.contains("Head rotation"), "pitch panel missing");
    assert!(figure.contains("Eyebrow raise"), "eyebrow panel missing");
    let polylines = figure.matches("<polyline").count();
    assert_eq!(polylines, 12, "2 contour series + 2 panels x 5 series");

    // Byte-identical across repeated runs on identical inputs.
    for name in ["report.json", "report.txt", "figure.svg"] {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }

    println!(
        "PASS criterion 7: compare wrote a two-block correlation table and a three-panel figure, byte-identical across runs"
    );
}

#[test]
fn missing_input_exits_with_code_1() {
    let out = bin()
        .args(["analyze", "/nonexistent/m.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn degenerate_landmarks_exit_with_code_2() {
    // All 68 landmarks on one line: the PnP subset is collinear, which is
    // a numerical failure, not an input-format error.
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("frame,t");
    for i in 0..68 {
        csv.push_str(&format!(",x{i},y{i}"));
    }
    for k in 0..20 {
        csv.push_str(&format!("\n{k},{}", k as f64 / 30.0));
        for i in 0..68 {
            csv.push_str(&format!(",{}.0,5.0", i * 3));
        }
    }
    std::fs::write(dir.path().join("flat.csv"), csv).unwrap();
    std::fs::write(
        dir.path().join("m.json"),
        r#"{"label":"X","landmark_path":"flat.csv","interocular_mm":63.0}"#,
    )
    .unwrap();
    let out = bin()
        .arg("analyze")
        .arg(dir.path().join("m.json"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn analyze_then_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    synth_sessions(dir.path());
    let sessions = dir.path().join("sessions");
    let depth = format!("{}", avprosody::synthesis::SYNTH_CAMERA_DEPTH_MM);

    let mut result_paths = Vec::new();
    for stem in ["real", "vh_50", "vh_200"] {
        let result = dir.path().join(format!("{stem}.result.json"));
        let out = bin()
            .args([
                "--fx", &depth, "--fy", &depth, "--cx", "640.0", "--cy", "360.0",
            ])
            .arg("analyze")
            .arg(sessions.join(format!("{stem}.json")))
            .arg("-o")
            .arg(&result)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "analyze failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        result_paths.push(result);
    }

    // analyze is deterministic: a second run writes identical bytes
    let rerun = dir.path().join("real.rerun.json");
    let out = bin()
        .args([
            "--fx", &depth, "--fy", &depth, "--cx", "640.0", "--cy", "360.0",
        ])
        .arg("analyze")
        .arg(sessions.join("real.json"))
        .arg("-o")
        .arg(&rerun)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(&result_paths[0]).unwrap(),
        std::fs::read(&rerun).unwrap(),
        "analyze output differs between runs"
    );

    let report_dir = dir.path().join("report");
    let out = bin()
        .arg("report")
        .args(&result_paths)
        .arg("--out-dir")
        .arg(&report_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "report failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(report_dir.join("report.txt")).unwrap();
    assert!(table.contains("200") && table.contains("50"));

    let fig = dir.path().join("fig.svg");
    let out = bin()
        .arg("plot")
        .args(&result_paths)
        .arg("-o")
        .arg(&fig)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "plot failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(std::fs::read_to_string(&fig).unwrap().contains("<svg"));
}
