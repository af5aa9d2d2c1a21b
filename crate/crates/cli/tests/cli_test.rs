//! Black-box tests over the compiled binary: command flows, output files,
//! and exit codes.

use std::fs;
use std::process::{Command, Output};

fn headcount(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_headcount"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn count_on_default_synth_scene() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let output = headcount(&[
        "count",
        "--output-dir",
        out.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let line = stdout(&output);
    assert!(line.contains("enter=1"), "{line}");
    assert!(line.contains("exit=0"), "{line}");
    assert!(line.contains("average_f1=1.0000"), "{line}");

    let events = fs::read_to_string(out.join("events.csv")).unwrap();
    assert_eq!(events.lines().count(), 2, "{events}");
    assert!(events.lines().nth(1).unwrap().contains("enter"));
    assert!(out.join("report.json").is_file());
    assert!(out.join("effective_config.toml").is_file());
}

#[test]
fn synth_then_count_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    let output = headcount(&[
        "synth",
        "--preset",
        "n_people(4)",
        "--seed",
        "3",
        "--output-dir",
        scene.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(scene.join("truth.csv").is_file());
    assert!(scene.join("frames/000000.pgm").is_file());

    let config_path = dir.path().join("run.toml");
    fs::write(
        &config_path,
        format!(
            r#"
[input]
kind = "pgm-dir"
path = "{frames}"

[counter]
line = [0.0, 120.0, 320.0, 120.0]

[output]
dir = "{out}"
"#,
            frames = scene.join("frames").display(),
            out = dir.path().join("run").display(),
        ),
    )
    .unwrap();

    let output = headcount(&[
        "count",
        "--config",
        config_path.to_str().unwrap(),
        "--ground-truth",
        scene.join("truth.csv").to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(stdout(&output).contains("enter=2"), "{}", stdout(&output));
    assert!(stdout(&output).contains("exit=2"), "{}", stdout(&output));

    let output = headcount(&[
        "eval",
        "--predicted",
        dir.path().join("run/events.csv").to_str().unwrap(),
        "--ground-truth",
        scene.join("truth.csv").to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let report: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(report["average_f1"], 1.0);
    assert_eq!(report["overall"]["tp"], 4);
}

#[test]
fn eval_reproduces_reference_tallies() {
    let dir = tempfile::tempdir().unwrap();
    let predicted = dir.path().join("events.csv");
    let truth = dir.path().join("truth.csv");

    let mut truth_rows: Vec<(u64, &str)> = Vec::new();
    let mut event_rows: Vec<(u64, &str)> = Vec::new();
    for i in 0..30u64 {
        truth_rows.push((i * 200 + 10, "enter"));
        event_rows.push((i * 200 + 12, "enter"));
    }
    for i in 0..29u64 {
        truth_rows.push((i * 200 + 110, "exit"));
        event_rows.push((i * 200 + 112, "exit"));
    }
    event_rows.push((9999, "exit")); // spurious: nowhere near a truth exit
    truth_rows.sort();
    event_rows.sort();

    let mut events = String::from("frame,track_id,direction,x,y\n");
    for (frame, direction) in &event_rows {
        events.push_str(&format!("{frame},1,{direction},5.0,5.0\n"));
    }
    let mut truths = String::from("frame,direction\n");
    for (frame, direction) in &truth_rows {
        truths.push_str(&format!("{frame},{direction}\n"));
    }
    fs::write(&predicted, events).unwrap();
    fs::write(&truth, truths).unwrap();

    let output = headcount(&[
        "eval",
        "--predicted",
        predicted.to_str().unwrap(),
        "--ground-truth",
        truth.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let report: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(report["enter"]["f1"], 1.0);
    let exit_f1 = report["exit"]["f1"].as_f64().unwrap();
    assert!((exit_f1 - 58.0 / 59.0).abs() < 1e-9);
    let avg = report["average_f1"].as_f64().unwrap();
    assert!((avg - 117.0 / 118.0).abs() < 1e-9);
    let overall_pct = report["accuracy_percent"]["overall"].as_f64().unwrap();
    assert!((overall_pct - 99.1525).abs() < 1e-3);
}

#[test]
fn count_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| -> (Vec<u8>, Vec<u8>) {
        let out = dir.path().join(name);
        let output = headcount(&[
            "count",
            "--output-dir",
            out.to_str().unwrap(),
            "--seed",
            "11",
        ]);
        assert!(output.status.success(), "{}", stderr(&output));
        (
            fs::read(out.join("events.csv")).unwrap(),
            fs::read(out.join("report.json")).unwrap(),
        )
    };
    let (events_a, report_a) = run("a");
    let (events_b, report_b) = run("b");
    assert_eq!(events_a, events_b);
    assert_eq!(report_a, report_b);
}

#[test]
fn bench_reports_per_stage_breakdown() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bench.toml");
    fs::write(
        &config_path,
        format!(
            r#"
[input]
kind = "synth"
preset = "single_cross"
seed = 1
width = 160
height = 120

[output]
dir = "{}"
"#,
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let output = headcount(&[
        "bench",
        "--config",
        config_path.to_str().unwrap(),
        "--repeat",
        "2",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("run 1:"), "{text}");
    assert!(text.contains("run 2:"), "{text}");
    assert!(text.contains("subtraction"), "{text}");
    assert!(text.contains("mean"), "{text}");

    let output = headcount(&[
        "bench",
        "--config",
        config_path.to_str().unwrap(),
        "--repeat",
        "0",
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn unknown_preset_fails_with_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let output = headcount(&[
        "synth",
        "--preset",
        "flash_mob",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let err = stderr(&output);
    assert!(err.contains("single_cross"), "{err}");
    assert!(err.contains("lighting_drift"), "{err}");
}

#[test]
fn exit_codes_distinguish_validation_from_io() {
    // Unreadable config file: input/IO error.
    let output = headcount(&["count", "--config", "/no/such/config.toml"]);
    assert_eq!(output.status.code(), Some(2), "{}", stderr(&output));

    // Well-formed config with an invalid parameter: validation error.
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.toml");
    fs::write(&config_path, "[mog2]\nbackground_ratio = 1.5\n").unwrap();
    let output = headcount(&["count", "--config", config_path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("background_ratio"));

    // File input without a counting line: validation error naming the field.
    let frames = dir.path().join("frames");
    fs::create_dir(&frames).unwrap();
    let mut raster = b"P5\n16 16\n255\n".to_vec();
    raster.extend([0u8; 256]);
    fs::write(frames.join("0.pgm"), raster).unwrap();
    let config_path = dir.path().join("noline.toml");
    fs::write(
        &config_path,
        format!(
            "[input]\nkind = \"pgm-dir\"\npath = \"{}\"\n[output]\ndir = \"{}\"\n",
            frames.display(),
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let output = headcount(&["count", "--config", config_path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("counter.line"), "{}", stderr(&output));
}

#[test]
fn eval_rejects_malformed_rows_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let predicted = dir.path().join("events.csv");
    let truth = dir.path().join("truth.csv");
    fs::write(&predicted, "frame,track_id,direction,x,y\n1,1,enter,1,1\n").unwrap();
    fs::write(&truth, "frame,direction\n10,enter\nwhat,exit\n").unwrap();
    let output = headcount(&[
        "eval",
        "--predicted",
        predicted.to_str().unwrap(),
        "--ground-truth",
        truth.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("line 3"), "{}", stderr(&output));
}

#[test]
fn masks_dump_respects_interval() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("dump.toml");
    let out = dir.path().join("out");
    fs::write(
        &config_path,
        format!(
            r#"
[input]
kind = "synth"
preset = "single_cross"
seed = 2
width = 160
height = 120

[output]
dir = "{}"
dump_masks_every = 60
"#,
            out.display()
        ),
    )
    .unwrap();
    let output = headcount(&["count", "--config", config_path.to_str().unwrap()]);
    assert!(output.status.success(), "{}", stderr(&output));
    let masks: Vec<_> = fs::read_dir(out.join("masks")).unwrap().collect();
    assert!(masks.len() >= 2, "expected several mask dumps");
}

#[test]
fn help_names_all_subcommands() {
    let output = headcount(&["--help"]);
    assert!(output.status.success());
    let text = stdout(&output);
    for sub in ["count", "synth", "eval", "bench"] {
        assert!(text.contains(sub), "missing {sub} in help");
    }
}
