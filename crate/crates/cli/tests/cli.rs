use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use maglev_cli::manifest::{Manifest, StageStatus};
use maglev_cli::pipeline::run_scenario;
use maglev_cli::plotdata::emit_plotdata;
use maglev_cli::scenario::Value;
use maglev_cli::sweep::{parse_values, run_sweep};
use maglev_cli::{CliError, Scenario};

/// Paper-shaped scenario with every stage shortened.
const FAST: &str = "\
[run]
seed = 7
stages = liftoff, camera, intensity, interferometric, calibration, ringup

[intensity]
duration = 2 s

[interferometric]
settle = 200 ms
duration = 600 ms
segment_length = 16384

[calibration]
trap_frequencies = 174 Hz, 233 Hz
currents = 1 A, 2 A, 3 A
settle = 500 ms
duration = 1 s
mirror_periods = 40
fringe_frequency = 50 Hz

[ringup]
repeats = 16
duration = 1 s
";

fn fast() -> Scenario {
    Scenario::parse(FAST).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maglev"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn identical_seed_gives_identical_manifests() {
    let tmp = tempfile::tempdir().unwrap();
    let s = fast();
    let a = run_scenario(&s, &tmp.path().join("a")).unwrap();
    let b = run_scenario(&s, &tmp.path().join("b")).unwrap();
    assert!(a.error.is_none(), "{:?}", a.error);
    let ja = fs::read(&a.manifest_path).unwrap();
    let jb = fs::read(&b.manifest_path).unwrap();
    assert_eq!(ja, jb);
    for f in &a.manifest.files {
        assert_eq!(
            fs::read(tmp.path().join("a").join(&f.path)).unwrap(),
            fs::read(tmp.path().join("b").join(&f.path)).unwrap(),
            "{}",
            f.path
        );
    }

    let other = s.with_value("run.seed", Value::Int(8)).unwrap();
    let c = run_scenario(&other, &tmp.path().join("c")).unwrap();
    assert_ne!(c.manifest.files, a.manifest.files);
}

#[test]
fn stages_log_entry_and_exit_amplitudes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_scenario(&fast(), tmp.path()).unwrap();
    let names: Vec<&str> = out.manifest.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["liftoff", "camera", "intensity", "interferometric", "calibration", "ringup"]);
    for st in &out.manifest.stages {
        assert_eq!(st.status, StageStatus::Ok, "{}", st.name);
        assert!(st.entry_rms_m.is_finite() && st.exit_rms_m.unwrap().is_finite());
    }
    let camera = out.manifest.stage("camera").unwrap();
    assert!(camera.exit_rms_m.unwrap() < 0.1 * camera.entry_rms_m);
    // every listed file exists with the recorded size
    for f in &out.manifest.files {
        assert_eq!(fs::metadata(tmp.path().join(&f.path)).unwrap().len(), f.bytes);
    }
}

#[test]
fn disabled_controllers_leave_amplitudes_unchanged() {
    let s = fast()
        .with_value("camera.enabled", Value::Bool(false))
        .and_then(|s| s.with_value("intensity.enabled", Value::Bool(false)))
        .and_then(|s| s.with_value("interferometric.enabled", Value::Bool(false)))
        .and_then(|s| s.with_value("run.stages", Value::Words(vec!["liftoff".into(), "camera".into(), "intensity".into()])))
        .unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let out = run_scenario(&s, tmp.path()).unwrap();
    assert!(out.error.is_none());
    for st in &out.manifest.stages[1..] {
        assert_eq!(st.status, StageStatus::Disabled);
        let ratio = st.exit_rms_m.unwrap() / st.entry_rms_m;
        assert!((ratio - 1.0).abs() < 0.05, "{}: {ratio}", st.name);
    }
}

#[test]
fn scenario_file_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let s = fast();
    let p = write(tmp.path(), "a.scn", &s.to_text());
    let back = Scenario::from_file(&p).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.to_text(), s.to_text());
    assert_eq!(back.hash(), s.hash());
}

#[test]
fn unknown_key_lists_valid_keys() {
    let err = Scenario::parse("[run]\nseed = 1\n[trap]\naxial_freq = 160 Hz\n").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("trap.axial_freq"), "{msg}");
    assert!(msg.contains("trap.axial_frequency"), "{msg}");
    assert_eq!(err.code(), 2);

    match parse_values("interferometric.gama_fb", "1 Hz") {
        Err(CliError::UnknownKey { key, valid }) => {
            assert_eq!(key, "interferometric.gama_fb");
            assert!(valid.contains("interferometric.gamma_fb"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_sweep_writes_empty_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let values = parse_values("interferometric.gamma_fb", "").unwrap();
    assert!(values.is_empty());
    let out = run_sweep(&fast(), "interferometric.gamma_fb", &values, tmp.path(), 1).unwrap();
    assert_eq!(out.exit_code, 0);
    assert!(out.manifest.runs.is_empty());
    let summary = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().filter(|l| !l.starts_with('#')).count(), 1, "{summary}");
}

#[test]
fn gain_sweep_emits_one_fig4a_file_per_gain() {
    let tmp = tempfile::tempdir().unwrap();
    let s = fast()
        .with_value(
            "run.stages",
            Value::Words(vec!["liftoff".into(), "camera".into(), "intensity".into(), "interferometric".into()]),
        )
        .unwrap();
    let values = parse_values("interferometric.gamma_fb", "2.1 Hz, 21 Hz, 210 Hz").unwrap();
    let out = run_sweep(&s, "interferometric.gamma_fb", &values, tmp.path(), 2).unwrap();
    assert_eq!(out.exit_code, 0);
    let files = emit_plotdata(&out.manifest_path, "fig4a").unwrap();
    assert_eq!(files.len(), 3);
    let mut gammas = Vec::new();
    for f in &files {
        let text = fs::read_to_string(f).unwrap();
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, "f_Hz,asd");
        gammas.push(text.lines().find(|l| l.contains("gamma_fb")).unwrap().to_string());
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        assert!(rows.len() > 100);
        assert!(rows.iter().all(|r| r.len() == 2 && r[1] >= 0.0));
    }
    gammas.dedup();
    assert_eq!(gammas.len(), 3);

    // the ring-up stage did not run
    let sub = Manifest::load(&tmp.path().join("run_000").join("manifest.json")).unwrap();
    match emit_plotdata(&tmp.path().join("run_000").join("manifest.json"), "fig4b") {
        Err(CliError::MissingAnalysis { stage, .. }) => assert_eq!(stage, "ringup"),
        other => panic!("{other:?}"),
    }
    assert!(sub.stage("ringup").is_none());
}

#[test]
fn feasibility_emits_fig5_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = write(tmp.path(), "f.scn", "[run]\nseed = 1\n");
    let out = tmp.path().join("feas");
    let status = bin()
        .args(["feasibility", scn.to_str().unwrap(), "--output", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("feasibility.mass = 6e-9 kg"), "{report}");
    assert!(report.contains("asd_one_sided") && report.contains("asd_two_sided"));

    let files = emit_plotdata(&out.join("manifest.json"), "fig5").unwrap();
    let text = fs::read_to_string(&files[0]).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next().unwrap(), "n_in,phonons,finesse");
    let finesses: std::collections::BTreeSet<String> =
        lines.map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
    assert_eq!(finesses.len(), 3);
}

#[test]
fn unknown_figure_lists_tags() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = write(tmp.path(), "f.scn", "[run]\nseed = 1\n");
    let out = tmp.path().join("feas");
    let o = bin()
        .args(["feasibility", scn.to_str().unwrap(), "--output", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success());
    let o = bin()
        .args(["plotdata", out.join("manifest.json").to_str().unwrap(), "--fig", "fig9"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for tag in ["fig2", "fig3", "fig4a", "fig4b", "fig5"] {
        assert!(err.contains(tag), "{err}");
    }
    let o = bin()
        .args(["plotdata", out.join("manifest.json").to_str().unwrap(), "--fig", "fig4a"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("interferometric"));
}

#[test]
fn exit_codes_follow_the_interface() {
    let tmp = tempfile::tempdir().unwrap();
    // every violation is reported
    let bad = write(
        tmp.path(),
        "bad.scn",
        "[run]\nseed = 1\n[particle]\nradius = -1 um\n[camera]\nseparation = 0.7\n",
    );
    let o = bin().args(["run", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("particle.radius") && err.contains("camera.separation"), "{err}");

    let no_seed = write(tmp.path(), "noseed.scn", "[trap]\naxial_frequency = 160 Hz\n");
    let o = bin().args(["run", no_seed.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("run.seed"));

    let o = bin()
        .args(["sweep", no_seed.to_str().unwrap(), "--param", "nope.key", "--values", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    // a fringe-slip threshold below the roughness phase noise trips the lock
    let abort = write(
        tmp.path(),
        "abort.scn",
        "[run]\nseed = 3\nstages = interferometric\n[interferometric]\nsettle = 100 ms\nduration = 200 ms\nsegment_length = 4096\n[lock]\nloss_window = 200\nloss_threshold = 0.05\n",
    );
    let out = tmp.path().join("abort");
    let o = bin()
        .args(["run", abort.to_str().unwrap(), "--output", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let m = Manifest::load(&out.join("manifest.json")).unwrap();
    assert!(!m.complete);
    assert_eq!(m.stage("interferometric").unwrap().status, StageStatus::Aborted);
}
