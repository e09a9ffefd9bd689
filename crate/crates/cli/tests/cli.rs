use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use foldcap::data_io::{render_markers, write_capacitance_csv, write_markers_csv};
use foldcap::kinematics::{FoldPattern, FoldState, PatternKind};
use foldcap::motion::{generate_trajectory, random_script, MaterialProfile};
use foldcap::session::{frame_ts, simulate, GenConfig, DEFAULT_START_MS};
use serde_json::Value;

fn foldcap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foldcap"))
        .args(args)
        .current_dir(dir)
        .env_remove("FOLDCAP_CONFIG")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn gen_small(dir: &Path, out: &str, sessions: &str) {
    let o = foldcap(dir, &["gen", "--pattern", "accordion-p", "--sessions", sessions, "--minutes", "0.5", "--seed", "7", "-o", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gen_writes_sessions_and_is_deterministic() {
    let t = tempfile::tempdir().unwrap();
    gen_small(t.path(), "a", "4");
    gen_small(t.path(), "b", "4");
    for k in 0..4 {
        let s = format!("session_{k:02}");
        for f in ["capacitance.csv", "primitives.csv"] {
            let x = fs::read(t.path().join("a").join(&s).join(f)).unwrap();
            let y = fs::read(t.path().join("b").join(&s).join(f)).unwrap();
            assert_eq!(x, y, "{s}/{f}");
        }
    }
    assert!(!t.path().join("a/session_04").exists());
    let m = json(&t.path().join("a/manifest.json"));
    assert_eq!(m["command"], "gen");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["config"]["gen"]["sessions"], 4);
}

#[test]
fn manifest_reruns_identically() {
    let t = tempfile::tempdir().unwrap();
    gen_small(t.path(), "a", "2");
    let m = json(&t.path().join("a/manifest.json"));
    let argv: Vec<String> = m["argv"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let mut args: Vec<&str> = argv[1..].iter().map(String::as_str).collect();
    let out = args.iter().position(|a| *a == "-o").unwrap() + 1;
    args[out] = "again";
    assert_eq!(code(&foldcap(t.path(), &args)), 0);
    let a = fs::read(t.path().join("a/session_01/capacitance.csv")).unwrap();
    let b = fs::read(t.path().join("again/session_01/capacitance.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unknown_pattern_is_a_config_error() {
    let t = tempfile::tempdir().unwrap();
    let o = foldcap(t.path(), &["gen", "--pattern", "origami", "-o", "x"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("accordion-p") && err.contains("sunray"), "{err}");
}

#[test]
fn config_file_env_and_flag_precedence() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("c.toml"), "[gen]\nsessions = 2\nminutes = 0.2\nseed = 3\n").unwrap();
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["gen", "-o", out];
        args.extend_from_slice(extra);
        Command::new(env!("CARGO_BIN_EXE_foldcap"))
            .args(&args)
            .current_dir(t.path())
            .env("FOLDCAP_CONFIG", "c.toml")
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    };
    assert_eq!(code(&run(&[], "env")), 0);
    assert!(t.path().join("env/session_01").exists() && !t.path().join("env/session_02").exists());
    assert_eq!(code(&run(&["--sessions", "3"], "flag")), 0);
    assert!(t.path().join("flag/session_02").exists());
    assert_eq!(json(&t.path().join("flag/manifest.json"))["config"]["gen"]["seed"], 3);

    fs::write(t.path().join("bad.toml"), "[train]\nlr0 = \"fast\"\n").unwrap();
    let o = foldcap(t.path(), &["--config", "bad.toml", "gen", "-o", "x"]);
    assert_eq!(code(&o), 2);
    let o = foldcap(t.path(), &["--config", "missing.toml", "gen", "-o", "x"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn train_echoes_defaults_and_honours_overrides() {
    let t = tempfile::tempdir().unwrap();
    gen_small(t.path(), "data", "2");
    let o = foldcap(t.path(), &["train", "--data", "data", "-o", "m.bin", "--max-epochs", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&t.path().join("m.bin.report.json"));
    assert_eq!(r["config"]["batch_size"], 4096);
    assert_eq!(r["config"]["lr0"], 0.01);
    assert_eq!(r["epochs_run"], 1);
    assert_eq!(r["train_loss"].as_array().unwrap().len(), 1);
    assert!(t.path().join("m.bin.manifest.json").exists());

    let o = foldcap(t.path(), &["train", "--data", "nowhere", "-o", "m2.bin"]);
    assert_eq!(code(&o), 3);
    gen_small(t.path(), "one", "1");
    assert_eq!(code(&foldcap(t.path(), &["train", "--data", "one", "-o", "m3.bin"])), 4);

    let o = foldcap(t.path(), &["eval", "--model", "m.bin", "--data", "data", "-o", "ev"]);
    assert_eq!(code(&o), 0);
    for f in ["report.json", "scatter.csv", "scatter.svg", "manifest.json"] {
        assert!(t.path().join("ev").join(f).exists(), "{f}");
    }
}

#[test]
fn oracle_eval_is_perfect() {
    let t = tempfile::tempdir().unwrap();
    gen_small(t.path(), "data", "2");
    let o = foldcap(t.path(), &["eval", "--oracle", "--data", "data", "-o", "ev"]);
    assert_eq!(code(&o), 0);
    let r = json(&t.path().join("ev/report.json"));
    assert_eq!(r["avg_r2"], 1.0);
    assert_eq!(r["avg_rmse_cm"], 0.0);
    assert_eq!(r["samples"], 900);
    let csv = fs::read_to_string(t.path().join("ev/scatter.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "primitive,truth_cm,pred_cm,mean_cm,diff_cm");
}

#[test]
fn reconstruct_writes_numbered_objs() {
    let t = tempfile::tempdir().unwrap();
    gen_small(t.path(), "data", "2");
    let o = foldcap(t.path(), &["reconstruct", "--session", "data/session_00", "--frames", "100", "-o", "rec"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut objs: Vec<String> = fs::read_dir(t.path().join("rec"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".obj"))
        .collect();
    objs.sort();
    assert_eq!(objs.len(), 100);
    assert_eq!(objs[0], "frame_00000.obj");
    assert_eq!(objs[99], "frame_00099.obj");
}

#[test]
fn sim_writes_streams_and_curve() {
    let t = tempfile::tempdir().unwrap();
    let o = foldcap(t.path(), &["sim", "--pattern", "v-fold", "--seconds", "4", "--seed", "1", "-o", "s"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cap = fs::read_to_string(t.path().join("s/capacitance.csv")).unwrap();
    assert_eq!(cap.lines().count(), 121);
    let curve = fs::read_to_string(t.path().join("s/curve.csv")).unwrap();
    assert_eq!(curve.lines().next().unwrap(), "delta_c_f,delta_v_m3,freq_hz");
    // the saved script replays through the config file
    fs::copy(t.path().join("s/script.toml"), t.path().join("replay.toml")).unwrap();
    let o = foldcap(t.path(), &["--config", "replay.toml", "sim", "--pattern", "v-fold", "--seed", "1", "-o", "r"]);
    assert_eq!(code(&o), 0);
    assert_eq!(cap, fs::read_to_string(t.path().join("r/capacitance.csv")).unwrap());
}

/// Capacitance of a simulated session plus markers whose clock runs `shift_ms` ahead.
fn recording(dir: &Path, shift_ms: i64, static_markers: bool) {
    let p = FoldPattern::preset(PatternKind::AccordionR);
    let traj = generate_trajectory(&p, &random_script(&p, 40.0, 5), 5).unwrap();
    let cfg = GenConfig { material: MaterialProfile::cloth(), ..GenConfig::default() };
    let (frames, _) = simulate(&p, &traj, &cfg, 5, DEFAULT_START_MS).unwrap();
    let mut buf = Vec::new();
    write_capacitance_csv(&frames, &mut buf).unwrap();
    fs::write(dir.join("cap.csv"), buf).unwrap();
    let half = FoldState::uniform(&p, 0.01, 0.01);
    let obs: Vec<_> = traj
        .states
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            let ts = frame_ts(DEFAULT_START_MS, i) + shift_ms;
            // a still sample with tracker jitter carries no motion to correlate with
            let jitter = if static_markers { ((i * 7919) % 13) as f64 * 0.3 } else { 0.0 };
            render_markers(&p, if static_markers { &half } else { s }, ts, 0.05, [100.0 + jitter, 50.0])
        })
        .collect();
    let mut buf = Vec::new();
    write_markers_csv(&obs, &mut buf).unwrap();
    fs::write(dir.join("markers.csv"), buf).unwrap();
}

#[test]
fn sync_recovers_offset_and_honours_manual_override() {
    let t = tempfile::tempdir().unwrap();
    recording(t.path(), 400, false);
    let base = ["sync", "--pattern", "accordion-r", "--capacitance", "cap.csv", "--markers", "markers.csv"];
    let mut args = base.to_vec();
    args.extend(["-o", "auto"]);
    let o = foldcap(t.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&t.path().join("auto/sync.json"));
    let off = s["offset_ms"].as_i64().unwrap();
    assert!((off - 400).abs() <= 17, "{off}");
    assert!(t.path().join("auto/windows/manifest.json").exists());

    let mut args = base.to_vec();
    args.extend(["--offset-ms", "-250", "-o", "manual"]);
    assert_eq!(code(&foldcap(t.path(), &args)), 0);
    let s = json(&t.path().join("manual/sync.json"));
    assert_eq!(s["offset_ms"], -250);
    assert_eq!(s["manual_offset"], true);
}

#[test]
fn weak_correlation_exits_five() {
    let t = tempfile::tempdir().unwrap();
    recording(t.path(), 0, true);
    let o = foldcap(
        t.path(),
        &["sync", "--pattern", "accordion-r", "--capacitance", "cap.csv", "--markers", "markers.csv", "-o", "w"],
    );
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&t.path().join("w/sync.json"))["weak"], true);
    assert!(t.path().join("w/capacitance.csv").exists());
}

#[test]
fn every_subcommand_has_help() {
    let t = tempfile::tempdir().unwrap();
    for sub in ["gen", "sim", "train", "eval", "reconstruct", "sync"] {
        let o = foldcap(t.path(), &[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"));
    }
}
