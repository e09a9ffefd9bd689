//! `foldcap`: generate, simulate, train, evaluate, reconstruct and synchronize.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use foldcap::config::{ToolConfig, CONFIG_ENV};
use foldcap::data_io::{
    align, align_with_offset, markers_to_primitives, parse_capacitance_csv, parse_markers_csv,
    write_capacitance_csv, write_primitives_csv, MarkerMap,
};
use foldcap::eval::{evaluate, reconstruct_sequence, scatter_svg, write_scatter_csv};
use foldcap::f2c::{cap_to_freq, channel_capacitances, curve_sweep, write_curve_csv};
use foldcap::io_util::write_atomic;
use foldcap::kinematics::{
    export_obj_sequence, realize_surface, FoldPattern, FoldState, GeometryPrimitives, PrimitiveLabels,
};
use foldcap::motion::{generate_trajectory_with, random_script, MaterialProfile};
use foldcap::regressor::{train, Regressor};
use foldcap::session::{
    frame_ts, generate_sessions, load_sessions, read_session_dir, session_name, simulate,
    write_session_dir, SessionMeta,
};
use foldcap::signal::{split_sessions, SessionData, TargetFrame, WindowSet, TARGET_INDEX};
use foldcap::{Error, Result};
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "foldcap", version, about = "Folding-to-capacitance simulation and shape regression")]
struct Cli {
    /// TOML config shared by all commands; flags override it.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic recording sessions.
    Gen(GenArgs),
    /// Simulate one motion script: raw and corrupted streams, primitives, bay curve.
    Sim(SimArgs),
    /// Train the regressor on all sessions but the last.
    Train(TrainArgs),
    /// Score predictions on the held-out session.
    Eval(EvalArgs),
    /// Rebuild meshes for a session as an OBJ sequence.
    Reconstruct(ReconstructArgs),
    /// Align a capacitance recording with marker tracks.
    Sync(SyncArgs),
}

#[derive(Args)]
struct PatternArgs {
    /// Pattern preset (accordion-r, accordion-p, accordion-d, chevron-r, chevron-p, v-fold, sunray).
    #[arg(long)]
    pattern: Option<String>,
    /// Number of sensing channels.
    #[arg(long)]
    channels: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    pattern: PatternArgs,
    #[arg(long)]
    sessions: Option<usize>,
    #[arg(long)]
    minutes: Option<f64>,
    /// cloth, paper or ideal.
    #[arg(long)]
    material: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output data directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    pattern: PatternArgs,
    /// Length of the random script when the config has none, s.
    #[arg(long, default_value_t = 60.0)]
    seconds: f64,
    #[arg(long)]
    material: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Points of the bay curve sweep.
    #[arg(long, default_value_t = 200)]
    curve_points: usize,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Data directory with session_* subdirectories.
    #[arg(long)]
    data: PathBuf,
    /// Model file to write.
    #[arg(long, short)]
    out: PathBuf,
    /// Report path; `<out>.report.json` by default.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Model file; required unless `--oracle`.
    #[arg(long, required_unless_present = "oracle")]
    model: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Use the ground truth as the prediction.
    #[arg(long)]
    oracle: bool,
    /// Output directory for report.json, scatter.csv and scatter.svg.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Model file; without it the session's own primitives are used.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Session directory.
    #[arg(long)]
    session: PathBuf,
    /// Reconstruct at most this many frames.
    #[arg(long)]
    frames: Option<usize>,
    #[command(flatten)]
    pattern: PatternArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SyncArgs {
    #[arg(long)]
    capacitance: PathBuf,
    #[arg(long)]
    markers: PathBuf,
    #[command(flatten)]
    pattern: PatternArgs,
    /// Half-width of the offset search, s.
    #[arg(long)]
    search_window: Option<f64>,
    /// Fixed camera-minus-sensor offset in ms; skips the search.
    #[arg(long, allow_hyphen_values = true)]
    offset_ms: Option<i64>,
    #[arg(long, short)]
    out: PathBuf,
}

/// Outcome of a successful command: the exit status and what it wrote.
struct Done {
    code: u8,
    outputs: Vec<PathBuf>,
    seed: Option<u64>,
}

impl Done {
    fn ok(outputs: Vec<PathBuf>, seed: Option<u64>) -> Self {
        Done { code: 0, outputs, seed }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidPattern(_) => 2,
        Error::Io(_)
        | Error::Json(_)
        | Error::Parse { .. }
        | Error::ChannelCountMismatch { .. }
        | Error::CorruptFile(_)
        | Error::VersionMismatch(_) => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let started = Instant::now();
    let argv: Vec<String> = std::env::args().collect();
    let cfg = match cli.config.as_deref().map(ToolConfig::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let (name, manifest_path) = match &cli.command {
        Command::Gen(a) => ("gen", a.out.join("manifest.json")),
        Command::Sim(a) => ("sim", a.out.join("manifest.json")),
        Command::Train(a) => ("train", sibling(&a.out, "manifest.json")),
        Command::Eval(a) => ("eval", a.out.join("manifest.json")),
        Command::Reconstruct(a) => ("reconstruct", a.out.join("manifest.json")),
        Command::Sync(a) => ("sync", a.out.join("manifest.json")),
    };
    let mut cfg = cfg;
    let mut inputs = Vec::new();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a, &mut cfg),
        Command::Sim(a) => cmd_sim(a, &mut cfg),
        Command::Train(a) => {
            inputs.push(a.data.clone());
            cmd_train(a, &mut cfg)
        }
        Command::Eval(a) => {
            inputs.push(a.data.clone());
            inputs.extend(a.model.clone());
            cmd_eval(a)
        }
        Command::Reconstruct(a) => {
            inputs.push(a.session.clone());
            inputs.extend(a.model.clone());
            cmd_reconstruct(a, &mut cfg)
        }
        Command::Sync(a) => {
            inputs.extend([a.capacitance.clone(), a.markers.clone()]);
            cmd_sync(a, &mut cfg)
        }
    };
    let (code, outputs, seed, error) = match result {
        Ok(d) => (d.code, d.outputs, d.seed, None),
        Err(e) => {
            eprintln!("error: {e}");
            (exit_code(&e), Vec::new(), None, Some(e.to_string()))
        }
    };
    let m = RunManifest {
        command: name.to_string(),
        argv,
        config: cfg,
        seed,
        inputs,
        outputs,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        exit_code: code,
        error,
    };
    // a failed run still leaves its manifest when the output location exists
    let parent_exists = manifest_path.parent().is_none_or(|p| p.as_os_str().is_empty() || p.exists());
    if code == 0 || code == 5 || parent_exists {
        if let Err(e) = m.write(&manifest_path) {
            eprintln!("error: writing manifest: {e}");
            return ExitCode::from(if code == 0 { 3 } else { code });
        }
    }
    ExitCode::from(code)
}

/// `<file>.<suffix>` next to `file`.
fn sibling(file: &Path, suffix: &str) -> PathBuf {
    let mut s = file.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn apply_pattern(cfg: &mut ToolConfig, a: &PatternArgs) -> Result<FoldPattern> {
    if let Some(p) = &a.pattern {
        cfg.pattern.kind = p.parse()?;
    }
    if let Some(c) = a.channels {
        cfg.pattern.channels = c;
    }
    cfg.pattern.build()
}

fn apply_material(cfg: &mut ToolConfig, m: &Option<String>) -> Result<()> {
    if let Some(name) = m {
        cfg.gen.material = MaterialProfile::by_name(name)?;
    }
    Ok(())
}

fn cmd_gen(a: &GenArgs, cfg: &mut ToolConfig) -> Result<Done> {
    let pattern = apply_pattern(cfg, &a.pattern)?;
    apply_material(cfg, &a.material)?;
    if let Some(s) = a.sessions {
        cfg.gen.sessions = s;
    }
    if let Some(m) = a.minutes {
        cfg.gen.minutes = m;
    }
    if let Some(s) = a.seed {
        cfg.gen.seed = s;
    }
    let sessions = generate_sessions(&pattern, &cfg.gen)?;
    let mut outputs = Vec::new();
    for (k, s) in sessions.iter().enumerate() {
        let dir = a.out.join(session_name(k));
        let meta = SessionMeta {
            id: s.id.clone(),
            pattern: pattern.clone(),
            material: cfg.gen.material.name.clone(),
            seed: cfg.gen.seed,
            frames: s.frames.len(),
        };
        write_session_dir(&dir, s, &meta)?;
        log::info!("wrote {} ({} frames)", dir.display(), s.frames.len());
        outputs.push(dir);
    }
    Ok(Done::ok(outputs, Some(cfg.gen.seed)))
}

fn cmd_sim(a: &SimArgs, cfg: &mut ToolConfig) -> Result<Done> {
    let pattern = apply_pattern(cfg, &a.pattern)?;
    apply_material(cfg, &a.material)?;
    if let Some(s) = a.seed {
        cfg.gen.seed = s;
    }
    let seed = cfg.gen.seed;
    if cfg.script.is_empty() {
        cfg.script = random_script(&pattern, a.seconds, seed);
    }
    let traj = generate_trajectory_with(&pattern, &cfg.script, seed, &cfg.gen.motion)?;
    let start = cfg.gen.start_unix_ms;
    let (frames, targets) = simulate(&pattern, &traj, &cfg.gen, seed, start)?;
    let mut raw = Vec::with_capacity(traj.len());
    for (i, s) in traj.states.iter().enumerate() {
        let caps = channel_capacitances(&pattern, s, &cfg.gen.sensor)?;
        let values = caps.into_iter().map(|c| cap_to_freq(c, &cfg.gen.frontend)).collect();
        raw.push(foldcap::signal::SensorFrame { ts_ms: frame_ts(start, i), values });
    }
    let labels = PrimitiveLabels::for_pattern(&pattern);
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let p = a.out.join(name);
        write_atomic(&p, &bytes)?;
        files.push(p);
        Ok(())
    };
    let mut buf = Vec::new();
    write_capacitance_csv(&raw, &mut buf)?;
    put("frequency_ideal.csv", buf)?;
    let mut buf = Vec::new();
    write_capacitance_csv(&frames, &mut buf)?;
    put("capacitance.csv", buf)?;
    let mut buf = Vec::new();
    write_primitives_csv(&targets, labels, &mut buf)?;
    put("primitives.csv", buf)?;
    let mut buf = Vec::new();
    let curve = curve_sweep(pattern.segment_len_a, pattern.patch_width_w, &cfg.gen.sensor, &cfg.gen.frontend, a.curve_points);
    write_curve_csv(&curve, &mut buf)?;
    put("curve.csv", buf)?;
    put("script.toml", ToolConfig::script_toml(&cfg.script)?.into_bytes())?;
    Ok(Done::ok(files, Some(seed)))
}

fn cmd_train(a: &TrainArgs, cfg: &mut ToolConfig) -> Result<Done> {
    let t = &mut cfg.train;
    if let Some(v) = a.max_epochs {
        t.max_epochs = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.lr {
        t.lr0 = v;
    }
    if let Some(v) = a.patience {
        t.patience = v;
    }
    if let Some(v) = a.seed {
        t.seed = v;
    }
    t.validate()?;
    let (sessions, _) = load_sessions(&a.data)?;
    let (train_sessions, _test) = split_sessions(sessions)?;
    let all = WindowSet::from_sessions(&train_sessions)?;
    let (tr, va) = all.split_tail(cfg.train.val_fraction);
    log::info!("{} training and {} validation windows", tr.len(), va.len());
    let model = Regressor::new(all.channels, cfg.train.seed)?;
    let (model, report) = train(model, &tr, &va, &cfg.train)?;
    model.save(&a.out)?;
    let report_path = a.report.clone().unwrap_or_else(|| sibling(&a.out, "report.json"));
    write_atomic(&report_path, &serde_json::to_vec_pretty(&report)?)?;
    log::info!("best validation loss {:.4e} at epoch {}", report.best_val_loss, report.best_epoch);
    Ok(Done::ok(vec![a.out.clone(), report_path], Some(cfg.train.seed)))
}

fn cmd_eval(a: &EvalArgs) -> Result<Done> {
    let (sessions, pattern) = load_sessions(&a.data)?;
    let (_, test) = split_sessions(sessions)?;
    let labels = pattern
        .map(|p| PrimitiveLabels::for_pattern(&p))
        .or_else(|| test.targets.first().map(|t| t.primitives.labels))
        .unwrap_or(PrimitiveLabels::TopBaseDiagonal);
    let (truth, pred) = if a.oracle {
        let truth: Vec<f64> = test.targets.iter().flat_map(|t| t.primitives.to_array()).collect();
        (truth.clone(), truth)
    } else {
        let model = Regressor::load(a.model.as_deref().expect("clap enforces --model"))?;
        let set = WindowSet::from_sessions(std::slice::from_ref(&test))?;
        let pred = model.predict(&set.inputs)?;
        (set.targets, pred)
    };
    let report = evaluate(&truth, &pred, labels)?;
    for s in &report.primitives {
        log::info!("{}: r2 {:.4} rmse {:.3} cm", s.name, s.r2, s.rmse_cm);
    }
    let rp = a.out.join("report.json");
    write_atomic(&rp, &serde_json::to_vec_pretty(&report)?)?;
    let mut csv = Vec::new();
    write_scatter_csv(&truth, &pred, labels, &mut csv)?;
    let cp = a.out.join("scatter.csv");
    write_atomic(&cp, &csv)?;
    let sp = a.out.join("scatter.svg");
    write_atomic(&sp, scatter_svg(&truth, &pred, &report).as_bytes())?;
    Ok(Done::ok(vec![rp, cp, sp], None))
}

/// The session's primitives, or the model's per-window predictions.
fn session_primitives(
    session: &SessionData,
    model: Option<&Path>,
    labels: PrimitiveLabels,
) -> Result<Vec<GeometryPrimitives>> {
    let Some(path) = model else {
        return Ok(session.targets.iter().map(|t| t.primitives).collect());
    };
    let model = Regressor::load(path)?;
    let set = WindowSet::from_sessions(std::slice::from_ref(session))?;
    let pred = model.predict(&set.inputs)?;
    Ok(pred.chunks_exact(3).map(|c| GeometryPrimitives::new([c[0], c[1], c[2]], labels)).collect())
}

fn cmd_reconstruct(a: &ReconstructArgs, cfg: &mut ToolConfig) -> Result<Done> {
    let has_truth = a.session.join("primitives.csv").is_file();
    let (session, meta) = if has_truth {
        read_session_dir(&a.session)?
    } else {
        if a.model.is_none() {
            return Err(Error::Config("session has no primitives.csv; pass --model".into()));
        }
        // a bare recording: placeholder targets only carry the timestamps
        let frames = parse_capacitance_csv(&a.session.join("capacitance.csv"))?;
        let targets = frames
            .iter()
            .map(|f| TargetFrame {
                ts_ms: f.ts_ms,
                primitives: GeometryPrimitives::new([0.0; 3], PrimitiveLabels::TopBaseDiagonal),
            })
            .collect();
        (SessionData { id: String::new(), frames, targets }, None)
    };
    let pattern = match (meta, a.pattern.pattern.is_some() || a.pattern.channels.is_some()) {
        (Some(m), false) => {
            cfg.pattern.kind = m.pattern.kind;
            m.pattern
        }
        _ => apply_pattern(cfg, &a.pattern)?,
    };
    let labels = PrimitiveLabels::for_pattern(&pattern);
    let mut prims = session_primitives(&session, a.model.as_deref(), labels)?;
    if let Some(n) = a.frames {
        prims.truncate(n);
    }
    let mut meshes = Vec::with_capacity(prims.len());
    let mut failed = 0;
    for (i, r) in reconstruct_sequence(&pattern, &prims).into_iter().enumerate() {
        match r {
            Ok(rec) => meshes.push(rec.mesh),
            Err(e) => {
                // keep frame numbering: repeat the last good mesh, flat before the first
                log::warn!("frame {i}: {e}");
                failed += 1;
                let m = match meshes.last() {
                    Some(m) => m.clone(),
                    None => realize_surface(&pattern, &FoldState::flat(&pattern))?,
                };
                meshes.push(m);
            }
        }
    }
    if failed > 0 {
        log::warn!("{failed} of {} frames were infeasible", prims.len());
    }
    let count = export_obj_sequence(&meshes, &a.out)?;
    let offset = if a.model.is_some() { TARGET_INDEX } else { 0 };
    let ts: Vec<TargetFrame> = prims
        .iter()
        .enumerate()
        .map(|(i, p)| TargetFrame { ts_ms: session.frames[i + offset].ts_ms, primitives: *p })
        .collect();
    let mut buf = Vec::new();
    write_primitives_csv(&ts, labels, &mut buf)?;
    let pp = a.out.join("primitives_used.csv");
    write_atomic(&pp, &buf)?;
    log::info!("wrote {count} OBJ files to {}", a.out.display());
    Ok(Done::ok(vec![a.out.clone(), pp], None))
}

fn cmd_sync(a: &SyncArgs, cfg: &mut ToolConfig) -> Result<Done> {
    let pattern = apply_pattern(cfg, &a.pattern)?;
    if let Some(w) = a.search_window {
        cfg.sync.search_window_s = w;
    }
    if let Some(o) = a.offset_ms {
        cfg.sync.offset_ms = Some(o);
    }
    let frames = parse_capacitance_csv(&a.capacitance)?;
    let obs = parse_markers_csv(&a.markers)?;
    let map = cfg.sync.marker_map.unwrap_or_else(|| MarkerMap::for_pattern(&pattern));
    let (targets, dropped) = markers_to_primitives(&obs, &map);
    if dropped > 0 {
        log::warn!("dropped {dropped} marker frames with missing markers");
    }
    let aligned = match cfg.sync.offset_ms {
        Some(o) => align_with_offset(&frames, &targets, o)?,
        None => align(&frames, &targets, cfg.sync.search_window_s)?,
    };
    log::info!("offset {} ms, correlation {:.3}", aligned.offset_ms, aligned.correlation);
    let mut outputs = Vec::new();
    let mut buf = Vec::new();
    write_capacitance_csv(&aligned.frames, &mut buf)?;
    let p = a.out.join("capacitance.csv");
    write_atomic(&p, &buf)?;
    outputs.push(p);
    let mut buf = Vec::new();
    write_primitives_csv(&aligned.targets, map.labels, &mut buf)?;
    let p = a.out.join("primitives.csv");
    write_atomic(&p, &buf)?;
    outputs.push(p);
    let summary = serde_json::json!({
        "offset_ms": aligned.offset_ms,
        "correlation": aligned.correlation,
        "weak": aligned.weak,
        "pairs": aligned.frames.len(),
        "dropped_marker_frames": dropped,
        "manual_offset": cfg.sync.offset_ms.is_some(),
    });
    let p = a.out.join("sync.json");
    write_atomic(&p, &serde_json::to_vec_pretty(&summary)?)?;
    outputs.push(p);
    let session = SessionData { id: "aligned".into(), frames: aligned.frames, targets: aligned.targets };
    match WindowSet::from_sessions(std::slice::from_ref(&session)) {
        Ok(set) => {
            let dir = a.out.join("windows");
            set.save(&dir)?;
            outputs.push(dir);
        }
        Err(e) => log::warn!("no windows written: {e}"),
    }
    let code = if cfg.sync.offset_ms.is_none() && aligned.weak { 5 } else { 0 };
    Ok(Done { code, outputs, seed: None })
}
