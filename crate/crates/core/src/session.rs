//! Synthetic recording sessions and their directory layout.
//!
//! A data directory holds one `session_NN/` per session, each with
//! `capacitance.csv`, `primitives.csv` and `session.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data_io::{
    parse_capacitance_csv, parse_primitives_csv, write_capacitance_csv, write_primitives_csv,
};
use crate::error::{Error, Result};
use crate::f2c::{cap_to_freq, channel_capacitances, FrontendConfig, SensorModel};
use crate::io_util::{fnv1a64, write_atomic};
use crate::kinematics::{extract_primitives, FoldPattern, PrimitiveLabels};
use crate::motion::{
    apply_material, channel_seed, generate_trajectory_with, random_script, MaterialProfile,
    MotionConfig, Trajectory,
};
use crate::signal::{SensorFrame, SessionData, TargetFrame};

/// Default unix start time of the first session, ms.
pub const DEFAULT_START_MS: i64 = 1_700_000_000_000;

/// Everything needed to synthesize a set of sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub sessions: usize,
    pub minutes: f64,
    pub material: MaterialProfile,
    pub seed: u64,
    pub start_unix_ms: i64,
    pub frontend: FrontendConfig,
    pub sensor: SensorModel,
    pub motion: MotionConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            sessions: 4,
            minutes: 15.0,
            material: MaterialProfile::cloth(),
            seed: 0,
            start_unix_ms: DEFAULT_START_MS,
            frontend: FrontendConfig::default(),
            sensor: SensorModel::default(),
            motion: MotionConfig::default(),
        }
    }
}

/// Seed of session `k` derived from the run seed.
pub fn session_seed(seed: u64, k: usize) -> u64 {
    fnv1a64(&[b"session".as_slice(), &seed.to_le_bytes(), &(k as u64).to_le_bytes()].concat())
}

/// Timestamp of frame `i` of a 30 Hz stream starting at `start_ms`.
pub fn frame_ts(start_ms: i64, i: usize) -> i64 {
    start_ms + (i as i64 * 1000 + 15) / 30
}

/// Sensor frames (Hz, material applied) and primitives for a trajectory.
pub fn simulate(
    pattern: &FoldPattern,
    traj: &Trajectory,
    cfg: &GenConfig,
    seed: u64,
    start_ms: i64,
) -> Result<(Vec<SensorFrame>, Vec<TargetFrame>)> {
    cfg.frontend.validate()?;
    cfg.material.validate()?;
    let n = pattern.num_channels();
    let mut raw = vec![Vec::with_capacity(traj.len()); n];
    let mut targets = Vec::with_capacity(traj.len());
    for (i, s) in traj.states.iter().enumerate() {
        let caps = channel_capacitances(pattern, s, &cfg.sensor)?;
        for (c, cap) in caps.into_iter().enumerate() {
            raw[c].push(cap_to_freq(cap, &cfg.frontend));
        }
        targets.push(TargetFrame { ts_ms: frame_ts(start_ms, i), primitives: extract_primitives(pattern, s)? });
    }
    let noisy: Vec<Vec<f64>> = raw
        .iter()
        .enumerate()
        .map(|(c, x)| apply_material(x, &cfg.material, traj.sample_rate, channel_seed(seed, c)))
        .collect();
    let frames = (0..traj.len())
        .map(|i| SensorFrame { ts_ms: frame_ts(start_ms, i), values: noisy.iter().map(|ch| ch[i]).collect() })
        .collect();
    Ok((frames, targets))
}

/// Session `k` of a generated set: random motion script, simulated sensor, ground truth.
pub fn generate_session(pattern: &FoldPattern, cfg: &GenConfig, k: usize) -> Result<SessionData> {
    let seed = session_seed(cfg.seed, k);
    let seconds = cfg.minutes * 60.0;
    let script = random_script(pattern, seconds, seed);
    let traj = generate_trajectory_with(pattern, &script, seed, &cfg.motion)?;
    // sessions an hour apart on the unix clock
    let start = cfg.start_unix_ms + k as i64 * 3_600_000;
    let (frames, targets) = simulate(pattern, &traj, cfg, seed, start)?;
    Ok(SessionData { id: session_name(k), frames, targets })
}

pub fn generate_sessions(pattern: &FoldPattern, cfg: &GenConfig) -> Result<Vec<SessionData>> {
    pattern.validate()?;
    if cfg.sessions == 0 || !(cfg.minutes > 0.0) {
        return Err(Error::Config("need at least one session of positive length".into()));
    }
    (0..cfg.sessions).map(|k| generate_session(pattern, cfg, k)).collect()
}

pub fn session_name(k: usize) -> String {
    format!("session_{k:02}")
}

/// Metadata stored next to a session's CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub pattern: FoldPattern,
    pub material: String,
    pub seed: u64,
    pub frames: usize,
}

/// Write `capacitance.csv`, `primitives.csv` and `session.json` into `dir`.
pub fn write_session_dir(dir: &Path, s: &SessionData, meta: &SessionMeta) -> Result<()> {
    fs::create_dir_all(dir)?;
    let labels = s.targets.first().map_or(PrimitiveLabels::TopBaseDiagonal, |t| t.primitives.labels);
    let mut cap = Vec::new();
    write_capacitance_csv(&s.frames, &mut cap)?;
    write_atomic(&dir.join("capacitance.csv"), &cap)?;
    let mut prim = Vec::new();
    write_primitives_csv(&s.targets, labels, &mut prim)?;
    write_atomic(&dir.join("primitives.csv"), &prim)?;
    write_atomic(&dir.join("session.json"), &serde_json::to_vec_pretty(meta)?)?;
    Ok(())
}

pub fn read_session_dir(dir: &Path) -> Result<(SessionData, Option<SessionMeta>)> {
    let frames = parse_capacitance_csv(&dir.join("capacitance.csv"))?;
    let targets = parse_primitives_csv(&dir.join("primitives.csv"))?;
    let meta_path = dir.join("session.json");
    let meta = if meta_path.exists() {
        Some(serde_json::from_slice(&fs::read(meta_path)?)?)
    } else {
        None
    };
    let id = dir.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    Ok((SessionData { id, frames, targets }, meta))
}

/// Session directories (those holding a `capacitance.csv`) in name order.
pub fn list_session_dirs(data_dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(data_dir)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", data_dir.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("capacitance.csv").is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Load every session of a data directory, with the pattern from the first
/// session's metadata when present.
pub fn load_sessions(data_dir: &Path) -> Result<(Vec<SessionData>, Option<FoldPattern>)> {
    let mut pattern = None;
    let mut out = Vec::new();
    for d in list_session_dirs(data_dir)? {
        let (s, meta) = read_session_dir(&d)?;
        if pattern.is_none() {
            pattern = meta.map(|m| m.pattern);
        }
        out.push(s);
    }
    Ok((out, pattern))
}
