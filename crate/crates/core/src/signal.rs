//! From raw frequency recordings to normalized 30-frame training windows.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::kinematics::{GeometryPrimitives, PrimitiveLabels};

/// Frames per window (one second at 30 Hz).
pub const WINDOW_LEN: usize = 30;
/// Index of the predicted frame inside a window.
pub const TARGET_INDEX: usize = 15;

/// One sample of all channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub ts_ms: i64,
    pub values: Vec<f64>,
}

/// Ground-truth primitives at one timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetFrame {
    pub ts_ms: i64,
    pub primitives: GeometryPrimitives,
}

/// Per-channel statistics used by [`normalize`], kept so the transform can be inverted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Min and max of the mean-removed signal.
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    /// Map a normalized value of `channel` back to the raw unit.
    pub fn invert(&self, channel: usize, y: f64) -> f64 {
        let span = self.max[channel] - self.min[channel];
        self.mean[channel] + self.min[channel] + y * span
    }
}

fn check_frames(frames: &[SensorFrame]) -> Result<usize> {
    let n = frames.first().map(|f| f.values.len()).ok_or(Error::EmptyRecording)?;
    for (i, f) in frames.iter().enumerate() {
        if f.values.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "frame {i} has {} channels, expected {n}",
                f.values.len()
            )));
        }
    }
    Ok(n)
}

/// Per channel: subtract the mean, then min-max scale into `[0, 1]`.
///
/// A constant channel becomes all `0.5`. Needs at least two frames.
pub fn normalize(frames: &[SensorFrame]) -> Result<(Vec<SensorFrame>, NormStats)> {
    if frames.len() < 2 {
        return Err(Error::EmptyRecording);
    }
    let n = check_frames(frames)?;
    let len = frames.len() as f64;
    let mut stats = NormStats { mean: vec![0.0; n], min: vec![f64::INFINITY; n], max: vec![f64::NEG_INFINITY; n] };
    for c in 0..n {
        stats.mean[c] = frames.iter().map(|f| f.values[c]).sum::<f64>() / len;
        for f in frames {
            let x = f.values[c] - stats.mean[c];
            stats.min[c] = stats.min[c].min(x);
            stats.max[c] = stats.max[c].max(x);
        }
    }
    let out = frames
        .iter()
        .map(|f| SensorFrame {
            ts_ms: f.ts_ms,
            values: (0..n)
                .map(|c| {
                    let span = stats.max[c] - stats.min[c];
                    if span > 0.0 {
                        ((f.values[c] - stats.mean[c] - stats.min[c]) / span).clamp(0.0, 1.0)
                    } else {
                        0.5
                    }
                })
                .collect(),
        })
        .collect();
    Ok((out, stats))
}

/// A normalized window and the primitives of its middle frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    /// `WINDOW_LEN × channels`, time-major.
    pub window: Vec<f64>,
    pub target: GeometryPrimitives,
    pub source_ts: i64,
}

/// Sliding windows with step one: `T` frames give `T − 29` windows.
///
/// Frames and targets must match 1:1 by timestamp, with timestamps strictly
/// increasing; anything else is [`Error::Misaligned`].
pub fn make_windows(frames: &[SensorFrame], targets: &[TargetFrame]) -> Result<Vec<WindowSample>> {
    if frames.len() != targets.len() {
        return Err(Error::Misaligned(format!(
            "{} frames but {} targets",
            frames.len(),
            targets.len()
        )));
    }
    for (i, (f, t)) in frames.iter().zip(targets).enumerate() {
        if f.ts_ms != t.ts_ms {
            return Err(Error::Misaligned(format!(
                "row {i}: frame at {} ms, target at {} ms",
                f.ts_ms, t.ts_ms
            )));
        }
        if i > 0 && f.ts_ms <= frames[i - 1].ts_ms {
            return Err(Error::Misaligned(format!("timestamps not increasing at row {i}")));
        }
    }
    if frames.len() < WINDOW_LEN {
        return Err(Error::TooShort { frames: frames.len(), needed: WINDOW_LEN });
    }
    check_frames(frames)?;
    Ok((0..=frames.len() - WINDOW_LEN)
        .map(|j| WindowSample {
            window: frames[j..j + WINDOW_LEN].iter().flat_map(|f| f.values.iter().copied()).collect(),
            target: targets[j + TARGET_INDEX].primitives,
            source_ts: frames[j + TARGET_INDEX].ts_ms,
        })
        .collect())
}

/// One recording session: raw frames plus aligned ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionData {
    pub id: String,
    pub frames: Vec<SensorFrame>,
    pub targets: Vec<TargetFrame>,
}

/// All but the last session train, the last one tests.
pub fn split_sessions(mut sessions: Vec<SessionData>) -> Result<(Vec<SessionData>, SessionData)> {
    if sessions.len() < 2 {
        return Err(Error::InsufficientSessions(sessions.len()));
    }
    let test = sessions.pop().expect("at least two sessions");
    Ok((sessions, test))
}

/// Windows of several sessions packed into flat tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowSet {
    pub channels: usize,
    /// `count × WINDOW_LEN × channels`.
    pub inputs: Vec<f64>,
    /// `count × 3`, centimeters.
    pub targets: Vec<f64>,
    pub source_ts: Vec<i64>,
    /// Index into `session_ids` per window.
    pub session_of: Vec<usize>,
    pub session_ids: Vec<String>,
    pub stats: Vec<NormStats>,
    pub labels: Option<PrimitiveLabels>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.targets.len() / 3
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let s = WINDOW_LEN * self.channels;
        &self.inputs[i * s..(i + 1) * s]
    }

    pub fn target(&self, i: usize) -> [f64; 3] {
        [self.targets[3 * i], self.targets[3 * i + 1], self.targets[3 * i + 2]]
    }

    /// Normalize each session on its own statistics and window it; windows
    /// never span two sessions.
    pub fn from_sessions(sessions: &[SessionData]) -> Result<Self> {
        let mut set = WindowSet::default();
        for (k, s) in sessions.iter().enumerate() {
            let (norm, stats) = normalize(&s.frames)?;
            let wins = make_windows(&norm, &s.targets)?;
            let channels = norm[0].values.len();
            if set.session_ids.is_empty() {
                set.channels = channels;
            } else if channels != set.channels {
                return Err(Error::ShapeMismatch(format!(
                    "session {} has {channels} channels, expected {}",
                    s.id, set.channels
                )));
            }
            set.labels.get_or_insert(s.targets[0].primitives.labels);
            for w in wins {
                set.inputs.extend_from_slice(&w.window);
                set.targets.extend_from_slice(&w.target.to_array());
                set.source_ts.push(w.source_ts);
                set.session_of.push(k);
            }
            set.session_ids.push(s.id.clone());
            set.stats.push(stats);
        }
        Ok(set)
    }

    /// Split off the final `fraction` of windows (by order) as a second set.
    pub fn split_tail(&self, fraction: f64) -> (WindowSet, WindowSet) {
        let n = self.len();
        let tail = ((n as f64 * fraction).round() as usize).min(n.saturating_sub(1));
        let cut = n - tail;
        (self.slice(0, cut), self.slice(cut, n))
    }

    fn slice(&self, from: usize, to: usize) -> WindowSet {
        let s = WINDOW_LEN * self.channels;
        WindowSet {
            channels: self.channels,
            inputs: self.inputs[from * s..to * s].to_vec(),
            targets: self.targets[3 * from..3 * to].to_vec(),
            source_ts: self.source_ts.get(from..to).map(<[i64]>::to_vec).unwrap_or_default(),
            session_of: self.session_of.get(from..to).map(<[usize]>::to_vec).unwrap_or_default(),
            session_ids: self.session_ids.clone(),
            stats: self.stats.clone(),
            labels: self.labels,
        }
    }

    /// Write `windows.bin`, `targets.bin` (little-endian f64) and `manifest.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let bytes = |v: &[f64]| v.iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<u8>>();
        write_atomic(&dir.join("windows.bin"), &bytes(&self.inputs))?;
        write_atomic(&dir.join("targets.bin"), &bytes(&self.targets))?;
        let manifest = WindowManifest {
            count: self.len(),
            window_len: WINDOW_LEN,
            channels: self.channels,
            channel_names: (0..self.channels).map(|c| format!("ch{c}")).collect(),
            target_names: self.labels.map(|l| l.names().map(String::from).to_vec()).unwrap_or_default(),
            labels: self.labels,
            target_index: TARGET_INDEX,
            session_ids: self.session_ids.clone(),
            session_of: self.session_of.clone(),
            source_ts: self.source_ts.clone(),
            norm_stats: self.stats.clone(),
        };
        write_atomic(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let m: WindowManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
        let floats = |name: &str, want: usize| -> Result<Vec<f64>> {
            let raw = fs::read(dir.join(name))?;
            if raw.len() != want * 8 {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: {} bytes, manifest implies {}",
                    raw.len(),
                    want * 8
                )));
            }
            Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        Ok(WindowSet {
            channels: m.channels,
            inputs: floats("windows.bin", m.count * m.window_len * m.channels)?,
            targets: floats("targets.bin", m.count * 3)?,
            source_ts: m.source_ts,
            session_of: m.session_of,
            session_ids: m.session_ids,
            stats: m.norm_stats,
            labels: m.labels,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WindowManifest {
    count: usize,
    window_len: usize,
    channels: usize,
    channel_names: Vec<String>,
    target_names: Vec<String>,
    labels: Option<PrimitiveLabels>,
    target_index: usize,
    session_ids: Vec<String>,
    session_of: Vec<usize>,
    source_ts: Vec<i64>,
    norm_stats: Vec<NormStats>,
}
