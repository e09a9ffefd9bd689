//! Recorded data on disk: capacitance and primitive CSVs, marker tracks, and
//! clock alignment between the sensor and the camera.
//!
//! Formats (headers are exact):
//!
//! - capacitance: `ts_ms,ch0,...,chN-1`, frequencies in Hz
//! - primitives: `ts_ms,top,base,diagonal` or `ts_ms,left,right,diagonal`, cm
//! - markers: `ts_ms,marker_id,x_px,y_px,scale_cm_per_px`

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{
    edge_rows, Family, FoldPattern, FoldState, GeometryPrimitives, PrimitiveLabels,
};
use crate::signal::{SensorFrame, TargetFrame};

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.into(), line, msg: msg.into() }
}

fn read_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

/// Parse a capacitance CSV held in memory; `name` is used in error messages.
pub fn read_capacitance_csv(text: &str, name: &str) -> Result<Vec<SensorFrame>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(name, 1, "empty file"))?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"ts_ms") || cols.len() < 2 {
        return Err(parse_err(name, 1, "header must be ts_ms,ch0,..."));
    }
    for (i, c) in cols[1..].iter().enumerate() {
        if *c != format!("ch{i}") {
            return Err(parse_err(name, 1, format!("column {} should be ch{i}, found `{c}`", i + 1)));
        }
    }
    let n = cols.len() - 1;
    let mut out: Vec<SensorFrame> = Vec::new();
    for (ln, line) in lines {
        let line_no = ln + 1;
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != n + 1 {
            return Err(Error::ChannelCountMismatch {
                path: name.into(),
                line: line_no,
                expected: n,
                found: fields.len().saturating_sub(1),
            });
        }
        let ts: i64 = fields[0]
            .parse()
            .map_err(|_| parse_err(name, line_no, format!("bad timestamp `{}`", fields[0])))?;
        if let Some(prev) = out.last() {
            if ts <= prev.ts_ms {
                return Err(parse_err(
                    name,
                    line_no,
                    format!("timestamp {ts} not after previous {}", prev.ts_ms),
                ));
            }
        }
        let values = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| parse_err(name, line_no, "bad channel value"))?;
        out.push(SensorFrame { ts_ms: ts, values });
    }
    Ok(out)
}

pub fn parse_capacitance_csv(path: &Path) -> Result<Vec<SensorFrame>> {
    read_capacitance_csv(&read_text(path)?, &path.display().to_string())
}

pub fn write_capacitance_csv<W: Write>(frames: &[SensorFrame], mut out: W) -> Result<()> {
    let n = frames.first().map_or(0, |f| f.values.len());
    let header: Vec<String> =
        std::iter::once("ts_ms".to_string()).chain((0..n).map(|c| format!("ch{c}"))).collect();
    writeln!(out, "{}", header.join(","))?;
    for f in frames {
        write!(out, "{}", f.ts_ms)?;
        for v in &f.values {
            write!(out, ",{v:.4}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_primitives_csv(text: &str, name: &str) -> Result<Vec<TargetFrame>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(name, 1, "empty file"))?;
    let labels = match header.trim() {
        "ts_ms,top,base,diagonal" => PrimitiveLabels::TopBaseDiagonal,
        "ts_ms,left,right,diagonal" => PrimitiveLabels::LeftRightDiagonal,
        other => return Err(parse_err(name, 1, format!("unexpected header `{other}`"))),
    };
    let mut out: Vec<TargetFrame> = Vec::new();
    for (ln, line) in lines {
        let line_no = ln + 1;
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 4 {
            return Err(Error::ChannelCountMismatch {
                path: name.into(),
                line: line_no,
                expected: 3,
                found: f.len().saturating_sub(1),
            });
        }
        let ts: i64 =
            f[0].parse().map_err(|_| parse_err(name, line_no, format!("bad timestamp `{}`", f[0])))?;
        if out.last().is_some_and(|p| ts <= p.ts_ms) {
            return Err(parse_err(name, line_no, format!("timestamp {ts} not increasing")));
        }
        let mut v = [0.0; 3];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = f[k + 1]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(name, line_no, "bad primitive value"))?;
        }
        out.push(TargetFrame { ts_ms: ts, primitives: GeometryPrimitives::new(v, labels) });
    }
    Ok(out)
}

pub fn parse_primitives_csv(path: &Path) -> Result<Vec<TargetFrame>> {
    read_primitives_csv(&read_text(path)?, &path.display().to_string())
}

pub fn write_primitives_csv<W: Write>(
    targets: &[TargetFrame],
    labels: PrimitiveLabels,
    mut out: W,
) -> Result<()> {
    let [a, b, c] = labels.names();
    writeln!(out, "ts_ms,{a},{b},{c}")?;
    for t in targets {
        let p = t.primitives;
        writeln!(out, "{},{:.6},{:.6},{:.6}", t.ts_ms, p.p1, p.p2, p.p3)?;
    }
    Ok(())
}

/// One tracked marker in one video frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerObservation {
    pub ts_ms: i64,
    pub marker_id: u32,
    pub x_px: f64,
    pub y_px: f64,
    pub scale_cm_per_px: f64,
}

pub fn read_markers_csv(text: &str, name: &str) -> Result<Vec<MarkerObservation>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(name, 1, "empty file"))?;
    if header.trim() != "ts_ms,marker_id,x_px,y_px,scale_cm_per_px" {
        return Err(parse_err(name, 1, format!("unexpected header `{}`", header.trim())));
    }
    let mut last: BTreeMap<u32, i64> = BTreeMap::new();
    let mut out = Vec::new();
    for (ln, line) in lines {
        let line_no = ln + 1;
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 5 {
            return Err(parse_err(name, line_no, format!("expected 5 fields, found {}", f.len())));
        }
        let bad = |what: &str| parse_err(name, line_no, format!("bad {what}"));
        let ts: i64 = f[0].parse().map_err(|_| bad("timestamp"))?;
        let id: u32 = f[1].parse().map_err(|_| bad("marker id"))?;
        let num = |s: &str, what: &str| s.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(what));
        let obs = MarkerObservation {
            ts_ms: ts,
            marker_id: id,
            x_px: num(f[2], "x")?,
            y_px: num(f[3], "y")?,
            scale_cm_per_px: num(f[4], "scale")?,
        };
        if obs.scale_cm_per_px <= 0.0 {
            return Err(parse_err(name, line_no, "scale must be positive"));
        }
        if let Some(prev) = last.insert(id, ts) {
            if ts <= prev {
                return Err(parse_err(name, line_no, format!("marker {id}: timestamp {ts} not increasing")));
            }
        }
        out.push(obs);
    }
    Ok(out)
}

pub fn parse_markers_csv(path: &Path) -> Result<Vec<MarkerObservation>> {
    read_markers_csv(&read_text(path)?, &path.display().to_string())
}

pub fn write_markers_csv<W: Write>(obs: &[MarkerObservation], mut out: W) -> Result<()> {
    writeln!(out, "ts_ms,marker_id,x_px,y_px,scale_cm_per_px")?;
    for o in obs {
        writeln!(out, "{},{},{:.4},{:.4},{}", o.ts_ms, o.marker_id, o.x_px, o.y_px, o.scale_cm_per_px)?;
    }
    Ok(())
}

/// Which marker pair each primitive is measured between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerMap {
    pub labels: PrimitiveLabels,
    pub pairs: [(u32, u32); 3],
}

impl MarkerMap {
    /// Default corner numbering.
    ///
    /// Quadrilaterals: 0 base start, 1 base end, 2 top end, 3 top start.
    /// Sunray: 0/1 inner row start/end, 2/3 outer row end/start.
    /// V-Fold: 0 hinge, 1 left tip, 2 right tip.
    pub fn for_pattern(pattern: &FoldPattern) -> Self {
        let labels = PrimitiveLabels::for_pattern(pattern);
        let pairs = match pattern.family() {
            Family::VFold => [(0, 1), (0, 2), (1, 2)],
            Family::Sunray => [(0, 1), (3, 2), (0, 2)],
            Family::Accordion | Family::Chevron => [(3, 2), (0, 1), (0, 2)],
        };
        MarkerMap { labels, pairs }
    }

    fn ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Marker pixel distances times scale, one primitive triple per video frame.
///
/// Frames missing a required marker are dropped with a warning; the second
/// value is the number of dropped frames.
pub fn markers_to_primitives(
    obs: &[MarkerObservation],
    map: &MarkerMap,
) -> (Vec<TargetFrame>, usize) {
    let mut frames: BTreeMap<i64, BTreeMap<u32, MarkerObservation>> = BTreeMap::new();
    for o in obs {
        frames.entry(o.ts_ms).or_default().insert(o.marker_id, *o);
    }
    let mut out = Vec::with_capacity(frames.len());
    let mut dropped = 0;
    for (ts, marks) in frames {
        if let Some(missing) = map.ids().into_iter().find(|id| !marks.contains_key(id)) {
            log::warn!("{}", Error::MissingMarker { marker: missing, ts_ms: ts });
            dropped += 1;
            continue;
        }
        let len = |(a, b): (u32, u32)| {
            let (p, q) = (marks[&a], marks[&b]);
            let scale = 0.5 * (p.scale_cm_per_px + q.scale_cm_per_px);
            (p.x_px - q.x_px).hypot(p.y_px - q.y_px) * scale
        };
        out.push(TargetFrame {
            ts_ms: ts,
            primitives: GeometryPrimitives::new(map.pairs.map(len), map.labels),
        });
    }
    (out, dropped)
}

/// Corner markers of a folded state as a top-down camera would see them.
///
/// Pixel coordinates are plan coordinates in cm divided by `scale`, shifted
/// by `origin_px`.
pub fn render_markers(
    pattern: &FoldPattern,
    state: &FoldState,
    ts_ms: i64,
    scale_cm_per_px: f64,
    origin_px: [f64; 2],
) -> Vec<MarkerObservation> {
    let (r0, r1) = edge_rows(pattern, state);
    let n = pattern.num_creases;
    let corners = match pattern.family() {
        Family::VFold => vec![r0[0], r0[n], r1[n]],
        _ => vec![r0[0], r0[n], r1[n], r1[0]],
    };
    corners
        .iter()
        .enumerate()
        .map(|(id, p)| MarkerObservation {
            ts_ms,
            marker_id: id as u32,
            x_px: origin_px[0] + 100.0 * p[0] / scale_cm_per_px,
            y_px: origin_px[1] + 100.0 * p[1] / scale_cm_per_px,
            scale_cm_per_px,
        })
        .collect()
}

/// Sensor frames paired with camera targets on the sensor clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedDataset {
    pub frames: Vec<SensorFrame>,
    /// Same timestamps as `frames`.
    pub targets: Vec<TargetFrame>,
    /// Camera clock minus sensor clock, ms.
    pub offset_ms: i64,
    /// Peak |normalized cross-correlation| of the derivatives.
    pub correlation: f64,
    /// Peak correlation fell below [`WEAK_CORRELATION`].
    pub weak: bool,
}

/// Correlation peak below which an alignment is flagged.
pub const WEAK_CORRELATION: f64 = 0.3;

/// Largest allowed gap between a sensor frame and its nearest target, ms.
pub const MAX_PAIR_GAP_MS: i64 = 17;

const MIN_SPAN_MS: i64 = 10_000;

fn interp(ts: &[i64], ys: &[f64], t: f64) -> Option<f64> {
    if ts.is_empty() || t < ts[0] as f64 || t > *ts.last().unwrap() as f64 {
        return None;
    }
    let k = ts.partition_point(|&x| (x as f64) <= t);
    if k == 0 {
        return Some(ys[0]);
    }
    if k == ts.len() {
        return Some(ys[ts.len() - 1]);
    }
    let (t0, t1) = (ts[k - 1] as f64, ts[k] as f64);
    Some(ys[k - 1] + (ys[k] - ys[k - 1]) * (t - t0) / (t1 - t0))
}

/// |NCC| between the first channel's derivative and the first primitive's
/// derivative with the camera read `offset` ms later than the sensor.
fn score(frames: &[SensorFrame], tts: &[i64], tvals: &[f64], offset: f64) -> f64 {
    let mut xs = Vec::with_capacity(frames.len());
    let mut ys = Vec::with_capacity(frames.len());
    let mut prev: Option<(f64, f64)> = None;
    for f in frames {
        match interp(tts, tvals, f.ts_ms as f64 + offset) {
            Some(y) => {
                let x = f.values[0];
                if let Some((px, py)) = prev {
                    xs.push(x - px);
                    ys.push(y - py);
                }
                prev = Some((x, y));
            }
            None => prev = None,
        }
    }
    ncc(&xs, &ys).abs()
}

fn ncc(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

fn span(ts: &[i64]) -> i64 {
    match (ts.first(), ts.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0,
    }
}

/// Align camera targets to the sensor clock.
///
/// Timestamps give the coarse alignment; the offset is then refined within
/// `±search_window_s` by maximizing the derivative cross-correlation (5 ms
/// grid, then 1 ms). Targets are resampled to the sensor frames by nearest
/// neighbour; frames without a target within [`MAX_PAIR_GAP_MS`] are left out.
pub fn align(
    frames: &[SensorFrame],
    targets: &[TargetFrame],
    search_window_s: f64,
) -> Result<AlignedDataset> {
    let tts: Vec<i64> = targets.iter().map(|t| t.ts_ms).collect();
    check_streams(frames, &tts, search_window_s)?;
    let tvals: Vec<f64> = targets.iter().map(|t| t.primitives.p1).collect();
    let w = (search_window_s * 1000.0).round() as i64;
    let mut best = (0i64, f64::NEG_INFINITY);
    let consider = |o: i64, best: &mut (i64, f64)| {
        let s = score(frames, &tts, &tvals, o as f64);
        // ties go to the smaller shift
        if s > best.1 + 1e-12 || ((s - best.1).abs() <= 1e-12 && o.abs() < best.0.abs()) {
            *best = (o, s);
        }
    };
    let mut o = -w;
    while o <= w {
        consider(o, &mut best);
        o += 5;
    }
    let coarse = best.0;
    for o in (coarse - 5).max(-w)..=(coarse + 5).min(w) {
        consider(o, &mut best);
    }
    let (offset, corr) = best;
    let mut out = align_with_offset(frames, targets, offset)?;
    out.correlation = corr.max(0.0);
    out.weak = out.correlation < WEAK_CORRELATION;
    if out.weak {
        log::warn!("weak synchronization: peak correlation {:.3} at {offset} ms", out.correlation);
    }
    Ok(out)
}

fn check_streams(frames: &[SensorFrame], tts: &[i64], window_s: f64) -> Result<()> {
    if frames.is_empty() || tts.is_empty() {
        return Err(Error::NoOverlap);
    }
    let w = (window_s.max(0.0) * 1000.0).round() as i64;
    let (f0, f1) = (frames[0].ts_ms, frames[frames.len() - 1].ts_ms);
    let (t0, t1) = (tts[0], tts[tts.len() - 1]);
    if t0 - w > f1 || t1 + w < f0 {
        return Err(Error::NoOverlap);
    }
    let fspan = f1 - f0;
    if fspan < MIN_SPAN_MS || span(tts) < MIN_SPAN_MS {
        return Err(Error::TooShort {
            frames: frames.len().min(tts.len()),
            needed: (MIN_SPAN_MS / 33) as usize,
        });
    }
    Ok(())
}

/// Resample targets onto the sensor clock with a fixed offset (camera minus sensor, ms).
pub fn align_with_offset(
    frames: &[SensorFrame],
    targets: &[TargetFrame],
    offset_ms: i64,
) -> Result<AlignedDataset> {
    let tts: Vec<i64> = targets.iter().map(|t| t.ts_ms).collect();
    let mut out_f = Vec::new();
    let mut out_t = Vec::new();
    for f in frames {
        let want = f.ts_ms + offset_ms;
        let k = tts.partition_point(|&x| x < want);
        let cand = [k.checked_sub(1), (k < tts.len()).then_some(k)];
        let nearest = cand.into_iter().flatten().min_by_key(|&i| ((tts[i] - want).abs(), i));
        if let Some(i) = nearest {
            if (tts[i] - want).abs() <= MAX_PAIR_GAP_MS {
                out_f.push(f.clone());
                out_t.push(TargetFrame { ts_ms: f.ts_ms, primitives: targets[i].primitives });
            }
        }
    }
    if out_f.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(AlignedDataset { frames: out_f, targets: out_t, offset_ms, correlation: f64::NAN, weak: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{extract_primitives, PatternKind};
    use crate::motion::{pose_to_state, Pose};

    #[test]
    fn parses_three_rows() {
        let f = read_capacitance_csv("ts_ms,ch0,ch1\n0,1.5,2\n33,1.6,2\n67,1.7,2.5\n", "x").unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f[2].values, vec![1.7, 2.5]);
    }

    #[test]
    fn eight_channels_from_header() {
        let hdr = "ts_ms,ch0,ch1,ch2,ch3,ch4,ch5,ch6,ch7";
        let f = read_capacitance_csv(&format!("{hdr}\n5,1,2,3,4,5,6,7,8\n"), "x").unwrap();
        assert_eq!(f[0].values.len(), 8);
    }

    #[test]
    fn duplicate_timestamp_names_line() {
        match read_capacitance_csv("ts_ms,ch0\n0,1\n0,2\n", "cap.csv") {
            Err(Error::Parse { line, path, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(path, std::path::PathBuf::from("cap.csv"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_capacitance_csv("ts_ms,ch0,ch1\n0,1\n", "x"),
            Err(Error::ChannelCountMismatch { line: 2, expected: 2, found: 1, .. })
        ));
    }

    #[test]
    fn csv_roundtrips() {
        let frames: Vec<SensorFrame> = (0..5)
            .map(|i| SensorFrame { ts_ms: 1000 + 33 * i, values: vec![13.7e6 + i as f64, 14e6] })
            .collect();
        let mut buf = Vec::new();
        write_capacitance_csv(&frames, &mut buf).unwrap();
        assert_eq!(read_capacitance_csv(std::str::from_utf8(&buf).unwrap(), "x").unwrap(), frames);

        let t: Vec<TargetFrame> = (0..3)
            .map(|i| TargetFrame {
                ts_ms: i,
                primitives: GeometryPrimitives::new([1.0, 2.5, i as f64], PrimitiveLabels::LeftRightDiagonal),
            })
            .collect();
        let mut buf = Vec::new();
        write_primitives_csv(&t, PrimitiveLabels::LeftRightDiagonal, &mut buf).unwrap();
        assert_eq!(read_primitives_csv(std::str::from_utf8(&buf).unwrap(), "x").unwrap(), t);
    }

    #[test]
    fn square_of_markers() {
        let mk = |id, x, y| MarkerObservation { ts_ms: 0, marker_id: id, x_px: x, y_px: y, scale_cm_per_px: 0.1 };
        let obs = vec![mk(0, 0.0, 0.0), mk(1, 100.0, 0.0), mk(2, 100.0, 100.0), mk(3, 0.0, 100.0)];
        let map = MarkerMap::for_pattern(&FoldPattern::preset(PatternKind::AccordionR));
        let (t, dropped) = markers_to_primitives(&obs, &map);
        assert_eq!(dropped, 0);
        let p = t[0].primitives;
        assert!((p.p1 - 10.0).abs() < 1e-12 && (p.p2 - 10.0).abs() < 1e-12);
        assert!((p.p3 - 14.142135623730951).abs() < 1e-9);
    }

    #[test]
    fn missing_marker_drops_frame() {
        let p = FoldPattern::preset(PatternKind::AccordionR);
        let s = pose_to_state(&p, Pose::default());
        let mut obs: Vec<_> = (0..5).flat_map(|i| render_markers(&p, &s, i * 33, 0.05, [10.0, 10.0])).collect();
        obs.retain(|o| !(o.ts_ms == 66 && o.marker_id == 2));
        let (t, dropped) = markers_to_primitives(&obs, &MarkerMap::for_pattern(&p));
        assert_eq!((t.len(), dropped), (4, 1));
    }

    #[test]
    fn rendered_markers_recover_primitives() {
        for kind in PatternKind::ALL {
            let p = FoldPattern::preset(kind);
            for (m, d) in [(0.1, 0.0), (0.5, 0.4), (0.9, -0.2)] {
                let s = pose_to_state(&p, Pose { mean: m, diff: d });
                let truth = extract_primitives(&p, &s).unwrap();
                let obs = render_markers(&p, &s, 0, 0.04, [320.0, 240.0]);
                let (t, _) = markers_to_primitives(&obs, &MarkerMap::for_pattern(&p));
                for (a, b) in t[0].primitives.to_array().iter().zip(truth.to_array()) {
                    assert!((a - b).abs() < 0.05, "{kind}: {a} vs {b}");
                }
            }
        }
    }

    fn synthetic(shift_ms: i64) -> (Vec<SensorFrame>, Vec<TargetFrame>) {
        let ts = |i: i64| 1_700_000_000_000 + (i * 1000 + 15) / 30;
        let sig = |t: f64| (0.9 * t).sin() + 0.5 * (2.3 * t + 1.0).sin() + 0.3 * (5.1 * t).cos();
        let frames = (0..900)
            .map(|i| SensorFrame { ts_ms: ts(i), values: vec![-sig(i as f64 / 30.0)] })
            .collect();
        let targets = (0..900)
            .map(|i| TargetFrame {
                ts_ms: ts(i) + shift_ms,
                primitives: GeometryPrimitives::new([sig(i as f64 / 30.0), 0.0, 0.0], PrimitiveLabels::TopBaseDiagonal),
            })
            .collect();
        (frames, targets)
    }

    #[test]
    fn recovers_injected_shift() {
        for shift in [0, 400, -400] {
            let (f, t) = synthetic(shift);
            let a = align(&f, &t, 1.5).unwrap();
            assert!((a.offset_ms - shift).abs() <= 17, "{shift}: {}", a.offset_ms);
            assert!(!a.weak);
            assert!(a.frames.iter().zip(&a.targets).all(|(x, y)| x.ts_ms == y.ts_ms));
        }
    }

    #[test]
    fn disjoint_ranges_do_not_overlap() {
        let (f, mut t) = synthetic(0);
        for x in &mut t {
            x.ts_ms += 3_600_000;
        }
        assert!(matches!(align(&f, &t, 1.0), Err(Error::NoOverlap)));
    }
}
