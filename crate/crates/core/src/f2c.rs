//! Folding-to-capacitance physics.
//!
//! A strip over the virtual ground plane is cut into bays of developed length
//! `a`. A bay of width `w` raised by `Δh` covers the ground over
//! `Δl = sqrt(a² − Δh²)` and acts as a parallel plate at distance `Δh`:
//!
//! ```text
//! ΔC = ε·w·Δl/Δh = ε·w·sqrt(a²/Δh² − 1)
//! ΔV = (w/2)·Δh·Δl
//! ```
//!
//! The LC front end reads the channel as a resonance frequency
//! `f = 1 / (2π·sqrt(L·(C0 + C)))`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{
    edge_rows, local_fold, polyline_distance, ChannelLayout, Family, FoldPattern, FoldState,
};

/// Permittivity of air, F/m.
pub const EPSILON_AIR: f64 = 8.854e-12;

/// LC tank of the capacitance-to-digital front end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontendConfig {
    /// Henries.
    pub inductance_l: f64,
    /// Farads.
    pub fixed_cap_c0: f64,
    pub freq_min: f64,
    pub freq_max: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig { inductance_l: 2.2e-6, fixed_cap_c0: 47e-12, freq_min: 1.0e7, freq_max: 2.0e7 }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inductance_l > 0.0 && self.fixed_cap_c0 > 0.0) {
            return Err(Error::Config("inductance and fixed capacitance must be positive".into()));
        }
        if !(self.freq_min > 0.0 && self.freq_max > self.freq_min) {
            return Err(Error::Config("frequency band must satisfy 0 < min < max".into()));
        }
        Ok(())
    }

    /// Resonance of the empty sensor.
    pub fn base_frequency(&self) -> f64 {
        cap_to_freq(0.0, self)
    }
}

/// Sensor capacitance from a resonance reading: `C = 1/(L·(2πf)²) − C0`.
pub fn freq_to_cap(freq_hz: f64, cfg: &FrontendConfig) -> Result<f64> {
    if !(freq_hz >= cfg.freq_min && freq_hz <= cfg.freq_max) {
        return Err(Error::OutOfRange { freq_hz, min_hz: cfg.freq_min, max_hz: cfg.freq_max });
    }
    let c = freq_to_cap_unchecked(freq_hz, cfg);
    if c < 0.0 {
        return Err(Error::NegativeCapacitance(c));
    }
    Ok(c)
}

pub(crate) fn freq_to_cap_unchecked(freq_hz: f64, cfg: &FrontendConfig) -> f64 {
    let omega = 2.0 * PI * freq_hz;
    1.0 / (cfg.inductance_l * omega * omega) - cfg.fixed_cap_c0
}

/// Resonance frequency for sensor capacitance `cap` (inverse of [`freq_to_cap`]).
pub fn cap_to_freq(cap: f64, cfg: &FrontendConfig) -> f64 {
    1.0 / (2.0 * PI * (cfg.inductance_l * (cfg.fixed_cap_c0 + cap)).sqrt())
}

/// Capacitance of one bay: `ε·w·sqrt(a²/Δh² − 1)`.
///
/// `Δh = 0` is a true singularity and is reported; use
/// [`segment_cap_clamped`] to evaluate flat bays.
pub fn segment_cap(a: f64, w: f64, dh: f64, epsilon: f64) -> Result<f64> {
    if dh == 0.0 {
        return Err(Error::Singular(dh));
    }
    if !(dh > 0.0 && dh < a) {
        return Err(Error::InvalidState(format!("height {dh} outside (0, {a})")));
    }
    Ok(segment_cap_raw(a, w, dh, epsilon))
}

#[inline]
fn segment_cap_raw(a: f64, w: f64, dh: f64, epsilon: f64) -> f64 {
    epsilon * w * ((a * a) / (dh * dh) - 1.0).max(0.0).sqrt()
}

/// [`segment_cap`] with heights below `clamp_fraction·a` raised to that floor.
pub fn segment_cap_clamped(a: f64, w: f64, dh: f64, epsilon: f64, clamp_fraction: f64) -> f64 {
    let h = dh.max(a * clamp_fraction).min(a);
    segment_cap_raw(a, w, h, epsilon)
}

/// Bay height from its capacitance: `sqrt((εwa)² / ((εw)² + ΔC²))`.
pub fn cap_to_height(dc: f64, a: f64, w: f64, epsilon: f64) -> f64 {
    let ew = epsilon * w;
    ((ew * a).powi(2) / (ew * ew + dc * dc)).sqrt()
}

/// Volume between one bay and the ground: `(w/2)·Δh·sqrt(a² − Δh²)`.
pub fn segment_volume(a: f64, w: f64, dh: f64) -> f64 {
    0.5 * w * dh * (a * a - dh * dh).max(0.0).sqrt()
}

/// Lumped constants of the volume–capacitance curve.
///
/// `dV = k1·sqrt(k3·q − q²)` with `q = k2/(k2 + ΔC²)`, where under ideal
/// conditions `k1 = (w·a²/2)`, `k2 = (εw)²`, `k3 = 1`; the `r` factors
/// scale each constant away from the ideal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealCurveConstants {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl IdealCurveConstants {
    pub fn new(a: f64, w: f64, epsilon: f64, r1: f64, r2: f64, r3: f64) -> Result<Self> {
        if !(a > 0.0 && w > 0.0 && epsilon > 0.0 && r1 > 0.0 && r2 > 0.0 && r3 > 0.0) {
            return Err(Error::Config("curve constants must all be positive".into()));
        }
        Ok(IdealCurveConstants {
            k1: 0.5 * w * a * a * r1,
            k2: (epsilon * w).powi(2) * r2,
            k3: r3,
            r1,
            r2,
            r3,
        })
    }

    pub fn ideal(a: f64, w: f64, epsilon: f64) -> Self {
        Self::new(a, w, epsilon, 1.0, 1.0, 1.0).expect("positive geometry")
    }
}

/// Bay volume as a function of its capacitance.
pub fn volume_from_capacitance(dc: f64, k: &IdealCurveConstants) -> Result<f64> {
    if !(dc >= 0.0) {
        return Err(Error::Config(format!("capacitance change must be non-negative, got {dc}")));
    }
    let q = k.k2 / (k.k2 + dc * dc);
    let radicand = k.k3 * q - q * q;
    if radicand < 0.0 {
        // q ≤ 1, so with k3 ≥ 1 only rounding can land here
        if radicand > -1e-15 * q {
            return Ok(0.0);
        }
        return Err(Error::NegativeRadicand(radicand));
    }
    Ok(k.k1 * radicand.sqrt())
}

/// Per-bay description of a patch for the analytic segment sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchProfile {
    pub segment_len_a: f64,
    pub widths: Vec<f64>,
    pub heights: Vec<f64>,
    pub epsilon: f64,
}

impl PatchProfile {
    pub fn validate(&self) -> Result<()> {
        if self.widths.len() != self.heights.len() {
            return Err(Error::ShapeMismatch("widths and heights differ in length".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        for (&w, &h) in self.widths.iter().zip(&self.heights) {
            if !(w > 0.0) || !(h >= 0.0 && h < self.segment_len_a) {
                return Err(Error::InvalidState(format!("segment w = {w}, Δh = {h} invalid")));
            }
        }
        Ok(())
    }

    /// Σ ΔV over the segments.
    pub fn volume(&self) -> f64 {
        self.widths
            .iter()
            .zip(&self.heights)
            .map(|(&w, &h)| segment_volume(self.segment_len_a, w, h))
            .sum()
    }

    /// Σ ΔC over the segments, flat ones clamped at `clamp_fraction·a`.
    pub fn capacitance(&self, clamp_fraction: f64) -> f64 {
        self.widths
            .iter()
            .zip(&self.heights)
            .map(|(&w, &h)| segment_cap_clamped(self.segment_len_a, w, h, self.epsilon, clamp_fraction))
            .sum()
    }

    /// Segment decomposition of the whole patch under `state`.
    ///
    /// Exact for states whose heights do not vary across the patch; otherwise
    /// each bay is represented by its mid-width height.
    pub fn from_state(pattern: &FoldPattern, state: &FoldState) -> Result<Self> {
        Self::from_state_strips(pattern, state, 1)
    }

    /// Like [`from_state`](Self::from_state) but slicing the patch into
    /// `strips` bands across its width (midpoint rule).
    pub fn from_state_strips(pattern: &FoldPattern, state: &FoldState, strips: usize) -> Result<Self> {
        state.validate(pattern)?;
        let strips = strips.max(1);
        let a = pattern.segment_len_a;
        let w_total = pattern.fixed_edge_len;
        let n = pattern.num_creases;
        let mut widths = Vec::new();
        let mut heights = Vec::new();
        match pattern.family() {
            Family::Accordion | Family::Chevron => {
                for j in 0..strips {
                    let t = (j as f64 + 0.5) / strips as f64;
                    for i in 0..n {
                        widths.push(w_total / strips as f64);
                        heights.push(state.height_at(i, t));
                    }
                }
            }
            Family::VFold => {
                for prof in [&state.top_profile, &state.bottom_profile] {
                    for &h in prof.iter() {
                        widths.push(w_total);
                        heights.push(h);
                    }
                }
            }
            Family::Sunray => {
                // rows are scaled copies about the apex; integrate the scale³ law per band
                for j in 0..strips {
                    let v0 = w_total * j as f64 / strips as f64;
                    let v1 = w_total * (j + 1) as f64 / strips as f64;
                    let t = (j as f64 + 0.5) / strips as f64;
                    let (s0, s1) = (pattern.sunray_scale(v0), pattern.sunray_scale(v1));
                    let mid_state = FoldState {
                        top_profile: (0..n).map(|i| state.height_at(i, t)).collect(),
                        bottom_profile: (0..n).map(|i| state.height_at(i, t)).collect(),
                        arm_angles: None,
                    };
                    let (row, _) = edge_rows(pattern, &mid_state);
                    let s_ref = pattern.sunray_scale(0.0);
                    for i in 0..n {
                        let p = [row[i][0] / s_ref, row[i][1] / s_ref];
                        let q = [row[i + 1][0] / s_ref, row[i + 1][1] / s_ref];
                        let d = [q[0] - p[0], q[1] - p[1]];
                        let apex_dist = (p[0] * d[1] - p[1] * d[0]).abs() / d[0].hypot(d[1]);
                        widths.push(apex_dist * (s1.powi(3) - s0.powi(3)) / 3.0);
                        heights.push(mid_state.top_profile[i]);
                    }
                }
            }
        }
        Ok(PatchProfile { segment_len_a: a, widths, heights, epsilon: EPSILON_AIR })
    }
}

/// Electrical model of the strips beyond the bay physics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    pub epsilon: f64,
    /// Constant stray capacitance per channel, F.
    pub parasitic_cap: f64,
    /// Flat bays are evaluated at `clamp_fraction·a`.
    pub clamp_fraction: f64,
    /// Path samples per bay length.
    pub samples_per_segment: usize,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            epsilon: EPSILON_AIR,
            parasitic_cap: 30e-12,
            clamp_fraction: 1e-3,
            samples_per_segment: 8,
        }
    }
}

/// Capacitance of one strip: parallel sum of the bay capacitances under its path,
/// plus the parasitic offset.
///
/// Fails with [`Error::ShortCircuit`] if the strip touches another strip of
/// the pattern.
pub fn channel_capacitance(
    pattern: &FoldPattern,
    state: &FoldState,
    layout: &ChannelLayout,
    model: &SensorModel,
) -> Result<f64> {
    for other in &pattern.channel_layouts {
        if other.channel_id == layout.channel_id {
            continue;
        }
        if polyline_distance(&layout.path, &other.path)
            < 0.5 * (layout.strip_width + other.strip_width)
        {
            return Err(Error::ShortCircuit(layout.channel_id, other.channel_id));
        }
    }
    state.validate(pattern)?;
    Ok(strip_capacitance(pattern, state, layout, model))
}

/// All channels of the pattern, validated once.
pub fn channel_capacitances(
    pattern: &FoldPattern,
    state: &FoldState,
    model: &SensorModel,
) -> Result<Vec<f64>> {
    pattern.validate()?;
    state.validate(pattern)?;
    Ok(pattern
        .channel_layouts
        .iter()
        .map(|l| strip_capacitance(pattern, state, l, model))
        .collect())
}

fn strip_capacitance(
    pattern: &FoldPattern,
    state: &FoldState,
    layout: &ChannelLayout,
    model: &SensorModel,
) -> f64 {
    let step = pattern.segment_len_a / model.samples_per_segment.max(1) as f64;
    let mut total = 0.0;
    for seg in layout.path.windows(2) {
        let (p, q) = (seg[0], seg[1]);
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        let count = ((len / step).round() as usize).max(1);
        let ds = len / count as f64;
        for k in 0..count {
            let t = (k as f64 + 0.5) / count as f64;
            let u = p[0] + t * (q[0] - p[0]);
            let v = p[1] + t * (q[1] - p[1]);
            let lf = local_fold(pattern, state, u, v);
            let per_area = segment_cap_clamped(
                lf.segment_len,
                1.0,
                lf.height,
                model.epsilon,
                model.clamp_fraction,
            ) / lf.segment_len;
            total += ds * layout.strip_width * lf.area_scale * per_area;
        }
    }
    total + model.parasitic_cap
}

/// One point of a bay's capacitance/volume/frequency curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub height: f64,
    pub delta_c: f64,
    pub delta_v: f64,
    pub freq_hz: f64,
}

/// Sweep one bay from nearly folded (`Δh → a`) to flat, `points` samples.
pub fn curve_sweep(
    a: f64,
    w: f64,
    model: &SensorModel,
    frontend: &FrontendConfig,
    points: usize,
) -> Vec<CurvePoint> {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let frac = 1.0 - i as f64 / (points - 1) as f64;
            let h = a * frac.min(0.999);
            let dc = segment_cap_clamped(a, w, h, model.epsilon, model.clamp_fraction);
            CurvePoint {
                height: h,
                delta_c: dc,
                delta_v: segment_volume(a, w, h),
                freq_hz: cap_to_freq(model.parasitic_cap + dc, frontend),
            }
        })
        .collect()
}

/// CSV with columns `delta_c_f,delta_v_m3,freq_hz`.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "delta_c_f,delta_v_m3,freq_hz")?;
    for p in points {
        writeln!(out, "{:e},{:e},{:.3}", p.delta_c, p.delta_v, p.freq_hz)?;
    }
    Ok(())
}
