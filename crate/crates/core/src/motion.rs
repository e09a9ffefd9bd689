//! Scripted fold motions and the material imperfections layered on top of
//! the ideal sensor stream.
//!
//! A motion is a sequence of [`MotionElement`]s acting on a [`Pose`]: the
//! mean deployment of the two moving edges and their difference, both as
//! fractions of the pattern's deployable range. Poses become [`FoldState`]s
//! through [`pose_to_state`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{Family, FoldPattern, FoldState, MAX_HEIGHT_FRACTION};

/// Frame rate of every generated trajectory.
pub const SAMPLE_RATE_HZ: f64 = 30.0;

/// Default bound on the per-bay height speed, m/s.
pub const DEFAULT_MAX_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    SymmetricOpen,
    SymmetricClose,
    AsymmetricLeft,
    AsymmetricRight,
    DiagonalSkew,
    Hold,
}

impl ElementKind {
    pub const ALL: [ElementKind; 6] = [
        ElementKind::SymmetricOpen,
        ElementKind::SymmetricClose,
        ElementKind::AsymmetricLeft,
        ElementKind::AsymmetricRight,
        ElementKind::DiagonalSkew,
        ElementKind::Hold,
    ];
}

/// One motion primitive. `amplitude` is a fraction of the deployable range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionElement {
    pub kind: ElementKind,
    /// Seconds.
    pub duration: f64,
    pub amplitude: f64,
}

impl MotionElement {
    pub fn new(kind: ElementKind, duration: f64, amplitude: f64) -> Self {
        MotionElement { kind, duration, amplitude }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("element duration must be positive, got {}", self.duration)));
        }
        if !(0.0..=1.0).contains(&self.amplitude) {
            return Err(Error::Config(format!("element amplitude must lie in [0, 1], got {}", self.amplitude)));
        }
        Ok(())
    }

    /// Pose reached at the end of the element when starting from `p`.
    pub fn target(&self, p: Pose) -> Pose {
        let a = self.amplitude;
        match self.kind {
            ElementKind::SymmetricOpen => Pose { mean: p.mean + a, ..p },
            ElementKind::SymmetricClose => Pose { mean: p.mean - a, ..p },
            ElementKind::AsymmetricLeft => Pose { diff: p.diff - a, ..p },
            ElementKind::AsymmetricRight => Pose { diff: p.diff + a, ..p },
            ElementKind::DiagonalSkew => {
                let sign = if p.diff > 0.0 { -1.0 } else { 1.0 };
                Pose { diff: sign * a, ..p }
            }
            ElementKind::Hold => p,
        }
    }
}

/// Deployment of the two moving edges: `top = mean + diff/2`, `bottom = mean - diff/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub mean: f64,
    pub diff: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Pose { mean: 0.5, diff: 0.0 }
    }
}

impl Pose {
    pub fn top(&self) -> f64 {
        self.mean + 0.5 * self.diff
    }

    pub fn bottom(&self) -> f64 {
        self.mean - 0.5 * self.diff
    }

    fn feasible(&self) -> bool {
        let ok = |x: f64| (-1e-12..=1.0 + 1e-12).contains(&x);
        ok(self.top()) && ok(self.bottom())
    }

    fn lerp(a: Pose, b: Pose, s: f64) -> Pose {
        Pose { mean: a.mean + (b.mean - a.mean) * s, diff: a.diff + (b.diff - a.diff) * s }
    }
}

/// Fold states sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub sample_rate: f64,
    pub states: Vec<FoldState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Largest per-frame change of any bay height, m.
    pub fn max_step(&self) -> f64 {
        self.states
            .windows(2)
            .flat_map(|w| {
                let (s0, s1) = (&w[0], &w[1]);
                s0.top_profile
                    .iter()
                    .zip(&s1.top_profile)
                    .chain(s0.bottom_profile.iter().zip(&s1.bottom_profile))
                    .map(|(a, b)| (a - b).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Trajectory generation knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionConfig {
    /// Height speed bound, m/s.
    pub max_speed: f64,
    /// Peak tremor amplitude as a fraction of the deployable range.
    pub tremor: f64,
    pub start: Pose,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig { max_speed: DEFAULT_MAX_SPEED, tremor: 0.01, start: Pose::default() }
    }
}

/// Extent of an edge at deployment fraction `f`.
fn extent(pattern: &FoldPattern, f: f64) -> f64 {
    let (lo, hi) = pattern.deploy_range;
    lo + f.clamp(0.0, 1.0) * (hi - lo)
}

/// Bay height giving a ground-projected row extent `e` for a row scaled by `s`.
pub(crate) fn height_for_extent(pattern: &FoldPattern, e: f64, s: f64) -> f64 {
    let a = pattern.segment_len_a;
    let n = pattern.num_creases as f64;
    let dl = match pattern.family() {
        Family::Sunray => {
            let d = pattern.sunray_arc_angle / n;
            e * (d / 2.0).sin() / (s * (n * d / 2.0).sin())
        }
        _ => e / n,
    };
    (a * a - dl * dl).max(0.0).sqrt().min(MAX_HEIGHT_FRACTION * a)
}

/// Fold state whose deployable edges sit at the pose's extents.
///
/// Quadrilaterals: the top edge follows `pose.top()`, the base edge
/// `pose.bottom()`. Sunray: inner and outer rows. V-Fold: left and right
/// arms, each arm also opening its angle with its own deployment.
pub fn pose_to_state(pattern: &FoldPattern, pose: Pose) -> FoldState {
    let (top, bottom) = (pose.top().clamp(0.0, 1.0), pose.bottom().clamp(0.0, 1.0));
    let (s_top, s_bot) = match pattern.family() {
        Family::Sunray => (pattern.sunray_scale(pattern.fixed_edge_len), pattern.sunray_scale(0.0)),
        _ => (1.0, 1.0),
    };
    let ht = height_for_extent(pattern, extent(pattern, top), s_top);
    let hb = height_for_extent(pattern, extent(pattern, bottom), s_bot);
    let state = FoldState::uniform(pattern, ht, hb);
    if pattern.family() == Family::VFold {
        let (lo, hi) = pattern.arm_angle_range;
        state.with_arm_angles(lo + top * (hi - lo), lo + bottom * (hi - lo))
    } else {
        state
    }
}

fn ease(s: f64) -> f64 {
    0.5 - 0.5 * (PI * s).cos()
}

/// Frames of one element, not including its start pose.
fn element_poses(
    start: Pose,
    el: &MotionElement,
    frames: usize,
    tremor: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Pose> {
    let end = el.target(start);
    let moving = el.kind != ElementKind::Hold && el.amplitude > 0.0;
    // tremor: a few Hz wobble under a sin² envelope, so elements still join smoothly
    let (freq, phase, amp) = if moving && tremor > 0.0 {
        (rng.gen_range(3.0..6.0), rng.gen_range(0.0..2.0 * PI), tremor * rng.gen_range(0.5..1.0))
    } else {
        (0.0, 0.0, 0.0)
    };
    (1..=frames)
        .map(|j| {
            let s = j as f64 / frames as f64;
            let mut p = Pose::lerp(start, end, ease(s));
            if amp > 0.0 {
                let t = j as f64 / SAMPLE_RATE_HZ;
                let env = (PI * s).sin().powi(2);
                p.mean += amp * env * (2.0 * PI * freq * t + phase).sin();
                let (top, bot) = (p.top().clamp(0.0, 1.0), p.bottom().clamp(0.0, 1.0));
                p = Pose { mean: 0.5 * (top + bot), diff: top - bot };
            }
            p
        })
        .collect()
}

fn pose_step(pattern: &FoldPattern, poses: &[Pose], prev: Pose) -> f64 {
    let mut last = pose_to_state(pattern, prev);
    let mut worst: f64 = 0.0;
    for p in poses {
        let s = pose_to_state(pattern, *p);
        for (a, b) in s
            .top_profile
            .iter()
            .zip(&last.top_profile)
            .chain(s.bottom_profile.iter().zip(&last.bottom_profile))
        {
            worst = worst.max((a - b).abs());
        }
        last = s;
    }
    worst
}

/// Cosine-eased trajectory through the elements at 30 Hz.
///
/// Elements whose easing would exceed the speed bound are stretched (with a
/// warning). Fails with [`Error::RangeViolation`] when an element pushes an
/// edge outside the deployable range.
pub fn generate_trajectory(
    pattern: &FoldPattern,
    elements: &[MotionElement],
    seed: u64,
) -> Result<Trajectory> {
    generate_trajectory_with(pattern, elements, seed, &MotionConfig::default())
}

pub fn generate_trajectory_with(
    pattern: &FoldPattern,
    elements: &[MotionElement],
    seed: u64,
    cfg: &MotionConfig,
) -> Result<Trajectory> {
    if elements.is_empty() {
        return Err(Error::Config("motion script has no elements".into()));
    }
    pattern.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = cfg.max_speed / SAMPLE_RATE_HZ;
    let mut pose = cfg.start;
    let mut states = Vec::new();
    for (index, el) in elements.iter().enumerate() {
        el.validate()?;
        let end = el.target(pose);
        if !end.feasible() {
            return Err(Error::RangeViolation {
                index,
                reason: format!(
                    "{:?} by {} leaves the deployable range (top {:.3}, bottom {:.3})",
                    el.kind,
                    el.amplitude,
                    end.top(),
                    end.bottom()
                ),
            });
        }
        let mut frames = ((el.duration * SAMPLE_RATE_HZ).round() as usize).max(1);
        let mut poses;
        loop {
            // the tremor draw is repeated on stretching so the rng stream stays per-element
            let mut trial = rng.clone();
            poses = element_poses(pose, el, frames, cfg.tremor, &mut trial);
            let step = pose_step(pattern, &poses, pose);
            if step <= limit {
                rng = trial;
                break;
            }
            let grown = ((frames as f64 * step / limit * 1.05).ceil() as usize).max(frames + 1);
            log::warn!(
                "element {index} ({:?}) too fast: stretched from {frames} to {grown} frames",
                el.kind
            );
            frames = grown;
        }
        states.extend(poses.iter().map(|p| pose_to_state(pattern, *p)));
        pose = end;
    }
    Ok(Trajectory { sample_rate: SAMPLE_RATE_HZ, states })
}

/// Random feasible element script of exactly `seconds · 30` frames.
///
/// Elements are chained without rests between them, and holds are short,
/// so there are few clean separations between movements.
pub fn random_script(pattern: &FoldPattern, seconds: f64, seed: u64) -> Vec<MotionElement> {
    let _ = pattern;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f_7469_6f6e);
    let total = (seconds * SAMPLE_RATE_HZ).round() as usize;
    let mut used = 0usize;
    let mut pose = Pose::default();
    let mut out = Vec::new();
    while used < total {
        let kind = ElementKind::ALL[rng.gen_range(0..ElementKind::ALL.len())];
        // largest amplitude keeping both edges in range
        let room = match kind {
            ElementKind::SymmetricOpen => 1.0 - pose.top().max(pose.bottom()),
            ElementKind::SymmetricClose => pose.top().min(pose.bottom()),
            ElementKind::AsymmetricLeft => 2.0 * pose.top().min(1.0 - pose.bottom()),
            ElementKind::AsymmetricRight => 2.0 * pose.bottom().min(1.0 - pose.top()),
            ElementKind::DiagonalSkew => 2.0 * pose.mean.min(1.0 - pose.mean),
            ElementKind::Hold => 1.0,
        };
        let room = room.clamp(0.0, 1.0);
        let (amp, secs) = if kind == ElementKind::Hold {
            (0.0, rng.gen_range(0.3..1.2))
        } else {
            if room < 0.05 {
                continue;
            }
            let amp = rng.gen_range(0.3..1.0) * room;
            (amp, rng.gen_range(0.8..3.0) * (0.5 + amp))
        };
        let mut frames = ((secs * SAMPLE_RATE_HZ).round() as usize).max(3);
        frames = frames.min(total - used);
        let el = MotionElement::new(kind, frames as f64 / SAMPLE_RATE_HZ, amp);
        pose = el.target(pose);
        // stay clear of floating-point drift at the bounds
        pose.mean = pose.mean.clamp(0.0, 1.0);
        used += frames;
        out.push(el);
    }
    out
}

/// Signal imperfections of a sample material, applied to a frequency stream.
///
/// Deserializes from a full table or from a preset name (`"cloth"`, `"paper"`, `"ideal"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaterialRepr")]
pub struct MaterialProfile {
    pub name: String,
    /// White noise standard deviation, Hz.
    pub noise_sigma: f64,
    /// Random-walk drift scale, Hz/s (per-step sd is `drift_rate·sqrt(dt)`).
    pub drift_rate: f64,
    /// First-order lag coefficient in `[0, 1)`.
    pub hysteresis_gamma: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MaterialRepr {
    Name(String),
    Table { name: String, noise_sigma: f64, drift_rate: f64, hysteresis_gamma: f64 },
}

impl TryFrom<MaterialRepr> for MaterialProfile {
    type Error = Error;

    fn try_from(r: MaterialRepr) -> Result<Self> {
        match r {
            MaterialRepr::Name(n) => MaterialProfile::by_name(&n),
            MaterialRepr::Table { name, noise_sigma, drift_rate, hysteresis_gamma } => {
                let p = MaterialProfile { name, noise_sigma, drift_rate, hysteresis_gamma };
                p.validate()?;
                Ok(p)
            }
        }
    }
}

impl MaterialProfile {
    pub fn cloth() -> Self {
        MaterialProfile { name: "cloth".into(), noise_sigma: 200.0, drift_rate: 5.0, hysteresis_gamma: 0.02 }
    }

    pub fn paper() -> Self {
        MaterialProfile { name: "paper".into(), noise_sigma: 600.0, drift_rate: 15.0, hysteresis_gamma: 0.15 }
    }

    pub fn ideal() -> Self {
        MaterialProfile { name: "ideal".into(), noise_sigma: 0.0, drift_rate: 0.0, hysteresis_gamma: 0.0 }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "cloth" => Ok(Self::cloth()),
            "paper" => Ok(Self::paper()),
            "ideal" => Ok(Self::ideal()),
            other => Err(Error::Config(format!(
                "unknown material `{other}` (valid: cloth, paper, ideal)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.drift_rate >= 0.0) {
            return Err(Error::Config("material noise and drift must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.hysteresis_gamma) {
            return Err(Error::Config("hysteresis_gamma must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Lag, drift and noise on one channel's frequency stream sampled at `sample_rate`.
pub fn apply_material(
    raw: &[f64],
    profile: &MaterialProfile,
    sample_rate: f64,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / sample_rate;
    let g = profile.hysteresis_gamma;
    let walk = Normal::new(0.0, profile.drift_rate * dt.sqrt()).expect("finite sd");
    let noise = Normal::new(0.0, profile.noise_sigma).expect("finite sd");
    let mut lagged = raw.first().copied().unwrap_or(0.0);
    let mut drift = 0.0;
    raw.iter()
        .map(|&x| {
            lagged = g * lagged + (1.0 - g) * x;
            drift += walk.sample(&mut rng);
            lagged + drift + noise.sample(&mut rng)
        })
        .collect()
}

/// Derive the per-channel seed used by multi-channel corruption.
pub fn channel_seed(seed: u64, channel: usize) -> u64 {
    crate::io_util::fnv1a64(&[seed.to_le_bytes(), (channel as u64).to_le_bytes()].concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{extract_primitives, PatternKind};

    #[test]
    fn hold_gives_identical_states() {
        let p = FoldPattern::preset(PatternKind::AccordionP);
        let t = generate_trajectory(&p, &[MotionElement::new(ElementKind::Hold, 2.0, 0.0)], 1).unwrap();
        assert_eq!(t.len(), 60);
        assert!(t.states.iter().all(|s| *s == t.states[0]));
    }

    #[test]
    fn fifteen_minutes_is_27000_frames() {
        let p = FoldPattern::preset(PatternKind::AccordionP);
        let script = random_script(&p, 900.0, 3);
        let t = generate_trajectory(&p, &script, 3).unwrap();
        assert_eq!(t.len(), 27_000);
        assert!(t.max_step() <= DEFAULT_MAX_SPEED / SAMPLE_RATE_HZ + 1e-15);
        for s in t.states.iter().step_by(97) {
            s.validate(&p).unwrap();
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        for kind in PatternKind::ALL {
            let p = FoldPattern::preset(kind);
            let script = random_script(&p, 20.0, 11);
            let a = generate_trajectory(&p, &script, 11).unwrap();
            let b = generate_trajectory(&p, &script, 11).unwrap();
            assert_eq!(a, b);
            let c = generate_trajectory(&p, &script, 12).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn range_violation_names_the_element() {
        let p = FoldPattern::preset(PatternKind::AccordionR);
        let els = [
            MotionElement::new(ElementKind::SymmetricOpen, 1.0, 0.4),
            MotionElement::new(ElementKind::SymmetricOpen, 1.0, 0.4),
        ];
        match generate_trajectory(&p, &els, 0) {
            Err(Error::RangeViolation { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected range violation, got {other:?}"),
        }
    }

    #[test]
    fn fast_elements_are_stretched() {
        let p = FoldPattern::preset(PatternKind::AccordionR);
        let els = [MotionElement::new(ElementKind::SymmetricOpen, 0.05, 0.5)];
        let cfg = MotionConfig { max_speed: 0.05, ..MotionConfig::default() };
        let t = generate_trajectory_with(&p, &els, 0, &cfg).unwrap();
        assert!(t.len() > 2);
        assert!(t.max_step() <= 0.05 / SAMPLE_RATE_HZ);
    }

    #[test]
    fn pose_extents_match_primitives() {
        for kind in PatternKind::ALL {
            let p = FoldPattern::preset(kind);
            for (top, bot) in [(0.0, 0.0), (1.0, 0.3), (0.25, 0.75)] {
                let pose = Pose { mean: 0.5 * (top + bot), diff: top - bot };
                let s = pose_to_state(&p, pose);
                let g = extract_primitives(&p, &s).unwrap();
                let (lo, hi) = p.deploy_range;
                let want_top = 100.0 * (lo + top * (hi - lo));
                let want_bot = 100.0 * (lo + bot * (hi - lo));
                let (got_top, got_bot) = match p.family() {
                    Family::Sunray => (g.p2, g.p1),
                    Family::VFold => (g.p1, g.p2),
                    _ => (g.p1, g.p2),
                };
                assert!((got_top - want_top).abs() < 1e-9, "{kind} top {got_top} vs {want_top}");
                assert!((got_bot - want_bot).abs() < 1e-9, "{kind} bottom {got_bot} vs {want_bot}");
            }
        }
    }

    #[test]
    fn identity_material_is_passthrough() {
        let x: Vec<f64> = (0..50).map(|i| 13.7e6 + i as f64 * 10.0).collect();
        assert_eq!(apply_material(&x, &MaterialProfile::ideal(), 30.0, 9), x);
    }

    #[test]
    fn material_is_seeded() {
        let x = vec![13.7e6; 100];
        let a = apply_material(&x, &MaterialProfile::cloth(), 30.0, 5);
        assert_eq!(a, apply_material(&x, &MaterialProfile::cloth(), 30.0, 5));
        assert_ne!(a, apply_material(&x, &MaterialProfile::cloth(), 30.0, 6));
        assert!(MaterialProfile::paper().hysteresis_gamma > MaterialProfile::cloth().hysteresis_gamma);
    }

    #[test]
    fn drift_moves_minute_means() {
        let x = vec![13.7e6; 30 * 60 * 5];
        let prof = MaterialProfile { name: "drift".into(), noise_sigma: 0.0, drift_rate: 15.0, hysteresis_gamma: 0.0 };
        let y = apply_material(&x, &prof, 30.0, 2);
        let means: Vec<f64> = y.chunks(1800).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        assert!(means.windows(2).any(|w| (w[0] - w[1]).abs() > 1.0));
    }
}
