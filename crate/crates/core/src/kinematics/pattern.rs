use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The pleat families the simulator knows how to fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    AccordionR,
    AccordionP,
    AccordionD,
    ChevronR,
    ChevronP,
    VFold,
    Sunray,
}

/// Geometric family shared by several [`PatternKind`]s.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Accordion,
    Chevron,
    VFold,
    Sunray,
}

impl PatternKind {
    pub const ALL: [PatternKind; 7] = [
        PatternKind::AccordionR,
        PatternKind::AccordionP,
        PatternKind::AccordionD,
        PatternKind::ChevronR,
        PatternKind::ChevronP,
        PatternKind::VFold,
        PatternKind::Sunray,
    ];

    pub fn family(self) -> Family {
        match self {
            PatternKind::AccordionR | PatternKind::AccordionP | PatternKind::AccordionD => {
                Family::Accordion
            }
            PatternKind::ChevronR | PatternKind::ChevronP => Family::Chevron,
            PatternKind::VFold => Family::VFold,
            PatternKind::Sunray => Family::Sunray,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::AccordionR => "accordion-r",
            PatternKind::AccordionP => "accordion-p",
            PatternKind::AccordionD => "accordion-d",
            PatternKind::ChevronR => "chevron-r",
            PatternKind::ChevronP => "chevron-p",
            PatternKind::VFold => "v-fold",
            PatternKind::Sunray => "sunray",
        }
    }

    /// Strip orientation used by the preset channel layouts.
    pub fn default_orientation(self) -> Orientation {
        match self {
            PatternKind::AccordionR | PatternKind::ChevronR => Orientation::Perpendicular,
            PatternKind::AccordionP | PatternKind::ChevronP => Orientation::Parallel,
            PatternKind::AccordionD | PatternKind::VFold | PatternKind::Sunray => {
                Orientation::Diagonal
            }
        }
    }

    /// Quadrilateral patterns report Top/Base/Diagonal, the others Left/Right/Diagonal.
    pub fn is_quadrilateral(self) -> bool {
        matches!(self.family(), Family::Accordion | Family::Chevron)
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        let norm = match norm.as_str() {
            "vfold" => "v-fold".to_string(),
            _ => norm,
        };
        PatternKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                let valid: Vec<_> = PatternKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!("unknown pattern '{s}'; valid patterns: {}", valid.join(", ")))
            })
    }
}

/// Strip direction relative to the crease lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Runs across every crease (the "R" samples).
    Perpendicular,
    /// Runs along a crease, inside one bay (the "P" samples).
    Parallel,
    Diagonal,
}

/// One conductive strip, described in developed pattern coordinates.
///
/// `u` runs along the fold direction (0 at the fixed edge), `v` across the
/// patch. For the V-Fold, positive `u` is the left arm and negative `u` the
/// right arm, both measured from the hinge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub channel_id: usize,
    pub orientation: Orientation,
    pub path: Vec<[f64; 2]>,
    pub strip_width: f64,
}

impl ChannelLayout {
    pub fn path_length(&self) -> f64 {
        self.path
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
            .sum()
    }
}

/// A pleated sample: dimensions, motion limits and strip placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPattern {
    pub kind: PatternKind,
    /// Length of the edges held by the guiding arms (patch width across the creases), m.
    pub fixed_edge_len: f64,
    /// Developed length of one bay, m.
    pub segment_len_a: f64,
    /// Number of bays (panels) per sheet; each V-Fold arm has this many.
    pub num_creases: usize,
    /// Default conductive strip width, m.
    pub patch_width_w: f64,
    /// Total fan angle of a Sunray, rad.
    #[serde(default)]
    pub sunray_arc_angle: f64,
    /// Fold-axis offset of a Chevron's middle crease vertex, m.
    #[serde(default)]
    pub chevron_offset: f64,
    /// Motion range of the deployable edges, m.
    pub deploy_range: (f64, f64),
    /// Per-arm angle range of a V-Fold, rad from the symmetry axis.
    #[serde(default)]
    pub arm_angle_range: (f64, f64),
    pub channel_layouts: Vec<ChannelLayout>,
}

pub const DEFAULT_CHANNELS: usize = 4;

impl FoldPattern {
    /// Preset sample with [`DEFAULT_CHANNELS`] strips.
    pub fn preset(kind: PatternKind) -> Self {
        Self::preset_with_channels(kind, DEFAULT_CHANNELS)
    }

    pub fn preset_with_channels(kind: PatternKind, channels: usize) -> Self {
        let mut p = match kind.family() {
            Family::Accordion | Family::Chevron => FoldPattern {
                kind,
                fixed_edge_len: 0.225,
                segment_len_a: 0.02,
                num_creases: 12,
                patch_width_w: 0.02,
                sunray_arc_angle: 0.0,
                chevron_offset: if kind.family() == Family::Chevron { 0.01 } else { 0.0 },
                deploy_range: (0.02, 0.20),
                arm_angle_range: (0.0, 0.0),
                channel_layouts: Vec::new(),
            },
            Family::VFold => FoldPattern {
                kind,
                fixed_edge_len: 0.10,
                segment_len_a: 0.02,
                num_creases: 8,
                patch_width_w: 0.015,
                sunray_arc_angle: 0.0,
                chevron_offset: 0.0,
                deploy_range: (0.02, 0.14),
                arm_angle_range: (10f64.to_radians(), 40f64.to_radians()),
                channel_layouts: Vec::new(),
            },
            Family::Sunray => FoldPattern {
                kind,
                fixed_edge_len: 0.10,
                segment_len_a: 0.02,
                num_creases: 14,
                patch_width_w: 0.015,
                sunray_arc_angle: PI / 3.0,
                chevron_offset: 0.0,
                deploy_range: (0.05, 0.18),
                arm_angle_range: (0.0, 0.0),
                channel_layouts: Vec::new(),
            },
        };
        p.channel_layouts = p.default_layouts(kind.default_orientation(), channels);
        p
    }

    pub fn family(&self) -> Family {
        self.kind.family()
    }

    pub fn num_channels(&self) -> usize {
        self.channel_layouts.len()
    }

    /// Developed length of one sheet along the fold direction, m.
    pub fn developed_len(&self) -> f64 {
        self.num_creases as f64 * self.segment_len_a
    }

    /// Angle between consecutive Sunray bays.
    pub(crate) fn sunray_step(&self) -> f64 {
        self.sunray_arc_angle / self.num_creases as f64
    }

    /// Distance from the Sunray apex to the middle row in the flat state.
    pub(crate) fn sunray_mid_radius(&self) -> f64 {
        self.segment_len_a / (2.0 * (self.sunray_step() / 2.0).sin())
    }

    /// Scale of the Sunray row at `v` relative to the middle row.
    pub(crate) fn sunray_scale(&self, v: f64) -> f64 {
        let r = self.sunray_mid_radius();
        (r - self.fixed_edge_len / 2.0 + v) / r
    }

    /// Strip placements for `channels` strips of the given orientation.
    pub fn default_layouts(&self, orientation: Orientation, channels: usize) -> Vec<ChannelLayout> {
        let w_edge = self.fixed_edge_len;
        let a = self.segment_len_a;
        let len = self.developed_len();
        let n = channels;
        match (self.family(), orientation) {
            (Family::VFold, _) => {
                // split the strips between the arms, diagonal within each arm
                let left = n.div_ceil(2);
                let right = n - left;
                // start one strip width away from the hinge so the arms never touch
                let gap = self.patch_width_w;
                let mut out = diagonal_strips(gap, len, w_edge, left, self.patch_width_w, 1.0);
                out.extend(diagonal_strips(gap, len, w_edge, right, self.patch_width_w, -1.0));
                for (i, c) in out.iter_mut().enumerate() {
                    c.channel_id = i;
                }
                out
            }
            (_, Orientation::Perpendicular) => (0..n)
                .map(|k| {
                    let v = w_edge * (k as f64 + 0.5) / n as f64;
                    ChannelLayout {
                        channel_id: k,
                        orientation,
                        path: vec![[0.0, v], [len, v]],
                        strip_width: self.patch_width_w.min(0.8 * w_edge / n as f64),
                    }
                })
                .collect(),
            (_, Orientation::Parallel) => {
                // two rows of strips (lower and upper half), spread over the bays
                let cols = n.div_ceil(2);
                (0..n)
                    .map(|k| {
                        let col = k % cols;
                        let upper = k / cols;
                        let bay = ((2 * col + 1) * self.num_creases) / (2 * cols);
                        let u = (bay as f64 + 0.5) * a;
                        let (v0, v1) = if upper == 1 {
                            (0.55 * w_edge, 0.95 * w_edge)
                        } else {
                            (0.05 * w_edge, 0.45 * w_edge)
                        };
                        ChannelLayout {
                            channel_id: k,
                            orientation,
                            path: vec![[u, v0], [u, v1]],
                            strip_width: self.patch_width_w.min(0.8 * a),
                        }
                    })
                    .collect()
            }
            (_, Orientation::Diagonal) => {
                diagonal_strips(0.0, len, w_edge, n, self.patch_width_w, 1.0)
            }
        }
    }

    /// Check dimensional invariants and strip placement.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidPattern(m.to_string()));
        if !(self.fixed_edge_len > 0.0) {
            return bad("fixed_edge_len must be positive");
        }
        if !(self.segment_len_a > 0.0) {
            return bad("segment_len_a must be positive");
        }
        if self.num_creases < 2 {
            return bad("num_creases must be at least 2");
        }
        if !(self.patch_width_w > 0.0) {
            return bad("patch_width_w must be positive");
        }
        let (lo, hi) = self.deploy_range;
        if !(lo > 0.0 && hi > lo) {
            return bad("deploy_range must satisfy 0 < min < max");
        }
        if self.developed_len() < hi {
            return bad("num_creases * segment_len_a must cover the maximum deployable length");
        }
        match self.family() {
            Family::Sunray => {
                if !(self.sunray_arc_angle > 0.0 && self.sunray_arc_angle < PI) {
                    return bad("sunray_arc_angle must lie in (0, pi)");
                }
                if self.sunray_mid_radius() <= self.fixed_edge_len / 2.0 {
                    return bad("sunray fan too wide for its patch width");
                }
            }
            Family::VFold => {
                let (a0, a1) = self.arm_angle_range;
                if !(a0 >= 0.0 && a1 >= a0 && a1 < PI / 2.0) {
                    return bad("arm_angle_range must lie in [0, pi/2)");
                }
            }
            Family::Chevron => {
                if self.chevron_offset.abs() >= self.fixed_edge_len {
                    return bad("chevron_offset too large");
                }
            }
            Family::Accordion => {}
        }
        self.validate_layouts()
    }

    fn validate_layouts(&self) -> Result<()> {
        let len = self.developed_len();
        let u_min = if self.family() == Family::VFold { -len } else { 0.0 };
        let tol = 1e-12;
        for c in &self.channel_layouts {
            if c.path.len() < 2 {
                return Err(Error::InvalidPattern(format!(
                    "channel {} path needs at least two points",
                    c.channel_id
                )));
            }
            if !(c.strip_width > 0.0) {
                return Err(Error::InvalidPattern(format!(
                    "channel {} strip width must be positive",
                    c.channel_id
                )));
            }
            for p in &c.path {
                let inside = p[0] >= u_min - tol
                    && p[0] <= len + tol
                    && p[1] >= -tol
                    && p[1] <= self.fixed_edge_len + tol;
                if !inside {
                    return Err(Error::InvalidPattern(format!(
                        "channel {} path point ({}, {}) outside the pattern",
                        c.channel_id, p[0], p[1]
                    )));
                }
            }
            if self.family() == Family::VFold {
                let left = c.path.iter().all(|p| p[0] >= 0.0);
                let right = c.path.iter().all(|p| p[0] <= 0.0);
                if !(left || right) {
                    return Err(Error::InvalidPattern(format!(
                        "channel {} crosses the V-Fold hinge",
                        c.channel_id
                    )));
                }
            }
        }
        for (i, a) in self.channel_layouts.iter().enumerate() {
            for b in &self.channel_layouts[i + 1..] {
                let gap = polyline_distance(&a.path, &b.path);
                if gap < 0.5 * (a.strip_width + b.strip_width) {
                    return Err(Error::ShortCircuit(a.channel_id, b.channel_id));
                }
            }
        }
        Ok(())
    }
}

fn diagonal_strips(
    start: f64,
    len: f64,
    width: f64,
    n: usize,
    strip: f64,
    sign: f64,
) -> Vec<ChannelLayout> {
    if n == 0 {
        return Vec::new();
    }
    let span = len - start;
    let step = span / (n as f64 + 2.0);
    let run = span - (n as f64 - 1.0) * step;
    // keep neighbouring strips apart: perpendicular gap = step * width / hypot(width, run)
    let gap = step * width / width.hypot(run);
    let strip_width = strip.min(0.8 * gap);
    (0..n)
        .map(|k| {
            let u0 = start + k as f64 * step;
            ChannelLayout {
                channel_id: k,
                orientation: Orientation::Diagonal,
                path: vec![[sign * u0, 0.0], [sign * (u0 + run), width]],
                strip_width,
            }
        })
        .collect()
}

fn segment_distance(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> f64 {
    fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    }
    let d1 = cross(q0, q1, p0);
    let d2 = cross(q0, q1, p1);
    let d3 = cross(p0, p1, q0);
    let d4 = cross(p0, p1, q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return 0.0;
    }
    point_segment_distance(p0, q0, q1)
        .min(point_segment_distance(p1, q0, q1))
        .min(point_segment_distance(q0, p0, p1))
        .min(point_segment_distance(q1, p0, p1))
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    d[0].hypot(d[1])
}

pub(crate) fn polyline_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let mut best = f64::INFINITY;
    for sa in a.windows(2) {
        for sb in b.windows(2) {
            best = best.min(segment_distance(sa[0], sa[1], sb[0], sb[1]));
        }
    }
    best
}
