use serde::{Deserialize, Serialize};

use super::pattern::{Family, FoldPattern};
use crate::error::{Error, Result};

/// Fraction of `a` at which requested heights are clamped.
pub const MAX_HEIGHT_FRACTION: f64 = 0.999;

/// Fold configuration of a pattern at one instant.
///
/// Heights are per bay: bay `i` rises (or falls) by `Δh_i` over its developed
/// length `a`. Bays `2k` and `2k+1` meet at a shared ridge, so their heights
/// must agree; valleys rest on the ground plane.
///
/// For the V-Fold, `top_profile` belongs to the left arm and
/// `bottom_profile` to the right arm. For the Sunray the heights refer to the
/// middle row and scale with the row radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldState {
    pub top_profile: Vec<f64>,
    pub bottom_profile: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm_angles: Option<(f64, f64)>,
}

impl FoldState {
    pub fn flat(pattern: &FoldPattern) -> Self {
        Self::uniform(pattern, 0.0, 0.0)
    }

    /// Every bay of the top (bottom) edge at height `top` (`bottom`).
    pub fn uniform(pattern: &FoldPattern, top: f64, bottom: f64) -> Self {
        let n = pattern.num_creases;
        let arm_angles = (pattern.family() == Family::VFold).then(|| {
            let mid = 0.5 * (pattern.arm_angle_range.0 + pattern.arm_angle_range.1);
            (mid, mid)
        });
        FoldState { top_profile: vec![top; n], bottom_profile: vec![bottom; n], arm_angles }
    }

    /// Build from per-ridge heights (one value per bay pair).
    pub fn from_ridges(top: &[f64], bottom: &[f64]) -> Self {
        let expand = |r: &[f64]| r.iter().flat_map(|&h| [h, h]).collect::<Vec<_>>();
        FoldState { top_profile: expand(top), bottom_profile: expand(bottom), arm_angles: None }
    }

    pub fn with_arm_angles(mut self, left: f64, right: f64) -> Self {
        self.arm_angles = Some((left, right));
        self
    }

    pub fn validate(&self, pattern: &FoldPattern) -> Result<()> {
        let n = pattern.num_creases;
        let a = pattern.segment_len_a;
        for (name, prof) in [("top", &self.top_profile), ("bottom", &self.bottom_profile)] {
            if prof.len() != n {
                return Err(Error::InvalidState(format!(
                    "{name} profile has {} bays, pattern has {n}",
                    prof.len()
                )));
            }
            for (i, &h) in prof.iter().enumerate() {
                if !(h >= 0.0 && h < a) {
                    return Err(Error::InvalidState(format!(
                        "{name} bay {i}: height {h} outside [0, {a})"
                    )));
                }
            }
            for k in 0..n / 2 {
                let (h0, h1) = (prof[2 * k], prof[2 * k + 1]);
                if (h0 - h1).abs() > 1e-12 {
                    return Err(Error::InvalidState(format!(
                        "{name} bays {} and {} share a ridge but differ ({h0} vs {h1})",
                        2 * k,
                        2 * k + 1
                    )));
                }
            }
        }
        if pattern.family() == Family::VFold {
            let (lo, hi) = (0.0, std::f64::consts::FRAC_PI_2);
            match self.arm_angles {
                Some((l, r)) if l >= lo && l < hi && r >= lo && r < hi => {}
                Some(_) => {
                    return Err(Error::InvalidState("arm angles outside [0, pi/2)".into()))
                }
                None => return Err(Error::InvalidState("V-Fold state needs arm angles".into())),
            }
        }
        Ok(())
    }

    /// Clamp heights into `[0, 0.999 a]`, logging a warning when anything moved.
    pub fn clamped(&self, pattern: &FoldPattern) -> FoldState {
        let cap = MAX_HEIGHT_FRACTION * pattern.segment_len_a;
        let mut moved = false;
        let mut fix = |p: &[f64]| {
            p.iter()
                .map(|&h| {
                    let c = if h.is_nan() { 0.0 } else { h.clamp(0.0, cap) };
                    moved |= c != h;
                    c
                })
                .collect::<Vec<_>>()
        };
        let out = FoldState {
            top_profile: fix(&self.top_profile),
            bottom_profile: fix(&self.bottom_profile),
            arm_angles: self.arm_angles,
        };
        if moved {
            log::warn!("fold state clamped to [0, {cap}] m");
        }
        out
    }

    /// Heights of bay `i` interpolated at fraction `t` across the patch (0 = bottom edge).
    pub(crate) fn height_at(&self, bay: usize, t: f64) -> f64 {
        let b = self.bottom_profile[bay];
        let h = self.top_profile[bay];
        b + (h - b) * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::PatternKind;

    #[test]
    fn validation_edges() {
        let p = FoldPattern::preset(PatternKind::AccordionR);
        assert!(FoldState::flat(&p).validate(&p).is_ok());
        assert!(FoldState::uniform(&p, 0.0199, 0.0).validate(&p).is_ok());
        assert!(FoldState::uniform(&p, 0.02, 0.0).validate(&p).is_err());
        assert!(FoldState::uniform(&p, -1e-9, 0.0).validate(&p).is_err());

        let mut s = FoldState::uniform(&p, 0.01, 0.01);
        s.top_profile[1] = 0.012;
        assert!(matches!(s.validate(&p), Err(Error::InvalidState(_))));

        let mut s = FoldState::flat(&p);
        s.bottom_profile.pop();
        assert!(s.validate(&p).is_err());
    }

    #[test]
    fn vfold_needs_angles() {
        let p = FoldPattern::preset(PatternKind::VFold);
        let s = FoldState::uniform(&p, 0.01, 0.01);
        assert!(s.validate(&p).is_ok());
        let mut bare = s.clone();
        bare.arm_angles = None;
        assert!(bare.validate(&p).is_err());
    }

    #[test]
    fn clamp_caps_at_fraction_of_a() {
        let p = FoldPattern::preset(PatternKind::AccordionR);
        let s = FoldState::uniform(&p, 0.05, -0.01).clamped(&p);
        assert_eq!(s.top_profile[0], 0.999 * 0.02);
        assert_eq!(s.bottom_profile[0], 0.0);
        assert!(s.validate(&p).is_ok());
    }
}
