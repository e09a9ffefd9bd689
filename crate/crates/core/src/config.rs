//! The shared TOML configuration file.
//!
//! Every section is optional and missing keys take their defaults:
//!
//! ```toml
//! [pattern]
//! kind = "chevron-r"
//! channels = 8
//! num_creases = 10
//!
//! [gen]
//! sessions = 2
//! minutes = 5.0
//! material = "paper"
//!
//! [train]
//! max_epochs = 50
//!
//! [sync]
//! search_window_s = 1.5
//!
//! [[script]]
//! kind = "symmetric_open"
//! duration = 2.0
//! amplitude = 0.4
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_io::MarkerMap;
use crate::error::{Error, Result};
use crate::kinematics::{ChannelLayout, FoldPattern, Orientation, PatternKind, DEFAULT_CHANNELS};
use crate::motion::MotionElement;
use crate::regressor::TrainConfig;
use crate::session::GenConfig;

/// Environment variable naming the config file when no `--config` is given.
pub const CONFIG_ENV: &str = "FOLDCAP_CONFIG";

/// A preset pattern with optional dimension overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternConfig {
    pub kind: PatternKind,
    pub channels: usize,
    /// Strip orientation for generated layouts; the preset's when absent.
    pub orientation: Option<Orientation>,
    pub fixed_edge_len: Option<f64>,
    pub segment_len_a: Option<f64>,
    pub num_creases: Option<usize>,
    pub patch_width_w: Option<f64>,
    pub sunray_arc_angle: Option<f64>,
    pub chevron_offset: Option<f64>,
    pub deploy_range: Option<(f64, f64)>,
    pub arm_angle_range: Option<(f64, f64)>,
    /// Explicit strips; replaces the generated layouts.
    pub layouts: Option<Vec<ChannelLayout>>,
}

impl Default for PatternConfig {
    fn default() -> Self {
        PatternConfig {
            kind: PatternKind::AccordionP,
            channels: DEFAULT_CHANNELS,
            orientation: None,
            fixed_edge_len: None,
            segment_len_a: None,
            num_creases: None,
            patch_width_w: None,
            sunray_arc_angle: None,
            chevron_offset: None,
            deploy_range: None,
            arm_angle_range: None,
            layouts: None,
        }
    }
}

impl PatternConfig {
    /// Resolve into a validated pattern.
    pub fn build(&self) -> Result<FoldPattern> {
        if self.channels == 0 {
            return Err(Error::Config("pattern.channels must be at least 1".into()));
        }
        let mut p = FoldPattern::preset_with_channels(self.kind, self.channels);
        macro_rules! over {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        over!(fixed_edge_len, segment_len_a, num_creases, patch_width_w, sunray_arc_angle, chevron_offset, deploy_range, arm_angle_range);
        p.channel_layouts = match &self.layouts {
            Some(l) => l.clone(),
            None => p.default_layouts(self.orientation.unwrap_or(self.kind.default_orientation()), self.channels),
        };
        p.validate()?;
        Ok(p)
    }
}

/// Clock alignment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncConfig {
    /// Half-width of the offset search, s.
    pub search_window_s: f64,
    /// Fixed offset (camera minus sensor, ms); skips the search.
    pub offset_ms: Option<i64>,
    /// Marker pairs per primitive; the pattern's default numbering when absent.
    pub marker_map: Option<MarkerMap>,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig { search_window_s: 2.0, offset_ms: None, marker_map: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub pattern: PatternConfig,
    pub gen: GenConfig,
    pub train: TrainConfig,
    pub sync: SyncConfig,
    /// Motion script for single-run simulation; random when empty.
    pub script: Vec<MotionElement>,
}

impl ToolConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ToolConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file. A missing file is an I/O error, a malformed one a config error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Just the `[[script]]` entries, for saving a motion script on its own.
    pub fn script_toml(script: &[MotionElement]) -> Result<String> {
        #[derive(Serialize)]
        struct Only<'a> {
            script: &'a [MotionElement],
        }
        toml::to_string(&Only { script }).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.pattern.build()?;
        self.train.validate()?;
        self.gen.frontend.validate()?;
        self.gen.material.validate()?;
        if !(self.sync.search_window_s >= 0.0) {
            return Err(Error::Config("sync.search_window_s must be non-negative".into()));
        }
        for e in &self.script {
            e.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{ElementKind, MaterialProfile};

    #[test]
    fn empty_file_gives_defaults() {
        let c = ToolConfig::from_toml_str("").unwrap();
        assert_eq!(c, ToolConfig::default());
        assert_eq!(c.train.batch_size, 4096);
        assert_eq!(c.train.lr0, 0.01);
        assert_eq!(c.pattern.build().unwrap(), FoldPattern::preset(PatternKind::AccordionP));
    }

    #[test]
    fn partial_sections_and_overrides() {
        let c = ToolConfig::from_toml_str(
            r#"
            [pattern]
            kind = "chevron-r"
            channels = 8
            [gen]
            minutes = 2.5
            material = "paper"
            [gen.frontend]
            inductance_l = 1.8e-6
            [train]
            max_epochs = 7
            [[script]]
            kind = "hold"
            duration = 1.0
            amplitude = 0.0
            "#,
        )
        .unwrap();
        let p = c.pattern.build().unwrap();
        assert_eq!(p.num_channels(), 8);
        assert_eq!(p.kind, PatternKind::ChevronR);
        assert_eq!(c.gen.material, MaterialProfile::paper());
        assert_eq!(c.gen.sessions, 4);
        assert_eq!(c.gen.frontend.inductance_l, 1.8e-6);
        assert_eq!(c.gen.frontend.fixed_cap_c0, 47e-12);
        assert_eq!(c.train.max_epochs, 7);
        assert_eq!(c.train.batch_size, 4096);
        assert_eq!(c.script[0].kind, ElementKind::Hold);
    }

    #[test]
    fn material_table_form() {
        let c = ToolConfig::from_toml_str(
            "[gen.material]\nname = \"felt\"\nnoise_sigma = 50.0\ndrift_rate = 1.0\nhysteresis_gamma = 0.1\n",
        )
        .unwrap();
        assert_eq!(c.gen.material.name, "felt");
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "[pattern]\nkind = \"origami\"",
            "[pattern]\nnum_creases = 1",
            "[train]\nlr0 = -1.0",
            "[gen]\nmaterial = \"wood\"",
            "[nonsense]\nx = 1",
            "[sync]\nsearch_window_s = -1.0",
        ] {
            assert!(matches!(ToolConfig::from_toml_str(bad), Err(Error::Config(_)) | Err(Error::InvalidPattern(_))), "{bad}");
        }
    }

    #[test]
    fn roundtrips_through_toml() {
        let mut c = ToolConfig::default();
        c.pattern.kind = PatternKind::VFold;
        c.gen.seed = 99;
        c.sync.offset_ms = Some(-120);
        let text = c.to_toml_string().unwrap();
        assert_eq!(ToolConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn script_alone_parses_back() {
        let script = vec![MotionElement::new(ElementKind::SymmetricOpen, 2.0, 0.4), MotionElement::new(ElementKind::Hold, 1.0, 0.0)];
        let text = ToolConfig::script_toml(&script).unwrap();
        assert!(!text.contains("[pattern]"));
        assert_eq!(ToolConfig::from_toml_str(&text).unwrap().script, script);
    }
}
