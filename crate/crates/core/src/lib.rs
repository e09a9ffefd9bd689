//! Simulation and analysis of origami structures with embedded single-end
//! capacitive sensing.
//!
//! The crate runs in both directions:
//!
//! * **folding to capacitance**: [`kinematics`] folds a pleat pattern into a
//!   rigid-panel surface, [`f2c`] turns the surface into per-channel
//!   capacitance and LC resonance frequency, and [`motion`] drives it with
//!   scripted motions and material imperfections;
//! * **capacitance to folding**: [`signal`] normalizes and windows the
//!   frequency streams, [`regressor`] learns the three geometry primitives
//!   with a small 1D CNN, and [`eval`] scores the predictions and rebuilds
//!   meshes from them.
//!
//! [`data_io`] reads recorded capacitance and marker files and aligns them in
//! time. The companion guide in `book/` walks through each stage.

pub mod config;
pub mod data_io;
pub mod error;
pub mod eval;
pub mod f2c;
pub mod io_util;
pub mod kinematics;
pub mod motion;
pub mod regressor;
pub mod session;
pub mod signal;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/folding.md")]
    pub struct Folding;
    #[doc = include_str!("../../../book/src/sensing.md")]
    pub struct Sensing;
    #[doc = include_str!("../../../book/src/motion.md")]
    pub struct Motion;
    #[doc = include_str!("../../../book/src/signals.md")]
    pub struct Signals;
    #[doc = include_str!("../../../book/src/regressor.md")]
    pub struct RegressorChapter;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub struct Evaluation;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
