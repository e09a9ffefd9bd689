//! Pleat patterns, their folded geometry, and the length primitives measured on it.
//!
//! All geometry is in meters except [`GeometryPrimitives`], which is in
//! centimeters like the camera measurements it stands in for.

mod obj;
mod pattern;
mod primitives;
mod state;
mod surface;

pub use obj::{export_obj, export_obj_sequence, parse_obj, write_obj};
pub use pattern::{
    ChannelLayout, Family, FoldPattern, Orientation, PatternKind, DEFAULT_CHANNELS,
};
pub use primitives::{extract_primitives, GeometryPrimitives, PrimitiveLabels};
pub use state::{FoldState, MAX_HEIGHT_FRACTION};
pub use surface::{
    local_fold, realize_surface, realize_surface_with, LocalFold, MeshOptions, Point3, SheetGrid,
    SurfaceMesh,
};

pub(crate) use pattern::polyline_distance;
pub(crate) use primitives::edge_rows;
