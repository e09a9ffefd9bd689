use serde::{Deserialize, Serialize};

use super::pattern::{Family, FoldPattern};
use super::state::FoldState;
use crate::error::Result;

pub type Point3 = [f64; 3];

/// Layout of one rectangular vertex grid inside a [`SurfaceMesh`].
///
/// Vertices of a sheet are stored row-major starting at `first_vertex`;
/// row `r` sits at patch coordinate `row_v[r]` and its fold-direction edges
/// all have length `row_segment_len[r]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetGrid {
    pub first_vertex: usize,
    pub cols: usize,
    pub row_v: Vec<f64>,
    pub row_segment_len: Vec<f64>,
}

impl SheetGrid {
    pub fn rows(&self) -> usize {
        self.row_v.len()
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        self.first_vertex + row * self.cols + col
    }
}

/// Triangulated folded surface, meters, z up from the virtual ground plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
    /// Panel (bay) index of every face; V-Fold right-arm panels are offset by `num_creases`.
    pub face_panel: Vec<usize>,
    pub sheets: Vec<SheetGrid>,
}

/// Mesh resolution across the patch.
#[derive(Debug, Clone, Copy)]
pub struct MeshOptions {
    /// Rows per sheet; 0 picks the pattern's minimum (2, or 3 for a Chevron).
    pub rows: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions { rows: 0 }
    }
}

/// Fold the pattern into its rigid-panel zig-zag surface.
///
/// Each row across the patch is an isometric zig-zag: bay `i` spans the
/// horizontal extent `sqrt(a² − Δh_i²)`, with `Δh` interpolated linearly
/// between the bottom and top profiles.
pub fn realize_surface(pattern: &FoldPattern, state: &FoldState) -> Result<SurfaceMesh> {
    realize_surface_with(pattern, state, MeshOptions::default())
}

pub fn realize_surface_with(
    pattern: &FoldPattern,
    state: &FoldState,
    opts: MeshOptions,
) -> Result<SurfaceMesh> {
    state.validate(pattern)?;
    let w = pattern.fixed_edge_len;
    let min_rows = if pattern.family() == Family::Chevron { 3 } else { 2 };
    let mut rows = opts.rows.max(min_rows);
    if pattern.family() == Family::Chevron && rows % 2 == 0 {
        // keep a row on the chevron tip
        rows += 1;
    }
    let row_v: Vec<f64> = (0..rows).map(|r| w * r as f64 / (rows - 1) as f64).collect();

    let mut mesh = SurfaceMesh {
        vertices: Vec::new(),
        faces: Vec::new(),
        face_panel: Vec::new(),
        sheets: Vec::new(),
    };
    let arms: &[Side] = if pattern.family() == Family::VFold {
        &[Side::Left, Side::Right]
    } else {
        &[Side::Single]
    };
    for (arm_idx, &side) in arms.iter().enumerate() {
        let first_vertex = mesh.vertices.len();
        let mut seg = Vec::with_capacity(rows);
        for &v in &row_v {
            let (pts, len) = row_points(pattern, state, side, v);
            mesh.vertices.extend(pts);
            seg.push(len);
        }
        let grid = SheetGrid { first_vertex, cols: pattern.num_creases + 1, row_v: row_v.clone(), row_segment_len: seg };
        for r in 0..rows - 1 {
            for i in 0..pattern.num_creases {
                let a = grid.index(r, i);
                let b = grid.index(r, i + 1);
                let c = grid.index(r + 1, i + 1);
                let d = grid.index(r + 1, i);
                let panel = arm_idx * pattern.num_creases + i;
                mesh.faces.push([a, b, c]);
                mesh.faces.push([a, c, d]);
                mesh.face_panel.push(panel);
                mesh.face_panel.push(panel);
            }
        }
        mesh.sheets.push(grid);
    }
    Ok(mesh)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Single,
    Left,
    Right,
}

/// Vertices of the zig-zag row at patch coordinate `v`, plus the row's bay length.
pub(crate) fn row_points(
    pattern: &FoldPattern,
    state: &FoldState,
    side: Side,
    v: f64,
) -> (Vec<Point3>, f64) {
    let n = pattern.num_creases;
    let a = pattern.segment_len_a;
    let w = pattern.fixed_edge_len;
    let t = (v / w).clamp(0.0, 1.0);
    let mut pts = Vec::with_capacity(n + 1);
    match pattern.family() {
        Family::Accordion | Family::Chevron => {
            let shift = if pattern.family() == Family::Chevron {
                pattern.chevron_offset * (1.0 - (2.0 * t - 1.0).abs())
            } else {
                0.0
            };
            let mut x = shift;
            pts.push([x, v, 0.0]);
            for i in 0..n {
                let h = state.height_at(i, t);
                x += (a * a - h * h).sqrt();
                let z = if i % 2 == 0 { h } else { 0.0 };
                pts.push([x, v, z]);
            }
            (pts, a)
        }
        Family::Sunray => {
            let s = pattern.sunray_scale(v);
            let r_mid = pattern.sunray_mid_radius();
            let step = pattern.sunray_step();
            let (mut x, mut y) = (r_mid, 0.0);
            pts.push([s * x, s * y, 0.0]);
            for i in 0..n {
                let h = state.height_at(i, t);
                let dl = (a * a - h * h).sqrt();
                let heading = std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * step;
                x += dl * heading.cos();
                y += dl * heading.sin();
                let z = if i % 2 == 0 { h } else { 0.0 };
                pts.push([s * x, s * y, s * z]);
            }
            (pts, a * s)
        }
        Family::VFold => {
            let (left, right) = state.arm_angles.unwrap_or((0.0, 0.0));
            let (profile, dir, across) = match side {
                Side::Right => (
                    &state.bottom_profile,
                    [right.cos(), -right.sin()],
                    [-right.sin(), -right.cos()],
                ),
                _ => (&state.top_profile, [left.cos(), left.sin()], [-left.sin(), left.cos()]),
            };
            let (mut x, mut y) = (v * across[0], v * across[1]);
            pts.push([x, y, 0.0]);
            for (i, &h) in profile.iter().enumerate() {
                let dl = (a * a - h * h).sqrt();
                x += dl * dir[0];
                y += dl * dir[1];
                let z = if i % 2 == 0 { h } else { 0.0 };
                pts.push([x, y, z]);
            }
            (pts, a)
        }
    }
}

/// Local fold geometry under a point of the developed pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFold {
    /// Developed bay length at this point (scaled by the row radius on a Sunray).
    pub segment_len: f64,
    /// Bay height at this point.
    pub height: f64,
    /// Physical area per unit developed area.
    pub area_scale: f64,
}

/// Bay geometry at developed coordinates `(u, v)`: the panel containing the
/// point and its height, linear across the patch as in [`realize_surface`].
pub fn local_fold(pattern: &FoldPattern, state: &FoldState, u: f64, v: f64) -> LocalFold {
    let n = pattern.num_creases;
    let a = pattern.segment_len_a;
    let t = (v / pattern.fixed_edge_len).clamp(0.0, 1.0);
    let bay = ((u.abs() / a).floor() as usize).min(n - 1);
    match pattern.family() {
        Family::VFold => {
            let h = if u >= 0.0 { state.top_profile[bay] } else { state.bottom_profile[bay] };
            LocalFold { segment_len: a, height: h, area_scale: 1.0 }
        }
        Family::Sunray => {
            let s = pattern.sunray_scale(v);
            LocalFold { segment_len: a * s, height: state.height_at(bay, t) * s, area_scale: s }
        }
        Family::Accordion | Family::Chevron => {
            LocalFold { segment_len: a, height: state.height_at(bay, t), area_scale: 1.0 }
        }
    }
}
