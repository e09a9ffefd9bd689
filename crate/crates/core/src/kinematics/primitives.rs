use serde::{Deserialize, Serialize};

use super::pattern::{Family, FoldPattern};
use super::state::FoldState;
use super::surface::{row_points, Point3, Side};
use crate::error::Result;

/// Which three lengths a [`GeometryPrimitives`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveLabels {
    TopBaseDiagonal,
    LeftRightDiagonal,
}

impl PrimitiveLabels {
    pub fn for_pattern(pattern: &FoldPattern) -> Self {
        if pattern.kind.is_quadrilateral() {
            PrimitiveLabels::TopBaseDiagonal
        } else {
            PrimitiveLabels::LeftRightDiagonal
        }
    }

    pub fn names(self) -> [&'static str; 3] {
        match self {
            PrimitiveLabels::TopBaseDiagonal => ["top", "base", "diagonal"],
            PrimitiveLabels::LeftRightDiagonal => ["left", "right", "diagonal"],
        }
    }
}

/// Three summary lengths of a deployed pattern, in centimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryPrimitives {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub labels: PrimitiveLabels,
}

impl GeometryPrimitives {
    pub fn new(values: [f64; 3], labels: PrimitiveLabels) -> Self {
        GeometryPrimitives { p1: values[0], p2: values[1], p3: values[2], labels }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.p1, self.p2, self.p3]
    }
}

fn plan_dist(p: Point3, q: Point3) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn dist(p: Point3, q: Point3) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

/// The corner points the primitives are measured between.
///
/// Quadrilaterals and the Sunray: `(bottom row, top row)`. V-Fold: `(left arm
/// inner row, right arm inner row)`; both start at the hinge.
pub(crate) fn edge_rows(pattern: &FoldPattern, state: &FoldState) -> (Vec<Point3>, Vec<Point3>) {
    match pattern.family() {
        Family::VFold => (
            row_points(pattern, state, Side::Left, 0.0).0,
            row_points(pattern, state, Side::Right, 0.0).0,
        ),
        _ => (
            row_points(pattern, state, Side::Single, 0.0).0,
            row_points(pattern, state, Side::Single, pattern.fixed_edge_len).0,
        ),
    }
}

/// Measure Top/Base/Diagonal (or Left/Right/Diagonal) on the folded state.
///
/// The first two are ground-projected end-to-end extents of the deployable
/// edges; the diagonal is a 3D distance between opposite corners.
pub fn extract_primitives(pattern: &FoldPattern, state: &FoldState) -> Result<GeometryPrimitives> {
    state.validate(pattern)?;
    Ok(primitives_unchecked(pattern, state))
}

pub(crate) fn primitives_unchecked(pattern: &FoldPattern, state: &FoldState) -> GeometryPrimitives {
    let labels = PrimitiveLabels::for_pattern(pattern);
    let (r0, r1) = edge_rows(pattern, state);
    let n = pattern.num_creases;
    let cm = 100.0;
    let vals = match pattern.family() {
        Family::VFold => [
            plan_dist(r0[0], r0[n]),
            plan_dist(r1[0], r1[n]),
            dist(r0[n], r1[n]),
        ],
        Family::Sunray => [
            plan_dist(r0[0], r0[n]),
            plan_dist(r1[0], r1[n]),
            dist(r0[0], r1[n]),
        ],
        Family::Accordion | Family::Chevron => [
            plan_dist(r1[0], r1[n]),
            plan_dist(r0[0], r0[n]),
            dist(r0[0], r1[n]),
        ],
    };
    GeometryPrimitives::new(vals.map(|x| x * cm), labels)
}
