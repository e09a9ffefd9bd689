//! Agreement statistics between predicted and measured primitives, and
//! mesh reconstruction from primitives.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{
    extract_primitives, realize_surface, Family, FoldPattern, FoldState, GeometryPrimitives,
    PrimitiveLabels, SurfaceMesh, MAX_HEIGHT_FRACTION,
};
use crate::motion::height_for_extent;

fn check_pair(truth: &[f64], pred: &[f64], min: usize) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} truth values vs {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    if truth.len() < min {
        return Err(Error::DegenerateInput(format!("need at least {min} pairs, got {}", truth.len())));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Both readings of R².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RSquared {
    /// `1 − SS_res / SS_tot`.
    pub determination: f64,
    /// Squared Pearson correlation.
    pub pearson_sq: f64,
}

pub fn r_squared(truth: &[f64], pred: &[f64]) -> Result<RSquared> {
    check_pair(truth, pred, 2)?;
    let mt = mean(truth);
    let mp = mean(pred);
    let (mut ss_res, mut ss_tot, mut spp, mut stp) = (0.0, 0.0, 0.0, 0.0);
    for (&t, &p) in truth.iter().zip(pred) {
        ss_res += (t - p).powi(2);
        ss_tot += (t - mt).powi(2);
        spp += (p - mp).powi(2);
        stp += (t - mt) * (p - mp);
    }
    if ss_tot == 0.0 {
        return Err(Error::DegenerateInput("truth is constant".into()));
    }
    let pearson_sq = if spp == 0.0 { 0.0 } else { stp * stp / (ss_tot * spp) };
    Ok(RSquared { determination: 1.0 - ss_res / ss_tot, pearson_sq })
}

pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred, 1)?;
    Ok((truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum::<f64>() / truth.len() as f64).sqrt())
}

/// Bias and 95% limits of agreement of `pred − truth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman {
    pub bias: f64,
    /// Sample standard deviation (n − 1).
    pub sd: f64,
    pub loa_low: f64,
    pub loa_high: f64,
}

pub fn bland_altman(truth: &[f64], pred: &[f64]) -> Result<BlandAltman> {
    check_pair(truth, pred, 2)?;
    let d: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| p - t).collect();
    let bias = mean(&d);
    let sd = (d.iter().map(|x| (x - bias).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
    Ok(BlandAltman { bias, sd, loa_low: bias - 1.96 * sd, loa_high: bias + 1.96 * sd })
}

/// Statistics of one primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveStats {
    pub name: String,
    pub r2: f64,
    pub r2_pearson: f64,
    pub rmse_cm: f64,
    pub bland_altman: BlandAltman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub primitives: Vec<PrimitiveStats>,
    pub avg_r2: f64,
    pub avg_r2_pearson: f64,
    pub avg_rmse_cm: f64,
    pub samples: usize,
}

fn column(flat: &[f64], k: usize) -> Vec<f64> {
    flat.iter().skip(k).step_by(3).copied().collect()
}

/// Per-primitive and averaged statistics over flat `n × 3` arrays in cm.
pub fn evaluate(truth: &[f64], pred: &[f64], labels: PrimitiveLabels) -> Result<EvalReport> {
    check_pair(truth, pred, 6)?;
    if truth.len() % 3 != 0 {
        return Err(Error::ShapeMismatch("arrays are not n × 3".into()));
    }
    let mut prims = Vec::with_capacity(3);
    for (k, name) in labels.names().iter().enumerate() {
        let (t, p) = (column(truth, k), column(pred, k));
        let r2 = r_squared(&t, &p)?;
        prims.push(PrimitiveStats {
            name: name.to_string(),
            r2: r2.determination,
            r2_pearson: r2.pearson_sq,
            rmse_cm: rmse(&t, &p)?,
            bland_altman: bland_altman(&t, &p)?,
        });
    }
    let avg = |f: fn(&PrimitiveStats) -> f64| prims.iter().map(f).sum::<f64>() / prims.len() as f64;
    Ok(EvalReport {
        avg_r2: avg(|s| s.r2),
        avg_r2_pearson: avg(|s| s.r2_pearson),
        avg_rmse_cm: avg(|s| s.rmse_cm),
        samples: truth.len() / 3,
        primitives: prims,
    })
}

/// CSV with columns `primitive,truth_cm,pred_cm,mean_cm,diff_cm`.
pub fn write_scatter_csv<W: Write>(
    truth: &[f64],
    pred: &[f64],
    labels: PrimitiveLabels,
    mut out: W,
) -> Result<()> {
    writeln!(out, "primitive,truth_cm,pred_cm,mean_cm,diff_cm")?;
    for (k, name) in labels.names().iter().enumerate() {
        for (t, p) in column(truth, k).iter().zip(column(pred, k)) {
            writeln!(out, "{name},{t:.6},{p:.6},{:.6},{:.6}", 0.5 * (t + p), p - t)?;
        }
    }
    Ok(())
}

/// Correlation (top row) and Bland-Altman (bottom row) scatter plots, one column per primitive.
pub fn scatter_svg(truth: &[f64], pred: &[f64], report: &EvalReport) -> String {
    const W: f64 = 260.0;
    const H: f64 = 220.0;
    const M: f64 = 36.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">"#,
        3.0 * W,
        2.0 * H
    );
    // at most ~2000 points per panel
    let n = truth.len() / 3;
    let step = n.div_ceil(2000).max(1);
    for (k, stats) in report.primitives.iter().enumerate() {
        let (t, p) = (column(truth, k), column(pred, k));
        let means: Vec<f64> = t.iter().zip(&p).map(|(a, b)| 0.5 * (a + b)).collect();
        let diffs: Vec<f64> = t.iter().zip(&p).map(|(a, b)| b - a).collect();
        let ba = &stats.bland_altman;
        let panels = [
            (0.0, &t, &p, format!("{} r2={:.3}", stats.name, stats.r2), None),
            (H, &means, &diffs, format!("{} bias={:.2} cm", stats.name, ba.bias), Some(ba)),
        ];
        for (y0, xs, ys, title, lines) in panels {
            let x0 = k as f64 * W;
            let range = |v: &[f64], extra: &[f64]| {
                let lo = v.iter().chain(extra).cloned().fold(f64::INFINITY, f64::min);
                let hi = v.iter().chain(extra).cloned().fold(f64::NEG_INFINITY, f64::max);
                if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) }
            };
            let (xl, xh) = range(xs, &[]);
            let extra = lines.map_or(vec![], |b| vec![b.loa_low, b.loa_high]);
            let (yl, yh) = if lines.is_some() { range(ys, &extra) } else { range(xs, ys) };
            let (xl, xh) = if lines.is_some() { (xl, xh) } else { (yl, yh) };
            let px = |x: f64| x0 + M + (x - xl) / (xh - xl) * (W - 1.5 * M);
            let py = |y: f64| y0 + H - M - (y - yl) / (yh - yl) * (H - 1.5 * M);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{title}</text>"#, x0 + M, y0 + 14.0);
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
                x0 + M,
                y0 + 0.5 * M,
                W - 1.5 * M,
                H - 1.5 * M
            );
            for i in (0..xs.len()).step_by(step) {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.1}" cy="{:.1}" r="1.2" fill="steelblue" fill-opacity="0.5"/>"#,
                    px(xs[i]),
                    py(ys[i])
                );
            }
            match lines {
                Some(b) => {
                    for (v, dash) in [(b.bias, ""), (b.loa_low, "4 3"), (b.loa_high, "4 3")] {
                        let _ = writeln!(
                            s,
                            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="crimson" stroke-dasharray="{dash}"/>"#,
                            px(xl),
                            py(v),
                            px(xh),
                            py(v)
                        );
                    }
                }
                None => {
                    let _ = writeln!(
                        s,
                        r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="crimson"/>"#,
                        px(xl),
                        py(xl),
                        px(xh),
                        py(xh)
                    );
                }
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// A fold state recovered from primitives.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub state: FoldState,
    pub mesh: SurfaceMesh,
    /// Euclidean distance between requested and reproduced primitives, cm.
    pub residual_cm: f64,
    /// The request was outside the reachable range and got clamped.
    pub clamped: bool,
}

/// Solver variables: (top/left height, bottom/right height[, arm angle sum]).
fn state_of(pattern: &FoldPattern, x: &[f64]) -> FoldState {
    let s = FoldState::uniform(pattern, x[0], x[1]);
    if pattern.family() == Family::VFold {
        s.with_arm_angles(0.5 * x[2], 0.5 * x[2])
    } else {
        s
    }
}

fn bounds(pattern: &FoldPattern) -> Vec<(f64, f64)> {
    let hmax = MAX_HEIGHT_FRACTION * pattern.segment_len_a;
    let mut b = vec![(0.0, hmax), (0.0, hmax)];
    if pattern.family() == Family::VFold {
        b.push((0.0, std::f64::consts::PI - 1e-9));
    }
    b
}

/// Closed-form start: edge extents give the heights, the law of cosines the V-Fold opening.
fn initial_guess(pattern: &FoldPattern, target: [f64; 3]) -> Vec<f64> {
    let m = |cm: f64| cm / 100.0;
    match pattern.family() {
        Family::Sunray => {
            let s_in = pattern.sunray_scale(0.0);
            let s_out = pattern.sunray_scale(pattern.fixed_edge_len);
            // p1 is the inner (bottom) row, p2 the outer (top) row
            vec![
                height_for_extent(pattern, m(target[1]), s_out),
                height_for_extent(pattern, m(target[0]), s_in),
            ]
        }
        Family::VFold => {
            let (l, r, d) = (target[0], target[1], target[2]);
            let c = if l > 0.0 && r > 0.0 { ((l * l + r * r - d * d) / (2.0 * l * r)).clamp(-1.0, 1.0) } else { 1.0 };
            vec![
                height_for_extent(pattern, m(l), 1.0),
                height_for_extent(pattern, m(r), 1.0),
                c.acos(),
            ]
        }
        Family::Accordion | Family::Chevron => vec![
            height_for_extent(pattern, m(target[0]), 1.0),
            height_for_extent(pattern, m(target[1]), 1.0),
        ],
    }
}

fn residuals(pattern: &FoldPattern, x: &[f64], target: [f64; 3]) -> [f64; 3] {
    let g = crate::kinematics::extract_primitives(pattern, &state_of(pattern, x))
        .map(|g| g.to_array())
        .unwrap_or([f64::INFINITY; 3]);
    [g[0] - target[0], g[1] - target[1], g[2] - target[2]]
}

fn norm2(r: &[f64; 3]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Solve the small linear system `a·x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Levenberg-Marquardt on the box-bounded solver variables.
fn levenberg_marquardt(pattern: &FoldPattern, start: Vec<f64>, target: [f64; 3]) -> (Vec<f64>, f64) {
    let bx = bounds(pattern);
    let clamp = |x: &mut Vec<f64>| {
        for (v, &(lo, hi)) in x.iter_mut().zip(&bx) {
            *v = v.clamp(lo, hi);
        }
    };
    let mut x = start;
    clamp(&mut x);
    let mut r = residuals(pattern, &x, target);
    let mut cost = norm2(&r);
    let mut lambda = 1e-3;
    let n = x.len();
    for _ in 0..100 {
        if cost < 1e-20 {
            break;
        }
        // forward differences, stepping inward at the upper bounds
        let mut jac = vec![[0.0; 3]; n];
        for j in 0..n {
            let h = 1e-7 * (bx[j].1 - bx[j].0);
            let mut xp = x.clone();
            let dir = if x[j] + h > bx[j].1 { -1.0 } else { 1.0 };
            xp[j] += dir * h;
            let rp = residuals(pattern, &xp, target);
            for i in 0..3 {
                jac[j][i] = (rp[i] - r[i]) / (dir * h);
            }
        }
        let jtj: Vec<Vec<f64>> =
            (0..n).map(|a| (0..n).map(|b| (0..3).map(|i| jac[a][i] * jac[b][i]).sum()).collect()).collect();
        let jtr: Vec<f64> = (0..n).map(|a| (0..3).map(|i| jac[a][i] * r[i]).sum()).collect();
        let mut improved = false;
        for _ in 0..12 {
            let mut m = jtj.clone();
            for (i, row) in m.iter_mut().enumerate() {
                row[i] += lambda * (jtj[i][i] + 1e-12);
            }
            let Some(dx) = solve(m, jtr.iter().map(|v| -v).collect()) else {
                lambda *= 10.0;
                continue;
            };
            let mut xn: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            clamp(&mut xn);
            let rn = residuals(pattern, &xn, target);
            let cn = norm2(&rn);
            if cn < cost {
                let gain = cost - cn;
                x = xn;
                r = rn;
                cost = cn;
                lambda = (lambda / 3.0).max(1e-12);
                improved = gain > 1e-24;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (x, cost.sqrt())
}

/// Clamp a request into the reachable range; returns whether anything moved.
fn clamp_request(pattern: &FoldPattern, p: [f64; 3]) -> ([f64; 3], bool) {
    let flat = extract_primitives(pattern, &FoldState::flat(pattern)).map(|g| g.to_array()).unwrap_or(p);
    let mut q = p;
    // edge extents cannot exceed the flat state
    for k in 0..2 {
        q[k] = q[k].clamp(0.0, flat[k]);
    }
    q[2] = q[2].max(0.0);
    let moved = q != p;
    if moved {
        log::warn!("primitives {p:?} clamped to {q:?}");
    }
    (q, moved)
}

fn triangle_check(pattern: &FoldPattern, p: [f64; 3]) -> Result<()> {
    let edge_cm = 100.0 * pattern.fixed_edge_len;
    let bound = match pattern.family() {
        Family::VFold => p[0] + p[1],
        // either edge row plus the side edge joins the diagonal's corners
        _ => p[0].max(p[1]) + edge_cm,
    };
    if p[2] > bound {
        return Err(Error::Infeasible(format!(
            "diagonal {:.3} cm exceeds {:.3} cm",
            p[2], bound
        )));
    }
    Ok(())
}

fn finish(pattern: &FoldPattern, x: Vec<f64>, residual: f64, clamped: bool) -> Result<Reconstruction> {
    let limit = 10.0 * pattern.fixed_edge_len; // 10% of the edge, in cm
    if residual > limit {
        return Err(Error::Infeasible(format!(
            "best fit misses the primitives by {residual:.3} cm (limit {limit:.3} cm)"
        )));
    }
    let state = state_of(pattern, &x);
    let mesh = realize_surface(pattern, &state)?;
    Ok(Reconstruction { state, mesh, residual_cm: residual, clamped })
}

/// Fold state and mesh whose primitives best match `prims` (least squares
/// over the two edge heights, plus the arm opening for a V-Fold).
pub fn reconstruct(pattern: &FoldPattern, prims: &GeometryPrimitives) -> Result<Reconstruction> {
    reconstruct_from(pattern, prims, None)
}

fn reconstruct_from(
    pattern: &FoldPattern,
    prims: &GeometryPrimitives,
    previous: Option<&[f64]>,
) -> Result<Reconstruction> {
    pattern.validate()?;
    let raw = prims.to_array();
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Infeasible("non-finite primitives".into()));
    }
    triangle_check(pattern, raw)?;
    let (target, clamped) = clamp_request(pattern, raw);
    let guess = initial_guess(pattern, target);
    let (mut x, mut res) = levenberg_marquardt(pattern, guess.clone(), target);
    if let Some(prev) = previous {
        let (xp, rp) = levenberg_marquardt(pattern, prev.to_vec(), target);
        if rp < res {
            (x, res) = (xp, rp);
        }
    }
    finish(pattern, x, res, clamped)
}

/// Frame-by-frame reconstruction, each solve also seeded from the previous frame.
pub fn reconstruct_sequence(
    pattern: &FoldPattern,
    prims: &[GeometryPrimitives],
) -> Vec<Result<Reconstruction>> {
    let mut prev: Option<Vec<f64>> = None;
    prims
        .iter()
        .map(|p| {
            let r = reconstruct_from(pattern, p, prev.as_deref());
            if let Ok(rec) = &r {
                let mut x = vec![rec.state.top_profile[0], rec.state.bottom_profile[0]];
                if let Some((a, b)) = rec.state.arm_angles {
                    x.push(a + b);
                }
                prev = Some(x);
            }
            r
        })
        .collect()
}
