//! Forward and backward passes of the layer kinds.
//!
//! Activations are stored channel-major across the batch: element
//! `(c, b, l)` sits at `c·B·L + b·L + l`. Dense layers see `L = 1`.

use serde::{Deserialize, Serialize};

/// One layer of a [`super::Regressor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    /// 1D convolution with "same" zero padding, odd kernel.
    Conv { cin: usize, cout: usize, kernel: usize },
    Relu,
    /// Non-overlapping max pooling; a trailing remainder is dropped.
    MaxPool { size: usize },
    /// Mean over time.
    GlobalAvgPool,
    Dense { inputs: usize, outputs: usize },
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv { cin, cout, kernel } => cout * cin * kernel + cout,
            LayerSpec::Dense { inputs, outputs } => outputs * inputs + outputs,
            _ => 0,
        }
    }

    /// Output `(channels, length)` for an input of `(channels, length)`, if the shapes fit.
    pub fn output_shape(&self, c: usize, l: usize) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Conv { cin, cout, kernel } => {
                (cin == c && kernel % 2 == 1 && l > 0).then_some((cout, l))
            }
            LayerSpec::Relu => Some((c, l)),
            LayerSpec::MaxPool { size } => (size > 0 && l / size > 0).then_some((c, l / size)),
            LayerSpec::GlobalAvgPool => (l > 0).then_some((c, 1)),
            LayerSpec::Dense { inputs, outputs } => (inputs == c && l == 1).then_some((outputs, 1)),
        }
    }

    /// Fan-in used by the initializer.
    pub(crate) fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv { cin, kernel, .. } => cin * kernel,
            LayerSpec::Dense { inputs, .. } => inputs,
            _ => 0,
        }
    }
}

/// An activation tensor `(c, b, l)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Act {
    pub c: usize,
    pub b: usize,
    pub l: usize,
    pub data: Vec<f64>,
}

impl Act {
    pub fn zeros(c: usize, b: usize, l: usize) -> Self {
        Act { c, b, l, data: vec![0.0; c * b * l] }
    }
}

/// What a layer keeps from the forward pass for its backward pass.
pub(crate) enum Cache {
    None,
    /// im2col matrix of the input.
    Cols(Vec<f64>),
    /// Output of a ReLU (its sign pattern is the mask).
    Mask(Vec<f64>),
    /// Flat input index of every pooled maximum.
    Argmax(Vec<usize>),
    /// Input of a dense layer.
    Input(Vec<f64>),
}

/// `C = A·B + beta·C` with explicit strides, row-major `C`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    assert!(m * n <= c.len());
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn im2col(x: &Act, kernel: usize) -> Vec<f64> {
    let pad = kernel / 2;
    let bl = x.b * x.l;
    let mut cols = vec![0.0; x.c * kernel * bl];
    for ci in 0..x.c {
        for kk in 0..kernel {
            let row = &mut cols[(ci * kernel + kk) * bl..(ci * kernel + kk + 1) * bl];
            for b in 0..x.b {
                let src = &x.data[ci * bl + b * x.l..ci * bl + (b + 1) * x.l];
                let dst = &mut row[b * x.l..(b + 1) * x.l];
                // dst[l] = src[l + kk - pad]
                let lo = pad.saturating_sub(kk);
                let hi = (x.l + pad).saturating_sub(kk).min(x.l);
                if lo < hi {
                    dst[lo..hi].copy_from_slice(&src[lo + kk - pad..hi + kk - pad]);
                }
            }
        }
    }
    cols
}

fn col2im(dcols: &[f64], kernel: usize, c: usize, b: usize, l: usize) -> Act {
    let pad = kernel / 2;
    let bl = b * l;
    let mut dx = Act::zeros(c, b, l);
    for ci in 0..c {
        for kk in 0..kernel {
            let row = &dcols[(ci * kernel + kk) * bl..(ci * kernel + kk + 1) * bl];
            for bi in 0..b {
                let src = &row[bi * l..(bi + 1) * l];
                let dst = &mut dx.data[ci * bl + bi * l..ci * bl + (bi + 1) * l];
                let lo = pad.saturating_sub(kk);
                let hi = (l + pad).saturating_sub(kk).min(l);
                for t in lo..hi {
                    dst[t + kk - pad] += src[t];
                }
            }
        }
    }
    dx
}

/// Forward through one layer. `params` is the layer's own slice.
pub(crate) fn forward(spec: &LayerSpec, params: &[f64], x: Act, keep: bool) -> (Act, Cache) {
    match *spec {
        LayerSpec::Conv { cin, cout, kernel } => {
            let bl = x.b * x.l;
            let cols = im2col(&x, kernel);
            let (w, bias) = params.split_at(cout * cin * kernel);
            let mut y = Act::zeros(cout, x.b, x.l);
            for (co, &bv) in bias.iter().enumerate() {
                y.data[co * bl..(co + 1) * bl].fill(bv);
            }
            gemm(cout, cin * kernel, bl, w, (cin * kernel, 1), &cols, (bl, 1), 1.0, &mut y.data);
            (y, if keep { Cache::Cols(cols) } else { Cache::None })
        }
        LayerSpec::Relu => {
            let mut y = x;
            for v in &mut y.data {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            let cache = if keep { Cache::Mask(y.data.clone()) } else { Cache::None };
            (y, cache)
        }
        LayerSpec::MaxPool { size } => {
            let lo = x.l / size;
            let mut y = Act::zeros(x.c, x.b, lo);
            let mut arg = Vec::with_capacity(if keep { y.data.len() } else { 0 });
            for cb in 0..x.c * x.b {
                for t in 0..lo {
                    let base = cb * x.l + t * size;
                    let mut best = base;
                    for j in base + 1..base + size {
                        if x.data[j] > x.data[best] {
                            best = j;
                        }
                    }
                    y.data[cb * lo + t] = x.data[best];
                    if keep {
                        arg.push(best);
                    }
                }
            }
            (y, if keep { Cache::Argmax(arg) } else { Cache::None })
        }
        LayerSpec::GlobalAvgPool => {
            let mut y = Act::zeros(x.c, x.b, 1);
            let inv = 1.0 / x.l as f64;
            for (cb, out) in y.data.iter_mut().enumerate() {
                *out = x.data[cb * x.l..(cb + 1) * x.l].iter().sum::<f64>() * inv;
            }
            (y, Cache::None)
        }
        LayerSpec::Dense { inputs, outputs } => {
            let b = x.b;
            let (w, bias) = params.split_at(outputs * inputs);
            let mut y = Act::zeros(outputs, b, 1);
            for (o, &bv) in bias.iter().enumerate() {
                y.data[o * b..(o + 1) * b].fill(bv);
            }
            gemm(outputs, inputs, b, w, (inputs, 1), &x.data, (b, 1), 1.0, &mut y.data);
            (y, if keep { Cache::Input(x.data) } else { Cache::None })
        }
    }
}

/// Backward through one layer: accumulates into `grad` (the layer's slice)
/// and returns the gradient with respect to the layer input.
///
/// `in_shape` is the layer's input `(c, l)`.
pub(crate) fn backward(
    spec: &LayerSpec,
    params: &[f64],
    grad: &mut [f64],
    cache: &Cache,
    dy: Act,
    in_shape: (usize, usize),
    need_dx: bool,
) -> Option<Act> {
    let (c_in, l_in) = in_shape;
    let b = dy.b;
    match (*spec, cache) {
        (LayerSpec::Conv { cin, cout, kernel }, Cache::Cols(cols)) => {
            let bl = b * l_in;
            let ck = cin * kernel;
            let (gw, gb) = grad.split_at_mut(cout * ck);
            // dW += dY · colsᵀ
            gemm(cout, bl, ck, &dy.data, (bl, 1), cols, (1, bl), 1.0, gw);
            for (co, g) in gb.iter_mut().enumerate() {
                *g += dy.data[co * bl..(co + 1) * bl].iter().sum::<f64>();
            }
            need_dx.then(|| {
                let w = &params[..cout * ck];
                let mut dcols = vec![0.0; ck * bl];
                gemm(ck, cout, bl, w, (1, ck), &dy.data, (bl, 1), 0.0, &mut dcols);
                col2im(&dcols, kernel, c_in, b, l_in)
            })
        }
        (LayerSpec::Relu, Cache::Mask(out)) => {
            let mut dx = dy;
            for (g, &o) in dx.data.iter_mut().zip(out) {
                if o <= 0.0 {
                    *g = 0.0;
                }
            }
            Some(dx)
        }
        (LayerSpec::MaxPool { .. }, Cache::Argmax(arg)) => {
            let mut dx = Act::zeros(c_in, b, l_in);
            for (&src, &g) in arg.iter().zip(&dy.data) {
                dx.data[src] += g;
            }
            Some(dx)
        }
        (LayerSpec::GlobalAvgPool, _) => {
            let mut dx = Act::zeros(c_in, b, l_in);
            let inv = 1.0 / l_in as f64;
            for (cb, &g) in dy.data.iter().enumerate() {
                dx.data[cb * l_in..(cb + 1) * l_in].fill(g * inv);
            }
            Some(dx)
        }
        (LayerSpec::Dense { inputs, outputs }, Cache::Input(x)) => {
            let (gw, gb) = grad.split_at_mut(outputs * inputs);
            // dW += dY · Xᵀ
            gemm(outputs, b, inputs, &dy.data, (b, 1), x, (1, b), 1.0, gw);
            for (o, g) in gb.iter_mut().enumerate() {
                *g += dy.data[o * b..(o + 1) * b].iter().sum::<f64>();
            }
            need_dx.then(|| {
                let w = &params[..outputs * inputs];
                let mut dx = Act::zeros(inputs, b, 1);
                gemm(inputs, outputs, b, w, (1, inputs), &dy.data, (b, 1), 0.0, &mut dx.data);
                dx
            })
        }
        _ => panic!("layer cache does not match layer kind"),
    }
}
