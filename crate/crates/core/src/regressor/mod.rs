//! A small 1D convolutional network mapping a window of normalized channel
//! samples to the three primitives of its middle frame.
//!
//! Everything is `f64` and single-threaded: the same seed and data give
//! bit-identical parameters and losses on one machine.

mod layers;
mod train;

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::{fnv1a64, write_atomic};
use crate::signal::WINDOW_LEN;
use layers::{backward, forward, Act, Cache};

pub use layers::LayerSpec;
pub use train::{lr_at, train, TrainConfig, TrainReport};

/// Outputs per window.
pub const OUTPUTS: usize = 3;

/// Layers of the production network for `channels` input channels.
pub fn production_spec(channels: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv { cin: channels, cout: 32, kernel: 5 },
        LayerSpec::Relu,
        LayerSpec::MaxPool { size: 2 },
        LayerSpec::Conv { cin: 32, cout: 48, kernel: 5 },
        LayerSpec::Relu,
        LayerSpec::Conv { cin: 48, cout: 64, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::GlobalAvgPool,
        LayerSpec::Dense { inputs: 64, outputs: 64 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 64, outputs: OUTPUTS },
    ]
}

/// Affine map between primitives in cm and the `[0, 1]` training targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for TargetScaler {
    fn default() -> Self {
        TargetScaler { min: [0.0; 3], max: [1.0; 3] }
    }
}

impl TargetScaler {
    /// Range of each column of a flat `n × 3` target array.
    pub fn fit(targets: &[f64]) -> Self {
        let mut s = TargetScaler { min: [f64::INFINITY; 3], max: [f64::NEG_INFINITY; 3] };
        for row in targets.chunks_exact(3) {
            for k in 0..3 {
                s.min[k] = s.min[k].min(row[k]);
                s.max[k] = s.max[k].max(row[k]);
            }
        }
        for k in 0..3 {
            if !(s.max[k] > s.min[k]) {
                // constant or empty column: unit span around the value
                let m = if s.min[k].is_finite() { s.min[k] } else { 0.0 };
                s.min[k] = m - 0.5;
                s.max[k] = m + 0.5;
            }
        }
        s
    }

    pub fn to_unit(&self, k: usize, x: f64) -> f64 {
        (x - self.min[k]) / (self.max[k] - self.min[k])
    }

    pub fn from_unit(&self, k: usize, y: f64) -> f64 {
        self.min[k] + y * (self.max[k] - self.min[k])
    }

    pub fn normalize_all(&self, targets: &[f64]) -> Vec<f64> {
        targets.iter().enumerate().map(|(i, &x)| self.to_unit(i % 3, x)).collect()
    }
}

/// Network spec, flat parameters and target scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub channels: usize,
    pub window: usize,
    pub spec: Vec<LayerSpec>,
    pub params: Vec<f64>,
    pub scaler: TargetScaler,
}

/// Parameter offsets and input shapes of every layer.
struct Plan {
    offsets: Vec<usize>,
    in_shapes: Vec<(usize, usize)>,
}

fn plan(spec: &[LayerSpec], channels: usize, window: usize) -> Result<Plan> {
    let (mut c, mut l) = (channels, window);
    let mut off = 0;
    let mut p = Plan { offsets: Vec::new(), in_shapes: Vec::new() };
    for (i, layer) in spec.iter().enumerate() {
        p.offsets.push(off);
        p.in_shapes.push((c, l));
        off += layer.param_count();
        (c, l) = layer.output_shape(c, l).ok_or_else(|| {
            Error::ShapeMismatch(format!("layer {i} ({layer:?}) does not accept input ({c}, {l})"))
        })?;
    }
    p.offsets.push(off);
    if (c, l) != (OUTPUTS, 1) {
        return Err(Error::ShapeMismatch(format!(
            "network ends in ({c}, {l}), expected ({OUTPUTS}, 1)"
        )));
    }
    Ok(p)
}

impl Regressor {
    /// Production network for `channels` inputs, seeded fan-in uniform init.
    pub fn new(channels: usize, seed: u64) -> Result<Self> {
        Self::with_spec(channels, WINDOW_LEN, production_spec(channels), seed)
    }

    /// Any layer stack ending in three outputs.
    ///
    /// Weights are drawn uniformly from `±sqrt(6 / fan_in)`; biases start at zero.
    pub fn with_spec(channels: usize, window: usize, spec: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let p = plan(&spec, channels, window)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; *p.offsets.last().unwrap()];
        for (layer, &off) in spec.iter().zip(&p.offsets) {
            let n = layer.param_count();
            if n == 0 {
                continue;
            }
            let bound = (6.0 / layer.fan_in() as f64).sqrt();
            let weights = n - match *layer {
                LayerSpec::Conv { cout, .. } => cout,
                LayerSpec::Dense { outputs, .. } => outputs,
                _ => 0,
            };
            for w in &mut params[off..off + weights] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(Regressor { channels, window, spec, params, scaler: TargetScaler::default() })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// FNV-1a over the little-endian parameter bytes.
    pub fn checksum(&self) -> u64 {
        let bytes: Vec<u8> = self.params.iter().flat_map(|p| p.to_le_bytes()).collect();
        fnv1a64(&bytes)
    }

    /// Values per window: `window × channels`.
    pub fn input_len(&self) -> usize {
        self.window * self.channels
    }

    /// Fail with [`Error::VersionMismatch`] when data has a different channel count.
    pub fn check_channels(&self, channels: usize) -> Result<()> {
        if channels != self.channels {
            return Err(Error::VersionMismatch(format!(
                "model expects {} channels, data has {channels}",
                self.channels
            )));
        }
        Ok(())
    }

    fn to_act(&self, inputs: &[f64], batch: usize) -> Act {
        let (l, n) = (self.window, self.channels);
        let mut a = Act::zeros(n, batch, l);
        for b in 0..batch {
            let w = &inputs[b * l * n..(b + 1) * l * n];
            for t in 0..l {
                for c in 0..n {
                    a.data[c * batch * l + b * l + t] = w[t * n + c];
                }
            }
        }
        a
    }

    fn check_batch(&self, inputs: &[f64]) -> Result<usize> {
        let per = self.input_len();
        if inputs.is_empty() || inputs.len() % per != 0 {
            return Err(Error::ShapeMismatch(format!(
                "input of {} values is not a batch of ({}, {}) windows",
                inputs.len(),
                self.window,
                self.channels
            )));
        }
        Ok(inputs.len() / per)
    }

    /// Raw network outputs (normalized target space), `batch × 3` row-major.
    ///
    /// `inputs` holds `batch` windows, each `window × channels` time-major.
    pub fn forward(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let batch = self.check_batch(inputs)?;
        let p = plan(&self.spec, self.channels, self.window)?;
        let mut out = Vec::with_capacity(batch * OUTPUTS);
        for start in (0..batch).step_by(MICRO_BATCH) {
            let b = MICRO_BATCH.min(batch - start);
            let per = self.input_len();
            let mut x = self.to_act(&inputs[start * per..(start + b) * per], b);
            for (i, layer) in self.spec.iter().enumerate() {
                let params = &self.params[p.offsets[i]..p.offsets[i + 1]];
                x = forward(layer, params, x, false).0;
            }
            for bi in 0..b {
                for k in 0..OUTPUTS {
                    out.push(x.data[k * b + bi]);
                }
            }
        }
        Ok(out)
    }

    /// Predictions in cm, `batch × 3` row-major.
    pub fn predict(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.forward(inputs)?;
        for (i, v) in y.iter_mut().enumerate() {
            *v = self.scaler.from_unit(i % 3, *v);
        }
        Ok(y)
    }

    /// Sum of squared errors over a batch and its gradient, accumulated into `grad`.
    ///
    /// `targets` are normalized. The caller divides by the element count.
    pub(crate) fn sse_and_grad(&self, inputs: &[f64], targets: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let p = plan(&self.spec, self.channels, self.window).expect("validated at construction");
        let per = self.input_len();
        let batch = inputs.len() / per;
        let mut sse = 0.0;
        for start in (0..batch).step_by(MICRO_BATCH) {
            let b = MICRO_BATCH.min(batch - start);
            let mut x = self.to_act(&inputs[start * per..(start + b) * per], b);
            let mut caches = Vec::with_capacity(self.spec.len());
            for (i, layer) in self.spec.iter().enumerate() {
                let params = &self.params[p.offsets[i]..p.offsets[i + 1]];
                let (y, c) = forward(layer, params, x, true);
                caches.push(c);
                x = y;
            }
            // x is (3, b, 1); loss gradient 2·(y − t)·scale
            let mut dy = Act::zeros(OUTPUTS, b, 1);
            for bi in 0..b {
                for k in 0..OUTPUTS {
                    let e = x.data[k * b + bi] - targets[(start + bi) * OUTPUTS + k];
                    sse += e * e;
                    dy.data[k * b + bi] = 2.0 * e * scale;
                }
            }
            for i in (0..self.spec.len()).rev() {
                let params = &self.params[p.offsets[i]..p.offsets[i + 1]];
                let g = &mut grad[p.offsets[i]..p.offsets[i + 1]];
                let cache = std::mem::replace(&mut caches[i], Cache::None);
                match backward(&self.spec[i], params, g, &cache, dy, p.in_shapes[i], i > 0) {
                    Some(d) => dy = d,
                    None => break,
                }
            }
        }
        sse
    }

    /// Mean squared error on normalized targets and its gradient.
    pub fn loss_and_grad(&self, inputs: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        let batch = self.check_batch(inputs)?;
        if targets.len() != batch * OUTPUTS {
            return Err(Error::ShapeMismatch(format!(
                "{} targets for a batch of {batch}",
                targets.len()
            )));
        }
        let count = (batch * OUTPUTS) as f64;
        let mut grad = vec![0.0; self.params.len()];
        let sse = self.sse_and_grad(inputs, targets, 1.0 / count, &mut grad);
        Ok((sse / count, grad))
    }

    /// Mean squared error on normalized targets.
    pub fn loss(&self, inputs: &[f64], targets: &[f64]) -> Result<f64> {
        let y = self.forward(inputs)?;
        if y.len() != targets.len() {
            return Err(Error::ShapeMismatch(format!("{} targets for {} outputs", targets.len(), y.len())));
        }
        Ok(y.iter().zip(targets).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
    }

    /// Write the model file: magic, version, shape, layers, scaler, parameters, checksum.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for v in [self.channels, self.window, self.spec.len()] {
            b.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for layer in &self.spec {
            let (tag, x, y, z) = match *layer {
                LayerSpec::Conv { cin, cout, kernel } => (1u8, cin, cout, kernel),
                LayerSpec::Relu => (2, 0, 0, 0),
                LayerSpec::MaxPool { size } => (3, size, 0, 0),
                LayerSpec::GlobalAvgPool => (4, 0, 0, 0),
                LayerSpec::Dense { inputs, outputs } => (5, inputs, outputs, 0),
            };
            b.push(tag);
            for v in [x, y, z] {
                b.extend_from_slice(&(v as u32).to_le_bytes());
            }
        }
        for v in self.scaler.min.iter().chain(&self.scaler.max) {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            b.extend_from_slice(&p.to_le_bytes());
        }
        let sum = fnv1a64(&b);
        b.extend_from_slice(&sum.to_le_bytes());
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::CorruptFile("not a model file".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch(format!(
                "model format {version}, this build reads {FORMAT_VERSION}"
            )));
        }
        if bytes.len() < 8 {
            return Err(Error::CorruptFile("truncated".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let channels = r.u32()? as usize;
        let window = r.u32()? as usize;
        let layers = r.u32()? as usize;
        if layers > 1024 {
            return Err(Error::CorruptFile("implausible layer count".into()));
        }
        let mut spec = Vec::with_capacity(layers);
        for _ in 0..layers {
            let tag = r.take(1)?[0];
            let (x, y, z) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
            spec.push(match tag {
                1 => LayerSpec::Conv { cin: x, cout: y, kernel: z },
                2 => LayerSpec::Relu,
                3 => LayerSpec::MaxPool { size: x },
                4 => LayerSpec::GlobalAvgPool,
                5 => LayerSpec::Dense { inputs: x, outputs: y },
                t => return Err(Error::CorruptFile(format!("unknown layer tag {t}"))),
            });
        }
        let mut scaler = TargetScaler::default();
        for k in 0..3 {
            scaler.min[k] = r.f64()?;
        }
        for k in 0..3 {
            scaler.max[k] = r.f64()?;
        }
        let n = r.u64()? as usize;
        if n.checked_mul(8).map_or(true, |need| need > bytes.len()) {
            return Err(Error::CorruptFile("parameter count exceeds file size".into()));
        }
        let params = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if r.pos != body.len() {
            return Err(Error::CorruptFile("unexpected length".into()));
        }
        if fnv1a64(body).to_le_bytes() != tail {
            return Err(Error::CorruptFile("checksum mismatch".into()));
        }
        let p = plan(&spec, channels, window).map_err(|e| Error::CorruptFile(e.to_string()))?;
        if *p.offsets.last().unwrap() != n {
            return Err(Error::CorruptFile("parameter count does not match layers".into()));
        }
        Ok(Regressor { channels, window, spec, params, scaler })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Windows per forward/backward chunk; gradients of the chunks are summed in order.
pub(crate) const MICRO_BATCH: usize = 256;

const MAGIC: &[u8; 4] = b"FCNN";
const FORMAT_VERSION: u32 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::CorruptFile("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Compare the analytic gradient with central differences on `samples`
/// randomly chosen parameters; returns the largest relative error.
///
/// The relative error is `|g − ĝ| / max(|g|, |ĝ|, 1e-6)`, so parameters whose
/// gradient is numerically zero are compared absolutely.
pub fn backward_check(
    model: &Regressor,
    inputs: &[f64],
    targets: &[f64],
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(1e-6..=1e-4).contains(&eps) {
        return Err(Error::Config(format!("finite-difference step {eps} outside [1e-6, 1e-4]")));
    }
    let (_, grad) = model.loss_and_grad(inputs, targets)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.params.len();
    let picks: Vec<usize> = if samples >= n {
        (0..n).collect()
    } else {
        rand::seq::index::sample(&mut rng, n, samples).into_vec()
    };
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for i in picks {
        let orig = probe.params[i];
        probe.params[i] = orig + eps;
        let up = probe.loss(inputs, targets)?;
        probe.params[i] = orig - eps;
        let down = probe.loss(inputs, targets)?;
        probe.params[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let denom = grad[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((grad[i] - numeric).abs() / denom);
    }
    Ok(worst)
}
