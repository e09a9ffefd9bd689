use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Regressor, TargetScaler, OUTPUTS};
use crate::error::{Error, Result};
use crate::signal::WindowSet;

/// Optimizer and schedule settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr0: f64,
    /// Learning rate factor applied every `decay_every` epochs.
    pub lr_decay: f64,
    pub decay_every: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Share of the training windows (taken from the end) held out for validation.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 4096,
            lr0: 0.01,
            lr_decay: 0.5,
            decay_every: 20,
            patience: 100,
            max_epochs: 1000,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size > 0
            && self.lr0 > 0.0
            && self.lr_decay > 0.0
            && self.decay_every > 0
            && self.patience > 0
            && self.max_epochs > 0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.adam_eps > 0.0
            && (0.0..1.0).contains(&self.val_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training configuration: {self:?}")))
        }
    }
}

/// Step-decayed learning rate of a zero-based epoch.
pub fn lr_at(cfg: &TrainConfig, epoch: usize) -> f64 {
    cfg.lr0 * cfg.lr_decay.powi((epoch / cfg.decay_every) as i32)
}

/// Loss history and outcome of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch (normalized targets).
    pub train_loss: Vec<f64>,
    /// Validation loss per epoch; equals the training loss when there is no validation set.
    pub val_loss: Vec<f64>,
    pub learning_rate: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub param_count: usize,
    /// FNV-1a of the returned parameters.
    pub param_checksum: String,
    pub train_windows: usize,
    pub val_windows: usize,
    pub wall_time_s: f64,
    pub config: TrainConfig,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + cfg.adam_eps);
        }
    }
}

fn gather(set: &WindowSet, idx: &[usize], norm_targets: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let per = set.window(0).len();
    let mut x = Vec::with_capacity(idx.len() * per);
    let mut t = Vec::with_capacity(idx.len() * OUTPUTS);
    for &i in idx {
        x.extend_from_slice(set.window(i));
        t.extend_from_slice(&norm_targets[i * OUTPUTS..(i + 1) * OUTPUTS]);
    }
    (x, t)
}

/// Train with Adam and step decay, stopping early on the validation loss.
///
/// The target scaler is fitted on the training targets. The returned model
/// carries the parameters of the best validation epoch. A non-finite loss
/// aborts with [`Error::Diverged`].
pub fn train(
    mut model: Regressor,
    train_set: &WindowSet,
    val_set: &WindowSet,
    cfg: &TrainConfig,
) -> Result<(Regressor, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyRecording);
    }
    model.check_channels(train_set.channels)?;
    if !val_set.is_empty() {
        model.check_channels(val_set.channels)?;
    }
    let started = Instant::now();
    model.scaler = TargetScaler::fit(&train_set.targets);
    let train_t = model.scaler.normalize_all(&train_set.targets);
    let val_t = model.scaler.normalize_all(&val_set.targets);
    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut adam = Adam { m: vec![0.0; model.params.len()], v: vec![0.0; model.params.len()], t: 0 };
    let mut grad = vec![0.0; model.params.len()];
    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        learning_rate: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        epochs_run: 0,
        stopped_early: false,
        param_count: model.params.len(),
        param_checksum: String::new(),
        train_windows: n,
        val_windows: val_set.len(),
        wall_time_s: 0.0,
        config: *cfg,
    };
    let mut best = model.params.clone();
    for epoch in 0..cfg.max_epochs {
        let lr = lr_at(cfg, epoch);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, t) = gather(train_set, chunk, &train_t);
            grad.iter_mut().for_each(|g| *g = 0.0);
            let count = (chunk.len() * OUTPUTS) as f64;
            sse += model.sse_and_grad(&x, &t, 1.0 / count, &mut grad);
            adam.step(&mut model.params, &grad, lr, cfg);
        }
        let train_loss = sse / (n * OUTPUTS) as f64;
        let val_loss = if val_set.is_empty() {
            train_loss
        } else {
            model.loss(&val_set.inputs, &val_t)?
        };
        if !train_loss.is_finite() || !val_loss.is_finite() {
            log::error!("training diverged at epoch {epoch}");
            return Err(Error::Diverged { epoch, loss: if train_loss.is_finite() { val_loss } else { train_loss } });
        }
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        report.learning_rate.push(lr);
        report.epochs_run = epoch + 1;
        log::info!("epoch {epoch}: train {train_loss:.6e} val {val_loss:.6e} lr {lr:.2e}");
        if val_loss < report.best_val_loss {
            report.best_val_loss = val_loss;
            report.best_epoch = epoch;
            best.copy_from_slice(&model.params);
        } else if epoch - report.best_epoch >= cfg.patience {
            report.stopped_early = true;
            break;
        }
    }
    model.params = best;
    report.param_checksum = format!("{:016x}", model.checksum());
    report.wall_time_s = started.elapsed().as_secs_f64();
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressor::LayerSpec;
    use crate::signal::WINDOW_LEN;
    use rand::Rng;

    fn toy(count: usize, channels: usize, seed: u64) -> WindowSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = WindowSet { channels, ..WindowSet::default() };
        for _ in 0..count {
            let w: Vec<f64> = (0..WINDOW_LEN * channels).map(|_| rng.gen_range(0.0..1.0)).collect();
            // per-channel means survive the pooling, so these targets are learnable
            let mean = |c: usize| w.iter().skip(c).step_by(channels).sum::<f64>() / WINDOW_LEN as f64;
            let last = channels - 1;
            set.targets.extend_from_slice(&[10.0 * mean(0), 5.0 + mean(last), 20.0 * mean(0) * mean(last)]);
            set.inputs.extend(w);
        }
        set
    }

    #[test]
    fn schedule_arithmetic() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_at(&cfg, 0), 0.01);
        assert_eq!(lr_at(&cfg, 19), 0.01);
        assert!((lr_at(&cfg, 45) - 0.0025).abs() < 1e-15);
        assert_eq!(cfg.batch_size, 4096);
        assert_eq!(cfg.patience, 100);
    }

    #[test]
    fn memorizes_a_toy_set() {
        let set = toy(64, 4, 1);
        let model = Regressor::new(4, 3).unwrap();
        let cfg = TrainConfig { max_epochs: 500, batch_size: 16, ..TrainConfig::default() };
        let (m, rep) = train(model, &set, &WindowSet { channels: 4, ..Default::default() }, &cfg).unwrap();
        let final_loss = m.loss(&set.inputs, &m.scaler.normalize_all(&set.targets)).unwrap();
        assert!(final_loss < 1e-3, "{final_loss}");
        assert_eq!(rep.epochs_run, rep.train_loss.len());
    }

    #[test]
    fn stops_exactly_after_patience() {
        let set = toy(40, 1, 2);
        let model = Regressor::with_spec(
            1,
            WINDOW_LEN,
            vec![LayerSpec::GlobalAvgPool, LayerSpec::Dense { inputs: 1, outputs: 3 }],
            0,
        )
        .unwrap();
        // a vanishing learning rate after the first decay freezes the validation loss
        let cfg = TrainConfig { patience: 5, decay_every: 3, lr_decay: 1e-300, max_epochs: 100, ..TrainConfig::default() };
        let (_, rep) = train(model, &set, &toy(10, 1, 3), &cfg).unwrap();
        assert!(rep.stopped_early);
        assert_eq!(rep.epochs_run, rep.best_epoch + 1 + 5);
        let best = rep.val_loss[rep.best_epoch];
        assert!(rep.val_loss[rep.best_epoch + 1..].iter().all(|&v| v >= best));
    }

    #[test]
    fn deterministic_given_seed() {
        let set = toy(300, 2, 4);
        let (tr, va) = set.split_tail(0.1);
        let cfg = TrainConfig { max_epochs: 3, batch_size: 64, ..TrainConfig::default() };
        let run = || train(Regressor::new(2, 7).unwrap(), &tr, &va, &cfg).unwrap();
        let (m1, r1) = run();
        let (m2, r2) = run();
        assert_eq!(r1.train_loss, r2.train_loss);
        assert_eq!(r1.val_loss, r2.val_loss);
        assert_eq!(m1, m2);
    }
}
