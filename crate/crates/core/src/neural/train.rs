use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, STENCIL};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

use super::{adam_step, mse_loss, vae_elbo, Activation, AdamConfig, AdamState, Mlp, Vae};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub slope: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            slope: 0.1,
        }
    }
}

impl MlpConfig {
    pub fn sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend_from_slice(&self.hidden);
        s.push(output);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeConfig {
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    pub beta_kl: f64,
    pub slope: f64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            latent_dim: 4,
            beta_kl: 1e-3,
            slope: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Wall-clock duration of each epoch. Not written to the CSV.
    pub seconds: Vec<f64>,
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for e in 0..self.epochs() {
            writeln!(s, "{},{:e},{:e}", e, self.train_loss[e], self.val_loss[e]).unwrap();
        }
        s
    }
}

fn to_t<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn mse_full<T: Real>(mlp: &Mlp<T>, x: &[T], y: &[T]) -> Result<f64> {
    let n_in = mlp.input_dim();
    let n_out = mlp.output_dim();
    let rows = x.len() / n_in;
    let chunk = 1024;
    let mut sum = 0.0;
    let mut start = 0;
    while start < rows {
        let end = (start + chunk).min(rows);
        let (pred, _) = mlp.forward_batch(&x[start * n_in..end * n_in], end - start)?;
        for (p, t) in pred.iter().zip(&y[start * n_out..end * n_out]) {
            let e = (*p - *t).as_f64();
            sum += e * e;
        }
        start = end;
    }
    Ok(sum / (rows * n_out) as f64)
}

/// Minibatch Adam on MSE with best-validation checkpointing.
fn fit_mse<T: Real>(
    mut mlp: Mlp<T>,
    train: (&[T], &[T]),
    val: (&[T], &[T]),
    cfg: &TrainConfig,
) -> Result<(Mlp<T>, TrainHistory)> {
    let n_in = mlp.input_dim();
    let n_out = mlp.output_dim();
    let n = train.0.len() / n_in;
    let mut history = TrainHistory::default();
    let mut best = mlp.clone();
    let mut best_val = f64::INFINITY;
    let mut state = AdamState::new(mlp.n_params(), cfg.adam);
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle = rng::stream(cfg.seed, "shuffle");
    let bs = cfg.batch_size.max(1);
    let mut xb = Vec::with_capacity(bs * n_in);
    let mut yb = Vec::with_capacity(bs * n_out);
    for epoch in 0..cfg.epochs {
        let clock = Instant::now();
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        for idx in order.chunks(bs) {
            xb.clear();
            yb.clear();
            for &i in idx {
                xb.extend_from_slice(&train.0[i * n_in..(i + 1) * n_in]);
                yb.extend_from_slice(&train.1[i * n_out..(i + 1) * n_out]);
            }
            let (pred, cache) = mlp.forward_batch(&xb, idx.len())?;
            let (loss, dy) = mse_loss(&pred, &yb);
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            loss_sum += loss * idx.len() as f64;
            let grads = mlp.backward(&cache, &dy)?;
            adam_step(mlp.params_mut(), &grads.params, &mut state);
        }
        let val_loss = mse_full(&mlp, val.0, val.1)?;
        if !val_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        if val_loss < best_val {
            best_val = val_loss;
            best = mlp.clone();
            history.best_epoch = Some(epoch);
        }
        history.train_loss.push(loss_sum / n as f64);
        history.val_loss.push(val_loss);
        history.seconds.push(clock.elapsed().as_secs_f64());
    }
    Ok((best, history))
}

/// Normalized `(features, target)` arrays for one split.
pub(crate) fn normalized_xy(ds: &Dataset, samples: &[crate::data::Sample]) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(samples.len() * STENCIL);
    let mut y = Vec::with_capacity(samples.len());
    for s in samples {
        let (f, t) = ds.norm_stats.normalize(s);
        x.extend_from_slice(&f);
        y.push(t);
    }
    (x, y)
}

/// Fits a stencil-to-stress regressor on the z-scored train split, keeping the
/// parameters with the lowest validation MSE.
pub fn train_regressor<T: Real>(
    dataset: &Dataset,
    mlp_cfg: &MlpConfig,
    cfg: &TrainConfig,
) -> Result<(Mlp<T>, TrainHistory)> {
    if dataset.train.is_empty() || dataset.val.is_empty() {
        return Err(Error::Degenerate("train and val splits must be nonempty".into()));
    }
    let sizes = mlp_cfg.sizes(STENCIL, 1);
    let mlp = Mlp::init(
        &sizes,
        Activation::LeakyRelu,
        T::lit(mlp_cfg.slope),
        &mut rng::stream(cfg.seed, "init"),
    )?;
    let (tx, ty) = normalized_xy(dataset, &dataset.train);
    let (vx, vy) = normalized_xy(dataset, &dataset.val);
    let (tx, ty, vx, vy) = (to_t::<T>(&tx), to_t::<T>(&ty), to_t::<T>(&vx), to_t::<T>(&vy));
    fit_mse(mlp, (&tx, &ty), (&vx, &vy), cfg)
}

fn val_elbo<T: Real>(vae: &Vae<T>, rows: &[T], seed: u64) -> Result<f64> {
    let dim = vae.data_dim();
    let d = vae.latent_dim;
    let n = rows.len() / dim;
    let mut noise = rng::stream(seed, "val-noise");
    let chunk = 1024;
    let mut total = 0.0;
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let eps: Vec<T> = (0..(end - start) * d)
            .map(|_| T::lit(StandardNormal.sample(&mut noise)))
            .collect();
        let (loss, _) = vae_elbo(vae, &rows[start * dim..end * dim], &eps)?;
        total += loss.total.as_f64() * (end - start) as f64;
        start = end;
    }
    Ok(total / n as f64)
}

/// Trains a VAE on sample-major rows of width `dim` (already normalized).
pub fn train_vae<T: Real>(
    train: &[f64],
    val: &[f64],
    dim: usize,
    vae_cfg: &VaeConfig,
    cfg: &TrainConfig,
) -> Result<(Vae<T>, TrainHistory)> {
    if train.is_empty() || val.is_empty() || train.len() % dim != 0 || val.len() % dim != 0 {
        return Err(Error::Degenerate("train and val event sets must be nonempty rows".into()));
    }
    let mut init = rng::stream(cfg.seed, "init");
    let slope = T::lit(vae_cfg.slope);
    let encoder = Mlp::init(&vae_cfg_sizes(vae_cfg, dim, true), Activation::LeakyRelu, slope, &mut init)?;
    let decoder = Mlp::init(&vae_cfg_sizes(vae_cfg, dim, false), Activation::LeakyRelu, slope, &mut init)?;
    let mut vae = Vae::new(encoder, decoder, T::lit(vae_cfg.beta_kl))?;
    let train: Vec<T> = to_t(train);
    let val: Vec<T> = to_t(val);
    let d = vae.latent_dim;
    let n = train.len() / dim;
    let mut history = TrainHistory::default();
    let mut best = vae.clone();
    let mut best_val = f64::INFINITY;
    let mut enc_state = AdamState::new(vae.encoder.n_params(), cfg.adam);
    let mut dec_state = AdamState::new(vae.decoder.n_params(), cfg.adam);
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle = rng::stream(cfg.seed, "shuffle");
    let mut noise = rng::stream(cfg.seed, "noise");
    let bs = cfg.batch_size.max(1);
    let mut xb = Vec::with_capacity(bs * dim);
    for epoch in 0..cfg.epochs {
        let clock = Instant::now();
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        for idx in order.chunks(bs) {
            xb.clear();
            for &i in idx {
                xb.extend_from_slice(&train[i * dim..(i + 1) * dim]);
            }
            let eps: Vec<T> = (0..idx.len() * d)
                .map(|_| T::lit(StandardNormal.sample(&mut noise)))
                .collect();
            let (loss, grads) = vae_elbo(&vae, &xb, &eps)?;
            let loss = loss.total.as_f64();
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            loss_sum += loss * idx.len() as f64;
            adam_step(vae.encoder.params_mut(), &grads.encoder, &mut enc_state);
            adam_step(vae.decoder.params_mut(), &grads.decoder, &mut dec_state);
        }
        let v = val_elbo(&vae, &val, cfg.seed)?;
        if !v.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        if v < best_val {
            best_val = v;
            best = vae.clone();
            history.best_epoch = Some(epoch);
        }
        history.train_loss.push(loss_sum / n as f64);
        history.val_loss.push(v);
        history.seconds.push(clock.elapsed().as_secs_f64());
    }
    Ok((best, history))
}

fn vae_cfg_sizes(cfg: &VaeConfig, dim: usize, encoder: bool) -> Vec<usize> {
    let mlp = MlpConfig {
        hidden: cfg.hidden.clone(),
        slope: cfg.slope,
    };
    if encoder {
        mlp.sizes(dim, 2 * cfg.latent_dim)
    } else {
        let mut s = mlp.sizes(cfg.latent_dim, dim);
        // decoder mirrors the encoder's hidden widths
        let n = s.len();
        s[1..n - 1].reverse();
        s
    }
}
