//! Gaussian VAE with a reparameterized latent `z = mu + exp(log_sigma) * eps`.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::Mlp;

#[derive(Debug, Clone, PartialEq)]
pub struct Vae<T> {
    /// Maps data to `[mu; log_sigma]`, `2 * latent_dim` outputs.
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
    pub latent_dim: usize,
    pub beta_kl: T,
}

/// `1/2 sum_j (mu_j^2 + sigma_j^2 - 1 - 2 log sigma_j)`, the KL divergence to N(0, I).
pub fn kl_gauss<T: Real>(mu: &[T], log_sigma: &[T]) -> T {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    mu.iter()
        .zip(log_sigma)
        .map(|(&m, &ls)| half * (m * m + (two * ls).exp() - T::one() - two * ls))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboLoss<T> {
    /// `recon + beta_kl * kl`, batch mean.
    pub total: T,
    pub recon: T,
    pub kl: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElboGradients<T> {
    pub encoder: Vec<T>,
    pub decoder: Vec<T>,
}

impl<T: Real> Vae<T> {
    pub fn new(encoder: Mlp<T>, decoder: Mlp<T>, beta_kl: T) -> Result<Self> {
        let latent_dim = decoder.input_dim();
        if encoder.output_dim() != 2 * latent_dim {
            return Err(Error::Shape {
                layer: encoder.n_layers(),
                expected: 2 * latent_dim,
                got: encoder.output_dim(),
            });
        }
        if encoder.input_dim() != decoder.output_dim() {
            return Err(Error::Shape {
                layer: decoder.n_layers(),
                expected: encoder.input_dim(),
                got: decoder.output_dim(),
            });
        }
        Ok(Self {
            encoder,
            decoder,
            latent_dim,
            beta_kl,
        })
    }

    pub fn data_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    /// Per-sample `(mu, log_sigma)`, each `batch x latent_dim` sample-major.
    pub fn encode(&self, x: &[T], batch: usize) -> Result<(Vec<T>, Vec<T>)> {
        let (out, _) = self.encoder.forward_batch(x, batch)?;
        Ok(split_latent(&out, batch, self.latent_dim))
    }

    pub fn decode(&self, z: &[T], batch: usize) -> Result<Vec<T>> {
        Ok(self.decoder.forward_batch(z, batch)?.0)
    }

    /// Encode to the posterior mean and decode it.
    pub fn reconstruct(&self, x: &[T], batch: usize) -> Result<Vec<T>> {
        let (mu, _) = self.encode(x, batch)?;
        self.decode(&mu, batch)
    }
}

fn split_latent<T: Copy>(out: &[T], batch: usize, d: usize) -> (Vec<T>, Vec<T>) {
    let mut mu = Vec::with_capacity(batch * d);
    let mut ls = Vec::with_capacity(batch * d);
    for row in out.chunks_exact(2 * d) {
        mu.extend_from_slice(&row[..d]);
        ls.extend_from_slice(&row[d..]);
    }
    (mu, ls)
}

/// Batch-mean negative ELBO (MSE reconstruction + `beta_kl` * KL) and its
/// gradients, for explicit noise `eps` (`batch x latent_dim`).
pub fn vae_elbo<T: Real>(vae: &Vae<T>, x: &[T], eps: &[T]) -> Result<(ElboLoss<T>, ElboGradients<T>)> {
    let d = vae.latent_dim;
    let dim = vae.data_dim();
    let batch = x.len() / dim;
    if eps.len() != batch * d {
        return Err(Error::Shape {
            layer: 0,
            expected: batch * d,
            got: eps.len(),
        });
    }
    let (enc_out, enc_cache) = vae.encoder.forward_batch(x, batch)?;
    let (mu, log_sigma) = split_latent(&enc_out, batch, d);
    let sigma: Vec<T> = log_sigma.iter().map(|v| v.exp()).collect();
    let z: Vec<T> = (0..batch * d).map(|i| mu[i] + sigma[i] * eps[i]).collect();
    let (x_hat, dec_cache) = vae.decoder.forward_batch(&z, batch)?;

    let b = T::from_usize(batch).unwrap();
    let bd = T::from_usize(batch * dim).unwrap();
    let two = T::lit(2.0);
    let mut recon = T::zero();
    let mut d_xhat = Vec::with_capacity(x_hat.len());
    for (&xh, &xv) in x_hat.iter().zip(x) {
        let e = xh - xv;
        recon += e * e;
        d_xhat.push(two * e / bd);
    }
    recon /= bd;
    let kl = kl_gauss(&mu, &log_sigma) / b;
    let total = recon + vae.beta_kl * kl;

    let dec_grads = vae.decoder.backward(&dec_cache, &d_xhat)?;
    let dz = dec_grads.input;
    let beta_b = vae.beta_kl / b;
    let mut d_enc = Vec::with_capacity(enc_out.len());
    for s in 0..batch {
        for j in 0..d {
            let i = s * d + j;
            d_enc.push(dz[i] + beta_b * mu[i]);
        }
        for j in 0..d {
            let i = s * d + j;
            d_enc.push(dz[i] * eps[i] * sigma[i] + beta_b * (sigma[i] * sigma[i] - T::one()));
        }
    }
    let enc_grads = vae.encoder.backward(&enc_cache, &d_enc)?;
    Ok((
        ElboLoss { total, recon, kl },
        ElboGradients {
            encoder: enc_grads.params,
            decoder: dec_grads.params,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{max_relative_error, numeric_gradient, Activation};
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn small_vae(seed: u64, beta: f64) -> Vae<f64> {
        let mut r = rng::stream(seed, "vae");
        let enc = Mlp::init(&[6, 8, 4], Activation::LeakyRelu, 0.1, &mut r).unwrap();
        let dec = Mlp::init(&[2, 8, 6], Activation::LeakyRelu, 0.1, &mut r).unwrap();
        Vae::new(enc, dec, beta).unwrap()
    }

    #[test]
    fn kl_closed_forms() {
        assert_eq!(kl_gauss(&[0.0f64; 3], &[0.0; 3]), 0.0);
        assert!((kl_gauss(&[1.0f64], &[0.0]) - 0.5).abs() < 1e-15);
        let mut r = rng::stream(1, "kl");
        for _ in 0..200 {
            let mu: Vec<f64> = (0..4).map(|_| r.random_range(-3.0..3.0)).collect();
            let ls: Vec<f64> = (0..4).map(|_| r.random_range(-3.0..3.0)).collect();
            assert!(kl_gauss(&mu, &ls) >= 0.0);
        }
        assert!(kl_gauss(&[1e-7f64], &[0.0]) < 1e-12);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let mut r = rng::stream(2, "vae");
        let enc = Mlp::<f64>::init(&[6, 5], Activation::LeakyRelu, 0.1, &mut r).unwrap();
        let dec = Mlp::<f64>::init(&[2, 6], Activation::LeakyRelu, 0.1, &mut r).unwrap();
        assert!(Vae::new(enc, dec, 1.0).is_err());
        let v = small_vae(3, 1.0);
        assert!(vae_elbo(&v, &[0.0; 12], &[0.0; 3]).is_err());
    }

    #[test]
    fn zero_noise_decodes_the_mean() {
        let v = small_vae(4, 0.5);
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let (loss, _) = vae_elbo(&v, &x, &[0.0; 4]).unwrap();
        let xh = v.reconstruct(&x, 2).unwrap();
        let recon = xh.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 12.0;
        assert_eq!(loss.recon, recon);
        let (mu, ls) = v.encode(&x, 2).unwrap();
        assert_eq!(loss.kl, kl_gauss(&mu, &ls) / 2.0);
    }

    #[test]
    fn zero_beta_is_pure_reconstruction() {
        let v = small_vae(5, 0.0);
        let x = vec![0.2; 6];
        let (loss, _) = vae_elbo(&v, &x, &[0.3, -0.1]).unwrap();
        assert_eq!(loss.total, loss.recon);
    }

    #[test]
    fn elbo_gradient_matches_finite_differences() {
        let mut r = rng::stream(6, "elbo");
        for trial in 0..5 {
            let v = small_vae(100 + trial, 0.3);
            let x: Vec<f64> = (0..18).map(|_| r.random_range(-1.5..1.5)).collect();
            let eps: Vec<f64> = (0..6).map(|_| r.sample(StandardNormal)).collect();
            let (_, g) = vae_elbo(&v, &x, &eps).unwrap();
            let n_enc = v.encoder.n_params();
            let mut all: Vec<f64> = v.encoder.params().to_vec();
            all.extend_from_slice(v.decoder.params());
            let mut probe = v.clone();
            let numeric = numeric_gradient(
                &all,
                |p| {
                    probe.encoder.params_mut().copy_from_slice(&p[..n_enc]);
                    probe.decoder.params_mut().copy_from_slice(&p[n_enc..]);
                    vae_elbo(&probe, &x, &eps).unwrap().0.total
                },
                1e-5,
            );
            let mut analytic = g.encoder.clone();
            analytic.extend_from_slice(&g.decoder);
            let err = max_relative_error(&analytic, &numeric);
            assert!(err < 1e-5, "trial {trial}: {err}");
        }
    }
}
