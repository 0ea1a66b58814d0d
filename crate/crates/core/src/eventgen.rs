//! Two-body decay events: the exact Monte Carlo generator, latent-buffer VAE
//! sampling, and distribution-level comparisons between event sets.
//!
//! Event file (`SKEV0001`), little-endian: `magic[8] | u32 count | count x 10 f64`,
//! with a JSON manifest alongside.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::neural::Vae;
use crate::rng;
use crate::scalar::Real;
use crate::stats;

pub const EVENT_DIM: usize = 10;
pub const EVENT_MAGIC: &[u8; 8] = b"SKEV0001";
pub const DIM_NAMES: [&str; EVENT_DIM] = ["E1", "E2", "px1", "py1", "pz1", "px2", "py2", "pz2", "m1", "m2"];

/// `[E1, E2, px1, py1, pz1, px2, py2, pz2, m1, m2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord(pub [f64; EVENT_DIM]);

impl EventRecord {
    pub fn energies(&self) -> (f64, f64) {
        (self.0[0], self.0[1])
    }

    pub fn p1(&self) -> [f64; 3] {
        [self.0[2], self.0[3], self.0[4]]
    }

    pub fn p2(&self) -> [f64; 3] {
        [self.0[5], self.0[6], self.0[7]]
    }

    pub fn masses(&self) -> (f64, f64) {
        (self.0[8], self.0[9])
    }

    /// `|E_i^2 - (|p_i|^2 + m_i^2)| / E_i^2` for each daughter.
    pub fn on_shell_residuals(&self) -> [f64; 2] {
        let (e1, e2) = self.energies();
        let (m1, m2) = self.masses();
        let r = |e: f64, p: [f64; 3], m: f64| (e * e - (dot(p, p) + m * m)).abs() / (e * e);
        [r(e1, self.p1(), m1), r(e2, self.p2(), m2)]
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sum3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Källén triangle function.
pub fn kallen(a: f64, b: f64, c: f64) -> f64 {
    a * a + b * b + c * c - 2.0 * a * b - 2.0 * b * c - 2.0 * c * a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayConfig {
    pub parent_mass: f64,
    pub m1: f64,
    pub m2: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            parent_mass: 90.0,
            m1: 0.105,
            m2: 0.105,
        }
    }
}

impl DecayConfig {
    pub fn validate(&self) -> Result<()> {
        let DecayConfig { parent_mass, m1, m2 } = *self;
        if !(m1 >= 0.0 && m2 >= 0.0 && parent_mass > 0.0 && parent_mass >= m1 + m2) {
            return Err(Error::Kinematics(format!(
                "need M >= m1 + m2 >= 0 with M > 0, got M = {parent_mass}, m1 = {m1}, m2 = {m2}"
            )));
        }
        Ok(())
    }

    /// Daughter energies and momentum magnitude in the parent rest frame.
    pub fn kinematics(&self) -> (f64, f64, f64) {
        let DecayConfig { parent_mass: m, m1, m2 } = *self;
        let e1 = (m * m + m1 * m1 - m2 * m2) / (2.0 * m);
        let e2 = (m * m + m2 * m2 - m1 * m1) / (2.0 * m);
        let p = (e1 * e1 - m1 * m1).max(0.0).sqrt();
        (e1, e2, p)
    }
}

/// One isotropic decay of a parent at rest.
pub fn sample_two_body<R: Rng + ?Sized>(decay: &DecayConfig, rng: &mut R) -> Result<EventRecord> {
    decay.validate()?;
    let (e1, e2, p) = decay.kinematics();
    let cos_t: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let p1 = [p * sin_t * phi.cos(), p * sin_t * phi.sin(), p * cos_t];
    Ok(EventRecord([
        e1, e2, p1[0], p1[1], p1[2], -p1[0], -p1[1], -p1[2], decay.m1, decay.m2,
    ]))
}

pub fn mc_generate(n: usize, decay: &DecayConfig, seed: u64) -> Result<Vec<EventRecord>> {
    if n == 0 {
        return Err(Error::config("event count must be >= 1"));
    }
    decay.validate()?;
    let mut r = rng::stream(seed, "mc-events");
    (0..n).map(|_| sample_two_body(decay, &mut r)).collect()
}

/// `sqrt(max(0, (E1 + E2)^2 - |p1 + p2|^2))`; the flag reports whether the clamp fired.
pub fn invariant_mass(e: &EventRecord) -> (f64, bool) {
    let (e1, e2) = e.energies();
    let p = sum3(e.p1(), e.p2());
    let s = (e1 + e2) * (e1 + e2) - dot(p, p);
    (s.max(0.0).sqrt(), s < 0.0)
}

pub fn momentum_residual(e: &EventRecord) -> f64 {
    let p = sum3(e.p1(), e.p2());
    dot(p, p).sqrt()
}

pub fn energy_residual(e: &EventRecord, parent_mass: f64) -> f64 {
    let (e1, e2) = e.energies();
    (e1 + e2 - parent_mass).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotropyTest {
    pub cos_theta_mean: f64,
    pub cos_theta_p: f64,
    pub phi_p: f64,
    pub bins: usize,
}

fn uniform_chi2_p(values: impl Iterator<Item = f64>, lo: f64, hi: f64, bins: usize) -> Result<f64> {
    let edges: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
    let v: Vec<f64> = values.collect();
    let counts = stats::histogram(&edges, &v);
    let expected = v.len() as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((bins - 1) as f64).map_err(|e| Error::Implementation(e.to_string()))?;
    Ok(1.0 - dist.cdf(chi2))
}

/// Chi-square uniformity of `cos(theta)` and `phi` of the first daughter.
pub fn isotropy_test(events: &[EventRecord], bins: usize) -> Result<IsotropyTest> {
    if bins < 2 || events.len() < 5 * bins {
        return Err(Error::config("isotropy test needs >= 2 bins and >= 5 events per bin"));
    }
    let dirs: Vec<(f64, f64)> = events
        .iter()
        .map(|e| {
            let p = e.p1();
            let norm = dot(p, p).sqrt();
            let phi = p[1].atan2(p[0]);
            (p[2] / norm, if phi < 0.0 { phi + 2.0 * PI } else { phi })
        })
        .collect();
    Ok(IsotropyTest {
        cos_theta_mean: dirs.iter().map(|d| d.0).sum::<f64>() / dirs.len() as f64,
        cos_theta_p: uniform_chi2_p(dirs.iter().map(|d| d.0), -1.0, 1.0, bins)?,
        phi_p: uniform_chi2_p(dirs.iter().map(|d| d.1), 0.0, 2.0 * PI, bins)?,
        bins,
    })
}

/// Per-dimension z-score statistics for events; spreads are clamped below by `epsilon_std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventNorm {
    pub mean: [f64; EVENT_DIM],
    pub std: [f64; EVENT_DIM],
}

impl EventNorm {
    pub fn fit(events: &[EventRecord], epsilon_std: f64) -> Result<Self> {
        if events.len() < 2 {
            return Err(Error::Degenerate("event normalization needs >= 2 events".into()));
        }
        let mut mean = [0.0; EVENT_DIM];
        let mut std = [0.0; EVENT_DIM];
        for d in 0..EVENT_DIM {
            let (m, s) = stats::mean_std(events.iter().map(|e| e.0[d]));
            mean[d] = m;
            std[d] = s.max(epsilon_std);
        }
        Ok(Self { mean, std })
    }

    pub fn normalize(&self, e: &EventRecord) -> [f64; EVENT_DIM] {
        std::array::from_fn(|d| (e.0[d] - self.mean[d]) / self.std[d])
    }

    pub fn denormalize(&self, z: &[f64]) -> EventRecord {
        EventRecord(std::array::from_fn(|d| z[d] * self.std[d] + self.mean[d]))
    }

    /// Sample-major normalized rows.
    pub fn rows(&self, events: &[EventRecord]) -> Vec<f64> {
        events.iter().flat_map(|e| self.normalize(e)).collect()
    }
}

/// Recorded posterior statistics of the training events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentBuffer {
    pub latent_dim: usize,
    /// `len x latent_dim`, sample-major.
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl LatentBuffer {
    pub fn len(&self) -> usize {
        self.mu.len() / self.latent_dim
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

pub fn build_buffer<T: Real>(vae: &Vae<T>, events: &[EventRecord], norm: &EventNorm) -> Result<LatentBuffer> {
    if events.is_empty() {
        return Err(Error::Degenerate("latent buffer needs events".into()));
    }
    let rows: Vec<T> = norm.rows(events).into_iter().map(T::lit).collect();
    let (mu, ls) = vae.encode(&rows, events.len())?;
    Ok(LatentBuffer {
        latent_dim: vae.latent_dim,
        mu: mu.iter().map(|v| v.as_f64()).collect(),
        sigma: ls.iter().map(|v| v.exp().as_f64()).collect(),
    })
}

/// How buffer entries are chosen for each generated event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferSampling {
    Uniform,
    /// Index `i mod len` for output `i`.
    Sequential,
}

fn decode_latents<T: Real>(vae: &Vae<T>, z: &[f64], norm: &EventNorm) -> Result<Vec<EventRecord>> {
    let n = z.len() / vae.latent_dim;
    let zt: Vec<T> = z.iter().map(|&v| T::lit(v)).collect();
    let x = vae.decode(&zt, n)?;
    Ok(x.chunks_exact(EVENT_DIM)
        .map(|row| {
            let r: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
            norm.denormalize(&r)
        })
        .collect())
}

pub fn bvae_generate_with<T: Real>(
    vae: &Vae<T>,
    buffer: &LatentBuffer,
    norm: &EventNorm,
    n: usize,
    smoothing: f64,
    seed: u64,
    sampling: BufferSampling,
) -> Result<Vec<EventRecord>> {
    if buffer.is_empty() {
        return Err(Error::Degenerate("empty latent buffer".into()));
    }
    if n == 0 || !(smoothing >= 0.0) {
        return Err(Error::config("generation needs n >= 1 and smoothing >= 0"));
    }
    if buffer.latent_dim != vae.latent_dim {
        return Err(Error::Shape {
            layer: 0,
            expected: vae.latent_dim,
            got: buffer.latent_dim,
        });
    }
    let d = buffer.latent_dim;
    let mut r = rng::stream(seed, "bvae-generate");
    let mut z = Vec::with_capacity(n * d);
    for i in 0..n {
        let idx = match sampling {
            BufferSampling::Uniform => r.random_range(0..buffer.len()),
            BufferSampling::Sequential => i % buffer.len(),
        };
        for j in 0..d {
            let eps: f64 = StandardNormal.sample(&mut r);
            z.push(buffer.mu[idx * d + j] + smoothing * buffer.sigma[idx * d + j] * eps);
        }
    }
    decode_latents(vae, &z, norm)
}

/// Latent-buffer generation: `z = mu_i + s * sigma_i * eps` for a uniformly drawn `i`.
pub fn bvae_generate<T: Real>(
    vae: &Vae<T>,
    buffer: &LatentBuffer,
    norm: &EventNorm,
    n: usize,
    smoothing: f64,
    seed: u64,
) -> Result<Vec<EventRecord>> {
    bvae_generate_with(vae, buffer, norm, n, smoothing, seed, BufferSampling::Uniform)
}

/// Baseline sampler: standard-normal latents through the same decoder.
pub fn prior_generate<T: Real>(vae: &Vae<T>, norm: &EventNorm, n: usize, seed: u64) -> Result<Vec<EventRecord>> {
    if n == 0 {
        return Err(Error::config("generation needs n >= 1"));
    }
    let mut r = rng::stream(seed, "prior-generate");
    let z: Vec<f64> = (0..n * vae.latent_dim).map(|_| StandardNormal.sample(&mut r)).collect();
    decode_latents(vae, &z, norm)
}

/// Exact Wasserstein-1 distance between two empirical distributions.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    let a = stats::sorted(a);
    let b = stats::sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = match (a.first(), b.first()) {
        (Some(&x), Some(&y)) => x.min(y),
        _ => return f64::NAN,
    };
    let mut w = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        w += (i as f64 / na - j as f64 / nb).abs() * (next - prev);
        while a.get(i) == Some(&next) {
            i += 1;
        }
        while b.get(j) == Some(&next) {
            j += 1;
        }
        prev = next;
    }
    w
}

/// Wasserstein-1 between two histograms on shared `edges`, using the step CDF
/// at each bin's upper edge.
pub fn wasserstein1_hist(edges: &[f64], a: &[u64], b: &[u64]) -> f64 {
    let ta = a.iter().sum::<u64>() as f64;
    let tb = b.iter().sum::<u64>() as f64;
    let (mut ca, mut cb, mut w) = (0.0, 0.0, 0.0);
    for k in 0..a.len() {
        ca += a[k] as f64 / ta;
        cb += b[k] as f64 / tb;
        w += (ca - cb).abs() * (edges[k + 1] - edges[k]);
    }
    w
}

/// `bins + 1` evenly spaced edges between the 0.1% and 99.9% quantiles of `truth`,
/// widened around a point mass.
pub fn quantile_edges(truth: &[f64], bins: usize) -> Vec<f64> {
    let s = stats::sorted(truth);
    let mut lo = stats::quantile_sorted(&s, 0.001);
    let mut hi = stats::quantile_sorted(&s, 0.999);
    if hi <= lo {
        let pad = 1e-6 * lo.abs().max(1.0);
        lo -= pad;
        hi += pad;
    }
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

fn column(events: &[EventRecord], d: usize) -> Vec<f64> {
    events.iter().map(|e| e.0[d]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub name: String,
    pub truth_mean: f64,
    pub truth_std: f64,
    /// Constant in the truth set; distances are then undefined.
    pub degenerate: bool,
    /// Exact W1 divided by the truth standard deviation.
    pub wasserstein1: Option<f64>,
    /// Histogram W1 on the shared truth-quantile edges, same normalization.
    pub hist_wasserstein1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub mean: f64,
    pub p95: f64,
}

impl ResidualStats {
    fn of(values: &[f64]) -> Self {
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            p95: stats::quantile_sorted(&stats::sorted(values), 0.95),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    /// Centre of the modal bin of the generated invariant-mass histogram.
    pub peak: f64,
    /// Half the 16%-84% quantile spread.
    pub width: f64,
    pub parent_mass: f64,
    pub peak_relative_error: f64,
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsReport {
    pub n_truth: usize,
    pub n_generated: usize,
    pub bins: usize,
    pub dimensions: Vec<DimensionReport>,
    pub invariant_mass: MassReport,
    pub momentum_residual: ResidualStats,
    pub energy_residual: ResidualStats,
    pub noise_mse: f64,
    pub truth_mse: f64,
    pub noise_reconstruction_ratio: f64,
}

fn degenerate(mean: f64, std: f64) -> bool {
    std <= 1e-12 * mean.abs().max(1.0)
}

/// Per-dimension distances to the truth with no model involved.
pub fn dimension_reports(truth: &[EventRecord], generated: &[EventRecord], bins: usize) -> Vec<DimensionReport> {
    (0..EVENT_DIM)
        .map(|d| {
            let t = column(truth, d);
            let g = column(generated, d);
            let (mean, std) = stats::mean_std(t.iter().copied());
            let degen = degenerate(mean, std);
            let (w, hw) = if degen {
                (None, None)
            } else {
                let edges = quantile_edges(&t, bins);
                let hw = wasserstein1_hist(&edges, &stats::histogram(&edges, &t), &stats::histogram(&edges, &g));
                (Some(wasserstein1(&t, &g) / std), Some(hw / std))
            };
            DimensionReport {
                name: DIM_NAMES[d].to_string(),
                truth_mean: mean,
                truth_std: std,
                degenerate: degen,
                wasserstein1: w,
                hist_wasserstein1: hw,
            }
        })
        .collect()
}

pub fn mass_report(generated: &[EventRecord], parent_mass: f64, bins: usize) -> MassReport {
    let (masses, clamped): (Vec<f64>, Vec<bool>) = generated.iter().map(invariant_mass).unzip();
    let edges = quantile_edges(&masses, bins);
    let counts = stats::histogram(&edges, &masses);
    let k = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let peak = 0.5 * (edges[k] + edges[k + 1]);
    let s = stats::sorted(&masses);
    MassReport {
        peak,
        width: 0.5 * (stats::quantile_sorted(&s, 0.84) - stats::quantile_sorted(&s, 0.16)),
        parent_mass,
        peak_relative_error: (peak - parent_mass).abs() / parent_mass,
        clamped: clamped.iter().filter(|&&c| c).count(),
    }
}

fn reconstruction_mse<T: Real>(vae: &Vae<T>, rows: &[f64]) -> Result<f64> {
    let n = rows.len() / EVENT_DIM;
    let x: Vec<T> = rows.iter().map(|&v| T::lit(v)).collect();
    let xh = vae.reconstruct(&x, n)?;
    Ok(xh
        .iter()
        .zip(rows)
        .map(|(a, b)| (a.as_f64() - b).powi(2))
        .sum::<f64>()
        / rows.len() as f64)
}

/// MSE of reconstructing `U(0,1)` noise in normalized space over the MSE of
/// reconstructing `held_out` events.
pub fn noise_reconstruction<T: Real>(
    vae: &Vae<T>,
    norm: &EventNorm,
    held_out: &[EventRecord],
    seed: u64,
) -> Result<(f64, f64, f64)> {
    let mut r = rng::stream(seed, "noise-reconstruction");
    let noise: Vec<f64> = (0..held_out.len() * EVENT_DIM).map(|_| r.random::<f64>()).collect();
    let noise_mse = reconstruction_mse(vae, &noise)?;
    let truth_mse = reconstruction_mse(vae, &norm.rows(held_out))?;
    Ok((noise_mse, truth_mse, noise_mse / truth_mse))
}

pub fn physics_report<T: Real>(
    truth: &[EventRecord],
    generated: &[EventRecord],
    vae: &Vae<T>,
    norm: &EventNorm,
    bins: usize,
    seed: u64,
) -> Result<PhysicsReport> {
    if truth.len() < 2 || generated.is_empty() {
        return Err(Error::Degenerate("physics report needs nonempty event sets".into()));
    }
    if bins < 2 {
        return Err(Error::config("histograms need >= 2 bins"));
    }
    let parent_mass = truth.iter().map(|e| e.0[0] + e.0[1]).sum::<f64>() / truth.len() as f64;
    let momentum: Vec<f64> = generated.iter().map(momentum_residual).collect();
    let energy: Vec<f64> = generated.iter().map(|e| energy_residual(e, parent_mass)).collect();
    let (noise_mse, truth_mse, ratio) = noise_reconstruction(vae, norm, truth, seed)?;
    Ok(PhysicsReport {
        n_truth: truth.len(),
        n_generated: generated.len(),
        bins,
        dimensions: dimension_reports(truth, generated, bins),
        invariant_mass: mass_report(generated, parent_mass, bins),
        momentum_residual: ResidualStats::of(&momentum),
        energy_residual: ResidualStats::of(&energy),
        noise_mse,
        truth_mse,
        noise_reconstruction_ratio: ratio,
    })
}

/// Long-format histogram table, `dim,bin,lo,hi,truth,<set>...`, on truth-quantile edges.
pub fn histogram_csv(truth: &[EventRecord], sets: &[(&str, &[EventRecord])], bins: usize) -> String {
    let mut out = String::from("dim,bin,lo,hi,truth");
    for (name, _) in sets {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for d in 0..EVENT_DIM {
        let t = column(truth, d);
        let edges = quantile_edges(&t, bins);
        let tc = stats::histogram(&edges, &t);
        let sc: Vec<Vec<u64>> = sets.iter().map(|(_, s)| stats::histogram(&edges, &column(s, d))).collect();
        for k in 0..bins {
            out.push_str(&format!("{},{k},{:e},{:e},{}", DIM_NAMES[d], edges[k], edges[k + 1], tc[k]));
            for c in &sc {
                out.push_str(&format!(",{}", c[k]));
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventManifest {
    pub count: usize,
    pub parent_mass: f64,
    pub m1: f64,
    pub m2: f64,
    pub seed: u64,
    /// `mc`, `bvae` or `prior`.
    pub source: String,
}

pub fn encode_events(events: &[EventRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + events.len() * EVENT_DIM * 8);
    out.extend_from_slice(EVENT_MAGIC);
    out.extend_from_slice(&(events.len() as u32).to_le_bytes());
    for e in events {
        for v in e.0 {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_events(bytes: &[u8]) -> Result<Vec<EventRecord>> {
    if bytes.len() < 12 {
        return Err(Error::format(bytes.len(), "truncated event header"));
    }
    if &bytes[..8] != EVENT_MAGIC {
        return Err(Error::format(0, "bad event magic"));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + count * EVENT_DIM * 8;
    if bytes.len() != expected {
        return Err(Error::format(
            bytes.len().min(expected),
            format!("payload is {} bytes, header implies {expected}", bytes.len()),
        ));
    }
    Ok(bytes[12..]
        .chunks_exact(EVENT_DIM * 8)
        .map(|rec| {
            EventRecord(std::array::from_fn(|d| {
                f64::from_le_bytes(rec[d * 8..d * 8 + 8].try_into().unwrap())
            }))
        })
        .collect())
}

fn manifest_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Writes `path` and its manifest `path` with a `.json` extension.
pub fn write_events(events: &[EventRecord], manifest: &EventManifest, path: &Path) -> Result<()> {
    std::fs::write(path, encode_events(events))?;
    std::fs::write(manifest_path(path), serde_json::to_string_pretty(manifest)? + "\n")?;
    Ok(())
}

pub fn read_events(path: &Path) -> Result<(Vec<EventRecord>, EventManifest)> {
    let events = decode_events(&std::fs::read(path)?)?;
    let manifest: EventManifest = serde_json::from_slice(&std::fs::read(manifest_path(path))?)?;
    if manifest.count != events.len() {
        return Err(Error::format(8, "event count disagrees with manifest"));
    }
    Ok((events, manifest))
}
