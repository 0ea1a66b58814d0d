//! Subgrid closures for the coarse solver: the Smagorinsky-form baseline, the
//! neural adapter with its allocation-free batched inference path, and the
//! inference benchmark.

use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::burgers::Closure;
use crate::coarse::reflect;
use crate::data::{stencil_into, Dataset, NormStats, STENCIL};
use crate::error::{Error, Result};
use crate::neural::Mlp;
use crate::rng;
use crate::scalar::Real;
use crate::stats;

/// Smallest accepted Smagorinsky constant; fits below it are rejected.
pub const C_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum ClosureSpec {
    None,
    Smagorinsky { c: f64 },
    Neural { params_path: PathBuf, norm_stats: NormStats },
}

impl ClosureSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClosureSpec::None => "none",
            ClosureSpec::Smagorinsky { .. } => "smagorinsky",
            ClosureSpec::Neural { .. } => "neural",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClosureSpec::Smagorinsky { c } if !(*c > 0.0) => {
                Err(Error::config(format!("Smagorinsky constant must be > 0, got {c}")))
            }
            _ => Ok(()),
        }
    }
}

#[inline]
fn central_gradient<T: Real>(left: T, right: T, dx: T) -> T {
    (right - left) / (dx + dx)
}

/// `tau[i] = -2 (C dx)^2 |s| s` with `s` the periodic central gradient of `u_bar`.
pub fn smagorinsky_tau_into<T: Real>(u_bar: &[T], dx: T, c: T, tau: &mut [T]) {
    let n = u_bar.len();
    let coef = T::lit(-2.0) * (c * dx) * (c * dx);
    for i in 0..n {
        let s = central_gradient(u_bar[(i + n - 1) % n], u_bar[(i + 1) % n], dx);
        tau[i] = coef * s.abs() * s;
    }
}

pub fn smagorinsky_tau<T: Real>(u_bar: &[T], dx: T, c: T) -> Vec<T> {
    let mut tau = vec![T::zero(); u_bar.len()];
    smagorinsky_tau_into(u_bar, dx, c, &mut tau);
    tau
}

/// Smagorinsky prediction from a raw (unnormalized) stencil.
pub fn smagorinsky_from_stencil(features: &[f64; STENCIL], dx: f64, c: f64) -> f64 {
    let s = central_gradient(features[1], features[3], dx);
    -2.0 * (c * dx) * (c * dx) * s.abs() * s
}

/// Least-squares `(C dx)^2` for `tau ~ -2 (C dx)^2 |s| s`; returns `C`.
pub fn fit_smagorinsky_from(gradients: &[f64], labels: &[f64], dx: f64) -> Result<f64> {
    let mut gg = 0.0;
    let mut gt = 0.0;
    for (&s, &t) in gradients.iter().zip(labels) {
        let g = -2.0 * s.abs() * s;
        gg += g * g;
        gt += g * t;
    }
    if gg == 0.0 {
        return Err(Error::Degenerate("all stencil gradients are zero".into()));
    }
    let a = gt / gg;
    let c = if a > 0.0 { a.sqrt() / dx } else { 0.0 };
    if !(c >= C_FLOOR) {
        return Err(Error::Degenerate(format!(
            "fitted Smagorinsky constant {c:e} is below the floor {C_FLOOR:e}"
        )));
    }
    Ok(c)
}

/// Calibrates `C` on the train split using stencil-center gradients.
pub fn fit_smagorinsky_constant(dataset: &Dataset) -> Result<f64> {
    if dataset.train.is_empty() {
        return Err(Error::Degenerate("empty train split".into()));
    }
    let dx = dataset.grid.coarse_dx;
    let (grads, labels): (Vec<f64>, Vec<f64>) = dataset
        .train
        .iter()
        .map(|s| {
            let f = s.features_f64();
            (central_gradient(f[1], f[3], dx), f64::from(s.target))
        })
        .unzip();
    fit_smagorinsky_from(&grads, &labels, dx)
}

/// Preallocated buffers for batched inference over a whole coarse field.
#[derive(Debug, Clone)]
pub struct InferWorkspace<T> {
    n_cells: usize,
    sizes: Vec<usize>,
    /// `features` is the normalized stencil matrix, feature-major (`5 x n_cells`).
    features: Vec<T>,
    layers: Vec<Vec<T>>,
}

impl<T: Real> InferWorkspace<T> {
    pub fn new(mlp: &Mlp<T>, n_cells: usize) -> Result<Self> {
        if mlp.input_dim() != STENCIL || mlp.output_dim() != 1 {
            return Err(Error::Shape {
                layer: 0,
                expected: STENCIL,
                got: mlp.input_dim(),
            });
        }
        Ok(Self {
            n_cells,
            sizes: mlp.sizes().to_vec(),
            features: vec![T::zero(); STENCIL * n_cells],
            layers: mlp.sizes()[1..]
                .iter()
                .map(|&w| vec![T::zero(); w * n_cells])
                .collect(),
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    fn matches(&self, mlp: &Mlp<T>, n: usize) -> Result<()> {
        if n != self.n_cells {
            return Err(Error::Shape {
                layer: 0,
                expected: self.n_cells,
                got: n,
            });
        }
        if mlp.sizes() != self.sizes.as_slice() {
            let l = mlp
                .sizes()
                .iter()
                .zip(&self.sizes)
                .position(|(a, b)| a != b)
                .unwrap_or(self.sizes.len().min(mlp.sizes().len()));
            return Err(Error::Shape {
                layer: l,
                expected: self.sizes.get(l).copied().unwrap_or(0),
                got: mlp.sizes().get(l).copied().unwrap_or(0),
            });
        }
        Ok(())
    }
}

/// Neural closure over a whole field in one batched pass; writes into `tau`.
///
/// Bitwise identical to [`neural_tau_naive`].
pub fn neural_tau_into<T: Real>(
    mlp: &Mlp<T>,
    stats: &NormStats,
    u_bar: &[T],
    ws: &mut InferWorkspace<T>,
    tau: &mut [T],
) -> Result<()> {
    let n = u_bar.len();
    ws.matches(mlp, n)?;
    if tau.len() != n {
        return Err(Error::Shape {
            layer: mlp.n_layers(),
            expected: n,
            got: tau.len(),
        });
    }
    let mut st = [T::zero(); STENCIL];
    for i in 0..n {
        stencil_into(u_bar, i, &mut st);
        let z = stats.normalize_features(&st);
        for k in 0..STENCIL {
            ws.features[k * n + i] = z[k];
        }
    }
    let InferWorkspace { features, layers, .. } = ws;
    for l in 0..mlp.n_layers() {
        let (done, rest) = layers.split_at_mut(l);
        let input: &[T] = if l == 0 { features } else { &done[l - 1] };
        let out = &mut rest[0];
        crate::neural::dense_forward(mlp.weights(l), mlp.bias(l), input, out, mlp.sizes()[l], n);
        for v in out.iter_mut() {
            *v = mlp.activate(l, *v);
        }
    }
    for (t, &y) in tau.iter_mut().zip(layers.last().unwrap()) {
        *t = stats.denormalize_target(y);
    }
    Ok(())
}

pub fn neural_tau<T: Real>(
    mlp: &Mlp<T>,
    stats: &NormStats,
    u_bar: &[T],
    ws: &mut InferWorkspace<T>,
) -> Result<Vec<T>> {
    let mut tau = vec![T::zero(); u_bar.len()];
    neural_tau_into(mlp, stats, u_bar, ws, &mut tau)?;
    Ok(tau)
}

/// Reference path: one cell at a time, fresh buffers for every cell.
pub fn neural_tau_naive<T: Real>(mlp: &Mlp<T>, stats: &NormStats, u_bar: &[T]) -> Result<Vec<T>> {
    let n = u_bar.len();
    (0..n)
        .map(|i| {
            let mut st = [T::zero(); STENCIL];
            stencil_into(u_bar, i, &mut st);
            let z = stats.normalize_features(&st).to_vec();
            let y = mlp.predict_naive(&z)?;
            Ok(stats.denormalize_target(y[0]))
        })
        .collect()
}

/// Per-cell `|tau(u) - reverse(tau(reflect(u)))|`; zero for a mirror-symmetric closure.
pub fn reflection_asymmetry<T: Real>(
    mlp: &Mlp<T>,
    stats: &NormStats,
    u_bar: &[T],
    ws: &mut InferWorkspace<T>,
) -> Result<Vec<f64>> {
    let direct = neural_tau(mlp, stats, u_bar, ws)?;
    let mirrored = neural_tau(mlp, stats, &reflect(u_bar), ws)?;
    Ok(direct
        .iter()
        .zip(mirrored.iter().rev())
        .map(|(&a, &b)| (a - b).abs().as_f64())
        .collect())
}

pub struct NoClosure;

impl<T: Real> Closure<T> for NoClosure {
    fn name(&self) -> &str {
        "none"
    }

    fn tau(&mut self, _u: &[T], _dx: T, tau: &mut [T]) -> Result<()> {
        tau.fill(T::zero());
        Ok(())
    }
}

pub struct SmagorinskyClosure<T> {
    pub c: T,
}

impl<T: Real> Closure<T> for SmagorinskyClosure<T> {
    fn name(&self) -> &str {
        "smagorinsky"
    }

    fn tau(&mut self, u: &[T], dx: T, tau: &mut [T]) -> Result<()> {
        smagorinsky_tau_into(u, dx, self.c, tau);
        Ok(())
    }
}

/// Network-backed closure owning its inference workspace.
pub struct NeuralClosure<T> {
    mlp: Mlp<T>,
    stats: NormStats,
    workspace: InferWorkspace<T>,
}

impl<T: Real> NeuralClosure<T> {
    pub fn new(mlp: Mlp<T>, stats: NormStats, n_cells: usize) -> Result<Self> {
        let workspace = InferWorkspace::new(&mlp, n_cells)?;
        Ok(Self { mlp, stats, workspace })
    }
}

impl<T: Real> Closure<T> for NeuralClosure<T> {
    fn name(&self) -> &str {
        "neural"
    }

    fn tau(&mut self, u: &[T], _dx: T, tau: &mut [T]) -> Result<()> {
        neural_tau_into(&self.mlp, &self.stats, u, &mut self.workspace, tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub net_shape: Vec<usize>,
    pub n_coarse: usize,
    pub repetitions: usize,
    pub naive_median_s: f64,
    pub fast_median_s: f64,
    pub naive_p10_s: f64,
    pub naive_p90_s: f64,
    pub fast_p10_s: f64,
    pub fast_p90_s: f64,
    pub speedup: f64,
    pub outputs_checksum_equal: bool,
}

fn checksum<T: Real>(values: &[T]) -> u64 {
    values.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
        (h ^ v.as_f64().to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Times the naive and workspace paths on identical random fields.
pub fn bench_infer<T: Real>(
    mlp: &Mlp<T>,
    stats: &NormStats,
    n_coarse: usize,
    repetitions: usize,
    seed: u64,
) -> Result<BenchReport> {
    if repetitions < 10 {
        return Err(Error::config("bench repetitions must be >= 10"));
    }
    let mut rng = rng::stream(seed, "bench-infer");
    let mut ws = InferWorkspace::new(mlp, n_coarse)?;
    let mut fast_out = vec![T::zero(); n_coarse];
    let mut naive_t = Vec::with_capacity(repetitions);
    let mut fast_t = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let u: Vec<T> = (0..n_coarse).map(|_| T::lit(rng.random_range(-1.5..1.5))).collect();
        let clock = Instant::now();
        let naive = neural_tau_naive(mlp, stats, &u)?;
        naive_t.push(clock.elapsed().as_secs_f64());
        let clock = Instant::now();
        neural_tau_into(mlp, stats, &u, &mut ws, &mut fast_out)?;
        fast_t.push(clock.elapsed().as_secs_f64());
        if checksum(&naive) != checksum(&fast_out) || naive != fast_out {
            return Err(Error::Implementation(
                "batched inference output differs from the naive path".into(),
            ));
        }
    }
    let ns = stats::sorted(&naive_t);
    let fs = stats::sorted(&fast_t);
    let naive_median_s = stats::quantile_sorted(&ns, 0.5);
    let fast_median_s = stats::quantile_sorted(&fs, 0.5);
    Ok(BenchReport {
        net_shape: mlp.sizes().to_vec(),
        n_coarse,
        repetitions,
        naive_median_s,
        fast_median_s,
        naive_p10_s: stats::quantile_sorted(&ns, 0.1),
        naive_p90_s: stats::quantile_sorted(&ns, 0.9),
        fast_p10_s: stats::quantile_sorted(&fs, 0.1),
        fast_p90_s: stats::quantile_sorted(&fs, 0.9),
        speedup: naive_median_s / fast_median_s,
        outputs_checksum_equal: true,
    })
}
