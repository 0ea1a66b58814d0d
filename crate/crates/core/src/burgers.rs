//! Periodic 1D viscous Burgers solver.
//!
//! Conservative form with an optional subgrid stress `tau`:
//!
//! ```text
//! du/dt = -1/2 d(u^2)/dx + nu d2u/dx2 - 1/2 dtau/dx
//! ```
//!
//! Second-order central differences on a collocated periodic grid, advanced with
//! the three-stage strong-stability-preserving Runge-Kutta scheme. The same solver
//! serves as the fine-grid reference ("DNS") and, with a closure attached, as the
//! coarse production solver.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

pub const TRAJECTORY_MAGIC: &[u8; 8] = b"SKTRAJ01";

/// Velocity field on a uniform periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T> {
    pub length: T,
    pub nu: T,
    pub time: T,
    pub values: Vec<T>,
}

impl<T: Real> FlowField<T> {
    pub fn new(values: Vec<T>, length: T, nu: T) -> Result<Self> {
        let field = Self {
            length,
            nu,
            time: T::zero(),
            values,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn zeros(n_cells: usize, length: T, nu: T) -> Result<Self> {
        Self::new(vec![T::zero(); n_cells], length, nu)
    }

    /// Sine mode `amplitude * sin(2 pi k x / L)` sampled at `x_j = j dx`.
    pub fn sine_mode(n_cells: usize, length: T, nu: T, k: usize, amplitude: T) -> Result<Self> {
        let values = (0..n_cells)
            .map(|j| amplitude * mode_phase::<T>(k, j, n_cells).sin())
            .collect();
        Self::new(values, length, nu)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.values.len();
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::config(format!(
                "n_cells must be a power of two >= 8, got {n}"
            )));
        }
        if !(self.length > T::zero()) || !self.length.is_finite() {
            return Err(Error::config("domain length must be positive and finite"));
        }
        if !(self.nu >= T::zero()) || !self.nu.is_finite() {
            return Err(Error::config("nu must be finite and >= 0"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("field contains non-finite values"));
        }
        Ok(())
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn dx(&self) -> T {
        self.length / T::from_usize(self.values.len()).unwrap()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `dx * sum(u)`.
    pub fn integral(&self) -> T {
        self.dx() * self.values.iter().copied().sum::<T>()
    }

    pub fn energy(&self) -> T {
        energy(&self.values)
    }

    pub fn spectrum(&self) -> Spectrum<T> {
        spectrum(&self.values)
    }
}

fn mode_phase<T: Real>(k: usize, j: usize, n: usize) -> T {
    // 2 pi k j / n, reduced modulo n first to keep the argument small
    let m = (k * j) % n;
    T::lit(2.0 * std::f64::consts::PI) * T::from_usize(m).unwrap() / T::from_usize(n).unwrap()
}

/// Random multi-mode initial condition: modes `k = 1..=k_max` with amplitude
/// `amplitude / k` and phases uniform on `[0, 2 pi)` from the seeded stream.
pub fn init_field<T: Real>(
    n_cells: usize,
    length: T,
    nu: T,
    k_max: usize,
    amplitude: T,
    seed: u64,
) -> Result<FlowField<T>> {
    if n_cells < 8 || !n_cells.is_power_of_two() {
        return Err(Error::config(format!(
            "n_cells must be a power of two >= 8, got {n_cells}"
        )));
    }
    if k_max < 1 || k_max > n_cells / 4 {
        return Err(Error::config(format!(
            "k_max must lie in [1, n_cells/4 = {}], got {k_max}",
            n_cells / 4
        )));
    }
    if !(amplitude >= T::zero()) {
        return Err(Error::config("amplitude must be >= 0"));
    }
    let mut rng = rng::stream(seed, "init-field");
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    let phases: Vec<T> = (0..k_max)
        .map(|_| two_pi * T::lit(rng.random::<f64>()))
        .collect();
    let mut values = vec![T::zero(); n_cells];
    for (idx, phase) in phases.iter().enumerate() {
        let k = idx + 1;
        let a = amplitude / T::from_usize(k).unwrap();
        for (j, v) in values.iter_mut().enumerate() {
            *v += a * (mode_phase::<T>(k, j, n_cells) + *phase).sin();
        }
    }
    FlowField::new(values, length, nu)
}

/// `(1/2) mean(u^2)`.
pub fn energy<T: Real>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let sum: T = values.iter().map(|&v| v * v).sum();
    T::lit(0.5) * sum / T::from_usize(values.len()).unwrap()
}

/// One-sided modal energy spectrum, `k = 0..=n/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum<T> {
    pub energy: Vec<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn total(&self) -> T {
        self.energy.iter().copied().sum()
    }

    pub fn wavenumbers(&self) -> impl Iterator<Item = usize> {
        0..self.energy.len()
    }
}

/// Modal energies normalized so that `sum(E_k) = (1/2) mean(u^2)`.
///
/// Interior modes carry their conjugate partner; `k = 0` and `k = n/2` do not.
pub fn spectrum<T: Real>(values: &[T]) -> Spectrum<T> {
    let n = values.len();
    let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let n2 = T::from_usize(n * n).unwrap();
    let half = T::lit(0.5);
    let energy = (0..=n / 2)
        .map(|k| {
            let e = buf[k].norm_sqr() / n2;
            if k == 0 || k == n / 2 {
                half * e
            } else {
                e
            }
        })
        .collect();
    Spectrum { energy }
}

/// Subgrid closure queried once per time step with the current state.
pub trait Closure<T> {
    fn name(&self) -> &str;
    fn tau(&mut self, u: &[T], dx: T, tau: &mut [T]) -> Result<()>;
}

/// Largest admissible fixed step: `min(0.5 dx / max|u|, 0.25 dx^2 / nu)`.
pub fn cfl_limit<T: Real>(field: &FlowField<T>) -> T {
    let dx = field.dx();
    let mut limit = T::infinity();
    let umax = field.max_abs();
    if umax > T::zero() {
        limit = limit.min(T::lit(0.5) * dx / umax);
    }
    if field.nu > T::zero() {
        limit = limit.min(T::lit(0.25) * dx * dx / field.nu);
    }
    limit
}

/// Time history at a uniform snapshot cadence.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub length: T,
    pub nu: T,
    pub dt: T,
    pub snapshot_interval: T,
    pub snapshot_times: Vec<T>,
    pub snapshots: Vec<Vec<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn n_cells(&self) -> usize {
        self.snapshots.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn field(&self, index: usize) -> FlowField<T> {
        FlowField {
            length: self.length,
            nu: self.nu,
            time: self.snapshot_times[index],
            values: self.snapshots[index].clone(),
        }
    }

    pub fn energies(&self) -> Vec<T> {
        self.snapshots.iter().map(|s| energy(s)).collect()
    }
}

/// Solver options. `advection = false` drops the nonlinear flux (diffusion-only test mode).
#[derive(Debug, Clone, Copy)]
pub struct Solver {
    pub advection: bool,
}

impl Default for Solver {
    fn default() -> Self {
        Self { advection: true }
    }
}

struct Scratch<T> {
    rhs: Vec<T>,
    stage: Vec<T>,
    sq: Vec<T>,
}

impl<T: Real> Scratch<T> {
    fn new(n: usize) -> Self {
        Self {
            rhs: vec![T::zero(); n],
            stage: vec![T::zero(); n],
            sq: vec![T::zero(); n],
        }
    }
}

impl Solver {
    fn rhs<T: Real>(
        &self,
        u: &[T],
        tau: Option<&[T]>,
        dx: T,
        nu: T,
        sq: &mut [T],
        out: &mut [T],
    ) {
        let n = u.len();
        let inv_4dx = T::one() / (T::lit(4.0) * dx);
        let nu_dx2 = nu / (dx * dx);
        let two = T::lit(2.0);
        if self.advection {
            for (s, &v) in sq.iter_mut().zip(u) {
                *s = v * v;
            }
        }
        for i in 0..n {
            let ip = if i + 1 == n { 0 } else { i + 1 };
            let im = if i == 0 { n - 1 } else { i - 1 };
            let mut r = nu_dx2 * (u[ip] - two * u[i] + u[im]);
            if self.advection {
                r -= (sq[ip] - sq[im]) * inv_4dx;
            }
            if let Some(t) = tau {
                r -= (t[ip] - t[im]) * inv_4dx;
            }
            out[i] = r;
        }
    }

    fn advance<T: Real>(
        &self,
        u: &mut [T],
        dt: T,
        dx: T,
        nu: T,
        tau: Option<&[T]>,
        s: &mut Scratch<T>,
    ) {
        let quarter = T::lit(0.25);
        let three_quarters = T::lit(0.75);
        let third = T::one() / T::lit(3.0);
        let two_thirds = T::lit(2.0) / T::lit(3.0);

        self.rhs(u, tau, dx, nu, &mut s.sq, &mut s.rhs);
        for ((w, &v), &r) in s.stage.iter_mut().zip(u.iter()).zip(&s.rhs) {
            *w = v + dt * r;
        }
        self.rhs(&s.stage, tau, dx, nu, &mut s.sq, &mut s.rhs);
        for ((w, &v), &r) in s.stage.iter_mut().zip(u.iter()).zip(&s.rhs) {
            *w = three_quarters * v + quarter * (*w + dt * r);
        }
        self.rhs(&s.stage, tau, dx, nu, &mut s.sq, &mut s.rhs);
        for ((v, &w), &r) in u.iter_mut().zip(&s.stage).zip(&s.rhs) {
            *v = third * *v + two_thirds * (w + dt * r);
        }
    }

    /// Advance one SSP-RK3 step with a frozen `tau` (if any).
    pub fn step<T: Real>(
        &self,
        field: &FlowField<T>,
        dt: T,
        tau: Option<&[T]>,
    ) -> Result<FlowField<T>> {
        if !(dt > T::zero()) {
            return Err(Error::config("dt must be > 0"));
        }
        if let Some(t) = tau {
            if t.len() != field.n_cells() {
                return Err(Error::Shape {
                    layer: 0,
                    expected: field.n_cells(),
                    got: t.len(),
                });
            }
        }
        let mut scratch = Scratch::new(field.n_cells());
        let mut next = field.clone();
        self.advance(&mut next.values, dt, field.dx(), field.nu, tau, &mut scratch);
        next.time = field.time + dt;
        if next.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: 0,
                time: next.time.as_f64(),
                last_finite: field.values.iter().map(|v| v.as_f64()).collect(),
            });
        }
        Ok(next)
    }

    /// Integrate to `t_end` with a fixed step, recording every `snapshot_stride`-th
    /// state (the initial state included).
    ///
    /// The requested `dt` is shrunk to `span / ceil(span / dt)` so the run lands on
    /// `t_end` exactly. The CFL rule is checked once, here.
    pub fn run<T: Real>(
        &self,
        field: &FlowField<T>,
        t_end: T,
        dt: T,
        mut closure: Option<&mut dyn Closure<T>>,
        snapshot_stride: usize,
    ) -> Result<Trajectory<T>> {
        field.validate()?;
        if snapshot_stride < 1 {
            return Err(Error::config("snapshot_stride must be >= 1"));
        }
        if !(dt > T::zero()) {
            return Err(Error::config("dt must be > 0"));
        }
        if t_end < field.time {
            return Err(Error::config("t_end must not precede the field time"));
        }
        let limit = cfl_limit(field);
        if dt > limit * T::lit(1.0 + 1e-12) {
            return Err(Error::config(format!(
                "dt = {dt} exceeds the CFL limit {limit}"
            )));
        }
        let span = t_end - field.time;
        let n_steps = if span > T::zero() {
            ((span / dt).as_f64() - 1e-9).ceil().max(1.0) as usize
        } else {
            0
        };
        let dt_eff = if n_steps > 0 {
            span / T::from_usize(n_steps).unwrap()
        } else {
            dt
        };

        let n = field.n_cells();
        let dx = field.dx();
        let t0 = field.time;
        let mut scratch = Scratch::new(n);
        let mut tau = closure.as_ref().map(|_| vec![T::zero(); n]);
        let mut u = field.values.clone();
        let mut traj = Trajectory {
            length: field.length,
            nu: field.nu,
            dt: dt_eff,
            snapshot_interval: dt_eff * T::from_usize(snapshot_stride).unwrap(),
            snapshot_times: vec![t0],
            snapshots: vec![u.clone()],
        };
        for step in 1..=n_steps {
            if let (Some(c), Some(t)) = (closure.as_deref_mut(), tau.as_mut()) {
                c.tau(&u, dx, t)?;
            }
            self.advance(&mut u, dt_eff, dx, field.nu, tau.as_deref(), &mut scratch);
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    step,
                    time: (t0 + dt_eff * T::from_usize(step).unwrap()).as_f64(),
                    last_finite: traj
                        .snapshots
                        .last()
                        .map(|s| s.iter().map(|v| v.as_f64()).collect())
                        .unwrap_or_default(),
                });
            }
            if step % snapshot_stride == 0 {
                traj.snapshot_times
                    .push(t0 + dt_eff * T::from_usize(step).unwrap());
                traj.snapshots.push(u.clone());
            }
        }
        Ok(traj)
    }
}

pub fn step<T: Real>(field: &FlowField<T>, dt: T, tau: Option<&[T]>) -> Result<FlowField<T>> {
    Solver::default().step(field, dt, tau)
}

pub fn run<T: Real>(
    field: &FlowField<T>,
    t_end: T,
    dt: T,
    closure: Option<&mut dyn Closure<T>>,
    snapshot_stride: usize,
) -> Result<Trajectory<T>> {
    Solver::default().run(field, t_end, dt, closure, snapshot_stride)
}

/// Sidecar metadata written next to each binary trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySidecar {
    pub start_time: f64,
    pub seed: u64,
    pub config: serde_json::Value,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    p.into()
}

pub fn write_trajectory<T: Real>(
    traj: &Trajectory<T>,
    path: &Path,
    sidecar: &TrajectorySidecar,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TRAJECTORY_MAGIC)?;
    w.write_all(&(traj.n_cells() as u32).to_le_bytes())?;
    w.write_all(&(traj.len() as u32).to_le_bytes())?;
    for h in [traj.length, traj.nu, traj.dt, traj.snapshot_interval] {
        w.write_all(&h.as_f64().to_le_bytes())?;
    }
    for snap in &traj.snapshots {
        for v in snap {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(sidecar)?)?;
    Ok(())
}

/// Reads a trajectory and its sidecar. Snapshot times are rebuilt from the
/// sidecar start time and the header interval.
pub fn read_trajectory<T: Real>(path: &Path) -> Result<(Trajectory<T>, TrajectorySidecar)> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let sidecar: TrajectorySidecar = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    let header = 8 + 4 + 4 + 4 * 8;
    if bytes.len() < header {
        return Err(Error::format(bytes.len(), "truncated trajectory header"));
    }
    if &bytes[..8] != TRAJECTORY_MAGIC {
        return Err(Error::format(0, "bad trajectory magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let n_cells = u32_at(8);
    let count = u32_at(12);
    let expected = header + n_cells * count * 8;
    if bytes.len() != expected {
        return Err(Error::format(
            bytes.len().min(expected),
            format!("payload length {} does not match header ({expected})", bytes.len()),
        ));
    }
    let interval = f64_at(40);
    let snapshots = (0..count)
        .map(|s| {
            (0..n_cells)
                .map(|i| T::lit(f64_at(header + (s * n_cells + i) * 8)))
                .collect()
        })
        .collect();
    let traj = Trajectory {
        length: T::lit(f64_at(16)),
        nu: T::lit(f64_at(24)),
        dt: T::lit(f64_at(32)),
        snapshot_interval: T::lit(interval),
        snapshot_times: (0..count)
            .map(|k| T::lit(sidecar.start_time + interval * k as f64))
            .collect(),
        snapshots,
    };
    Ok((traj, sidecar))
}
