//! A priori scores against held-out labels, a posteriori coupled runs against
//! filtered fine-grid truth, and the energy-growth instability detector.

use serde::{Deserialize, Serialize};

use crate::burgers::{cfl_limit, energy, spectrum, Closure, FlowField, Solver, Trajectory};
use crate::closures::smagorinsky_from_stencil;
use crate::coarse::box_filter;
use crate::data::{NormStats, Sample, STENCIL};
use crate::error::{Error, Result};
use crate::neural::Mlp;
use crate::scalar::Real;

/// Guard added to energies before taking logarithms.
pub const LOG_GUARD: f64 = 1e-300;

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need two equal-length series of >= 2 values, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub pearson_r: f64,
    pub mse: f64,
    pub n_samples: usize,
}

pub fn score(predictions: &[f64], labels: &[f64]) -> Result<ModelScore> {
    let r = pearson(predictions, labels)?;
    let mse = predictions
        .iter()
        .zip(labels)
        .map(|(p, l)| (p - l) * (p - l))
        .sum::<f64>()
        / labels.len() as f64;
    Ok(ModelScore {
        pearson_r: r,
        mse,
        n_samples: labels.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub neural: ModelScore,
    pub smagorinsky: ModelScore,
    pub smagorinsky_c: f64,
    pub coarse_dx: f64,
}

/// Denormalized network predictions for a set of samples.
pub fn predict_samples<T: Real>(mlp: &Mlp<T>, stats: &NormStats, samples: &[Sample]) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(samples.len() * STENCIL);
    for s in samples {
        let f: [T; STENCIL] = s.features.map(|v| T::lit(f64::from(v)));
        x.extend_from_slice(&stats.normalize_features(&f));
    }
    let (y, _) = mlp.forward_batch(&x, samples.len())?;
    Ok(y.into_iter().map(|v| stats.denormalize_target(v).as_f64()).collect())
}

/// Scores the network and the Smagorinsky baseline on identical samples, in
/// physical units.
pub fn apriori_validate<T: Real>(
    mlp: &Mlp<T>,
    stats: &NormStats,
    c: f64,
    coarse_dx: f64,
    test: &[Sample],
) -> Result<AprioriReport> {
    if test.is_empty() {
        return Err(Error::Degenerate("empty test split".into()));
    }
    let labels: Vec<f64> = test.iter().map(|s| f64::from(s.target)).collect();
    let nn = predict_samples(mlp, stats, test)?;
    let smag: Vec<f64> = test
        .iter()
        .map(|s| smagorinsky_from_stencil(&s.features_f64(), coarse_dx, c))
        .collect();
    Ok(AprioriReport {
        neural: score(&nn, &labels)?,
        smagorinsky: score(&smag, &labels)?,
        smagorinsky_c: c,
        coarse_dx,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub stable: bool,
    /// Least-squares slope of `ln(E + guard)` per sample over the trailing window.
    pub growth_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub window: usize,
    pub growth_threshold: f64,
    pub blowup_factor: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window: 10,
            growth_threshold: 0.05,
            blowup_factor: 100.0,
        }
    }
}

pub fn detect_instability(
    series: &[f64],
    window: usize,
    growth_threshold: f64,
    blowup_factor: f64,
) -> Result<Stability> {
    if window < 4 || series.len() < window {
        return Err(Error::config(format!(
            "instability window {window} needs 4 <= window <= series length {}",
            series.len()
        )));
    }
    let tail = &series[series.len() - window..];
    let w = window as f64;
    let xm = (w - 1.0) / 2.0;
    let logs: Vec<f64> = tail.iter().map(|e| (e + LOG_GUARD).ln()).collect();
    let ym = logs.iter().sum::<f64>() / w;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in logs.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    let rate = sxy / sxx;
    let last = *series.last().unwrap();
    let unstable = rate > growth_threshold || last > blowup_factor * series[0] || !last.is_finite();
    Ok(Stability {
        stable: !unstable,
        growth_rate: rate,
    })
}

/// `sqrt(sum (a - b)^2 / sum b^2)` over the common prefix.
pub fn relative_l2(a: &[f64], truth: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, t) in a.iter().zip(truth) {
        num += (x - t) * (x - t);
        den += t * t;
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AposterioriConfig {
    /// Fraction of the post-spin-up snapshot span to integrate.
    pub horizon_frac: f64,
    pub detector: DetectorConfig,
    /// Coarse step as a fraction of the CFL limit, re-evaluated each snapshot interval.
    pub cfl_safety: f64,
}

impl Default for AposterioriConfig {
    fn default() -> Self {
        Self {
            horizon_frac: 0.5,
            detector: DetectorConfig::default(),
            cfl_safety: 0.9,
        }
    }
}

/// Filtered fine-grid reference over the validation horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthReference {
    pub start_snapshot: usize,
    pub n_coarse: usize,
    pub length: f64,
    pub nu: f64,
    pub snapshot_interval: f64,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// Per-snapshot spectra (k = 0..=n_coarse/2).
    #[serde(skip)]
    pub spectra: Vec<Vec<f64>>,
    /// Filtered state at `start_snapshot`, the shared initial condition.
    pub initial: Vec<f64>,
}

impl TruthReference {
    pub fn horizon(&self) -> usize {
        self.energy.len() - 1
    }

    pub fn final_spectrum(&self) -> &[f64] {
        self.spectra.last().unwrap()
    }
}

pub fn truth_reference(
    traj: &Trajectory<f64>,
    r: usize,
    discard_initial: usize,
    horizon_frac: f64,
) -> Result<TruthReference> {
    if discard_initial >= traj.len() {
        return Err(Error::config(format!(
            "discard_initial = {discard_initial} leaves no snapshots out of {}",
            traj.len()
        )));
    }
    if !(horizon_frac > 0.0 && horizon_frac <= 1.0) {
        return Err(Error::config("horizon_frac must be in (0, 1]"));
    }
    let span = traj.len() - 1 - discard_initial;
    let horizon = ((span as f64) * horizon_frac).floor() as usize;
    if horizon < 1 {
        return Err(Error::config(format!(
            "trajectory of {} snapshots is too short for an a posteriori horizon",
            traj.len()
        )));
    }
    let mut energies = Vec::with_capacity(horizon + 1);
    let mut spectra = Vec::with_capacity(horizon + 1);
    let mut initial = Vec::new();
    for i in discard_initial..=discard_initial + horizon {
        let ub = box_filter(&traj.snapshots[i], r)?;
        energies.push(energy(&ub));
        spectra.push(spectrum(&ub).energy);
        if i == discard_initial {
            initial = ub;
        }
    }
    Ok(TruthReference {
        start_snapshot: discard_initial,
        n_coarse: initial.len(),
        length: traj.length,
        nu: traj.nu,
        snapshot_interval: traj.snapshot_interval,
        times: traj.snapshot_times[discard_initial..=discard_initial + horizon].to_vec(),
        energy: energies,
        spectra,
        initial,
    })
}

/// Spectrum error over `k in [1, n/4]`.
pub fn spectrum_error(spec: &[f64], truth: &[f64], n_coarse: usize) -> f64 {
    let hi = (n_coarse / 4).min(spec.len() - 1).min(truth.len() - 1);
    relative_l2(&spec[1..=hi], &truth[1..=hi])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureRun {
    pub closure: String,
    pub energy: Vec<f64>,
    pub final_spectrum: Vec<f64>,
    pub energy_error: f64,
    pub spectrum_error: f64,
    pub stable: bool,
    pub growth_rate: Option<f64>,
    pub aborted: bool,
    pub abort_reason: Option<String>,
    pub coarse_steps: usize,
}

/// Scores a coarse energy trace and final spectrum against the truth, over the
/// snapshots the run reached.
pub fn compare_to_truth(truth: &TruthReference, energies: &[f64], final_spectrum: &[f64]) -> (f64, f64) {
    let reached = energies.len().min(truth.energy.len());
    let e = relative_l2(&energies[..reached], &truth.energy[..reached]);
    let s = spectrum_error(final_spectrum, &truth.spectra[reached - 1], truth.n_coarse);
    (e, s)
}

/// Integrates one closure from the shared filtered initial state, snapshot by
/// snapshot, aborting on divergence or detected instability.
pub fn run_closure(
    truth: &TruthReference,
    name: &str,
    mut closure: Option<&mut dyn Closure<f64>>,
    cfg: &AposterioriConfig,
) -> Result<ClosureRun> {
    let solver = Solver::default();
    let mut field = FlowField::new(truth.initial.clone(), truth.length, truth.nu)?;
    field.time = truth.times[0];
    let mut energies = vec![energy(&field.values)];
    let mut last_stability: Option<Stability> = None;
    let mut abort_reason = None;
    let mut steps = 0usize;
    for k in 1..=truth.horizon() {
        let t_next = truth.times[k];
        let span = t_next - field.time;
        let limit = cfl_limit(&field) * cfg.cfl_safety;
        let substeps = (span / limit).ceil().max(1.0) as usize;
        let dt = span / substeps as f64;
        let c = closure.as_mut().map(|c| &mut **c as &mut dyn Closure<f64>);
        match solver.run(&field, t_next, dt, c, substeps) {
            Ok(traj) => {
                steps += substeps;
                field.values = traj.snapshots.last().unwrap().clone();
                field.time = t_next;
                energies.push(energy(&field.values));
            }
            Err(Error::Divergence { step, time, .. }) => {
                abort_reason = Some(format!("non-finite state at coarse step {} (t = {time})", steps + step));
                break;
            }
            Err(e) => return Err(e),
        }
        if energies.len() >= cfg.detector.window {
            let s = detect_instability(
                &energies,
                cfg.detector.window,
                cfg.detector.growth_threshold,
                cfg.detector.blowup_factor,
            )?;
            last_stability = Some(s);
            if !s.stable {
                abort_reason = Some(format!("energy growth rate {:.4e} per snapshot", s.growth_rate));
                break;
            }
        }
    }
    let final_spectrum = spectrum(&field.values).energy;
    let (energy_error, spectrum_error) = compare_to_truth(truth, &energies, &final_spectrum);
    let aborted = abort_reason.is_some();
    let stable = !aborted && last_stability.map_or(true, |s| s.stable);
    Ok(ClosureRun {
        closure: name.to_string(),
        energy: energies,
        final_spectrum,
        energy_error,
        spectrum_error,
        stable,
        growth_rate: last_stability.map(|s| s.growth_rate),
        aborted,
        abort_reason,
        coarse_steps: steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AposterioriReport {
    pub truth: TruthReference,
    pub truth_final_spectrum: Vec<f64>,
    /// Truth scored against itself; zero by construction.
    pub truth_self_error: f64,
    pub filter_ratio: usize,
    pub config: AposterioriConfig,
    pub closures: Vec<ClosureRun>,
}

pub fn assemble_report(
    truth: TruthReference,
    filter_ratio: usize,
    config: AposterioriConfig,
    closures: Vec<ClosureRun>,
) -> AposterioriReport {
    let (e, s) = compare_to_truth(&truth, &truth.energy, truth.final_spectrum());
    AposterioriReport {
        truth_final_spectrum: truth.final_spectrum().to_vec(),
        truth_self_error: e.max(s),
        truth,
        filter_ratio,
        config,
        closures,
    }
}

pub type NamedClosure<'a> = (String, Option<Box<dyn Closure<f64> + Send + 'a>>);

/// Runs every closure sequentially against one truth reference.
pub fn aposteriori_validate(
    traj: &Trajectory<f64>,
    r: usize,
    discard_initial: usize,
    closures: Vec<NamedClosure<'_>>,
    cfg: AposterioriConfig,
) -> Result<AposterioriReport> {
    let truth = truth_reference(traj, r, discard_initial, cfg.horizon_frac)?;
    let mut runs = Vec::with_capacity(closures.len());
    for (name, mut c) in closures {
        let c: Option<&mut dyn Closure<f64>> = match c.as_mut() {
            Some(b) => Some(b.as_mut()),
            None => None,
        };
        runs.push(run_closure(&truth, &name, c, &cfg)?);
    }
    Ok(assemble_report(truth, r, cfg, runs))
}

fn cell(v: Option<&f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// `time,truth,<closure>...`; rows past an aborted run are left blank.
pub fn energy_csv(report: &AposterioriReport) -> String {
    let mut out = String::from("time,truth");
    for c in &report.closures {
        out.push(',');
        out.push_str(&c.closure);
    }
    out.push('\n');
    for (i, t) in report.truth.times.iter().enumerate() {
        out.push_str(&format!("{t:e},{}", cell(report.truth.energy.get(i))));
        for c in &report.closures {
            out.push(',');
            out.push_str(&cell(c.energy.get(i)));
        }
        out.push('\n');
    }
    out
}

/// `k,truth,<closure>...` for the final spectra.
pub fn spectrum_csv(report: &AposterioriReport) -> String {
    let mut out = String::from("k,truth");
    for c in &report.closures {
        out.push(',');
        out.push_str(&c.closure);
    }
    out.push('\n');
    for (k, t) in report.truth_final_spectrum.iter().enumerate() {
        out.push_str(&format!("{k},{t:e}"));
        for c in &report.closures {
            out.push(',');
            out.push_str(&cell(c.final_spectrum.get(k)));
        }
        out.push('\n');
    }
    out
}
