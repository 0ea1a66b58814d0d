//! Closure training data: stencil samples, normalization, reflection
//! augmentation, label balancing, realization-level splits and the packed
//! on-disk format.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coarse::CoarsePair;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;
use crate::stats;

pub const STENCIL: usize = 5;
pub const HALF_STENCIL: usize = STENCIL / 2;
pub const DATASET_MAGIC: &[u8; 8] = b"SKDS0001";
pub const DEFAULT_EPSILON_STD: f64 = 1e-8;
const RECORD_BYTES: usize = STENCIL * 4 + 4 + 3 * 4;
const HEADER_BYTES: usize = 8 + 4 + 4;

/// One closure training example: the 5-cell centered stencil of `u_bar` and the
/// unresolved stress at the center cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub features: [f32; STENCIL],
    pub target: f32,
    pub realization: u32,
    pub snapshot: u32,
    pub cell: u32,
}

impl Sample {
    pub fn features_f64(&self) -> [f64; STENCIL] {
        self.features.map(f64::from)
    }
}

/// Periodic stencil `u[i-2..=i+2]` written into `out`.
#[inline]
pub fn stencil_into<T: Copy>(u: &[T], i: usize, out: &mut [T; STENCIL]) {
    let n = u.len();
    for (k, o) in out.iter_mut().enumerate() {
        *o = u[(i + n + k - HALF_STENCIL) % n];
    }
}

pub fn extract_samples<T: Real>(pairs: &[CoarsePair<T>]) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(pairs.iter().map(CoarsePair::n_coarse).sum());
    for pair in pairs {
        let n = pair.n_coarse();
        if n < STENCIL {
            return Err(Error::config(format!(
                "n_coarse must be >= {STENCIL} for a {STENCIL}-cell stencil, got {n}"
            )));
        }
        let mut st = [T::zero(); STENCIL];
        for i in 0..n {
            stencil_into(&pair.u_bar, i, &mut st);
            out.push(Sample {
                features: st.map(|v| v.to_f32().unwrap()),
                target: pair.tau_unres[i].to_f32().unwrap(),
                realization: pair.provenance.realization,
                snapshot: pair.provenance.snapshot,
                cell: i as u32,
            });
        }
    }
    Ok(out)
}

/// Z-score statistics; every std is clamped from below by `epsilon_std`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub feature_mean: [f64; STENCIL],
    pub feature_std: [f64; STENCIL],
    pub target_mean: f64,
    pub target_std: f64,
}

impl NormStats {
    pub fn identity() -> Self {
        Self {
            feature_mean: [0.0; STENCIL],
            feature_std: [1.0; STENCIL],
            target_mean: 0.0,
            target_std: 1.0,
        }
    }

    /// Population statistics over `(features, target)` rows.
    pub fn fit_rows(rows: &[([f64; STENCIL], f64)], epsilon_std: f64) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Degenerate(format!(
                "need at least 2 samples for normalization statistics, got {}",
                rows.len()
            )));
        }
        let mut s = Self::identity();
        for k in 0..STENCIL {
            let (m, sd) = stats::mean_std(rows.iter().map(|r| r.0[k]));
            s.feature_mean[k] = m;
            s.feature_std[k] = sd.max(epsilon_std);
        }
        let (m, sd) = stats::mean_std(rows.iter().map(|r| r.1));
        s.target_mean = m;
        s.target_std = sd.max(epsilon_std);
        Ok(s)
    }

    #[inline]
    pub fn normalize_features<T: Real>(&self, f: &[T; STENCIL]) -> [T; STENCIL] {
        let mut out = [T::zero(); STENCIL];
        for k in 0..STENCIL {
            out[k] = (f[k] - T::lit(self.feature_mean[k])) / T::lit(self.feature_std[k]);
        }
        out
    }

    #[inline]
    pub fn normalize_target<T: Real>(&self, y: T) -> T {
        (y - T::lit(self.target_mean)) / T::lit(self.target_std)
    }

    #[inline]
    pub fn denormalize_target<T: Real>(&self, y_norm: T) -> T {
        y_norm * T::lit(self.target_std) + T::lit(self.target_mean)
    }

    pub fn normalize(&self, s: &Sample) -> ([f64; STENCIL], f64) {
        (
            self.normalize_features(&s.features_f64()),
            self.normalize_target(f64::from(s.target)),
        )
    }
}

pub fn fit_norm_stats(samples: &[Sample], epsilon_std: f64) -> Result<NormStats> {
    let rows: Vec<_> = samples
        .iter()
        .map(|s| (s.features_f64(), f64::from(s.target)))
        .collect();
    NormStats::fit_rows(&rows, epsilon_std)
}

/// Mirror image under `u(x) -> -u(L - x)`: features reversed and negated, label kept.
pub fn augment_reflect(s: &Sample) -> Sample {
    let mut f = s.features;
    f.reverse();
    Sample {
        features: f.map(|v| -v),
        ..*s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceInfo {
    /// Quantile edges of `|target|` over the input, `n_bins + 1` entries.
    pub bin_edges: Vec<f64>,
    pub input_counts: Vec<u64>,
    pub output_counts: Vec<u64>,
    pub seed: u64,
}

/// Resample with replacement so every `|target|` quantile bin contributes the
/// same number of samples. Output size equals input size.
pub fn balance(samples: &[Sample], n_bins: usize, seed: u64) -> Result<(Vec<Sample>, BalanceInfo)> {
    if n_bins < 2 {
        return Err(Error::config("n_bins must be >= 2"));
    }
    if samples.len() < n_bins {
        return Err(Error::Degenerate(format!(
            "{} samples cannot fill {n_bins} bins",
            samples.len()
        )));
    }
    let mags: Vec<f64> = samples.iter().map(|s| f64::from(s.target).abs()).collect();
    let sorted = stats::sorted(&mags);
    let edges: Vec<f64> = (0..=n_bins)
        .map(|b| stats::quantile_sorted(&sorted, b as f64 / n_bins as f64))
        .collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (i, &m) in mags.iter().enumerate() {
        members[stats::bin_index(&edges, m)].push(i);
    }
    let occupied: Vec<usize> = (0..n_bins).filter(|&b| !members[b].is_empty()).collect();
    let n = samples.len();
    let per = n / occupied.len();
    let extra = n % occupied.len();
    let mut rng = rng::stream(seed, "balance");
    let mut out = Vec::with_capacity(n);
    let mut output_counts = vec![0u64; n_bins];
    for (rank, &b) in occupied.iter().enumerate() {
        let quota = per + usize::from(rank < extra);
        let pool = &members[b];
        for _ in 0..quota {
            out.push(samples[pool[rng.random_range(0..pool.len())]]);
        }
        output_counts[b] = quota as u64;
    }
    let info = BalanceInfo {
        input_counts: members.iter().map(|m| m.len() as u64).collect(),
        output_counts,
        bin_edges: edges,
        seed,
    };
    Ok((out, info))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Grid facts the closure baselines need to interpret raw stencils.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub coarse_dx: f64,
    pub n_coarse: u32,
    pub filter_ratio: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
    /// Fitted on `train` only.
    pub norm_stats: NormStats,
    pub balance: Option<BalanceInfo>,
    pub grid: GridInfo,
    pub seed: u64,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn realizations(&self, split: Split) -> BTreeSet<u32> {
        self.split(split).iter().map(|s| s.realization).collect()
    }
}

/// Assign whole realizations to train/val/test by cumulative fraction after a
/// seeded shuffle of the realization ids.
pub fn split_by_realization(
    samples: &[Sample],
    fractions: [f64; 3],
    seed: u64,
    grid: GridInfo,
    epsilon_std: f64,
) -> Result<Dataset> {
    if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 || fractions.iter().any(|&f| f < 0.0) {
        return Err(Error::config("split fractions must be >= 0 and sum to 1"));
    }
    let mut ids: Vec<u32> = samples
        .iter()
        .map(|s| s.realization)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = ids.len();
    if n < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 realizations for three splits, got {n}"
        )));
    }
    ids.shuffle(&mut rng::stream(seed, "split"));
    let mut n_train = ((fractions[0] * n as f64).round() as usize).clamp(1, n - 2);
    let mut n_val = ((fractions[1] * n as f64).round() as usize).max(1);
    if n_train + n_val > n - 1 {
        n_val = (n - 1 - n_train).max(1);
        n_train = n - 1 - n_val;
    }
    let train_ids: BTreeSet<u32> = ids[..n_train].iter().copied().collect();
    let val_ids: BTreeSet<u32> = ids[n_train..n_train + n_val].iter().copied().collect();
    let mut ds = Dataset {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        norm_stats: NormStats::identity(),
        balance: None,
        grid,
        seed,
    };
    for s in samples {
        if train_ids.contains(&s.realization) {
            ds.train.push(*s);
        } else if val_ids.contains(&s.realization) {
            ds.val.push(*s);
        } else {
            ds.test.push(*s);
        }
    }
    ds.norm_stats = fit_norm_stats(&ds.train, epsilon_std)?;
    Ok(ds)
}

/// Options applied to the train split after splitting.
#[derive(Debug, Clone, Copy)]
pub struct PrepareOptions {
    pub augment: bool,
    pub balance_bins: Option<usize>,
    pub epsilon_std: f64,
}

/// Split, then augment and balance the train split, then refit statistics on it.
pub fn build_dataset(
    samples: &[Sample],
    fractions: [f64; 3],
    seed: u64,
    grid: GridInfo,
    opts: PrepareOptions,
) -> Result<Dataset> {
    let mut ds = split_by_realization(samples, fractions, seed, grid, opts.epsilon_std)?;
    if opts.augment {
        let mirrored: Vec<Sample> = ds.train.iter().map(augment_reflect).collect();
        ds.train.extend(mirrored);
    }
    if let Some(bins) = opts.balance_bins {
        let (balanced, info) = balance(&ds.train, bins, rng::child_seed(seed, "balance"))?;
        ds.train = balanced;
        ds.balance = Some(info);
    }
    ds.norm_stats = fit_norm_stats(&ds.train, opts.epsilon_std)?;
    Ok(ds)
}

/// Manifest written next to each packed split file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub split: Split,
    pub sample_count: u64,
    pub feature_count: u32,
    pub norm_stats: NormStats,
    pub balance: Option<BalanceInfo>,
    pub grid: GridInfo,
    pub seed: u64,
}

pub fn write_split(samples: &[Sample], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&(samples.len() as u32).to_le_bytes())?;
    w.write_all(&(STENCIL as u32).to_le_bytes())?;
    for s in samples {
        for f in s.features {
            w.write_all(&f.to_le_bytes())?;
        }
        w.write_all(&s.target.to_le_bytes())?;
        w.write_all(&s.realization.to_le_bytes())?;
        w.write_all(&s.snapshot.to_le_bytes())?;
        w.write_all(&s.cell.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn decode_split(bytes: &[u8]) -> Result<Vec<Sample>> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::format(bytes.len(), "truncated dataset header"));
    }
    if &bytes[..8] != DATASET_MAGIC {
        return Err(Error::format(0, "bad dataset magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let count = u32_at(8) as usize;
    let nfeat = u32_at(12) as usize;
    if nfeat != STENCIL {
        return Err(Error::format(12, format!("feature count {nfeat}, expected {STENCIL}")));
    }
    let expected = HEADER_BYTES + count * RECORD_BYTES;
    if bytes.len() != expected {
        return Err(Error::format(
            bytes.len().min(expected),
            format!("payload is {} bytes, header implies {expected}", bytes.len()),
        ));
    }
    Ok((0..count)
        .map(|i| {
            let o = HEADER_BYTES + i * RECORD_BYTES;
            let mut features = [0f32; STENCIL];
            for (k, f) in features.iter_mut().enumerate() {
                *f = f32_at(o + 4 * k);
            }
            Sample {
                features,
                target: f32_at(o + 20),
                realization: u32_at(o + 24),
                snapshot: u32_at(o + 28),
                cell: u32_at(o + 32),
            }
        })
        .collect())
}

pub fn read_split(path: &Path) -> Result<Vec<Sample>> {
    decode_split(&std::fs::read(path)?)
}

pub fn split_paths(dir: &Path, split: Split) -> (std::path::PathBuf, std::path::PathBuf) {
    (
        dir.join(format!("{}.skds", split.name())),
        dir.join(format!("{}.json", split.name())),
    )
}

/// Writes `{train,val,test}.skds` plus one JSON manifest per split into `dir`.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for split in Split::ALL {
        let (bin, manifest) = split_paths(dir, split);
        let samples = ds.split(split);
        write_split(samples, &bin)?;
        let m = SplitManifest {
            split,
            sample_count: samples.len() as u64,
            feature_count: STENCIL as u32,
            norm_stats: ds.norm_stats,
            balance: if split == Split::Train { ds.balance.clone() } else { None },
            grid: ds.grid,
            seed: ds.seed,
        };
        std::fs::write(manifest, serde_json::to_vec_pretty(&m)?)?;
    }
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let mut parts = Vec::new();
    let mut train_manifest = None;
    for split in Split::ALL {
        let (bin, manifest) = split_paths(dir, split);
        let m: SplitManifest = serde_json::from_slice(&std::fs::read(&manifest)?)?;
        let samples = read_split(&bin)?;
        if m.sample_count != samples.len() as u64 {
            return Err(Error::format(
                8,
                format!(
                    "manifest lists {} samples, {} holds {}",
                    m.sample_count,
                    bin.display(),
                    samples.len()
                ),
            ));
        }
        if split == Split::Train {
            train_manifest = Some(m);
        }
        parts.push(samples);
    }
    let m = train_manifest.unwrap();
    let test = parts.pop().unwrap();
    let val = parts.pop().unwrap();
    let train = parts.pop().unwrap();
    Ok(Dataset {
        train,
        val,
        test,
        norm_stats: m.norm_stats,
        balance: m.balance,
        grid: m.grid,
        seed: m.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse::{reflect, subgrid_labels, Provenance};

    fn pair(u_bar: Vec<f64>) -> CoarsePair<f64> {
        let n = u_bar.len();
        CoarsePair {
            tau_tot: vec![0.0; n],
            tau_res: vec![0.0; n],
            tau_unres: (0..n).map(|i| i as f64).collect(),
            u_bar,
            provenance: Provenance { realization: 2, snapshot: 9 },
        }
    }

    fn sample(realization: u32, target: f32) -> Sample {
        Sample {
            features: [target, 1.0, 2.0, 3.0, 4.0],
            target,
            realization,
            snapshot: 0,
            cell: 0,
        }
    }

    const GRID: GridInfo = GridInfo { coarse_dx: 0.1, n_coarse: 128, filter_ratio: 8 };

    #[test]
    fn extraction_counts_and_wraps() {
        let u: Vec<f64> = (0..128).map(f64::from).collect();
        let s = extract_samples(&[pair(u)]).unwrap();
        assert_eq!(s.len(), 128);
        assert_eq!(s[0].features, [126.0, 127.0, 0.0, 1.0, 2.0]);
        assert_eq!(s[0].target, 0.0);
        assert_eq!((s[5].realization, s[5].snapshot, s[5].cell), (2, 9, 5));
        let c = extract_samples(&[pair(vec![0.5; 16])]).unwrap();
        assert!(c.iter().all(|x| x.features == [0.5; 5]));
        assert!(matches!(extract_samples(&[pair(vec![0.0; 4])]), Err(Error::Config(_))));
    }

    #[test]
    fn norm_stats_basics() {
        let rows = vec![([0.0, 5.0, 0.0, 0.0, 0.0], 1.0), ([2.0, 5.0, 0.0, 0.0, 0.0], 3.0)];
        let s = NormStats::fit_rows(&rows, 1e-8).unwrap();
        assert_eq!(s.feature_mean[0], 1.0);
        assert_eq!(s.feature_std[0], 1.0);
        assert_eq!(s.feature_std[1], 1e-8);
        assert!(NormStats::fit_rows(&rows[..1], 1e-8).is_err());
        assert!(fit_norm_stats(&[], 1e-8).is_err());
    }

    #[test]
    fn zscored_rows_have_unit_stats() {
        let rows: Vec<_> = (0..200)
            .map(|i| {
                let x = i as f64;
                ([x.sin() * 3.0 + 1.0, x.cos(), x * 0.01, (x * 0.3).sin(), 2.0 * x], x.sqrt())
            })
            .collect();
        let s = NormStats::fit_rows(&rows, 1e-8).unwrap();
        let z: Vec<_> = rows
            .iter()
            .map(|(f, t)| (s.normalize_features(f), s.normalize_target(*t)))
            .collect();
        let s2 = NormStats::fit_rows(&z, 1e-8).unwrap();
        for k in 0..STENCIL {
            assert!(s2.feature_mean[k].abs() < 1e-10);
            assert!((s2.feature_std[k] - 1.0).abs() < 1e-10);
        }
        assert!(s2.target_mean.abs() < 1e-10 && (s2.target_std - 1.0).abs() < 1e-10);
    }

    #[test]
    fn normalize_examples() {
        let mut s = NormStats::identity();
        s.feature_mean = [1.0; 5];
        s.feature_std = [2.0; 5];
        s.target_mean = 0.3;
        s.target_std = 7.0;
        assert_eq!(s.normalize_features(&[3.0; 5]), [1.0; 5]);
        assert_eq!(s.normalize_features(&[1.0; 5]), [0.0; 5]);
        for y in [0.0f64, 1.5, -2.25e-3, 123.0] {
            let back = s.denormalize_target(s.normalize_target(y));
            assert!((back - y).abs() <= 1e-12 * y.abs().max(1e-300) + 1e-16);
        }
    }

    #[test]
    fn reflection_is_involution() {
        let s = Sample { features: [1.0, 2.0, 3.0, 4.0, 5.0], target: 0.7, realization: 1, snapshot: 2, cell: 3 };
        let r = augment_reflect(&s);
        assert_eq!(r.features, [-5.0, -4.0, -3.0, -2.0, -1.0]);
        assert_eq!(r.target, 0.7);
        assert_eq!(augment_reflect(&r), s);
    }

    #[test]
    fn reflected_sample_matches_recomputed_label() {
        let f = crate::burgers::init_field::<f64>(512, 6.28, 0.01, 8, 1.0, 21).unwrap();
        let p = subgrid_labels(&f.values, 8).unwrap();
        let q = subgrid_labels(&reflect(&f.values), 8).unwrap();
        let n = p.n_coarse();
        let mut st = [0.0; STENCIL];
        let mut sq = [0.0; STENCIL];
        for i in 0..n {
            let m = n - 1 - i;
            stencil_into(&p.u_bar, m, &mut st);
            stencil_into(&q.u_bar, i, &mut sq);
            let mut mirrored = st;
            mirrored.reverse();
            for k in 0..STENCIL {
                assert!((mirrored[k] + sq[k]).abs() < 1e-14);
            }
            assert!((q.tau_unres[i] - p.tau_unres[m]).abs() < 1e-12);
        }
    }

    #[test]
    fn balance_contract() {
        let samples: Vec<Sample> = (0..1000).map(|i| sample(0, (i as f32) * 0.001)).collect();
        let (out, info) = balance(&samples, 10, 3).unwrap();
        assert_eq!(out.len(), samples.len());
        assert_eq!(info.bin_edges.len(), 11);
        for (a, b) in info.input_counts.iter().zip(&info.output_counts) {
            assert!((*a as i64 - *b as i64).abs() <= 1);
        }
        let hist = stats::histogram(
            &info.bin_edges,
            &out.iter().map(|s| f64::from(s.target).abs()).collect::<Vec<_>>(),
        );
        assert!(hist.iter().all(|&c| c == 100));
        let (again, _) = balance(&samples, 10, 3).unwrap();
        assert_eq!(out, again);
        assert!(balance(&samples[..5], 10, 3).is_err());
    }

    #[test]
    fn split_counts_and_disjointness() {
        let samples: Vec<Sample> = (0..10).flat_map(|r| (0..20).map(move |k| sample(r, k as f32))).collect();
        let ds = split_by_realization(&samples, [0.8, 0.1, 0.1], 5, GRID, 1e-8).unwrap();
        let (tr, va, te) = (
            ds.realizations(Split::Train),
            ds.realizations(Split::Val),
            ds.realizations(Split::Test),
        );
        assert_eq!((tr.len(), va.len(), te.len()), (8, 1, 1));
        assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
        let again = split_by_realization(&samples, [0.8, 0.1, 0.1], 5, GRID, 1e-8).unwrap();
        assert_eq!(ds, again);
        assert_eq!(ds.norm_stats, fit_norm_stats(&ds.train, 1e-8).unwrap());
        let few: Vec<Sample> = (0..2).map(|r| sample(r, 1.0)).collect();
        assert!(split_by_realization(&few, [0.8, 0.1, 0.1], 5, GRID, 1e-8).is_err());
        assert!(split_by_realization(&samples, [0.8, 0.1, 0.2], 5, GRID, 1e-8).is_err());
    }

    #[test]
    fn dataset_round_trip_and_corruption() {
        let samples: Vec<Sample> = (0..6)
            .flat_map(|r| (0..30).map(move |k| sample(r, (k as f32).sin())))
            .collect();
        let ds = build_dataset(
            &samples,
            [0.5, 0.25, 0.25],
            9,
            GRID,
            PrepareOptions { augment: true, balance_bins: Some(4), epsilon_std: 1e-8 },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);

        let (bin, manifest) = split_paths(dir.path(), Split::Train);
        let m: SplitManifest = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
        let len = std::fs::metadata(&bin).unwrap().len() as usize;
        assert_eq!(len, HEADER_BYTES + m.sample_count as usize * RECORD_BYTES);

        let bytes = std::fs::read(&bin).unwrap();
        assert!(matches!(decode_split(&bytes[..bytes.len() - 7]), Err(Error::Format { .. })));
        assert!(matches!(decode_split(&bytes[..10]), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_split(&bad), Err(Error::Format { offset: 0, .. })));
    }
}
