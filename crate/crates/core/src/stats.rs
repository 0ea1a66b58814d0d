//! Small descriptive-statistics helpers shared across modules.

/// Population mean and standard deviation (two-pass).
pub fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values.clone() {
        sum += v;
        n += 1;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Linear-interpolated quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: &[f64]) -> f64 {
    quantile_sorted(&sorted(values), 0.5)
}

/// Index of the bin containing `x` for ascending `edges` (`edges.len() - 1` bins).
/// Values outside are clamped into the first or last bin.
pub fn bin_index(edges: &[f64], x: f64) -> usize {
    let nbins = edges.len() - 1;
    match edges.partition_point(|&e| e <= x) {
        0 => 0,
        p if p > nbins => nbins - 1,
        p => p - 1,
    }
}

pub fn histogram(edges: &[f64], values: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; edges.len() - 1];
    for &v in values {
        counts[bin_index(edges, v)] += 1;
    }
    counts
}
