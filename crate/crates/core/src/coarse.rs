//! Box filtering of fine fields and subgrid-stress labels.
//!
//! The filter is a top-hat mean over `r` consecutive fine cells fused with
//! downsampling by `r`. For the Burgers flux the stress decomposes as
//! `tau_tot = tau_res + tau_unres` with `tau_tot = filter(u^2)` and
//! `tau_res = filter(u)^2`; `tau_unres` is the sub-filter variance and is what a
//! closure has to supply.
//!
//! `tau_unres` is evaluated as a two-pass variance and `tau_tot` as the sum, so
//! the identity holds bitwise and `tau_unres >= 0` without cancellation.

use crate::burgers::Trajectory;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Where a coarse pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Provenance {
    pub realization: u32,
    pub snapshot: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarsePair<T> {
    pub u_bar: Vec<T>,
    pub tau_tot: Vec<T>,
    pub tau_res: Vec<T>,
    /// `mean((u - u_bar)^2)` over the block.
    pub tau_unres: Vec<T>,
    pub provenance: Provenance,
}

impl<T> CoarsePair<T> {
    pub fn n_coarse(&self) -> usize {
        self.u_bar.len()
    }
}

fn check_ratio(n: usize, r: usize) -> Result<()> {
    if r < 2 {
        return Err(Error::config(format!("filter ratio r must be >= 2, got {r}")));
    }
    if n % r != 0 {
        return Err(Error::config(format!("r = {r} must divide n_cells = {n}")));
    }
    Ok(())
}

/// `coarse[i] = mean(values[i*r .. i*r + r])`.
pub fn box_filter<T: Real>(values: &[T], r: usize) -> Result<Vec<T>> {
    check_ratio(values.len(), r)?;
    let inv = T::one() / T::from_usize(r).unwrap();
    Ok(values
        .chunks_exact(r)
        .map(|c| c.iter().copied().sum::<T>() * inv)
        .collect())
}

pub fn subgrid_labels<T: Real>(fine: &[T], r: usize) -> Result<CoarsePair<T>> {
    let u_bar = box_filter(fine, r)?;
    let inv = T::one() / T::from_usize(r).unwrap();
    let tau_unres: Vec<T> = fine
        .chunks_exact(r)
        .zip(&u_bar)
        .map(|(c, &m)| c.iter().map(|&u| (u - m) * (u - m)).sum::<T>() * inv)
        .collect();
    let tau_res: Vec<T> = u_bar.iter().map(|&u| u * u).collect();
    let tau_tot = tau_res.iter().zip(&tau_unres).map(|(&s, &v)| s + v).collect();
    Ok(CoarsePair {
        u_bar,
        tau_tot,
        tau_res,
        tau_unres,
        provenance: Provenance::default(),
    })
}

/// Labels for every snapshot after the first `discard_initial` (spin-up).
pub fn build_pairs<T: Real>(
    trajectory: &Trajectory<T>,
    r: usize,
    discard_initial: usize,
    realization: u32,
) -> Result<Vec<CoarsePair<T>>> {
    if discard_initial >= trajectory.len() {
        return Err(Error::config(format!(
            "discard_initial = {discard_initial} leaves no snapshots out of {}",
            trajectory.len()
        )));
    }
    trajectory
        .snapshots
        .iter()
        .enumerate()
        .skip(discard_initial)
        .map(|(s, snap)| {
            let mut pair = subgrid_labels(snap, r)?;
            pair.provenance = Provenance {
                realization,
                snapshot: s as u32,
            };
            Ok(pair)
        })
        .collect()
}

/// Mirror symmetry of Burgers: `u(x) -> -u(L - x)` on the cell index grid.
pub fn reflect<T: Real>(values: &[T]) -> Vec<T> {
    values.iter().rev().map(|&v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::burgers::{cfl_limit, init_field, run};
    use proptest::prelude::*;

    #[test]
    fn small_box_filter_cases() {
        assert_eq!(box_filter(&[1.0, 1.0, 3.0, 3.0], 2).unwrap(), vec![1.0, 3.0]);
        assert_eq!(box_filter(&[2.5f64; 16], 4).unwrap(), vec![2.5; 4]);
        assert!(matches!(box_filter(&[0.0f64; 12], 5), Err(Error::Config(_))));
        assert!(matches!(box_filter(&[0.0f64; 12], 1), Err(Error::Config(_))));
    }

    #[test]
    fn two_cell_block_labels() {
        let p = subgrid_labels(&[0.0, 2.0], 2).unwrap();
        assert_eq!(p.u_bar, vec![1.0]);
        assert_eq!(p.tau_tot, vec![2.0]);
        assert_eq!(p.tau_res, vec![1.0]);
        assert_eq!(p.tau_unres, vec![1.0]);
    }

    #[test]
    fn blockwise_constant_has_no_unresolved_stress() {
        let fine: Vec<f64> = (0..32).map(|i| ((i / 4) as f64 * 0.7).sin()).collect();
        let p = subgrid_labels(&fine, 4).unwrap();
        assert!(p.tau_unres.iter().all(|&t| t.abs() < 1e-15));
    }

    #[test]
    fn pairs_from_trajectory() {
        let f = init_field(128, 6.28, 0.02, 4, 1.0, 3).unwrap();
        let t = run(&f, 0.3, cfl_limit(&f), None, 2).unwrap();
        let pairs = build_pairs(&t, 8, 2, 5).unwrap();
        assert_eq!(pairs.len(), t.len() - 2);
        assert_eq!(pairs[0].provenance, Provenance { realization: 5, snapshot: 2 });
        assert_eq!(pairs[0].n_coarse(), 16);
        assert!(matches!(build_pairs(&t, 8, t.len(), 0), Err(Error::Config(_))));

        let z = crate::burgers::FlowField::<f64>::zeros(64, 1.0, 0.1).unwrap();
        let tz = run(&z, 0.01, 5e-4, None, 100).unwrap();
        let pz = build_pairs(&tz, 8, 0, 0).unwrap();
        assert_eq!(pz.len(), 1);
        assert!(pz[0].tau_tot.iter().chain(&pz[0].tau_unres).all(|&v| v == 0.0));
    }

    #[test]
    fn reflection_commutes_with_labels() {
        let f = init_field::<f64>(256, 6.28, 0.02, 8, 1.0, 8).unwrap();
        let p = subgrid_labels(&f.values, 8).unwrap();
        let q = subgrid_labels(&reflect(&f.values), 8).unwrap();
        let n = p.n_coarse();
        for i in 0..n {
            assert!((q.u_bar[i] + p.u_bar[n - 1 - i]).abs() < 1e-15);
            assert!((q.tau_unres[i] - p.tau_unres[n - 1 - i]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn decomposition_and_nonnegativity(fine in proptest::collection::vec(-10.0f64..10.0, 64)) {
            let p = subgrid_labels(&fine, 8).unwrap();
            let squares: Vec<f64> = fine.iter().map(|u| u * u).collect();
            let direct = box_filter(&squares, 8).unwrap();
            for i in 0..p.n_coarse() {
                prop_assert_eq!(p.tau_res[i] + p.tau_unres[i], p.tau_tot[i]);
                prop_assert!(p.tau_unres[i] >= 0.0);
                prop_assert!((p.tau_tot[i] - direct[i]).abs() <= 1e-12 * direct[i].max(1e-300));
            }
        }

        #[test]
        fn nested_filters_compose(fine in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let twice = box_filter(&box_filter(&fine, 2).unwrap(), 4).unwrap();
            let once = box_filter(&fine, 8).unwrap();
            for (a, b) in twice.iter().zip(&once) {
                prop_assert!((a - b).abs() < 1e-14);
            }
        }
    }
}
