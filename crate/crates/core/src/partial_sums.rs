//! Normalized partial sums `S_N(A, X) = (2N+1)^{-d/2} Σ_{n ∈ A_N} X_n` and
//! the second-moment identity
//!
//! ```text
//! E{S_N(A, X)^2} = (2N+1)^{-d} Σ_{i,j ∈ A_N} r(i - j) = Σ_k r(k) H_N(k; A)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{CovarianceModel, FieldGrid};
use crate::geometry::{count_shifted, IndexSetSpec, Window};
use crate::numeric::CompensatedSum;

/// Pair count above which the left-hand side switches from the all-pairs
/// double sum to the per-point neighbourhood sum.
const ALL_PAIRS_LIMIT: u64 = 4_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumValue {
    pub value: f64,
    pub window: Window,
    pub set: IndexSetSpec,
    pub card: u64,
}

/// `S_N(A, X)`, summed in lexicographic order.
pub fn partial_sum(grid: &FieldGrid, spec: &IndexSetSpec, window: &Window) -> Result<SumValue> {
    if grid.window != *window || grid.values.len() != window.size() {
        return Err(Error::InvalidArgument(format!(
            "grid covers {:?} with {} values, window is {:?}",
            grid.window,
            grid.values.len(),
            window
        )));
    }
    let mask = spec.mask(window)?;
    let card = mask.iter().filter(|&&m| m).count() as u64;
    Ok(SumValue { value: masked_sum(&grid.values, &mask, window), window: *window, set: spec.clone(), card })
}

/// Normalized sum of the masked values.
pub fn masked_sum(values: &[f64], mask: &[bool], window: &Window) -> f64 {
    let s: CompensatedSum = values.iter().zip(mask).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
    s.value() / window.size_f64().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentIdentity {
    /// Direct double sum over pairs of points.
    pub lhs: f64,
    /// `Σ_k r(k) H_N(k; A)`.
    pub rhs: f64,
    pub abs_diff: f64,
    pub rel_diff: f64,
}

/// `Σ_k r(k) H_N(k; A)` from exact correlogram numerators.
pub fn lemma_variance(cov: &CovarianceModel, mask: &[bool], window: &Window) -> f64 {
    let s: CompensatedSum = cov
        .entries
        .iter()
        .filter(|(_, r)| *r != 0.0)
        .map(|(k, r)| r * count_shifted(window, mask, mask, k) as f64)
        .collect();
    s.value() / window.size_f64()
}

/// `(2N+1)^{-d} Σ_{i,j ∈ A_N} r(i - j)` by summing over pairs of points.
pub fn direct_variance(cov: &CovarianceModel, mask: &[bool], window: &Window) -> f64 {
    let points: Vec<Vec<i64>> = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| window.point_at(i)).collect();
    let mut acc = CompensatedSum::new();
    if points.len() as u64 <= ALL_PAIRS_LIMIT {
        let mut diff = vec![0i64; window.d];
        for a in &points {
            for b in &points {
                for t in 0..window.d {
                    diff[t] = a[t] - b[t];
                }
                let r = cov.at(&diff);
                if r != 0.0 {
                    acc.add(r);
                }
            }
        }
    } else {
        // only partners within the covariance support contribute
        let mut other = vec![0i64; window.d];
        for a in &points {
            for (k, r) in &cov.entries {
                if *r == 0.0 {
                    continue;
                }
                for t in 0..window.d {
                    other[t] = a[t] - k[t];
                }
                if let Some(j) = window.index_of(&other) {
                    if mask[j] {
                        acc.add(*r);
                    }
                }
            }
        }
    }
    acc.value() / window.size_f64()
}

fn check_cov(cov: &CovarianceModel, window: &Window) -> Result<()> {
    if cov.d != window.d {
        return Err(Error::DimensionMismatch { expected: window.d, found: cov.d });
    }
    Ok(())
}

/// Both sides of the second-moment identity on an explicit mask.
pub fn moment_identity_mask(cov: &CovarianceModel, mask: &[bool], window: &Window) -> Result<MomentIdentity> {
    check_cov(cov, window)?;
    if mask.len() != window.size() {
        return Err(Error::InvalidArgument("mask length does not match window".into()));
    }
    let lhs = direct_variance(cov, mask, window);
    let rhs = lemma_variance(cov, mask, window);
    let abs_diff = (lhs - rhs).abs();
    let scale = lhs.abs().max(rhs.abs());
    let rel_diff = if scale == 0.0 { 0.0 } else { abs_diff / scale };
    Ok(MomentIdentity { lhs, rhs, abs_diff, rel_diff })
}

pub fn second_moment_identity(cov: &CovarianceModel, spec: &IndexSetSpec, window: &Window) -> Result<MomentIdentity> {
    check_cov(cov, window)?;
    moment_identity_mask(cov, &spec.mask(window)?, window)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceBound {
    /// `C = Σ_k |r(k)|`.
    pub c: f64,
    pub card: u64,
    /// `C · card(A_N) / (2N+1)^d`.
    pub bound: f64,
    pub lhs: f64,
    pub holds: bool,
}

pub fn variance_bound(cov: &CovarianceModel, spec: &IndexSetSpec, window: &Window) -> Result<VarianceBound> {
    check_cov(cov, window)?;
    let mask = spec.mask(window)?;
    let card = mask.iter().filter(|&&m| m).count() as u64;
    let c = cov.abs_sum();
    let bound = c * card as f64 / window.size_f64();
    let lhs = direct_variance(cov, &mask, window);
    Ok(VarianceBound { c, card, bound, lhs, holds: lhs <= bound * (1.0 + 1e-12) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{covariance_model, FieldSpec, Marginal};

    fn ma_cov() -> CovarianceModel {
        CovarianceModel::from_entries(1, &[(vec![0], 2.0), (vec![1], 1.0)]).unwrap()
    }

    #[test]
    fn partial_sum_examples() {
        let w = Window::new(1, 2).unwrap();
        let ones = FieldGrid { window: w, values: vec![1.0; 5] };
        let s = partial_sum(&ones, &IndexSetSpec::FullLattice, &w).unwrap();
        assert!((s.value - 5f64.sqrt()).abs() < 1e-15);
        let s = partial_sum(&ones, &IndexSetSpec::evens(1), &w).unwrap();
        assert!((s.value - 3.0 / 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.card, 3);
        let zeros = FieldGrid { window: w, values: vec![0.0; 5] };
        assert_eq!(partial_sum(&zeros, &IndexSetSpec::half_line(), &w).unwrap().value, 0.0);
        assert!(partial_sum(&zeros, &IndexSetSpec::FullLattice, &Window::new(1, 3).unwrap()).is_err());
    }

    #[test]
    fn identity_examples() {
        let w = Window::new(1, 2).unwrap();
        let iid = CovarianceModel::from_entries(1, &[(vec![0], 1.0)]).unwrap();
        for n in [0, 3, 17] {
            let wn = Window::new(1, n).unwrap();
            let r = second_moment_identity(&iid, &IndexSetSpec::FullLattice, &wn).unwrap();
            assert_eq!((r.lhs, r.rhs), (1.0, 1.0));
        }
        let r = second_moment_identity(&ma_cov(), &IndexSetSpec::FullLattice, &w).unwrap();
        assert!((r.rhs - 18.0 / 5.0).abs() < 1e-15 && (r.lhs - 18.0 / 5.0).abs() < 1e-15);
        let r = second_moment_identity(&ma_cov(), &IndexSetSpec::evens(1), &w).unwrap();
        assert!((r.rhs - 6.0 / 5.0).abs() < 1e-15 && (r.lhs - 6.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn neighbourhood_route_matches_all_pairs() {
        let cov = covariance_model(
            &FieldSpec::moving_average_1d(&[1.0, -0.5, 0.25], Marginal::Gaussian { variance: 1.0 }),
            1,
            0,
        )
        .unwrap();
        // 5001 points in the set: above the all-pairs limit
        let w = Window::new(1, 5000).unwrap();
        let r = second_moment_identity(&cov, &IndexSetSpec::half_line(), &w).unwrap();
        assert!(r.rel_diff < 1e-12, "{r:?}");
    }

    #[test]
    fn bound_examples() {
        let w = Window::new(1, 2).unwrap();
        let b = variance_bound(&ma_cov(), &IndexSetSpec::FullLattice, &w).unwrap();
        assert_eq!(b.c, 4.0);
        assert_eq!(b.bound, 4.0);
        assert!(b.holds && b.lhs <= b.bound);
        let b = variance_bound(&ma_cov(), &IndexSetSpec::evens(1), &w).unwrap();
        assert!((b.bound - 12.0 / 5.0).abs() < 1e-15 && b.holds);
        let iid = CovarianceModel::from_entries(1, &[(vec![0], 1.0)]).unwrap();
        let b = variance_bound(&iid, &IndexSetSpec::FullLattice, &Window::new(1, 9).unwrap()).unwrap();
        assert_eq!(b.lhs, b.bound);
    }

    #[test]
    fn empirical_variance_matches_identity() {
        let spec = FieldSpec::moving_average_1d(&[1.0, 1.0], Marginal::Rademacher);
        let w = Window::new(1, 10).unwrap();
        let set = IndexSetSpec::half_line();
        let sampler = spec.sampler().unwrap();
        let mask = set.mask(&w).unwrap();
        let sums: Vec<f64> =
            (0..20_000).map(|r| masked_sum(&sampler.sample(&w, 10, 8, r).unwrap().values, &mask, &w)).collect();
        let (_, var) = crate::numeric::mean_var(&sums);
        let target = second_moment_identity(&covariance_model(&spec, 1, 10).unwrap(), &set, &w).unwrap().lhs;
        let m4 = sums.iter().map(|x| x.powi(4)).sum::<f64>() / sums.len() as f64;
        let se = ((m4 - var * var) / sums.len() as f64).sqrt();
        assert!((var - target).abs() < 5.0 * se, "var {var} target {target} se {se}");
    }
}
