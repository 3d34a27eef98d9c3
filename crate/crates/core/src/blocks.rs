//! Big-block/small-block decomposition of a window.
//!
//! Along each axis the window `[-N, N]` carries `k_N = floor((2N+1)/(p+q))`
//! intervals `I_N(j) = [-N + j(p+q), -N + j(p+q) + p]`, `j = 0..k_N-1`. Their
//! products are the `k_N^d` big blocks `Δ_N(ℓ)`, each a cube of `(p+1)^d`
//! points, pairwise at max-norm distance at least `q`. The complement of
//! `Δ_N` carries a variance of order `1 - k_N^d (p+1)^d / (2N+1)^d`.

use std::io::Write;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{truncate_values, truncation_mean, CovarianceModel, FieldSpec};
use crate::geometry::{IndexSetSpec, Point, Window};
use crate::numeric::{mean_stderr, CompensatedSum};
use crate::partial_sums::{masked_sum, moment_identity_mask};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCube {
    /// Lower corner; the cube spans `corner .. corner + side - 1` per axis.
    pub corner: Point,
    pub side: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub window: Window,
    pub p: u32,
    pub q: u32,
    pub k_n: u32,
    pub blocks: Vec<BlockCube>,
    /// `card(Δ_N) = k_N^d (p+1)^d`.
    pub block_points: u64,
    pub complement_points: u64,
}

/// Builds the block plan for rates `(p, q)`.
pub fn build_blocks(window: &Window, p: u32, q: u32) -> Result<BlockPlan> {
    if p < 1 || q < 1 {
        return Err(Error::InvalidArgument(format!("block rates need p >= 1 and q >= 1, got p={p}, q={q}")));
    }
    let side = window.side() as u64;
    if (p + q) as u64 > side {
        return Err(Error::InvalidArgument(format!("p + q = {} exceeds 2N + 1 = {side}", p + q)));
    }
    let k_n = (side / (p + q) as u64) as u32;
    let n = window.n as i64;
    let starts: Vec<i64> = (0..k_n as i64).map(|j| -n + j * (p + q) as i64).collect();
    let mut blocks = Vec::with_capacity((k_n as usize).pow(window.d as u32));
    // lexicographic over block multi-indices
    let mut idx = vec![0usize; window.d];
    if k_n > 0 {
        loop {
            blocks.push(BlockCube { corner: idx.iter().map(|&j| starts[j]).collect(), side: p + 1 });
            let mut axis = window.d;
            let done = loop {
                if axis == 0 {
                    break true;
                }
                axis -= 1;
                if idx[axis] + 1 < k_n as usize {
                    idx[axis] += 1;
                    break false;
                }
                idx[axis] = 0;
            };
            if done {
                break;
            }
        }
    }
    let block_points = (k_n as u64 * (p as u64 + 1)).pow(window.d as u32);
    Ok(BlockPlan {
        window: *window,
        p,
        q,
        k_n,
        blocks,
        block_points,
        complement_points: window.size() as u64 - block_points,
    })
}

fn icbrt(x: u64) -> u64 {
    let mut r = (x as f64).cbrt().round() as u64;
    while r * r * r > x {
        r -= 1;
    }
    while (r + 1).pow(3) <= x {
        r += 1;
    }
    r
}

/// `p = floor(N^{2/3})`, `q = max(1, floor(N^{1/3}))`, in integer arithmetic.
pub fn default_rates(n: u32) -> Result<(u32, u32)> {
    if n < 8 {
        return Err(Error::InvalidArgument(format!("default rates need N >= 8, got {n}")));
    }
    let n = n as u64;
    Ok((icbrt(n * n) as u32, icbrt(n).max(1) as u32))
}

impl BlockPlan {
    /// Block index of every window point, `None` on the complement.
    pub fn labels(&self) -> Vec<Option<u32>> {
        let w = &self.window;
        let n = w.n as i64;
        let period = (self.p + self.q) as i64;
        let k = self.k_n as i64;
        let axis_label = |c: i64| -> Option<i64> {
            let off = c + n;
            let j = off / period;
            (j < k && off - j * period <= self.p as i64).then_some(j)
        };
        (0..w.size())
            .map(|i| {
                let p = w.point_at(i);
                let mut label = 0i64;
                for &c in &p {
                    label = label * k + axis_label(c)?;
                }
                Some(label as u32)
            })
            .collect()
    }

    pub fn delta_mask(&self) -> Vec<bool> {
        self.labels().iter().map(Option::is_some).collect()
    }

    fn cube_distance(a: &BlockCube, b: &BlockCube) -> i64 {
        a.corner
            .iter()
            .zip(&b.corner)
            .map(|(&x, &y)| {
                let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
                (hi - (lo + a.side as i64 - 1)).max(0)
            })
            .max()
            .unwrap_or(0)
    }

    /// Smallest max-norm distance between distinct blocks (`None` with fewer
    /// than two blocks).
    pub fn min_block_distance(&self) -> Option<i64> {
        let mut best: Option<i64> = None;
        for (i, a) in self.blocks.iter().enumerate() {
            for b in &self.blocks[i + 1..] {
                let d = Self::cube_distance(a, b);
                best = Some(best.map_or(d, |x| x.min(d)));
            }
        }
        best
    }

    /// Checks disjointness, the `q` gap, containment and the point counts.
    pub fn verify(&self) -> Result<()> {
        let n = self.window.n as i64;
        for b in &self.blocks {
            if b.corner.iter().any(|&c| c < -n || c + b.side as i64 - 1 > n) {
                return Err(Error::InvalidArgument(format!("block {:?} leaves the window", b.corner)));
            }
        }
        if let Some(d) = self.min_block_distance() {
            if d < self.q as i64 {
                return Err(Error::InvalidArgument(format!("blocks at distance {d} < q = {}", self.q)));
            }
        }
        let in_delta = self.labels().iter().filter(|l| l.is_some()).count() as u64;
        if in_delta != self.block_points || in_delta + self.complement_points != self.window.size() as u64 {
            return Err(Error::InvalidArgument("block point counts are inconsistent".into()));
        }
        Ok(())
    }

    /// `[(p+1)^2 / ((p+q)(2N+1))]^d`, the fourth-moment factor multiplying
    /// `C(J)`.
    pub fn lyapunov_factor(&self) -> f64 {
        let p1 = (self.p + 1) as f64;
        let base = p1 * p1 / ((self.p + self.q) as f64 * self.window.side() as f64);
        base.powi(self.window.d as i32)
    }

    /// `k_N^d ((p+1)/(2N+1))^{2d}`, the same factor before `k_N (p+q)` is
    /// replaced by `2N+1`.
    pub fn lyapunov_factor_exact(&self) -> f64 {
        let d = self.window.d as i32;
        (self.k_n as f64).powi(d) * ((self.p + 1) as f64 / self.window.side() as f64).powi(2 * d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderReport {
    /// `E{S_N(A ∩ Δ_N^c, X)^2}`.
    pub exact: f64,
    pub c: f64,
    /// `C (1 - k_N^d (p+1)^d / (2N+1)^d)`.
    pub bound: f64,
    /// `C [1 - ((p+1)/(p+q))^d]`.
    pub asymptotic_bound: f64,
    pub complement_card: u64,
    pub holds: bool,
}

/// Exact variance of the sum over `A` outside the big blocks, with its bound.
pub fn remainder_variance(cov: &CovarianceModel, spec: &IndexSetSpec, plan: &BlockPlan) -> Result<RemainderReport> {
    let w = &plan.window;
    let a = spec.mask(w)?;
    let delta = plan.delta_mask();
    let rest: Vec<bool> = a.iter().zip(&delta).map(|(&x, &d)| x && !d).collect();
    let id = moment_identity_mask(cov, &rest, w)?;
    let c = cov.abs_sum();
    let size = w.size() as f64;
    let bound = c * (size - plan.block_points as f64) / size;
    let asymptotic_bound = c * (1.0 - ((plan.p + 1) as f64 / (plan.p + plan.q) as f64).powi(w.d as i32));
    Ok(RemainderReport {
        exact: id.lhs,
        c,
        bound,
        asymptotic_bound,
        complement_card: rest.iter().filter(|&&x| x).count() as u64,
        holds: id.lhs <= bound * (1.0 + 1e-12),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub t: f64,
    pub gap: f64,
    pub stderr: f64,
}

/// Estimated `|E e^{itS(A∪B)} - E e^{itS(A)} E e^{itS(B)}|` over a `t` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceEntry {
    /// Max-norm distance between `A_N` and `B_N`.
    pub distance: i64,
    pub j: f64,
    pub replications: u64,
    pub points: Vec<GapPoint>,
    pub sup_gap: f64,
}

impl DependenceEntry {
    /// Largest gap in units of its standard error.
    pub fn max_z(&self) -> f64 {
        self.points
            .iter()
            .map(|p| {
                if p.stderr > 0.0 {
                    p.gap / p.stderr
                } else if p.gap > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

/// A collection of gap estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceProfile {
    pub entries: Vec<DependenceEntry>,
}

impl DependenceProfile {
    /// CSV with columns `distance, t, gap, stderr`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["distance", "t", "gap", "stderr"])?;
        for e in &self.entries {
            for p in &e.points {
                w.write_record([e.distance.to_string(), p.t.to_string(), p.gap.to_string(), p.stderr.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn set_distance(window: &Window, a: &[bool], b: &[bool]) -> i64 {
    let pa: Vec<Point> = a.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| window.point_at(i)).collect();
    let pb: Vec<Point> = b.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| window.point_at(i)).collect();
    let mut best = i64::MAX;
    for x in &pa {
        for y in &pb {
            let d = x.iter().zip(y).map(|(u, v)| (u - v).abs()).max().unwrap_or(0);
            best = best.min(d);
        }
    }
    best
}

/// Common-random-number estimate of the characteristic-function gap between
/// `S_N(A ∪ B, X^{N,J})` and the product of the marginal ones.
///
/// The standard error is the root mean square of the complex influence
/// function `ψ = (Z - m_Z) - m_V (U - m_U) - m_U (V - m_V)`, divided by `√R`.
#[allow(clippy::too_many_arguments)]
pub fn dependence_gap(
    spec: &FieldSpec,
    a: &IndexSetSpec,
    b: &IndexSetSpec,
    window: &Window,
    j: f64,
    t_grid: &[f64],
    replications: u64,
    seed: u64,
) -> Result<DependenceEntry> {
    if replications < 2 {
        return Err(Error::InvalidArgument("dependence_gap needs at least 2 replications".into()));
    }
    if !(j > 0.0) {
        return Err(Error::InvalidArgument(format!("truncation level J must be > 0, got {j}")));
    }
    let ma = a.mask(window)?;
    let mb = b.mask(window)?;
    let common = ma.iter().zip(&mb).filter(|(&x, &y)| x && y).count();
    if common > 0 {
        return Err(Error::NotDisjoint(common));
    }
    let distance = set_distance(window, &ma, &mb);
    let sampler = spec.sampler()?;
    let row = window.n;
    let mu = truncation_mean(&sampler, row, j);
    let sums: Vec<(f64, f64)> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64)> {
            let g = sampler.sample(window, row, seed, r)?;
            let t = truncate_values(&g.values, j, mu);
            Ok((masked_sum(&t, &ma, window), masked_sum(&t, &mb, window)))
        })
        .collect::<Result<_>>()?;
    let rf = replications as f64;
    let points: Vec<GapPoint> = t_grid
        .iter()
        .map(|&t| {
            let cis = |x: f64| Complex::new((t * x).cos(), (t * x).sin());
            let (mut mz, mut mu_, mut mv) = (Complex::zero(), Complex::zero(), Complex::zero());
            for &(sa, sb) in &sums {
                mz += cis(sa + sb);
                mu_ += cis(sa);
                mv += cis(sb);
            }
            mz /= rf;
            mu_ /= rf;
            mv /= rf;
            let gap = (mz - mu_ * mv).norm();
            let mut ss = CompensatedSum::new();
            for &(sa, sb) in &sums {
                let psi = (cis(sa + sb) - mz) - mv * (cis(sa) - mu_) - mu_ * (cis(sb) - mv);
                ss.add(psi.norm_sqr());
            }
            let stderr = (ss.value() / (rf - 1.0) / rf).sqrt();
            GapPoint { t, gap, stderr }
        })
        .collect();
    let sup_gap = points.iter().map(|p| p.gap).fold(0.0, f64::max);
    Ok(DependenceEntry { distance, j, replications, points, sup_gap })
}

/// Sum over blocks of the fourth power of `S_N(A ∩ Δ_N(ℓ))` for one sample.
pub fn block_fourth_power_sum(
    values: &[f64],
    mask: &[bool],
    labels: &[Option<u32>],
    nblocks: usize,
    window: &Window,
) -> f64 {
    let mut acc = vec![0.0f64; nblocks];
    for ((v, &m), l) in values.iter().zip(mask).zip(labels) {
        if let (true, Some(l)) = (m, l) {
            acc[*l as usize] += v;
        }
    }
    let norm = window.size_f64().sqrt();
    acc.iter().map(|s| (s / norm).powi(4)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Monte Carlo estimate of `Σ_ℓ E{S_N(A ∩ Δ_N(ℓ), X^{N,J})^4}`.
    pub fourth_moment_sum: f64,
    pub stderr: f64,
    pub factor: f64,
    pub factor_exact: f64,
}

pub fn lyapunov_estimate(
    spec: &FieldSpec,
    set: &IndexSetSpec,
    plan: &BlockPlan,
    j: f64,
    replications: u64,
    seed: u64,
) -> Result<LyapunovEstimate> {
    let w = &plan.window;
    let sampler = spec.sampler()?;
    let mask = set.mask(w)?;
    let labels = plan.labels();
    let mu = truncation_mean(&sampler, w.n, j);
    let vals: Vec<f64> = (0..replications.max(2))
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let g = sampler.sample(w, w.n, seed, r)?;
            let t = truncate_values(&g.values, j, mu);
            Ok(block_fourth_power_sum(&t, &mask, &labels, plan.blocks.len(), w))
        })
        .collect::<Result<_>>()?;
    let (m, se) = mean_stderr(&vals);
    Ok(LyapunovEstimate {
        fourth_moment_sum: m,
        stderr: se,
        factor: plan.lyapunov_factor(),
        factor_exact: plan.lyapunov_factor_exact(),
    })
}

pub type Rational = BigRational;
pub type ComplexRational = Complex<BigRational>;

/// One atom of a finite joint law: probability and the values of
/// `Z_1..Z_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub prob: Rational,
    pub values: Vec<ComplexRational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointLaw {
    pub atoms: Vec<Atom>,
}

impl JointLaw {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let law = JointLaw { atoms };
        law.validate()?;
        Ok(law)
    }

    pub fn n(&self) -> usize {
        self.atoms.first().map(|a| a.values.len()).unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidArgument("joint law needs at least one atom and one variable".into()));
        }
        let mut total = Rational::zero();
        for a in &self.atoms {
            if a.values.len() != n {
                return Err(Error::InvalidArgument("atoms have different numbers of variables".into()));
            }
            if a.prob < Rational::zero() {
                return Err(Error::InvalidArgument("negative probability".into()));
            }
            for z in &a.values {
                if z.norm_sqr() > Rational::one() {
                    return Err(Error::InvalidArgument(format!(
                        "|Z| > 1 in support: {}",
                        z.norm_sqr().to_f64().unwrap_or(f64::NAN).sqrt()
                    )));
                }
            }
            total += &a.prob;
        }
        if total != Rational::one() {
            return Err(Error::InvalidArgument("probabilities do not sum to 1".into()));
        }
        Ok(())
    }

    fn expect(&self, f: impl Fn(&Atom) -> ComplexRational) -> ComplexRational {
        self.atoms.iter().fold(Complex::zero(), |acc, a| {
            let v = f(a);
            acc + Complex::new(v.re * &a.prob, v.im * &a.prob)
        })
    }
}

/// Small helper for building rationals in tests and generators.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopingResult {
    pub n: usize,
    /// `|E Π Z_i - Π E Z_i|`.
    pub lhs: f64,
    /// `Σ_{j<n} |E Π_{i>=j} Z_i - E Z_j E Π_{i>j} Z_i|`.
    pub rhs: f64,
    pub terms: Vec<f64>,
    /// The complex differences coincide exactly (rational arithmetic).
    pub exact_equal: bool,
    pub holds: bool,
}

fn modulus(z: &ComplexRational) -> f64 {
    z.norm_sqr().to_f64().expect("finite").sqrt()
}

/// Both sides of the telescoping product bound, evaluated in exact rational
/// arithmetic; only the final moduli are rounded.
pub fn telescoping_check(law: &JointLaw) -> Result<TelescopingResult> {
    law.validate()?;
    let n = law.n();
    let means: Vec<ComplexRational> = (0..n).map(|i| law.expect(|a| a.values[i].clone())).collect();
    // E Π_{i>=j} Z_i for j = 0..n-1
    let suffix: Vec<ComplexRational> =
        (0..n).map(|j| law.expect(|a| a.values[j + 1..].iter().fold(a.values[j].clone(), |acc, z| acc * z))).collect();
    let prod_means = means[1..].iter().fold(means[0].clone(), |acc, z| acc * z);
    let lhs_diff = &suffix[0] - &prod_means;
    let term_diffs: Vec<ComplexRational> =
        (0..n.saturating_sub(1)).map(|j| &suffix[j] - &means[j] * &suffix[j + 1]).collect();
    let lhs = modulus(&lhs_diff);
    let terms: Vec<f64> = term_diffs.iter().map(modulus).collect();
    let rhs: f64 = terms.iter().sum();
    let exact_equal = match term_diffs.as_slice() {
        [] => lhs_diff.is_zero(),
        [only] => *only == lhs_diff,
        many => lhs_diff.is_zero() && many.iter().all(Zero::is_zero),
    };
    let holds = exact_equal || lhs <= rhs * (1.0 + 1e-12);
    Ok(TelescopingResult { n, lhs, rhs, terms, exact_equal, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Marginal;

    fn w(d: usize, n: u32) -> Window {
        Window::new(d, n).unwrap()
    }

    #[test]
    fn worked_plan_d1() {
        let plan = build_blocks(&w(1, 10), 4, 2).unwrap();
        assert_eq!(plan.k_n, 3);
        let corners: Vec<i64> = plan.blocks.iter().map(|b| b.corner[0]).collect();
        assert_eq!(corners, vec![-10, -4, 2]);
        assert!(plan.blocks.iter().all(|b| b.side == 5));
        assert_eq!(plan.block_points, 15);
        assert_eq!(plan.complement_points, 6);
        assert_eq!(plan.min_block_distance(), Some(2));
        plan.verify().unwrap();
    }

    #[test]
    fn worked_plan_d2() {
        let plan = build_blocks(&w(2, 10), 4, 2).unwrap();
        assert_eq!(plan.blocks.len(), 9);
        assert_eq!(plan.block_points, 225);
        assert_eq!(plan.delta_mask().iter().filter(|&&m| m).count(), 225);
        plan.verify().unwrap();
    }

    #[test]
    fn oversized_rates_rejected() {
        assert!(build_blocks(&w(1, 2), 4, 2).is_err());
        assert!(build_blocks(&w(1, 2), 0, 2).is_err());
        assert!(build_blocks(&w(1, 2), 3, 2).is_ok());
    }

    #[test]
    fn default_rate_examples() {
        assert_eq!(default_rates(64).unwrap(), (16, 4));
        assert_eq!(default_rates(1000).unwrap(), (100, 10));
        assert_eq!(default_rates(8).unwrap(), (4, 2));
        assert!(default_rates(7).is_err());
        let (p1, q1) = default_rates(1000).unwrap();
        let (p2, q2) = default_rates(1_000_000).unwrap();
        assert!((q2 as f64 / p2 as f64) < (q1 as f64 / p1 as f64));
    }

    #[test]
    fn remainder_examples() {
        let plan = build_blocks(&w(1, 10), 4, 2).unwrap();
        let iid = CovarianceModel::from_entries(1, &[(vec![0], 1.0)]).unwrap();
        let r = remainder_variance(&iid, &IndexSetSpec::FullLattice, &plan).unwrap();
        assert_eq!(r.exact, 6.0 / 21.0);
        assert_eq!(r.bound, 6.0 / 21.0);
        assert!(r.holds);
        assert_eq!(r.complement_card, 6);

        let ma = CovarianceModel::from_entries(1, &[(vec![0], 2.0), (vec![1], 1.0)]).unwrap();
        let r = remainder_variance(&ma, &IndexSetSpec::FullLattice, &plan).unwrap();
        assert_eq!(r.c, 4.0);
        assert!(r.exact <= 4.0 * 6.0 / 21.0 && r.holds);

        // p + q = 2N + 1 with q = 1: a single block covering all but one point
        let tight = build_blocks(&w(1, 10), 20, 1).unwrap();
        let r = remainder_variance(&iid, &IndexSetSpec::FullLattice, &tight).unwrap();
        assert_eq!(r.exact, 0.0);
    }

    #[test]
    fn lyapunov_factor_worked_value() {
        let plan = build_blocks(&w(1, 10), 4, 2).unwrap();
        assert!((plan.lyapunov_factor() - 25.0 / 126.0).abs() < 1e-15);
        assert!((plan.lyapunov_factor_exact() - 75.0 / 441.0).abs() < 1e-15);
    }

    /// Exact characteristic functions for X_n = ε_n + ε_{n-1} on A = {-2,-1},
    /// B = {0,1} in the window N = 2, by enumerating the 32 sign patterns of
    /// ε_{-3..1}.
    fn exact_gap_adjacent(t: f64) -> f64 {
        let norm = 5f64.sqrt();
        let (mut ez, mut eu, mut ev) = (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
        let total = 1u32 << 5; // ε_{-3}, ε_{-2}, ε_{-1}, ε_0, ε_1
        for bits in 0..total {
            let e = |site: i64| if bits >> (site + 3) & 1 == 1 { 1.0 } else { -1.0 };
            let x = |n: i64| e(n) + e(n - 1);
            let sa = (x(-2) + x(-1)) / norm;
            let sb = (x(0) + x(1)) / norm;
            let cis = |v: f64| Complex::new((t * v).cos(), (t * v).sin());
            ez += cis(sa + sb);
            eu += cis(sa);
            ev += cis(sb);
        }
        let f = total as f64;
        (ez / f - (eu / f) * (ev / f)).norm()
    }

    #[test]
    fn dependence_gap_regimes() {
        let ma = FieldSpec::moving_average_1d(&[1.0, 1.0], Marginal::Rademacher);
        let win = w(1, 2);
        let a = IndexSetSpec::Explicit { points: vec![vec![-2], vec![-1]] };
        let far = IndexSetSpec::Explicit { points: vec![vec![1], vec![2]] };
        let near = IndexSetSpec::Explicit { points: vec![vec![0], vec![1]] };
        let ts: Vec<f64> = (0..=20).map(|i| -3.0 + 0.3 * i as f64).collect();

        let e = dependence_gap(&ma, &a, &far, &win, 2.0, &ts, 20_000, 5).unwrap();
        assert_eq!(e.distance, 2);
        assert!(e.max_z() < 4.0, "{e:?}");

        let e = dependence_gap(&ma, &a, &near, &win, 2.0, &ts, 20_000, 5).unwrap();
        assert_eq!(e.distance, 1);
        assert!(e.max_z() > 4.0);
        for p in &e.points {
            assert!((p.gap - exact_gap_adjacent(p.t)).abs() < 5.0 * p.stderr + 1e-3, "{p:?}");
        }

        assert!(matches!(dependence_gap(&ma, &a, &a, &win, 2.0, &ts, 10, 5), Err(Error::NotDisjoint(2))));
    }

    #[test]
    fn lyapunov_estimate_decreases_along_default_rates() {
        let ma = FieldSpec::moving_average_1d(&[1.0, 1.0], Marginal::Rademacher);
        let mut prev = f64::INFINITY;
        for n in [27u32, 125, 512] {
            let (p, q) = default_rates(n).unwrap();
            let plan = build_blocks(&w(1, n), p, q).unwrap();
            let l = lyapunov_estimate(&ma, &IndexSetSpec::FullLattice, &plan, 2.0, 2000, 3).unwrap();
            assert!(l.fourth_moment_sum < prev, "N={n}: {l:?}");
            prev = l.fourth_moment_sum;
        }
    }

    fn rademacher_law(n: usize) -> JointLaw {
        let one = || Complex::new(ratio(1, 1), ratio(0, 1));
        let minus = || Complex::new(ratio(-1, 1), ratio(0, 1));
        JointLaw::new(vec![
            Atom { prob: ratio(1, 2), values: vec![one(); n] },
            Atom { prob: ratio(1, 2), values: vec![minus(); n] },
        ])
        .unwrap()
    }

    #[test]
    fn telescoping_examples() {
        // Z1 = Z2 = Z3 = ε: E ε^3 = 0, E ε^2 = 1
        let r = telescoping_check(&rademacher_law(3)).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.terms, vec![0.0, 1.0]);
        assert_eq!(r.rhs, 1.0);
        assert!(r.holds);

        let r = telescoping_check(&rademacher_law(2)).unwrap();
        assert_eq!(r.lhs, r.rhs);
        assert!(r.exact_equal);

        let c = |re: i64, im: i64, den: i64| Complex::new(ratio(re, den), ratio(im, den));
        // independent product law of two 2-point variables
        let mut atoms = Vec::new();
        for (pa, za) in [(ratio(1, 3), c(1, 0, 1)), (ratio(2, 3), c(0, 1, 2))] {
            for (pb, zb) in [(ratio(1, 4), c(-3, 4, 5)), (ratio(3, 4), c(1, 1, 3))] {
                atoms.push(Atom { prob: &pa * &pb, values: vec![za.clone(), zb.clone()] });
            }
        }
        let r = telescoping_check(&JointLaw::new(atoms).unwrap()).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.exact_equal);
    }

    #[test]
    fn telescoping_rejects_bad_laws() {
        let c = |re: i64, den: i64| Complex::new(ratio(re, den), ratio(0, 1));
        let too_big = vec![Atom { prob: ratio(1, 1), values: vec![c(3, 2)] }];
        assert!(JointLaw::new(too_big).is_err());
        let bad_mass = vec![Atom { prob: ratio(1, 2), values: vec![c(1, 2)] }];
        assert!(JointLaw::new(bad_mass).is_err());
    }

    #[test]
    fn dependence_profile_csv() {
        let prof = DependenceProfile {
            entries: vec![DependenceEntry {
                distance: 2,
                j: 2.0,
                replications: 10,
                points: vec![GapPoint { t: 0.5, gap: 0.01, stderr: 0.02 }],
                sup_gap: 0.01,
            }],
        };
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "distance,t,gap,stderr\n2,0.5,0.01,0.02\n");
    }
}
