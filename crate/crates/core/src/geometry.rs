//! Subsets of Z^d, their restriction to cubic windows `[-N, N]^d`, and exact
//! set correlograms
//!
//! ```text
//! H_N(k; A)    = card{A_N ∩ (k + A_N)} / (2N+1)^d
//! H_N(k; A, B) = card{A_N ∩ (k + B_N)} / (2N+1)^d
//! ```
//!
//! and their limits `H(k; A)` as `N → ∞`.

use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Key};

/// A lattice vector.
pub type Point = Vec<i64>;

/// The cube `[-n, n]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub d: usize,
    pub n: u32,
}

impl Window {
    pub fn new(d: usize, n: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("window dimension must be >= 1".into()));
        }
        Ok(Window { d, n })
    }

    /// `2N + 1`.
    pub fn side(&self) -> usize {
        2 * self.n as usize + 1
    }

    /// `(2N + 1)^d`.
    pub fn size(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    pub fn size_f64(&self) -> f64 {
        (self.side() as f64).powi(self.d as i32)
    }

    /// Row-major strides; the last coordinate varies fastest.
    pub fn strides(&self) -> Vec<usize> {
        let side = self.side();
        let mut s = vec![1usize; self.d];
        for i in (0..self.d.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * side;
        }
        s
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        let n = self.n as i64;
        p.len() == self.d && p.iter().all(|&c| -n <= c && c <= n)
    }

    pub fn index_of(&self, p: &[i64]) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let n = self.n as i64;
        let side = self.side();
        Some(p.iter().fold(0usize, |acc, &c| acc * side + (c + n) as usize))
    }

    pub fn point_at(&self, mut idx: usize) -> Point {
        let side = self.side();
        let n = self.n as i64;
        let mut p = vec![0i64; self.d];
        for c in p.iter_mut().rev() {
            *c = (idx % side) as i64 - n;
            idx /= side;
        }
        p
    }

    /// All window points in lexicographic order.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.size()).map(move |i| self.point_at(i))
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: len });
        }
        Ok(())
    }
}

/// Declarative description of a subset `A ⊂ Z^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum IndexSetSpec {
    FullLattice,
    /// Points whose coordinates reduced modulo `moduli` land in `residues`.
    Periodic {
        moduli: Vec<u32>,
        residues: Vec<Point>,
    },
    /// Points with `x[axis] >= threshold`.
    HalfSpace {
        axis: usize,
        threshold: i64,
    },
    /// Max-norm ball around the origin.
    Ball {
        radius: f64,
    },
    /// Each point is kept independently with probability `p`; membership is
    /// a pure function of `(seed, point)`.
    BernoulliRandom {
        p: f64,
        seed: u64,
    },
    Explicit {
        points: Vec<Point>,
    },
}

impl IndexSetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            IndexSetSpec::FullLattice => "FullLattice",
            IndexSetSpec::Periodic { .. } => "Periodic",
            IndexSetSpec::HalfSpace { .. } => "HalfSpace",
            IndexSetSpec::Ball { .. } => "Ball",
            IndexSetSpec::BernoulliRandom { .. } => "BernoulliRandom",
            IndexSetSpec::Explicit { .. } => "Explicit",
        }
    }

    /// Even integers (or the even sublattice `2Z^d`) as a periodic set.
    pub fn evens(d: usize) -> Self {
        IndexSetSpec::Periodic { moduli: vec![2; d], residues: vec![vec![0; d]] }
    }

    pub fn odds() -> Self {
        IndexSetSpec::Periodic { moduli: vec![2], residues: vec![vec![1]] }
    }

    pub fn half_line() -> Self {
        IndexSetSpec::HalfSpace { axis: 0, threshold: 0 }
    }

    /// Lattice dimension implied by the spec, if any.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            IndexSetSpec::Periodic { moduli, .. } => Some(moduli.len()),
            IndexSetSpec::Explicit { points } => points.first().map(Vec::len),
            _ => None,
        }
    }

    /// Sets with finitely many points have density zero.
    pub fn is_finite(&self) -> bool {
        matches!(self, IndexSetSpec::Explicit { .. } | IndexSetSpec::Ball { .. })
    }

    /// Checks internal consistency and reduces periodic residues.
    pub fn validated(&self) -> Result<Self> {
        match self {
            IndexSetSpec::Periodic { moduli, residues } => {
                if moduli.is_empty() || moduli.contains(&0) {
                    return Err(Error::InvalidSpec("Periodic.moduli must be non-empty and positive".into()));
                }
                if residues.is_empty() {
                    return Err(Error::InvalidSpec("Periodic.residues must be non-empty".into()));
                }
                let mut seen = HashSet::new();
                let mut reduced = Vec::new();
                for r in residues {
                    if r.len() != moduli.len() {
                        return Err(Error::InvalidSpec(format!(
                            "Periodic.residues entry {:?} has length {}, moduli has {}",
                            r,
                            r.len(),
                            moduli.len()
                        )));
                    }
                    let rr: Point = r.iter().zip(moduli).map(|(&x, &m)| x.rem_euclid(m as i64)).collect();
                    if seen.insert(rr.clone()) {
                        reduced.push(rr);
                    }
                }
                reduced.sort();
                Ok(IndexSetSpec::Periodic { moduli: moduli.clone(), residues: reduced })
            }
            IndexSetSpec::Ball { radius } if !(*radius >= 0.0 && radius.is_finite()) => {
                Err(Error::InvalidSpec(format!("Ball.radius must be finite and >= 0, got {radius}")))
            }
            IndexSetSpec::BernoulliRandom { p, .. } if !(*p > 0.0 && *p < 1.0) => {
                Err(Error::InvalidSpec(format!("BernoulliRandom.p must lie in (0,1), got {p}")))
            }
            IndexSetSpec::Explicit { points } => {
                let d = points.first().map(Vec::len).unwrap_or(0);
                let mut seen = HashSet::new();
                for p in points {
                    if p.len() != d {
                        return Err(Error::InvalidSpec("Explicit.points have mixed dimensions".into()));
                    }
                    if !seen.insert(p) {
                        return Err(Error::InvalidSpec(format!("Explicit.points contains duplicate {p:?}")));
                    }
                }
                Ok(self.clone())
            }
            _ => Ok(self.clone()),
        }
    }

    fn check_window(&self, window: &Window) -> Result<()> {
        if let Some(d) = self.dimension() {
            window.check_dim(d)?;
        }
        if let IndexSetSpec::HalfSpace { axis, .. } = self {
            if *axis >= window.d {
                return Err(Error::DimensionMismatch { expected: window.d, found: axis + 1 });
            }
        }
        Ok(())
    }

    /// Membership of every window point, in window index order.
    pub fn mask(&self, window: &Window) -> Result<Vec<bool>> {
        let spec = self.validated()?;
        spec.check_window(window)?;
        let size = window.size();
        let mask = match &spec {
            IndexSetSpec::FullLattice => vec![true; size],
            IndexSetSpec::Explicit { points } => {
                let mut m = vec![false; size];
                for p in points {
                    if let Some(i) = window.index_of(p) {
                        m[i] = true;
                    }
                }
                m
            }
            IndexSetSpec::Periodic { moduli, residues } => {
                let set: HashSet<&Point> = residues.iter().collect();
                (0..size)
                    .into_par_iter()
                    .map(|i| {
                        let p = window.point_at(i);
                        let r: Point = p.iter().zip(moduli).map(|(&x, &m)| x.rem_euclid(m as i64)).collect();
                        set.contains(&r)
                    })
                    .collect()
            }
            other => (0..size).into_par_iter().map(|i| other.contains_unchecked(&window.point_at(i))).collect(),
        };
        Ok(mask)
    }

    fn contains_unchecked(&self, p: &[i64]) -> bool {
        match self {
            IndexSetSpec::FullLattice => true,
            IndexSetSpec::Periodic { moduli, residues } => {
                let r: Point = p.iter().zip(moduli).map(|(&x, &m)| x.rem_euclid(m as i64)).collect();
                residues.contains(&r)
            }
            IndexSetSpec::HalfSpace { axis, threshold } => p[*axis] >= *threshold,
            IndexSetSpec::Ball { radius } => p.iter().all(|&c| (c.unsigned_abs() as f64) <= *radius),
            IndexSetSpec::BernoulliRandom { p: prob, seed } => bernoulli_member(*seed, *prob, p),
            IndexSetSpec::Explicit { points } => points.iter().any(|q| q.as_slice() == p),
        }
    }

    /// Membership test for a single point.
    pub fn contains(&self, p: &[i64]) -> Result<bool> {
        let spec = self.validated()?;
        if let Some(d) = spec.dimension() {
            if d != p.len() {
                return Err(Error::DimensionMismatch { expected: d, found: p.len() });
            }
        }
        Ok(spec.contains_unchecked(p))
    }
}

/// `hash(seed, point) < p` with the counter-based mixer.
pub fn bernoulli_member(seed: u64, p: f64, point: &[i64]) -> bool {
    Key::new(seed).with(stream::BERNOULLI_SET).with_site(point).uniform(0) < p
}

/// Members of `A` inside the window, in lexicographic order.
pub fn restrict(spec: &IndexSetSpec, window: &Window) -> Result<Vec<Point>> {
    let mask = spec.mask(window)?;
    Ok(mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| window.point_at(i)).collect())
}

/// `card(A_N)`.
pub fn cardinality(spec: &IndexSetSpec, window: &Window) -> Result<u64> {
    Ok(spec.mask(window)?.iter().filter(|&&m| m).count() as u64)
}

/// `#{x : a[x] && b[x - lag]}` over two window masks.
///
/// Only the sub-box where both `x` and `x - lag` are inside the window is
/// visited; the innermost axis is contiguous.
pub fn count_shifted(window: &Window, a: &[bool], b: &[bool], lag: &[i64]) -> u64 {
    debug_assert_eq!(lag.len(), window.d);
    let side = window.side() as i64;
    let strides = window.strides();
    // x_i in [max(-n, -n + k_i), min(n, n + k_i)], stored as offsets from -n
    let mut lo = Vec::with_capacity(window.d);
    let mut hi = Vec::with_capacity(window.d);
    for &k in lag {
        let l = k.max(0);
        let h = (side - 1).min(side - 1 + k);
        if l > h {
            return 0;
        }
        lo.push(l);
        hi.push(h);
    }
    let shift: i64 = lag.iter().zip(&strides).map(|(&k, &s)| k * s as i64).sum();
    let last = window.d - 1;
    let run = (hi[last] - lo[last] + 1) as usize;
    let mut cur = lo.clone();
    let mut total = 0u64;
    loop {
        let base: usize = cur.iter().zip(&strides).map(|(&c, &s)| c as usize * s).sum();
        let other = (base as i64 - shift) as usize;
        total += a[base..base + run].iter().zip(&b[other..other + run]).filter(|(&x, &y)| x && y).count() as u64;
        // odometer over the outer axes
        let mut axis = last;
        loop {
            if axis == 0 {
                return total;
            }
            axis -= 1;
            if cur[axis] < hi[axis] {
                cur[axis] += 1;
                cur[axis + 1..last].copy_from_slice(&lo[axis + 1..last]);
                break;
            }
        }
    }
}

/// An exact fraction `numerator / denominator`, kept unreduced so that the
/// count and the window size stay visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub numerator: u64,
    pub denominator: u64,
}

impl Fraction {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// Rational equality `a/b == c/e`.
    pub fn equals(&self, numerator: u64, denominator: u64) -> bool {
        self.numerator as u128 * denominator as u128 == numerator as u128 * self.denominator as u128
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelogramKind {
    Auto,
    Cross,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelogramEntry {
    pub lag: Point,
    pub count: Fraction,
}

impl CorrelogramEntry {
    pub fn value(&self) -> f64 {
        self.count.value()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlogram {
    pub window: Window,
    pub kind: CorrelogramKind,
    pub entries: Vec<CorrelogramEntry>,
}

impl Correlogram {
    pub fn get(&self, lag: &[i64]) -> Option<&Fraction> {
        self.entries.iter().find(|e| e.lag == lag).map(|e| &e.count)
    }

    pub fn value(&self, lag: &[i64]) -> Option<f64> {
        self.get(lag).map(Fraction::value)
    }

    /// CSV with columns `k_1..k_d, numerator, denominator, value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(csv_header(self.window.d, false))?;
        for e in &self.entries {
            w.write_record(csv_row(None, e))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_header(d: usize, with_n: bool) -> Vec<String> {
    let mut h = Vec::new();
    if with_n {
        h.push("N".to_string());
    }
    h.extend((1..=d).map(|i| format!("k_{i}")));
    h.extend(["numerator", "denominator", "value"].map(String::from));
    h
}

pub(crate) fn csv_row(n: Option<u32>, e: &CorrelogramEntry) -> Vec<String> {
    let mut r = Vec::new();
    if let Some(n) = n {
        r.push(n.to_string());
    }
    r.extend(e.lag.iter().map(i64::to_string));
    r.push(e.count.numerator.to_string());
    r.push(e.count.denominator.to_string());
    r.push(e.value().to_string());
    r
}

/// Writes several correlograms (one per window) into a single CSV with a
/// leading `N` column.
pub fn write_correlograms_csv<W: Write>(items: &[Correlogram], out: W) -> Result<()> {
    let d = items.first().map(|c| c.window.d).unwrap_or(1);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(csv_header(d, true))?;
    for c in items {
        for e in &c.entries {
            w.write_record(csv_row(Some(c.window.n), e))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn check_lags(window: &Window, lags: &[Point]) -> Result<()> {
    for k in lags {
        window.check_dim(k.len())?;
    }
    Ok(())
}

fn correlogram_from_masks(
    window: &Window,
    a: &[bool],
    b: &[bool],
    lags: &[Point],
    kind: CorrelogramKind,
) -> Correlogram {
    let denominator = window.size() as u64;
    let entries = lags
        .par_iter()
        .map(|k| CorrelogramEntry {
            lag: k.clone(),
            count: Fraction { numerator: count_shifted(window, a, b, k), denominator },
        })
        .collect();
    Correlogram { window: *window, kind, entries }
}

/// Exact `H_N(k; A)` for each lag.
pub fn correlogram(spec: &IndexSetSpec, window: &Window, lags: &[Point]) -> Result<Correlogram> {
    check_lags(window, lags)?;
    let mask = spec.mask(window)?;
    Ok(correlogram_from_masks(window, &mask, &mask, lags, CorrelogramKind::Auto))
}

/// Exact `H_N(k; A, B) = card{A_N ∩ (k + B_N)} / (2N+1)^d`.
pub fn cross_correlogram(a: &IndexSetSpec, b: &IndexSetSpec, window: &Window, lags: &[Point]) -> Result<Correlogram> {
    check_lags(window, lags)?;
    let ma = a.mask(window)?;
    let mb = b.mask(window)?;
    Ok(correlogram_from_masks(window, &ma, &mb, lags, CorrelogramKind::Cross))
}

/// Correlogram of an explicit mask; used for derived sets such as
/// `A ∩ Δ_N^c`.
pub fn mask_correlogram(window: &Window, mask: &[bool], lags: &[Point]) -> Result<Correlogram> {
    check_lags(window, lags)?;
    if mask.len() != window.size() {
        return Err(Error::InvalidArgument("mask length does not match window".into()));
    }
    Ok(correlogram_from_masks(window, mask, mask, lags, CorrelogramKind::Auto))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    /// `|H_{N_max} - H_{N_prev}|`; absent for a single window.
    Extrapolated {
        n_sequence: Vec<u32>,
        residual: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEntry {
    pub lag: Point,
    pub value: f64,
    pub provenance: Provenance,
}

/// `k -> H(k; A)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitProfile {
    pub d: usize,
    pub entries: Vec<LimitEntry>,
}

impl LimitProfile {
    pub fn get(&self, lag: &[i64]) -> Option<f64> {
        self.entries.iter().find(|e| e.lag == lag).map(|e| e.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LimitMode {
    Analytic,
    /// Use `H_{N_max}` over the given increasing window sequence.
    Extrapolated {
        n_sequence: Vec<u32>,
    },
}

/// Closed-form `H(k; A)` where one exists.
pub fn analytic_limit(spec: &IndexSetSpec, lag: &[i64]) -> Result<f64> {
    match spec.validated()? {
        IndexSetSpec::FullLattice => Ok(1.0),
        IndexSetSpec::HalfSpace { .. } => Ok(0.5),
        IndexSetSpec::Periodic { moduli, residues } => {
            if lag.len() != moduli.len() {
                return Err(Error::DimensionMismatch { expected: moduli.len(), found: lag.len() });
            }
            let period: u64 = moduli.iter().map(|&m| m as u64).product();
            let set: HashSet<&Point> = residues.iter().collect();
            // pairs (r, r') with r' ≡ r - k
            let pairs = residues
                .iter()
                .filter(|r| {
                    let shifted: Point =
                        r.iter().zip(lag).zip(&moduli).map(|((&x, &k), &m)| (x - k).rem_euclid(m as i64)).collect();
                    set.contains(&shifted)
                })
                .count();
            Ok(pairs as f64 / period as f64)
        }
        other => Err(Error::UnsupportedAnalytic(other.name())),
    }
}

/// `H(k; A)` for each lag, either in closed form or read off the largest
/// window of an increasing sequence.
pub fn limit_profile(spec: &IndexSetSpec, d: usize, lags: &[Point], mode: &LimitMode) -> Result<LimitProfile> {
    for k in lags {
        if k.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: k.len() });
        }
    }
    if let Some(sd) = spec.dimension() {
        if sd != d {
            return Err(Error::DimensionMismatch { expected: d, found: sd });
        }
    }
    let entries = match mode {
        LimitMode::Analytic => lags
            .iter()
            .map(|k| {
                Ok(LimitEntry { lag: k.clone(), value: analytic_limit(spec, k)?, provenance: Provenance::Analytic })
            })
            .collect::<Result<Vec<_>>>()?,
        LimitMode::Extrapolated { n_sequence } => {
            if n_sequence.is_empty() {
                return Err(Error::InvalidArgument("extrapolation needs a non-empty N sequence".into()));
            }
            let mut last: Vec<Correlogram> = Vec::new();
            for &n in n_sequence.iter().rev().take(2).rev() {
                last.push(correlogram(spec, &Window::new(d, n)?, lags)?);
            }
            let fin = last.last().expect("non-empty");
            lags.iter()
                .map(|k| {
                    let v = fin.value(k).expect("lag present");
                    let residual = (last.len() == 2).then(|| (v - last[0].value(k).expect("lag present")).abs());
                    LimitEntry {
                        lag: k.clone(),
                        value: v,
                        provenance: Provenance::Extrapolated { n_sequence: n_sequence.clone(), residual },
                    }
                })
                .collect()
        }
    };
    Ok(LimitProfile { d, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmRow {
    pub lag: Point,
    pub values: Vec<f64>,
    /// `|H_{N_{i+1}} - H_{N_i}|`.
    pub differences: Vec<f64>,
    pub differences_decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmReport {
    pub set: IndexSetSpec,
    pub d: usize,
    pub n_sequence: Vec<u32>,
    pub cardinalities: Vec<u64>,
    pub rows: Vec<AmRow>,
    /// `H_N(0)` is (numerically) heading to zero: the set has density zero.
    pub vanishing_density: bool,
    /// `H_N(0) = 1` at every window: the set has full density.
    pub full_density: bool,
    /// Lags whose last value is exactly zero. Reported, not rejected.
    pub zero_lags: Vec<Point>,
}

/// Numerical look at the convergence of `H_N(k; A)` along a window
/// sequence. This is a diagnostic, not a proof of asymptotic measurability.
pub fn am_diagnostic(spec: &IndexSetSpec, d: usize, lags: &[Point], n_sequence: &[u32]) -> Result<AmReport> {
    if n_sequence.len() < 3 || n_sequence.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("N sequence must be strictly increasing with at least 3 entries".into()));
    }
    let mut cards = Vec::with_capacity(n_sequence.len());
    let mut grams = Vec::with_capacity(n_sequence.len());
    for &n in n_sequence {
        let w = Window::new(d, n)?;
        cards.push(cardinality(spec, &w)?);
        grams.push(correlogram(spec, &w, lags)?);
    }
    let rows: Vec<AmRow> = lags
        .iter()
        .map(|k| {
            let values: Vec<f64> = grams.iter().map(|g| g.value(k).expect("lag present")).collect();
            let differences: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
            let differences_decreasing = differences.windows(2).all(|w| w[1] <= w[0]);
            AmRow { lag: k.clone(), values, differences, differences_decreasing }
        })
        .collect();
    let m = cards.len();
    let h0: Vec<f64> = cards.iter().zip(n_sequence).map(|(&c, &n)| c as f64 / Window { d, n }.size_f64()).collect();
    let vanishing_density = cards[m - 1] == cards[m - 2] || h0[m - 1] == 0.0;
    let full_density = h0.iter().all(|&h| h == 1.0);
    let zero_lags =
        rows.iter().filter(|r| *r.values.last().expect("non-empty") == 0.0).map(|r| r.lag.clone()).collect();
    Ok(AmReport {
        set: spec.clone(),
        d,
        n_sequence: n_sequence.to_vec(),
        cardinalities: cards,
        rows,
        vanishing_density,
        full_density,
        zero_lags,
    })
}

/// All lags with max-norm at most `m` in dimension `d`, lexicographic.
pub fn lags_within(d: usize, m: u32) -> Vec<Point> {
    let w = Window { d, n: m };
    w.points().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(d: usize, n: u32) -> Window {
        Window::new(d, n).unwrap()
    }

    #[test]
    fn window_indexing_round_trips() {
        let win = w(3, 2);
        assert_eq!(win.size(), 125);
        for i in 0..win.size() {
            let p = win.point_at(i);
            assert!(p.iter().all(|c| (-2..=2).contains(c)));
            assert_eq!(win.index_of(&p), Some(i));
        }
        assert_eq!(win.index_of(&[3, 0, 0]), None);
    }

    #[test]
    fn restrict_examples() {
        assert_eq!(
            restrict(&IndexSetSpec::FullLattice, &w(1, 2)).unwrap(),
            vec![vec![-2], vec![-1], vec![0], vec![1], vec![2]]
        );
        assert_eq!(restrict(&IndexSetSpec::evens(1), &w(1, 2)).unwrap(), vec![vec![-2], vec![0], vec![2]]);
        assert_eq!(restrict(&IndexSetSpec::half_line(), &w(1, 3)).unwrap(), vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn restrict_rejects_dimension_mismatch() {
        let err = restrict(&IndexSetSpec::evens(2), &w(1, 3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 1, found: 2 }));
        let err = restrict(&IndexSetSpec::HalfSpace { axis: 1, threshold: 0 }, &w(1, 3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn periodic_residues_are_reduced() {
        let s = IndexSetSpec::Periodic { moduli: vec![3], residues: vec![vec![-1], vec![5]] };
        assert_eq!(s.validated().unwrap(), IndexSetSpec::Periodic { moduli: vec![3], residues: vec![vec![2]] });
        let bad = IndexSetSpec::Periodic { moduli: vec![3], residues: vec![] };
        assert!(bad.validated().is_err());
    }

    #[test]
    fn explicit_duplicates_rejected() {
        let s = IndexSetSpec::Explicit { points: vec![vec![1], vec![1]] };
        assert!(matches!(s.validated(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn ball_restriction() {
        let pts = restrict(&IndexSetSpec::Ball { radius: 1.5 }, &w(2, 3)).unwrap();
        assert_eq!(pts.len(), 9);
    }

    #[test]
    fn correlogram_examples() {
        let lags = vec![vec![0], vec![1], vec![2]];
        let g = correlogram(&IndexSetSpec::evens(1), &w(1, 2), &lags).unwrap();
        assert_eq!(*g.get(&[0]).unwrap(), Fraction { numerator: 3, denominator: 5 });
        assert_eq!(*g.get(&[2]).unwrap(), Fraction { numerator: 2, denominator: 5 });
        assert_eq!(g.get(&[1]).unwrap().numerator, 0);

        let g = correlogram(&IndexSetSpec::half_line(), &w(1, 3), &lags[..2]).unwrap();
        assert!(g.get(&[0]).unwrap().equals(4, 7));
        assert!(g.get(&[1]).unwrap().equals(3, 7));

        let g = correlogram(&IndexSetSpec::FullLattice, &w(2, 1), &[vec![1, 0]]).unwrap();
        assert!(g.get(&[1, 0]).unwrap().equals(6, 9));
    }

    #[test]
    fn cross_correlogram_examples() {
        let lags = vec![vec![-1], vec![0], vec![1]];
        let g = cross_correlogram(&IndexSetSpec::evens(1), &IndexSetSpec::odds(), &w(1, 2), &lags).unwrap();
        assert!(g.get(&[1]).unwrap().equals(2, 5));
        assert_eq!(g.kind, CorrelogramKind::Cross);

        let empty = IndexSetSpec::Explicit { points: vec![] };
        let g = cross_correlogram(&IndexSetSpec::FullLattice, &empty, &w(1, 4), &lags).unwrap();
        assert!(g.entries.iter().all(|e| e.count.numerator == 0));
    }

    #[test]
    fn lag_outside_window_gives_zero() {
        let g = correlogram(&IndexSetSpec::FullLattice, &w(1, 2), &[vec![5], vec![-5]]).unwrap();
        assert!(g.entries.iter().all(|e| e.count.numerator == 0));
    }

    #[test]
    fn analytic_limits() {
        let ev = IndexSetSpec::evens(1);
        assert_eq!(analytic_limit(&ev, &[0]).unwrap(), 0.5);
        assert_eq!(analytic_limit(&ev, &[1]).unwrap(), 0.0);
        assert_eq!(analytic_limit(&ev, &[2]).unwrap(), 0.5);
        assert_eq!(analytic_limit(&IndexSetSpec::FullLattice, &[3, -1, 2]).unwrap(), 1.0);
        assert_eq!(analytic_limit(&IndexSetSpec::half_line(), &[17]).unwrap(), 0.5);
        let e = analytic_limit(&IndexSetSpec::BernoulliRandom { p: 0.5, seed: 1 }, &[0]);
        assert!(matches!(e, Err(Error::UnsupportedAnalytic("BernoulliRandom"))));
    }

    #[test]
    fn analytic_matches_counting_for_evens() {
        let lags: Vec<Point> = (0..3).map(|k| vec![k]).collect();
        for n in [1000, 10_000] {
            let g = correlogram(&IndexSetSpec::evens(1), &w(1, n), &lags).unwrap();
            for k in &lags {
                let h = analytic_limit(&IndexSetSpec::evens(1), k).unwrap();
                assert!((g.value(k).unwrap() - h).abs() <= 2.0 / (2 * n + 1) as f64);
            }
        }
    }

    #[test]
    fn extrapolated_profile_reports_residual() {
        let prof = limit_profile(
            &IndexSetSpec::half_line(),
            1,
            &[vec![0], vec![3]],
            &LimitMode::Extrapolated { n_sequence: vec![10, 100, 1000] },
        )
        .unwrap();
        let e = &prof.entries[1];
        assert!((e.value - 998.0 / 2001.0).abs() < 1e-15);
        match &e.provenance {
            Provenance::Extrapolated { residual, .. } => {
                assert!((residual.unwrap() - (998.0f64 / 2001.0 - 98.0 / 201.0).abs()).abs() < 1e-15)
            }
            _ => panic!("expected extrapolated"),
        }
    }

    #[test]
    fn am_diagnostic_evens_converges() {
        let r = am_diagnostic(&IndexSetSpec::evens(1), 1, &[vec![0], vec![1], vec![2]], &[10, 100, 1000]).unwrap();
        for row in &r.rows {
            assert!(row.differences_decreasing, "{row:?}");
            assert!(*row.differences.last().unwrap() < 3e-3);
        }
        assert_eq!(r.zero_lags, vec![vec![1]]);
        assert!(!r.vanishing_density && !r.full_density);
    }

    #[test]
    fn am_diagnostic_bernoulli() {
        let s = IndexSetSpec::BernoulliRandom { p: 0.5, seed: 2024 };
        let r = am_diagnostic(&s, 1, &[vec![0]], &[50, 100, 200]).unwrap();
        let row = &r.rows[0];
        assert!((row.values[2] - 0.5).abs() < 4.0 * (0.25f64 / 401.0).sqrt());
        assert!(!r.vanishing_density);
    }

    #[test]
    fn am_diagnostic_flags_finite_sets() {
        let s = IndexSetSpec::Explicit { points: vec![vec![0], vec![3]] };
        let r = am_diagnostic(&s, 1, &[vec![0], vec![3]], &[10, 100, 1000]).unwrap();
        assert!(r.vanishing_density);
        assert!(r.rows.iter().all(|row| row.values[2] < 1e-3));
        let r = am_diagnostic(&IndexSetSpec::FullLattice, 1, &[vec![0]], &[1, 2, 3]).unwrap();
        assert!(r.full_density);
        assert!(am_diagnostic(&s, 1, &[vec![0]], &[10, 10, 20]).is_err());
    }

    #[test]
    fn spec_json_uses_variant_tag() {
        let s = IndexSetSpec::evens(1);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"variant":"Periodic","moduli":[2],"residues":[[0]]}"#);
        let back: IndexSetSpec = serde_json::from_str(r#"{"variant":"HalfSpace","axis":0,"threshold":0}"#).unwrap();
        assert_eq!(back, IndexSetSpec::half_line());
    }

    #[test]
    fn correlogram_csv_columns() {
        let g = correlogram(&IndexSetSpec::evens(1), &w(1, 2), &[vec![0], vec![2]]).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k_1,numerator,denominator,value\n0,3,5,0.6\n2,2,5,0.4\n");
    }
}
