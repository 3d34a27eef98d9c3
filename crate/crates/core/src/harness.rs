//! Monte Carlo verification of the Gaussian limit
//! `S_N(A, X^N) → N(0, σ²(A))`, `σ²(A) = Σ_k γ(k) H(k; A)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::blocks::{build_blocks, default_rates, remainder_variance, BlockPlan};
use crate::error::{Error, Result};
use crate::fields::{
    covariance_model, gamma_limits, truncate_values, truncation_mean, FieldSpec, GammaProfile, McOptions,
};
use crate::geometry::{
    analytic_limit, lags_within, limit_profile, IndexSetSpec, LimitMode, LimitProfile, Point, Window,
};
use crate::numeric::{compensated_sum, mean_stderr, mean_var, normal_cdf, normal_pdf};
use crate::partial_sums::{lemma_variance, masked_sum};

/// Refuse runs that would sample more than this many field values.
pub const DEFAULT_BUDGET: u128 = 1_000_000_000;

/// Large-sample 5% Kolmogorov-Smirnov critical value, times `√R`.
pub const KS_CRITICAL_COEFF: f64 = 1.36;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub limit: u128,
    pub force: bool,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { limit: DEFAULT_BUDGET, force: false }
    }
}

impl Budget {
    pub fn check(&self, requested: u128) -> Result<()> {
        if requested > self.limit && !self.force {
            return Err(Error::Budget { requested, limit: self.limit });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumSampleSet {
    pub field: FieldSpec,
    pub set: IndexSetSpec,
    pub window: Window,
    pub seed: u64,
    /// `values[r]` is `S_N(A, X^N)` for replication `r`.
    pub values: Vec<f64>,
}

/// `R` independent replications of `S_N(A, X^N)` with `N = window.n`.
pub fn monte_carlo_sums(
    field: &FieldSpec,
    set: &IndexSetSpec,
    window: &Window,
    replications: u64,
    seed: u64,
    budget: &Budget,
) -> Result<SumSampleSet> {
    if replications < 100 {
        return Err(Error::InvalidArgument(format!("need R >= 100 replications, got {replications}")));
    }
    budget.check(window.size() as u128 * replications as u128)?;
    let sampler = field.sampler()?;
    let mask = set.mask(window)?;
    let values = (0..replications)
        .into_par_iter()
        .map(|r| Ok(masked_sum(&sampler.sample(window, window.n, seed, r)?.values, &mask, window)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SumSampleSet { field: field.clone(), set: set.clone(), window: *window, seed, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaReport {
    pub lag_cutoff: u32,
    pub j_grid: Vec<f64>,
    /// `σ_J²(A)` for each `J`.
    pub sigma_j: Vec<f64>,
    pub sigma2: f64,
    /// `|σ_J² - σ²|` for each `J`.
    pub residuals: Vec<f64>,
    /// Every term satisfied `|γ^J(k)| <= ρ(k)`.
    pub dominated: bool,
}

/// `σ_J²(A) = Σ_k γ^J(k) H(k; A)` and `σ²(A) = Σ_k γ(k) H(k; A)` over lags
/// with `‖k‖∞ <= lag_cutoff`.
pub fn sigma_squared(gammas: &GammaProfile, limits: &LimitProfile, lag_cutoff: u32) -> Result<SigmaReport> {
    let mut terms: Vec<(usize, f64)> = Vec::new();
    for (l, k) in gammas.lags.iter().enumerate() {
        if k.iter().any(|c| c.unsigned_abs() > lag_cutoff as u64) {
            continue;
        }
        let nonzero = gammas.gamma[l] != 0.0 || gammas.gamma_j.iter().any(|row| row[l].value != 0.0);
        match limits.get(k) {
            Some(h) => terms.push((l, h)),
            None if nonzero => return Err(Error::MissingLag(k.clone())),
            None => {}
        }
    }
    let sigma2 = compensated_sum(terms.iter().map(|&(l, h)| gammas.gamma[l] * h));
    let sigma_j: Vec<f64> =
        gammas.gamma_j.iter().map(|row| compensated_sum(terms.iter().map(|&(l, h)| row[l].value * h))).collect();
    let residuals = sigma_j.iter().map(|s| (s - sigma2).abs()).collect();
    Ok(SigmaReport {
        lag_cutoff,
        j_grid: gammas.j_grid.clone(),
        sigma_j,
        sigma2,
        residuals,
        dominated: gammas.within_rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub n: u64,
    pub sigma2: f64,
    pub mean: f64,
    pub mean_stderr: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub variance_stderr: f64,
    pub skewness: f64,
    pub skewness_stderr: f64,
    pub excess_kurtosis: f64,
    pub kurtosis_stderr: f64,
    /// `sup_x |F_R(x) - Φ(x / σ)|`.
    pub ks_statistic: f64,
    /// `1.36 / √R`.
    pub ks_critical: f64,
}

impl NormalityReport {
    pub fn ks_pass(&self) -> bool {
        self.ks_statistic < self.ks_critical
    }
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and
/// the continuous distribution function `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    })
}

/// Moment diagnostics and the KS statistic against `N(0, sigma2)`.
pub fn normality_test(samples: &[f64], sigma2: f64) -> Result<NormalityReport> {
    if !(sigma2 > 0.0) {
        return Err(Error::Degenerate(sigma2));
    }
    if samples.len() < 4 {
        return Err(Error::InvalidArgument("normality test needs at least 4 samples".into()));
    }
    let n = samples.len() as f64;
    let (mean, variance) = mean_var(samples);
    let central = |p: i32| compensated_sum(samples.iter().map(|x| (x - mean).powi(p))) / n;
    let m2 = central(2);
    let m3 = central(3);
    let m4 = central(4);
    let (skewness, excess_kurtosis) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };
    let sd = sigma2.sqrt();
    let ks = ks_statistic(samples, |x| normal_cdf(x / sd));
    Ok(NormalityReport {
        n: samples.len() as u64,
        sigma2,
        mean,
        mean_stderr: (variance / n).sqrt(),
        variance,
        variance_stderr: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        skewness,
        skewness_stderr: (6.0 / n).sqrt(),
        excess_kurtosis,
        kurtosis_stderr: (24.0 / n).sqrt(),
        ks_statistic: ks,
        ks_critical: KS_CRITICAL_COEFF / n.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationGapEntry {
    pub j: f64,
    /// `E{[S_N(A,X) - S_N(A,X^J)]²} · (2N+1)^d / card(A_N)`.
    pub gap: f64,
    pub stderr: f64,
    /// Paired difference `gap(J_prev) - gap(J)` and its standard error.
    pub drop_from_prev: Option<f64>,
    pub drop_stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationGapReport {
    pub card: u64,
    pub replications: u64,
    pub entries: Vec<TruncationGapEntry>,
}

impl TruncationGapReport {
    /// Every successive drop exceeds `z` standard errors.
    pub fn strictly_decreasing(&self, z: f64) -> bool {
        self.entries.iter().skip(1).all(|e| match (e.drop_from_prev, e.drop_stderr) {
            (Some(d), Some(se)) => d > z * se,
            _ => false,
        })
    }
}

/// Normalized mean-square truncation gap per `J`, with common random
/// numbers across the `J` grid.
pub fn truncation_gap(
    field: &FieldSpec,
    set: &IndexSetSpec,
    window: &Window,
    j_grid: &[f64],
    replications: u64,
    seed: u64,
) -> Result<TruncationGapReport> {
    if j_grid.is_empty() || j_grid.iter().any(|&j| !(j > 0.0)) {
        return Err(Error::InvalidArgument("J grid must be non-empty with positive levels".into()));
    }
    if replications < 2 {
        return Err(Error::InvalidArgument("truncation_gap needs at least 2 replications".into()));
    }
    let sampler = field.sampler()?;
    let mask = set.mask(window)?;
    let card = mask.iter().filter(|&&m| m).count() as u64;
    if card == 0 {
        return Err(Error::InvalidArgument("set has no points in the window".into()));
    }
    let norm = window.size_f64() / card as f64;
    let mus: Vec<f64> = j_grid.iter().map(|&j| truncation_mean(&sampler, window.n, j)).collect();
    let per_rep: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let g = sampler.sample(window, window.n, seed, r)?;
            let full = masked_sum(&g.values, &mask, window);
            Ok(j_grid
                .iter()
                .zip(&mus)
                .map(|(&j, &mu)| {
                    let t = masked_sum(&truncate_values(&g.values, j, mu), &mask, window);
                    (full - t).powi(2) * norm
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let column = |i: usize| -> Vec<f64> { per_rep.iter().map(|v| v[i]).collect() };
    let entries = (0..j_grid.len())
        .map(|i| {
            let (gap, stderr) = mean_stderr(&column(i));
            let (drop_from_prev, drop_stderr) = if i == 0 {
                (None, None)
            } else {
                let diffs: Vec<f64> = per_rep.iter().map(|v| v[i - 1] - v[i]).collect();
                let (d, se) = mean_stderr(&diffs);
                (Some(d), Some(se))
            };
            TruncationGapEntry { j: j_grid[i], gap, stderr, drop_from_prev, drop_stderr }
        })
        .collect();
    Ok(TruncationGapReport { card, replications, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rates {
    Default,
    Fixed { p: u32, q: u32 },
}

fn default_j_grid() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0, 16.0]
}

fn default_gamma_replications() -> u64 {
    100_000
}

/// Everything needed to run a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub field: FieldSpec,
    pub set: IndexSetSpec,
    pub d: usize,
    pub n_grid: Vec<u32>,
    #[serde(default = "default_j_grid")]
    pub j_grid: Vec<f64>,
    pub replications: u64,
    pub seed: u64,
    pub rates: Rates,
    /// Lags reported in the correlogram section; defaults to the covariance
    /// support.
    #[serde(default)]
    pub lags: Option<Vec<Point>>,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Replications for Monte Carlo `γ^J` estimates of fields without an
    /// exact route.
    #[serde(default = "default_gamma_replications")]
    pub gamma_replications: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidSpec("d: must be >= 1".into()));
        }
        self.field.validate()?;
        self.field.check_dimension(self.d)?;
        let set = self.set.validated()?;
        if let Some(sd) = set.dimension() {
            if sd != self.d {
                return Err(Error::DimensionMismatch { expected: self.d, found: sd });
            }
        }
        if let IndexSetSpec::HalfSpace { axis, .. } = set {
            if axis >= self.d {
                return Err(Error::InvalidSpec(format!("set.axis: {axis} out of range for d={}", self.d)));
            }
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec("n_grid: must be non-empty and strictly increasing".into()));
        }
        if self.j_grid.is_empty() || self.j_grid.iter().any(|&j| !(j > 0.0)) {
            return Err(Error::InvalidSpec("j_grid: levels must be positive".into()));
        }
        if self.replications < 100 {
            return Err(Error::InvalidSpec("replications: must be >= 100".into()));
        }
        if let Rates::Fixed { p, q } = self.rates {
            if p < 1 || q < 1 {
                return Err(Error::InvalidSpec("rates: p and q must be >= 1".into()));
            }
        }
        if let Some(lags) = &self.lags {
            if let Some(k) = lags.iter().find(|k| k.len() != self.d) {
                return Err(Error::InvalidSpec(format!("lags: {k:?} does not have length d={}", self.d)));
            }
        }
        Ok(())
    }

    /// Field values sampled by the whole study.
    pub fn sampled_values(&self) -> u128 {
        self.n_grid.iter().map(|&n| Window { d: self.d, n }.size() as u128 * self.replications as u128).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    #[serde(rename = "N")]
    pub n: u32,
    pub card: u64,
    pub emp_mean: f64,
    pub emp_var: f64,
    pub emp_var_stderr: f64,
    /// `Σ_k r(k) H_N(k; A)`, when the covariance is analytic.
    pub lemma_var: Option<f64>,
    pub sigma2: f64,
    pub normality: Option<NormalityReport>,
    pub p: Option<u32>,
    pub q: Option<u32>,
    pub k_n: Option<u32>,
    /// Empirical `Σ_ℓ E S_ℓ⁴ / (Σ_ℓ E S_ℓ²)²` over big blocks.
    pub lyapunov: Option<f64>,
    /// `[(p+1)² / ((p+q)(2N+1))]^d`.
    pub lyapunov_factor: Option<f64>,
    /// Remainder variance as a fraction of `lemma_var`.
    pub remainder_frac: Option<f64>,
    /// `q_N` exceeds the dependence range, so big blocks are independent.
    pub q_exceeds_range: Option<bool>,
}

impl StudyRow {
    pub fn ks(&self) -> Option<f64> {
        self.normality.map(|r| r.ks_statistic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dependence_range: u32,
    pub gamma: Option<GammaProfile>,
    pub limit: Option<LimitProfile>,
    pub sigma: Option<SigmaReport>,
    /// `σ²(A) = 0`: the KS comparison is skipped.
    pub degenerate: bool,
    pub notes: Vec<String>,
    pub rows: Vec<StudyRow>,
}

impl ExperimentReport {
    pub fn sigma2(&self) -> f64 {
        self.sigma.as_ref().map(|s| s.sigma2).unwrap_or(0.0)
    }

    pub fn final_row(&self) -> Option<&StudyRow> {
        self.rows.last()
    }

    /// Per-`N` table with columns
    /// `N, cardAN, empVar, lemma1Var, sigma2, ksStat, lyapunov, remainderFrac`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["N", "cardAN", "empVar", "lemma1Var", "sigma2", "ksStat", "lyapunov", "remainderFrac"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.card.to_string(),
                r.emp_var.to_string(),
                opt(r.lemma_var),
                r.sigma2.to_string(),
                opt(r.ks()),
                opt(r.lyapunov),
                opt(r.remainder_frac),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Report plus the raw sums per `N`, for histogram and QQ output.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    pub report: ExperimentReport,
    pub samples: Vec<Vec<f64>>,
}

fn limit_for(set: &IndexSetSpec, d: usize, lags: &[Point], n_grid: &[u32]) -> Result<LimitProfile> {
    let analytic = lags.iter().all(|k| analytic_limit(set, k).is_ok());
    let mode = if analytic { LimitMode::Analytic } else { LimitMode::Extrapolated { n_sequence: n_grid.to_vec() } };
    limit_profile(set, d, lags, &mode)
}

/// Runs the Monte Carlo study over the `N` grid of `config`.
pub fn convergence_study(config: &ExperimentConfig, budget: &Budget) -> Result<StudyOutput> {
    config.validate()?;
    budget.check(config.sampled_values())?;
    let d = config.d;
    let field = &config.field;
    let set = &config.set;
    let m = field.range();
    let support = lags_within(d, m);
    let mut notes = Vec::new();

    let (gamma, limit, sigma) = if set.is_finite() {
        notes.push("finite index set: density zero, sigma^2(A) = 0".to_string());
        (None, None, None)
    } else {
        let mc = McOptions { replications: config.gamma_replications, seed: config.seed };
        let gamma = gamma_limits(field, &config.j_grid, &support, &mc)?;
        let limit = limit_for(set, d, &support, &config.n_grid)?;
        let sigma = sigma_squared(&gamma, &limit, m)?;
        if !sigma.dominated {
            notes.push("some |gamma^J(k)| exceeded rho(k)".to_string());
        }
        (Some(gamma), Some(limit), Some(sigma))
    };
    let sigma2 = sigma.as_ref().map(|s| s.sigma2).unwrap_or(0.0);
    let degenerate = !(sigma2 > 0.0);
    if degenerate && !set.is_finite() {
        notes.push(format!("sigma^2(A) = {sigma2}: KS comparison skipped"));
    }

    let j_max = *config.j_grid.last().expect("validated");
    let sampler = field.sampler()?;
    let mut rows = Vec::with_capacity(config.n_grid.len());
    let mut all_samples = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        let window = Window::new(d, n)?;
        let mask = set.mask(&window)?;
        let card = mask.iter().filter(|&&x| x).count() as u64;
        let plan: Option<BlockPlan> = match config.rates {
            Rates::Default => default_rates(n).ok().map(|(p, q)| build_blocks(&window, p, q)).transpose()?,
            Rates::Fixed { p, q } => Some(build_blocks(&window, p, q)?),
        };
        let labels = plan.as_ref().map(|pl| pl.labels());
        let nblocks = plan.as_ref().map(|pl| pl.blocks.len()).unwrap_or(0);
        let mu = truncation_mean(&sampler, n, j_max);
        let norm = window.size_f64().sqrt();
        // per replication: S_N(A, X^N), Σ_ℓ S_ℓ², Σ_ℓ S_ℓ⁴ on the truncated field
        let reps: Vec<(f64, f64, f64)> = (0..config.replications)
            .into_par_iter()
            .map(|r| -> Result<(f64, f64, f64)> {
                let g = sampler.sample(&window, n, config.seed, r)?;
                let s = masked_sum(&g.values, &mask, &window);
                let (mut s2, mut s4) = (0.0, 0.0);
                if let Some(labels) = &labels {
                    let t = truncate_values(&g.values, j_max, mu);
                    let mut acc = vec![0.0f64; nblocks];
                    for ((v, &inside), l) in t.iter().zip(&mask).zip(labels) {
                        if let (true, Some(l)) = (inside, l) {
                            acc[*l as usize] += v;
                        }
                    }
                    for b in acc {
                        let sb = b / norm;
                        s2 += sb * sb;
                        s4 += sb.powi(4);
                    }
                }
                Ok((s, s2, s4))
            })
            .collect::<Result<_>>()?;
        let samples: Vec<f64> = reps.iter().map(|r| r.0).collect();
        let (emp_mean, emp_var) = mean_var(&samples);
        let m4 = compensated_sum(samples.iter().map(|x| (x - emp_mean).powi(4))) / samples.len() as f64;
        let emp_var_stderr = ((m4 - emp_var * emp_var).max(0.0) / samples.len() as f64).sqrt();
        let cov = match covariance_model(field, d, n) {
            Ok(c) => Some(c),
            Err(Error::EmpiricalOnly(_)) => None,
            Err(e) => return Err(e),
        };
        let lemma_var = cov.as_ref().map(|c| lemma_variance(c, &mask, &window));
        let remainder_frac = match (&cov, &plan, lemma_var) {
            (Some(c), Some(pl), Some(lv)) if lv > 0.0 => Some(remainder_variance(c, set, pl)?.exact / lv),
            _ => None,
        };
        let lyapunov = plan.as_ref().and_then(|_| {
            let e2 = compensated_sum(reps.iter().map(|r| r.1)) / reps.len() as f64;
            let e4 = compensated_sum(reps.iter().map(|r| r.2)) / reps.len() as f64;
            (e2 > 0.0).then(|| e4 / (e2 * e2))
        });
        let normality = if degenerate { None } else { Some(normality_test(&samples, sigma2)?) };
        rows.push(StudyRow {
            n,
            card,
            emp_mean,
            emp_var,
            emp_var_stderr,
            lemma_var,
            sigma2,
            normality,
            p: plan.as_ref().map(|pl| pl.p),
            q: plan.as_ref().map(|pl| pl.q),
            k_n: plan.as_ref().map(|pl| pl.k_n),
            lyapunov,
            lyapunov_factor: plan.as_ref().map(BlockPlan::lyapunov_factor),
            remainder_frac,
            q_exceeds_range: plan.as_ref().map(|pl| pl.q > m),
        });
        all_samples.push(samples);
    }
    let report =
        ExperimentReport { config: config.clone(), dependence_range: m, gamma, limit, sigma, degenerate, notes, rows };
    Ok(StudyOutput { report, samples: all_samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub density: f64,
    /// `N(0, σ²)` density at the bin centre.
    pub normal_density: f64,
}

/// Equal-width histogram over `[min, max]` of the samples.
pub fn histogram(samples: &[f64], bins: usize, sigma2: f64) -> Vec<HistogramBin> {
    if samples.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0u64; bins];
    for &x in samples {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let n = samples.len() as f64;
    let sd = sigma2.sqrt();
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let a = lo + i as f64 * width;
            let mid = a + 0.5 * width;
            HistogramBin {
                lo: a,
                hi: a + width,
                count: c,
                density: c as f64 / (n * width),
                normal_density: if sd > 0.0 { normal_pdf(mid / sd) / sd } else { 0.0 },
            }
        })
        .collect()
}

/// `(theoretical N(0, σ²) quantile, empirical order statistic)` at plotting
/// positions `(i + 0.5) / R`.
pub fn qq_pairs(samples: &[f64], sigma2: f64) -> Result<Vec<(f64, f64)>> {
    let normal = Normal::new(0.0, sigma2.sqrt()).map_err(|_| Error::Degenerate(sigma2))?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted.iter().enumerate().map(|(i, &x)| (normal.inverse_cdf((i as f64 + 0.5) / n), x)).collect())
}
