use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lattice_clt::Point;

use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "lattice-clt", version, about = "Set correlograms, lattice field simulation and CLT checks")]
pub struct Cli {
    /// Worker thread cap.
    #[arg(long, global = true, env = "LATTICE_CLT_THREADS")]
    pub threads: Option<usize>,
    /// Validate and print the plan without computing.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Ignore the sampled-value budget.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact set correlograms over a window sequence.
    Correlogram(CorrelogramArgs),
    /// Sample one realization of a field on a window.
    Simulate(SimulateArgs),
    /// Monte Carlo convergence study from an experiment config.
    VerifyClt(VerifyArgs),
    /// Block plan, remainder bound and dependence profile.
    Blocks(BlocksArgs),
    /// Validate a verify-clt output directory and print its table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CorrelogramArgs {
    /// Index set spec (JSON).
    #[arg(long)]
    pub set: PathBuf,
    /// Second set for cross correlograms `card{A_N ∩ (k + B_N)}`.
    #[arg(long)]
    pub cross: Option<PathBuf>,
    /// `a..b` (inclusive, per axis), `0,1,2`, or `0,0;1,0` for vectors.
    #[arg(long, default_value = "0..4", allow_hyphen_values = true)]
    pub lags: String,
    /// Comma-separated window half-widths.
    #[arg(long = "N", value_delimiter = ',', required = true)]
    pub n: Vec<u32>,
    /// Dimension; taken from the set when it fixes one.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridFormat {
    Csv,
    Binary,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Field spec (JSON).
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long = "N")]
    pub n: u32,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Triangular-array row; defaults to `N`.
    #[arg(long)]
    pub row: Option<u32>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub replication: u64,
    #[arg(long, value_enum, default_value_t = GridFormat::Csv)]
    pub format: GridFormat,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Histogram bins per N.
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct BlocksArgs {
    #[arg(long = "N")]
    pub n: u32,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Big-block rate; with `--q`, overrides the default rates.
    #[arg(long, requires = "q")]
    pub p: Option<u32>,
    #[arg(long, requires = "p")]
    pub q: Option<u32>,
    /// Field spec (JSON); defaults to the two-tap Rademacher moving average.
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Index set spec (JSON); defaults to the full lattice.
    #[arg(long)]
    pub set: Option<PathBuf>,
    /// Truncation level for the dependence profile.
    #[arg(long, default_value_t = 4.0)]
    pub j: f64,
    /// `lo:hi:count`.
    #[arg(long, default_value = "-3:3:21", allow_hyphen_values = true)]
    pub t_grid: String,
    #[arg(long, default_value_t = 10_000)]
    pub replications: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `verify-clt`.
    #[arg(long)]
    pub input: PathBuf,
}

fn parse_i64(s: &str) -> CliResult<i64> {
    s.trim().parse().map_err(|_| CliError::Config(format!("lags: `{s}` is not an integer")))
}

/// Parses a lag list for dimension `d`.
pub fn parse_lags(spec: &str, d: usize) -> CliResult<Vec<Point>> {
    if d == 0 {
        return Err(CliError::Config("d: must be >= 1".into()));
    }
    if let Some((a, b)) = spec.split_once("..") {
        let (lo, hi) = (parse_i64(a)?, parse_i64(b)?);
        if lo > hi {
            return Err(CliError::Config(format!("lags: empty range {spec}")));
        }
        // cube [lo, hi]^d, lexicographic
        let mut out = Vec::new();
        let mut cur = vec![lo; d];
        loop {
            out.push(cur.clone());
            let mut t = d;
            loop {
                if t == 0 {
                    return Ok(out);
                }
                t -= 1;
                if cur[t] < hi {
                    cur[t] += 1;
                    break;
                }
                cur[t] = lo;
            }
        }
    }
    let lags: Vec<Point> = if d == 1 && !spec.contains(';') {
        spec.split(',').map(|s| parse_i64(s).map(|k| vec![k])).collect::<CliResult<_>>()?
    } else {
        spec.split(';').map(|v| v.split(',').map(parse_i64).collect::<CliResult<Point>>()).collect::<CliResult<_>>()?
    };
    if let Some(k) = lags.iter().find(|k| k.len() != d) {
        return Err(CliError::Config(format!("lags: {k:?} does not have length d={d}")));
    }
    Ok(lags)
}

/// `lo:hi:count`, endpoints included.
pub fn parse_t_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Config(format!("t-grid: expected lo:hi:count, got `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    match n {
        0 => Err(bad()),
        1 => Ok(vec![lo]),
        _ => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_forms() {
        assert_eq!(parse_lags("0..4", 1).unwrap().len(), 5);
        assert_eq!(parse_lags("-1..1", 2).unwrap().len(), 9);
        assert_eq!(parse_lags("0,2,5", 1).unwrap(), vec![vec![0], vec![2], vec![5]]);
        assert_eq!(parse_lags("0,0;1,-1", 2).unwrap(), vec![vec![0, 0], vec![1, -1]]);
        assert!(parse_lags("0,1,2", 2).is_err());
        assert!(parse_lags("3..1", 1).is_err());
    }

    #[test]
    fn t_grid() {
        let g = parse_t_grid("-3:3:21").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!((g[0], g[10], g[20]), (-3.0, 0.0, 3.0));
        assert!(parse_t_grid("1:2").is_err());
    }
}
