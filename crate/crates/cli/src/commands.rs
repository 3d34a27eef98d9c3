use std::io::Write;
use std::path::{Path, PathBuf};

use lattice_clt::blocks::{
    build_blocks, default_rates, dependence_gap, remainder_variance, BlockPlan, DependenceProfile,
};
use lattice_clt::fields::{covariance_model, sample_field, FieldSpec, Marginal};
use lattice_clt::geometry::{am_diagnostic, correlogram, cross_correlogram, write_correlograms_csv, Correlogram};
use lattice_clt::harness::{convergence_study, histogram, qq_pairs, Budget, ExperimentConfig, Rates, DEFAULT_BUDGET};
use lattice_clt::{Error, IndexSetSpec, Window};
use serde::{Deserialize, Serialize};

use crate::args::{
    parse_lags, parse_t_grid, BlocksArgs, CorrelogramArgs, GridFormat, ReportArgs, SimulateArgs, VerifyArgs,
};
use crate::{read_json, schema, to_json, write_file, CliError, CliResult};

/// Run metadata. Kept apart from the primary outputs, which are
/// byte-deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub created: String,
    pub threads: usize,
    pub args: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Context {
    pub dry_run: bool,
    pub force: bool,
    pub argv: Vec<String>,
}

impl Context {
    fn budget(&self) -> Budget {
        Budget { limit: DEFAULT_BUDGET, force: self.force }
    }

    fn write_metadata(&self, dir: &Path, command: &str) -> CliResult<()> {
        let meta = Metadata {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            threads: rayon::current_num_threads(),
            args: self.argv.clone(),
        };
        write_file(&dir.join("metadata.json"), to_json(&meta)?.as_bytes())
    }
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> lattice_clt::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    print!("{}", to_json(value)?);
    Ok(())
}

fn set_dimension(set: &IndexSetSpec, d: Option<usize>) -> CliResult<usize> {
    match (set.dimension(), d) {
        (Some(a), Some(b)) if a != b => Err(Error::DimensionMismatch { expected: b, found: a }.into()),
        (Some(a), _) => Ok(a),
        (None, Some(b)) => Ok(b),
        (None, None) => Ok(1),
    }
}

pub fn cmd_correlogram(ctx: &Context, args: &CorrelogramArgs) -> CliResult<()> {
    let a: IndexSetSpec = read_json(&args.set)?;
    let a = a.validated()?;
    let b = match &args.cross {
        Some(p) => Some(read_json::<IndexSetSpec>(p)?.validated()?),
        None => None,
    };
    let mut d = set_dimension(&a, args.d)?;
    if let Some(b) = &b {
        d = set_dimension(b, Some(d))?;
    }
    let lags = parse_lags(&args.lags, d)?;
    let windows = args.n.iter().map(|&n| Window::new(d, n)).collect::<lattice_clt::Result<Vec<_>>>()?;
    let cells: u128 = windows.iter().map(|w| w.size() as u128).sum();
    ctx.budget().check(cells)?;
    if ctx.dry_run {
        return print_json(&serde_json::json!({
            "command": "correlogram",
            "set": a,
            "cross": b,
            "d": d,
            "lags": lags,
            "N": args.n,
            "rows": lags.len() * windows.len(),
        }));
    }
    let grams = windows
        .iter()
        .map(|w| match &b {
            Some(b) => cross_correlogram(&a, b, w, &lags),
            None => correlogram(&a, w, &lags),
        })
        .collect::<lattice_clt::Result<Vec<Correlogram>>>()?;
    ensure_dir(&args.out)?;
    write_file(&args.out.join("correlogram.csv"), &csv_bytes(|buf| write_correlograms_csv(&grams, buf))?)?;
    let increasing = args.n.len() >= 3 && args.n.windows(2).all(|w| w[0] < w[1]);
    if b.is_none() && increasing {
        let report = am_diagnostic(&a, d, &lags, &args.n)?;
        write_file(&args.out.join("am_diagnostic.json"), to_json(&report)?.as_bytes())?;
    } else {
        eprintln!("note: am_diagnostic needs an auto correlogram over >= 3 increasing N; skipped");
    }
    ctx.write_metadata(&args.out, "correlogram")
}

pub fn cmd_simulate(ctx: &Context, args: &SimulateArgs) -> CliResult<()> {
    let field: FieldSpec = read_json(&args.field)?;
    field.validate()?;
    field.check_dimension(args.d)?;
    let window = Window::new(args.d, args.n)?;
    ctx.budget().check(window.size() as u128)?;
    let row = args.row.unwrap_or(args.n);
    if ctx.dry_run {
        return print_json(&serde_json::json!({
            "command": "simulate",
            "field": field,
            "d": args.d,
            "N": args.n,
            "row": row,
            "seed": args.seed,
            "replication": args.replication,
            "values": window.size(),
        }));
    }
    let grid = sample_field(&field, &window, row, args.seed, args.replication)?;
    ensure_dir(&args.out)?;
    match args.format {
        GridFormat::Csv => write_file(&args.out.join("field.csv"), &csv_bytes(|buf| grid.write_csv(buf))?)?,
        GridFormat::Binary => {
            write_file(&args.out.join("field.header.json"), to_json(&grid.header())?.as_bytes())?;
            write_file(&args.out.join("field.bin"), &csv_bytes(|buf| grid.write_binary(buf))?)?;
        }
    }
    ctx.write_metadata(&args.out, "simulate")
}

fn plan_rates(config: &ExperimentConfig, n: u32) -> Option<(u32, u32)> {
    match config.rates {
        Rates::Default => default_rates(n).ok(),
        Rates::Fixed { p, q } => Some((p, q)),
    }
}

pub fn cmd_verify_clt(ctx: &Context, args: &VerifyArgs) -> CliResult<()> {
    let config: ExperimentConfig = read_json(&args.config)?;
    config.validate()?;
    let out: PathBuf = args
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let budget = ctx.budget();
    budget.check(config.sampled_values())?;
    if ctx.dry_run {
        let rates: Vec<_> =
            config.n_grid.iter().map(|&n| serde_json::json!({ "N": n, "rates": plan_rates(&config, n) })).collect();
        return print_json(&serde_json::json!({
            "command": "verify-clt",
            "config": config,
            "sampled_values": config.sampled_values().to_string(),
            "plans": rates,
            "output_dir": out,
        }));
    }
    let study = convergence_study(&config, &budget)?;
    let report = &study.report;
    ensure_dir(&out)?;
    write_file(&out.join("report.json"), to_json(report)?.as_bytes())?;
    write_file(&out.join("table.csv"), &csv_bytes(|buf| report.write_csv(buf))?)?;
    let sigma2 = report.sigma2();
    for (row, samples) in report.rows.iter().zip(&study.samples) {
        let hist = histogram(samples, args.bins, sigma2);
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Internal(e.to_string());
        w.write_record(["lo", "hi", "count", "density", "normal_density"]).map_err(fail)?;
        for b in &hist {
            w.write_record([
                b.lo.to_string(),
                b.hi.to_string(),
                b.count.to_string(),
                b.density.to_string(),
                b.normal_density.to_string(),
            ])
            .map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
        write_file(&out.join(format!("hist_N{}.csv", row.n)), &bytes)?;
        if !report.degenerate {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            w.write_record(["theoretical", "empirical"]).map_err(fail)?;
            for (t, e) in qq_pairs(samples, sigma2)? {
                w.write_record([t.to_string(), e.to_string()]).map_err(fail)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
            write_file(&out.join(format!("qq_N{}.csv", row.n)), &bytes)?;
        }
    }
    ctx.write_metadata(&out, "verify-clt")?;
    print_table(report)
}

fn print_table(report: &lattice_clt::harness::ExperimentReport) -> CliResult<()> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    report.write_csv(&mut lock)?;
    for note in &report.notes {
        writeln!(lock, "note: {note}").map_err(|e| CliError::Internal(e.to_string()))?;
    }
    Ok(())
}

fn default_block_field(d: usize) -> CliResult<FieldSpec> {
    if d != 1 {
        return Err(CliError::Config("field: required when d > 1".into()));
    }
    Ok(FieldSpec::moving_average_1d(&[1.0, 1.0], Marginal::Rademacher))
}

/// Block `0` of the plan and cubes of the same side placed `dist` further
/// along the first axis, for each `dist` that fits in the window.
fn block_pairs(plan: &BlockPlan, set: &IndexSetSpec, max_dist: u32) -> CliResult<Vec<(IndexSetSpec, IndexSetSpec)>> {
    let w = &plan.window;
    let Some(first) = plan.blocks.first() else { return Ok(Vec::new()) };
    let side = first.side as i64;
    let cube = |shift: i64| -> CliResult<Vec<Vec<i64>>> {
        let mut pts = Vec::new();
        let mut idx = vec![0i64; w.d];
        loop {
            let mut p: Vec<i64> = first.corner.iter().zip(&idx).map(|(c, i)| c + i).collect();
            p[0] += shift;
            if w.contains(&p) && set.contains(&p)? {
                pts.push(p);
            }
            let mut t = w.d;
            loop {
                if t == 0 {
                    return Ok(pts);
                }
                t -= 1;
                if idx[t] + 1 < side {
                    idx[t] += 1;
                    break;
                }
                idx[t] = 0;
            }
        }
    };
    let a = cube(0)?;
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let mut pairs = Vec::new();
    for dist in 1..=max_dist as i64 {
        let shift = side - 1 + dist;
        if first.corner[0] + shift + side - 1 > w.n as i64 {
            break;
        }
        let b = cube(shift)?;
        if !b.is_empty() {
            pairs.push((IndexSetSpec::Explicit { points: a.clone() }, IndexSetSpec::Explicit { points: b }));
        }
    }
    Ok(pairs)
}

pub fn cmd_blocks(ctx: &Context, args: &BlocksArgs) -> CliResult<()> {
    let window = Window::new(args.d, args.n)?;
    let (p, q) = match (args.p, args.q) {
        (Some(p), Some(q)) => (p, q),
        _ => default_rates(args.n)?,
    };
    let plan = build_blocks(&window, p, q)?;
    let field = match &args.field {
        Some(path) => read_json::<FieldSpec>(path)?,
        None => default_block_field(args.d)?,
    };
    field.validate()?;
    field.check_dimension(args.d)?;
    let set = match &args.set {
        Some(path) => read_json::<IndexSetSpec>(path)?.validated()?,
        None => IndexSetSpec::FullLattice,
    };
    set_dimension(&set, Some(args.d))?;
    let t_grid = parse_t_grid(&args.t_grid)?;
    let m = field.range();
    let max_dist = q.max(m + 1);
    ctx.budget().check(window.size() as u128 * args.replications as u128 * max_dist as u128)?;
    if ctx.dry_run {
        return print_json(&plan);
    }
    ensure_dir(&args.out)?;
    write_file(&args.out.join("plan.json"), to_json(&plan)?.as_bytes())?;

    match covariance_model(&field, args.d, args.n) {
        Ok(cov) => {
            let r = remainder_variance(&cov, &set, &plan)?;
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            let fail = |e: csv::Error| CliError::Internal(e.to_string());
            w.write_record([
                "N",
                "p",
                "q",
                "k_N",
                "complement_card",
                "exact",
                "c",
                "bound",
                "asymptotic_bound",
                "holds",
            ])
            .map_err(fail)?;
            w.write_record([
                args.n.to_string(),
                p.to_string(),
                q.to_string(),
                plan.k_n.to_string(),
                r.complement_card.to_string(),
                r.exact.to_string(),
                r.c.to_string(),
                r.bound.to_string(),
                r.asymptotic_bound.to_string(),
                r.holds.to_string(),
            ])
            .map_err(fail)?;
            let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
            write_file(&args.out.join("remainder.csv"), &bytes)?;
        }
        Err(Error::EmpiricalOnly(what)) => {
            eprintln!("note: no analytic covariance for {what}; remainder table skipped")
        }
        Err(e) => return Err(e.into()),
    }

    let entries = block_pairs(&plan, &set, max_dist)?
        .iter()
        .map(|(a, b)| dependence_gap(&field, a, b, &window, args.j, &t_grid, args.replications, args.seed))
        .collect::<lattice_clt::Result<Vec<_>>>()?;
    let profile = DependenceProfile { entries };
    write_file(&args.out.join("dependence.csv"), &csv_bytes(|buf| profile.write_csv(buf))?)?;
    ctx.write_metadata(&args.out, "blocks")?;
    print_json(&plan)
}

pub fn cmd_report(_ctx: &Context, args: &ReportArgs) -> CliResult<()> {
    let checked = schema::validate_dir(&args.input)?;
    let report_path = args.input.join("report.json");
    if !checked.iter().any(|(n, _)| n == "report.json") {
        return Err(CliError::Config(format!("{} not found", report_path.display())));
    }
    for (name, _) in &checked {
        println!("valid: {name}");
    }
    let report: lattice_clt::harness::ExperimentReport = read_json(&report_path)?;
    print_table(&report)
}
