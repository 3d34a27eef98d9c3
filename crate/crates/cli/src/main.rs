use clap::Parser;
use lattice_clt_cli::args::{Cli, Command};
use lattice_clt_cli::commands::{cmd_blocks, cmd_correlogram, cmd_report, cmd_simulate, cmd_verify_clt, Context};
use lattice_clt_cli::{CliError, EXIT_CONFIG};

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("threads: must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let ctx = Context { dry_run: cli.dry_run, force: cli.force, argv: std::env::args().skip(1).collect() };
    match &cli.command {
        Command::Correlogram(a) => cmd_correlogram(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::VerifyClt(a) => cmd_verify_clt(&ctx, a),
        Command::Blocks(a) => cmd_blocks(&ctx, a),
        Command::Report(a) => cmd_report(&ctx, a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
