use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stein_audit::acceptance;
use stein_audit::densities::FAMILIES;
use stein_audit::harness::{self, CheckKind, CheckTolerances, OutputFormat, RunConfig};
use stein_audit::stein::TestFunction;
use stein_audit::Error;

#[derive(Parser)]
#[command(name = "stein-audit", version, about = "Numerical audit of Stein-method identities and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks of a JSON config and write a report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output.path` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = ["csv", "json"])]
        format: Option<String>,
        /// Also exit with status 2 on audited violations.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Residual threshold for every identity check.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// List density families, checks and named test functions.
    ListFamilies,
    /// Run the built-in acceptance suite.
    Demo,
}

fn run(
    config: PathBuf,
    out: Option<PathBuf>,
    format: Option<String>,
    strict: bool,
    seed: Option<u64>,
    tol: Option<f64>,
) -> Result<ExitCode, Error> {
    let mut cfg = RunConfig::from_path(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = tol {
        cfg.tolerances = CheckTolerances::uniform(t);
    }
    if let Some(f) = format {
        cfg.output.format = f.parse::<OutputFormat>()?;
    }
    if let Some(dir) = out {
        cfg.output.path = dir;
    }
    let output = harness::run(&cfg)?;
    let paths = harness::emit_report(&cfg, &output.records, &output.summary, &cfg.output.path, cfg.output.format)?;

    let s = &output.summary;
    println!("{:<18} {:>7} {:>7} {:>8} {:>8}", "check", "passed", "failed", "audited", "skipped");
    for (check, c) in &s.checks {
        println!(
            "{check:<18} {:>7} {:>7} {:>8} {:>8}",
            c.passed, c.failed, c.audited_violations, c.skipped
        );
    }
    println!(
        "{:<18} {:>7} {:>7} {:>8} {:>8}",
        "total", s.total.passed, s.total.failed, s.total.audited_violations, s.total.skipped
    );
    for (check, w) in &s.worst_residual {
        println!("worst residual {check}: {w:e}");
    }
    for (check, w) in &s.min_slack {
        println!("min slack {check}: {w:e}");
    }
    println!("wall time: {:.3}s", s.wall_time.as_secs_f64());
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::from(s.exit_code(strict) as u8))
}

fn list_families() {
    println!("families:");
    for (id, params) in FAMILIES {
        println!("  {id:<24} {params}");
    }
    println!("checks:");
    for c in CheckKind::ALL {
        println!("  {}", c.id());
    }
    println!("test functions (l_family, f_family, h):");
    for name in TestFunction::CATALOG {
        println!("  {name}");
    }
}

fn demo() -> ExitCode {
    let results = acceptance::all();
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            format,
            strict,
            seed,
            tol,
        } => match run(config, out, format, strict, seed, tol) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("stein-audit: {e}");
                ExitCode::from(1)
            }
        },
        Command::ListFamilies => {
            list_families();
            ExitCode::SUCCESS
        }
        Command::Demo => demo(),
    }
}
