use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use paraosc_cli::{exit, exit_code, oracle_compare, run, validate, ConfigError, Overrides, Scenario};

#[derive(Parser)]
#[command(name = "paraosc", version, about = "Exact dynamics of time-dependent quadratic oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario (or every *.toml in a directory) and write CSV, SVG and manifest files.
    Run {
        scenario: PathBuf,
        /// Output directory; scenarios from a directory go to one subdirectory each.
        #[arg(long, env = "PARAOSC_OUT_DIR", default_value = "paraosc-out")]
        out: PathBuf,
        /// Replace `time.dt`.
        #[arg(long)]
        dt: Option<f64>,
        /// Replace `time.t1`.
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Print residual maxima with pass/fail against the tolerances.
    Validate {
        scenario: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Compare moments with the truncated Fock-space oracle.
    OracleCompare {
        scenario: PathBuf,
        #[arg(long, env = "PARAOSC_OUT_DIR", default_value = "paraosc-out")]
        out: PathBuf,
    },
}

fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(ConfigError(format!("no *.toml scenarios in {}", dir.display())).into());
    }
    Ok(files)
}

fn run_one(path: &Path, out: &Path, overrides: Overrides) -> Result<()> {
    let sc = Scenario::load(path, overrides)?;
    let summary = run(&sc, out)?;
    println!(
        "{}: {} files in {} (content hash {})",
        sc.name,
        summary.files.len() + 1,
        summary.out_dir.display(),
        &summary.content_hash[..16]
    );
    Ok(())
}

fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run { scenario, out, dt, t_end } => {
            let overrides = Overrides { dt, t_end };
            if !scenario.is_dir() {
                run_one(&scenario, &out, overrides)?;
                return Ok(exit::OK);
            }
            // one worker per scenario; nothing is shared between runs
            let files = scenario_files(&scenario)?;
            let results: Vec<(PathBuf, Result<()>)> = std::thread::scope(|s| {
                let handles: Vec<_> = files
                    .iter()
                    .map(|f| {
                        let sub = out.join(f.file_stem().unwrap_or_default());
                        s.spawn(move || run_one(f, &sub, overrides))
                    })
                    .collect();
                files.iter().cloned().zip(handles.into_iter().map(|h| h.join().expect("worker panicked"))).collect()
            });
            let mut code = exit::OK;
            for (file, res) in results {
                if let Err(e) = res {
                    eprintln!("error: {}: {e:#}", file.display());
                    code = code.max(exit_code(&e));
                }
            }
            Ok(code)
        }
        Command::Validate { scenario, dt, t_end } => {
            let sc = Scenario::load(&scenario, Overrides { dt, t_end })?;
            println!("{}: {} modes, dt = {:e}, {} steps", sc.name, sc.ham.n_modes(), sc.grid.dt(), sc.grid.steps());
            let report = validate(&sc)?;
            print!("{report}");
            report.into_result()?;
            Ok(exit::OK)
        }
        Command::OracleCompare { scenario, out } => {
            let sc = Scenario::load(&scenario, Overrides::default())?;
            let summary = oracle_compare(&sc, &out).context("oracle comparison")?;
            println!("{summary}");
            println!("side-by-side values: {}", summary.csv.display());
            Ok(if summary.passed() { exit::OK } else { exit::VALIDATION })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
