use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vortex_cli::commands::{self, Ctx};
use vortex_cli::config;
use vortex_cli::verify::{run_battery, BatteryReport};
use vortex_core::Error;

/// Exit codes: 0 success, 1 usage/config error, 2 domain or convergence
/// error, 3 verification failure.
#[derive(Parser)]
#[command(
    name = "vortex",
    version,
    about = "Twist dynamics of a periodically forced point vortex"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, default_value = "vortex.json")]
    config: PathBuf,
    /// Output directory (overrides VORTEX_OUTPUT_DIR and the config file).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker-thread cap for grid scans.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and dump it as CSV.
    Simulate {
        #[arg(long)]
        r0: f64,
        #[arg(long)]
        theta0: f64,
        #[arg(long, default_value_t = 1.0)]
        t1: f64,
        /// One CSV row per accepted step instead of the endpoint only.
        #[arg(long)]
        dense: bool,
    },
    /// Twist derivative across a radius ladder.
    TwistScan {
        /// Comma-separated radii (default 10,100,1000).
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
        #[arg(long, default_value_t = 16)]
        theta_n: usize,
    },
    /// Exactness residual of the action one-form on a grid.
    Exactness {
        #[arg(long, default_value_t = 1e-3)]
        fd_step: f64,
        #[arg(long, default_value_t = 20)]
        grid_n: usize,
        #[arg(long, default_value_t = 10.0)]
        r_min: f64,
        #[arg(long, default_value_t = 100.0)]
        r_max: f64,
    },
    /// Boundary frequencies and the admissible rotation-number window.
    Window {
        #[arg(long, default_value_t = 64)]
        theta_n: usize,
    },
    /// Solve one (s, q)-periodic orbit.
    Orbit {
        #[arg(long)]
        s: i64,
        #[arg(long)]
        q: usize,
        /// Base point of the equispaced initial configuration.
        #[arg(long)]
        x0: Option<f64>,
    },
    /// Rational-approximant family for an irrational rotation number.
    Mather {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[arg(long, default_value_t = 377)]
        q_cap: i64,
    },
    /// Oscillatory-integral decay probe.
    RlCheck {
        #[arg(long, default_value_t = 1e2)]
        lambda_min: f64,
        #[arg(long, default_value_t = 1e4)]
        lambda_max: f64,
        #[arg(long, default_value_t = 12)]
        per_decade: usize,
    },
    /// Run the full verification battery.
    Verify,
    /// Emit gnuplot scripts for the standard artifacts.
    Report,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }

    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let (cfg, hash) = config::load(&cli.config)?;
    let out_dir = cli
        .output_dir
        .or_else(|| std::env::var_os("VORTEX_OUTPUT_DIR").map(PathBuf::from))
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Ctx::new(cfg, hash, out_dir)?;

    match cli.command {
        Command::Simulate {
            r0,
            theta0,
            t1,
            dense,
        } => commands::simulate(&ctx, r0, theta0, t1, dense)?,
        Command::TwistScan { r, theta_n } => commands::twist(&ctx, r, theta_n)?,
        Command::Exactness {
            fd_step,
            grid_n,
            r_min,
            r_max,
        } => commands::exactness(&ctx, fd_step, grid_n, r_min, r_max)?,
        Command::Window { theta_n } => commands::window(&ctx, theta_n)?,
        Command::Orbit { s, q, x0 } => commands::orbit(&ctx, s, q, x0)?,
        Command::Mather {
            alpha,
            depth,
            q_cap,
        } => commands::mather(&ctx, alpha, depth, q_cap)?,
        Command::RlCheck {
            lambda_min,
            lambda_max,
            per_decade,
        } => commands::rl_check(&ctx, lambda_min, lambda_max, per_decade)?,
        Command::Verify => {
            let checks = run_battery(&ctx.cfg)?;
            let all_pass = checks.iter().all(|c| c.pass);
            for c in &checks {
                println!(
                    "[{}] {} — {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.threshold
                );
            }
            ctx.write_summary(
                "verify_report.json",
                &BatteryReport {
                    checks: &checks,
                    all_pass,
                },
            )?;
            println!(
                "verify: {}/{} checks passed",
                checks.iter().filter(|c| c.pass).count(),
                checks.len()
            );
            if !all_pass {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Report => commands::report(&ctx)?,
    }
    Ok(ExitCode::SUCCESS)
}
