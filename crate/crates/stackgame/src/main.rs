//! Command-line front end: strategy tables, sweeps, Monte Carlo and verification.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stackgame::cli::{self, SuiteSelector, SweepSpec, TimeGrid};
use stackgame::params::Scenario;
use stackgame::sim::{Policy, SimConfig};
use stackgame::verify::DEFAULT_SEED;
use stackgame::Result;

#[derive(Parser)]
#[command(
    name = "stackgame",
    version,
    about = "Reinsurer-insurer Stackelberg game with delayed wealth"
)]
struct Args {
    /// Scenario TOML file; the built-in default scenario when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Output CSV file. strategy and sweep write to stdout without it; simulate
    /// writes its per-path dump only when it is given.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium strategies with and without memory on a time grid.
    Strategy {
        #[arg(long = "t", default_value = "0:10:11")]
        t: TimeGrid,
        /// Asset price at which investment amounts are reported.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
    },
    /// Equilibrium strategies while one scenario parameter varies.
    Sweep {
        /// Parameter path and range, e.g. prefs.k1=0:0.8:9.
        #[arg(long)]
        sweep: SweepSpec,
        #[arg(long = "t", default_value = "0:10:11")]
        t: TimeGrid,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
    },
    /// Monte Carlo terminal utilities under a policy.
    Simulate {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Simulation window start:end; the full horizon when omitted.
        #[arg(long = "t")]
        window: Option<String>,
        /// equilibrium, nodelay or perturb:<field>=<factor>.
        #[arg(long, default_value = "equilibrium")]
        policy: Policy,
    },
    /// Run verification suites.
    Verify {
        /// Suite name or `all`.
        #[arg(long, default_value = "all")]
        suite: SuiteSelector,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn window(spec: &str, horizon: f64) -> Result<(f64, f64)> {
    let bad = || stackgame::Error::SimConfig(format!("`{spec}` must read start:end"));
    let (a, b) = spec.split_once(':').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(0.0 <= a && a < b && b <= horizon) {
        return Err(stackgame::Error::SimConfig(format!(
            "window [{a}, {b}] must lie in [0, {horizon}]"
        )));
    }
    Ok((a, b))
}

fn run(args: Args) -> Result<bool> {
    let scenario = match &args.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::paper_default(),
    };
    match args.command {
        Command::Strategy { t, s } => {
            let cfg = scenario.check()?;
            let rows = cli::strategy_rows(&cfg, &t, s)?;
            cli::write_strategy_csv(&rows, output(&args.out)?)?;
            Ok(true)
        }
        Command::Sweep { sweep, t, s } => {
            let points = cli::sweep_points(&scenario, &sweep, &t, s);
            let mut failed = 0;
            let mut last_reported = None;
            for p in &points {
                if let Err(e) = &p.result {
                    failed += 1;
                    if last_reported != Some(p.value) {
                        eprintln!("skipped {}={}: {}", sweep.param, p.value, e.trim_end());
                        last_reported = Some(p.value);
                    }
                }
            }
            cli::write_sweep_csv(&points, output(&args.out)?)?;
            if failed > 0 {
                eprintln!("{failed} of {} sweep points failed", points.len());
            }
            Ok(failed == 0)
        }
        Command::Simulate {
            seed,
            paths,
            dt,
            window: w,
            policy,
        } => {
            let cfg = scenario.check()?;
            let mut sim = SimConfig::full_horizon(&cfg, paths, seed);
            sim.dt = dt;
            if let Some(w) = w {
                (sim.t_start, sim.t_end) = window(&w, cfg.horizon())?;
            }
            let report = cli::simulate(&cfg, &sim, policy)?;
            eprint!("{}", report.render());
            if args.out.is_some() {
                cli::write_paths_csv(&report.output, output(&args.out)?)?;
            }
            Ok(report.passed())
        }
        Command::Verify { suite, seed } => {
            let cfg = scenario.check()?;
            let reports = cli::verify(&cfg, suite, seed);
            let mut ok = true;
            for r in &reports {
                print!("{r}");
                ok &= r.passed();
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
