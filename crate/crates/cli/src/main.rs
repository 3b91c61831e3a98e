use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use llg_core::harness::oracle::run_oracles;
use llg_core::integrators::SchemeKind;
use llg_core::io::{execute, parse_config, Experiment, Outcome, RunConfig, Table, Vary};
use llg_core::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_UNSTABLE: u8 = 3;

#[derive(Parser)]
#[command(name = "llg", version, about = "Semi-implicit BDF micromagnetics solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured-solution convergence study (time or space refinement).
    Converge {
        #[command(flatten)]
        common: Common,
        /// Refine the grid instead of the step.
        #[arg(long)]
        space: bool,
        /// Problem dimension (1 or 3).
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Error against CPU time for several schemes.
    Efficiency {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dim: Option<usize>,
        /// Swept quantity: k or h.
        #[arg(long)]
        vary: Option<String>,
    },
    /// Thin-film stability matrix over damping and step size.
    Stability {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        film: Film,
    },
    /// Thin-film energy traces.
    Energy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        film: Film,
    },
    /// Field-driven domain wall velocity.
    Wall {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        film: Film,
        /// Applied field along the strip in mT (comma separated).
        #[arg(long, value_delimiter = ',')]
        he: Vec<f64>,
    },
    /// Single run from a configuration file.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Check a configuration file and print the resolved parameters.
    Validate { config: PathBuf },
    /// Small-grid stray-field and linear-solver self checks.
    Oracle {
        /// Also write oracle.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration; command-line options override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Scheme(s), comma separated: bdf1, bdf2, bdf3-existing, bdf3-proposed.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
}

#[derive(Args)]
struct Film {
    /// Damping value(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Step size(s) in ps, comma separated.
    #[arg(long, value_delimiter = ',')]
    k_ps: Vec<f64>,
    /// Simulated time in ns.
    #[arg(long)]
    t_end_ns: Option<f64>,
}

fn load(experiment: Experiment, common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let cfg = parse_config(&text)?;
            if cfg.experiment != experiment {
                return Err(Error::Config(format!(
                    "{} holds a {} configuration, not {experiment}",
                    path.display(),
                    cfg.experiment
                )));
            }
            cfg
        }
        None => RunConfig::defaults(experiment),
    };
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    if !common.scheme.is_empty() {
        cfg.schemes = common
            .scheme
            .iter()
            .map(|s| s.parse::<SchemeKind>())
            .collect::<Result<_, _>>()?;
    }
    Ok(cfg)
}

fn apply_film(cfg: &mut RunConfig, film: &Film) -> Result<(), Error> {
    if !film.alpha.is_empty() {
        cfg.alphas = film.alpha.clone();
    }
    if film.k_ps.is_empty() && film.t_end_ns.is_none() {
        return Ok(());
    }
    let pc = cfg
        .units
        .ok_or_else(|| Error::Config("--k-ps and --t-end-ns need physical units".into()))?;
    if !film.k_ps.is_empty() {
        cfg.steps = film.k_ps.iter().map(|&k| pc.seconds_to_time(k * 1e-12)).collect();
    }
    if let Some(t) = film.t_end_ns {
        cfg.t_end = pc.seconds_to_time(t * 1e-9);
    }
    Ok(())
}

fn build(command: &Command) -> Result<RunConfig, Error> {
    let cfg = match command {
        Command::Converge { common, space, dim } => {
            let exp = if *space {
                Experiment::ConvergeSpace
            } else {
                Experiment::ConvergeTime
            };
            let mut cfg = load(exp, common)?;
            if let Some(d) = dim {
                cfg.dim = *d;
            }
            cfg
        }
        Command::Efficiency { common, dim, vary } => {
            let mut cfg = load(Experiment::Efficiency, common)?;
            if let Some(d) = dim {
                cfg.dim = *d;
            }
            match vary.as_deref() {
                None => {}
                Some("k") => cfg.vary = Vary::K,
                Some("h") => cfg.vary = Vary::H,
                Some(v) => return Err(Error::Config(format!("--vary must be k or h, got {v}"))),
            }
            cfg
        }
        Command::Stability { common, film } => {
            let mut cfg = load(Experiment::Stability, common)?;
            apply_film(&mut cfg, film)?;
            cfg
        }
        Command::Energy { common, film } => {
            let mut cfg = load(Experiment::Energy, common)?;
            apply_film(&mut cfg, film)?;
            cfg
        }
        Command::Wall { common, film, he } => {
            let mut cfg = load(Experiment::Wall, common)?;
            apply_film(&mut cfg, film)?;
            if !he.is_empty() {
                cfg.wall.fields_mt = he.clone();
            }
            cfg
        }
        Command::Simulate { common } => {
            if common.config.is_none() {
                return Err(Error::Config("simulate needs --config".into()));
            }
            load(Experiment::Simulate, common)?
        }
        Command::Validate { .. } | Command::Oracle { .. } => unreachable!(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn set_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("LLG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("LLG_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot configure {n} threads: {e}")))
}

fn report(outcome: &Outcome) {
    for c in &outcome.cells {
        let mut line = format!("{:<14}", c.scheme.name());
        if let Some(a) = c.alpha {
            line += &format!(" alpha={a:<6}");
        }
        if let Some(h) = c.he_mt {
            line += &format!(" he={h}mT");
        }
        if let Some(d) = &c.dir {
            line += &format!(" [{d}]");
        }
        line += &format!(" {}", c.verdict);
        if let Some(d) = &c.detail {
            line += &format!(" ({d})");
        }
        println!("{line}");
    }
    if let Some(f) = &outcome.failure {
        println!("aborted: {f}");
    }
    println!("results in {}", outcome.output.display());
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("llg: {e}");
    if e.is_config() || matches!(e, Error::Format(_) | Error::GridMismatch(_)) {
        ExitCode::from(EXIT_CONFIG)
    } else if e.is_blow_up() {
        ExitCode::from(EXIT_UNSTABLE)
    } else {
        ExitCode::from(EXIT_FAILURE)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = set_threads() {
        return exit_for(&e);
    }
    match &cli.command {
        Command::Validate { config } => {
            let text = match std::fs::read_to_string(config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("llg: cannot read {}: {e}", config.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            match parse_config(&text) {
                Ok(cfg) => {
                    for line in cfg.echo() {
                        println!("{line}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => exit_for(&e),
            }
        }
        Command::Oracle { out } => {
            let checks = match run_oracles() {
                Ok(c) => c,
                Err(e) => return exit_for(&e),
            };
            let mut table = Table::new(
                &[format!("llg version = {}", env!("CARGO_PKG_VERSION"))],
                &["check", "error", "tol", "pass"],
            );
            for c in &checks {
                println!("{} {:<60} {:.3e} <= {:.0e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.error, c.tol);
                table.push(vec![c.name.clone().into(), c.error.into(), c.tol.into(), c.pass.into()]);
            }
            if let Some(dir) = out {
                let written = std::fs::create_dir_all(dir)
                    .map_err(Error::from)
                    .and_then(|_| table.write(&dir.join("oracle.csv")));
                if let Err(e) = written {
                    return exit_for(&e);
                }
            }
            if checks.iter().all(|c| c.pass) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
        command => {
            let cfg = match build(command) {
                Ok(c) => c,
                Err(e) => return exit_for(&e),
            };
            for line in cfg.echo() {
                log::info!("{line}");
            }
            match execute(&cfg) {
                Ok(outcome) => {
                    report(&outcome);
                    if outcome.any_unstable {
                        ExitCode::from(EXIT_UNSTABLE)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => exit_for(&e),
            }
        }
    }
}
