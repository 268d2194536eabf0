use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ion_cat::io::{exit_code, run, Command, Outcome, RunOptions, Scenario};
use rayon::prelude::*;

/// Exit status when a verification check fails.
const VERIFY_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "ion-cat", version, about = "Dissipative cat-state preparation of a trapped ion's motion")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Classical RK4 with this step instead of the adaptive integrator.
    #[arg(long, value_name = "DT")]
    fixed_step: Option<f64>,
    /// Worker threads (0 lets the runtime decide).
    #[arg(long, value_name = "N", default_value_t = 0)]
    threads: usize,
    /// Largest Hilbert dimension to evolve or to hand to the direct steady-state solver.
    #[arg(long, value_name = "GUARD")]
    max_dim: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve the master equation and write the requested outputs.
    Simulate(Common),
    /// Joint Wigner plane cut of a dumped state or of the evolved state.
    Wigner {
        #[command(flatten)]
        common: Common,
        /// State dump to use instead of evolving.
        #[arg(long, value_name = "PATH")]
        state: Option<PathBuf>,
    },
    /// Laser amplitudes and phases realizing the ideal Hamiltonian.
    MatchLasers(Common),
    /// Dark-state residuals and the single-mode oracle comparison.
    Verify(Common),
    /// Direct steady-state solve.
    Steady(Common),
    /// Simulate several scenarios concurrently, each in `<out>/<name>/`.
    Batch {
        #[arg(long, value_name = "PATH", required = true, num_args = 1..)]
        config: Vec<PathBuf>,
        #[command(flatten)]
        run: RunFlags,
    },
}

fn options(flags: &RunFlags, out: PathBuf) -> RunOptions {
    RunOptions {
        out_dir: out,
        fixed_step: flags.fixed_step,
        max_dim: flags.max_dim,
        threads: rayon::current_num_threads(),
        frontend_version: env!("CARGO_PKG_VERSION").into(),
    }
}

fn report(name: &str, res: &ion_cat::Result<Outcome>) -> u8 {
    match res {
        Ok(o) => {
            for l in &o.lines {
                println!("[{name}] {l}");
            }
            for a in &o.artifacts {
                println!("[{name}] wrote {}", a.display());
            }
            if o.verification_failed {
                eprintln!("[{name}] verification failed");
                VERIFY_FAILED
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("[{name}] error: {e}");
            exit_code(e) as u8
        }
    }
}

fn load(path: &Path) -> Result<Scenario<f64>, u8> {
    Scenario::load(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        exit_code(&e) as u8
    })
}

fn single(common: &Common, cmd: Command) -> u8 {
    let sc = match load(&common.config) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let res = run(&sc, &cmd, &options(&common.run, common.run.out.clone()));
    report(&sc.name, &res)
}

fn batch(paths: &[PathBuf], flags: &RunFlags) -> u8 {
    let mut scenarios = Vec::new();
    for p in paths {
        match load(p) {
            Ok(s) => scenarios.push(s),
            Err(code) => return code,
        }
    }
    let mut names: Vec<&str> = scenarios.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        eprintln!("error: scenario name `{}` appears twice", w[0]);
        return 1;
    }
    let results: Vec<_> = scenarios
        .par_iter()
        .map(|sc| run(sc, &Command::Simulate, &options(flags, flags.out.join(&sc.name))))
        .collect();
    scenarios
        .iter()
        .zip(&results)
        .map(|(sc, r)| report(&sc.name, r))
        .max()
        .unwrap_or(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let flags = match &cli.cmd {
        Cmd::Simulate(c) | Cmd::MatchLasers(c) | Cmd::Verify(c) | Cmd::Steady(c) => &c.run,
        Cmd::Wigner { common, .. } => &common.run,
        Cmd::Batch { run, .. } => run,
    };
    if flags.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(flags.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let code = match &cli.cmd {
        Cmd::Simulate(c) => single(c, Command::Simulate),
        Cmd::Wigner { common, state } => single(common, Command::Wigner { state: state.clone() }),
        Cmd::MatchLasers(c) => single(c, Command::MatchLasers),
        Cmd::Verify(c) => single(c, Command::Verify),
        Cmd::Steady(c) => single(c, Command::Steady),
        Cmd::Batch { config, run } => batch(config, run),
    };
    ExitCode::from(code)
}
