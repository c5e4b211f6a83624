use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use dotshape_cli::config::PRESETS;
use dotshape_cli::experiment::exit_code;
use dotshape_cli::{run_experiment, verify, CliError, Outcome, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "dotshape", version, about = "Recover an absorption inclusion from one boundary measurement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more experiments (config files or preset names).
    Run {
        #[arg(required = true)]
        configs: Vec<String>,
        /// Output directory; with several configs, one subdirectory per run.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Noise seed override.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Run the configs concurrently, one thread each.
        #[arg(long)]
        sweep: bool,
    },
    /// List the built-in presets.
    Presets,
    /// Print a preset as TOML.
    Show { preset: String },
    /// Check the solver against the radial and finite-difference oracles.
    Verify,
}

fn prepare(arg: &str, overrides: &Overrides, many: bool) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::load(arg)?;
    let mut o = overrides.clone();
    if many {
        o.out = o.out.map(|d| d.join(&cfg.name));
    }
    o.apply(cfg)
}

fn report(cfg: &RunConfig, res: Result<Outcome, CliError>, seconds: f64) -> i32 {
    match res {
        Ok(o) => {
            let s = &o.summary;
            let hd = s.hausdorff.map_or("n/a".to_string(), |d| format!("{d:.4}"));
            println!(
                "{}: stop={:?} iterations={} J={:.3e} mu_in={:.5} hausdorff={} time={:.1}s -> {}",
                cfg.name,
                s.stop,
                s.iterations,
                s.final_misfit,
                s.mu_in,
                hd,
                seconds,
                o.out_dir.display()
            );
            exit_code(&s.stop)
        }
        Err(e) => {
            eprintln!("{}: error: {e}", cfg.name);
            e.exit_code()
        }
    }
}

fn run(configs: &[String], overrides: Overrides, sweep: bool) -> i32 {
    let many = configs.len() > 1;
    let mut prepared = Vec::new();
    for arg in configs {
        match prepare(arg, &overrides, many) {
            Ok(c) => prepared.push(c),
            Err(e) => {
                eprintln!("{arg}: error: {e}");
                return e.exit_code();
            }
        }
    }
    let timed = |cfg: &RunConfig| {
        let t = Instant::now();
        let r = run_experiment(cfg);
        report(cfg, r, t.elapsed().as_secs_f64())
    };
    let codes: Vec<i32> = if sweep {
        std::thread::scope(|s| {
            let handles: Vec<_> = prepared.iter().map(|c| s.spawn(move || timed(c))).collect();
            handles.into_iter().map(|h| h.join().unwrap_or(3)).collect()
        })
    } else {
        prepared.iter().map(timed).collect()
    };
    codes.into_iter().find(|&c| c != 0).unwrap_or(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { configs, out, seed, max_iters, sweep } => {
            run(&configs, Overrides { out, seed, max_iters }, sweep)
        }
        Command::Presets => {
            for (name, text) in PRESETS {
                let desc = RunConfig::parse(text).map(|c| c.description).unwrap_or_default();
                println!("{name:26} {desc}");
            }
            0
        }
        Command::Show { preset } => match PRESETS.iter().find(|(n, _)| *n == preset) {
            Some((_, text)) => {
                print!("{text}");
                0
            }
            None => {
                eprintln!("unknown preset {preset:?}");
                2
            }
        },
        Command::Verify => match verify::run_checks() {
            Ok(checks) => {
                for c in &checks {
                    println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
                if checks.iter().all(|c| c.passed) {
                    0
                } else {
                    3
                }
            }
            Err(e) => {
                eprintln!("verify: error: {e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}
