use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ibrscp::cli::{self, SolveOptions, VerifyOptions};
use ibrscp::scenario::examples_dir;
use ibrscp::simulation::GuidanceKind;
use ibrscp::{Error, Result};

#[derive(Parser)]
#[command(name = "ibrscp", version, about = "Asset-guarding pursuit-evasion games by iterative best response")]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the game on a scenario file (or a bundled example name).
    Solve {
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "n-ibr")]
        n_ibr: Option<usize>,
        #[arg(long = "n-scp")]
        n_scp: Option<usize>,
    },
    /// Simulate recorded evaders against guided pursuers.
    Verify {
        run_dir: PathBuf,
        #[arg(long, value_delimiter = ',')]
        laws: Option<Vec<GuidanceKind>>,
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long)]
        closed_loop: bool,
    },
    /// Write SVG figures and their data for a run directory.
    Report { run_dir: PathBuf },
}

fn scenario_path(arg: &str) -> PathBuf {
    let p = Path::new(arg);
    if p.exists() {
        return p.to_path_buf();
    }
    let bundled = examples_dir().join(format!("{arg}.toml"));
    if bundled.exists() {
        bundled
    } else {
        p.to_path_buf()
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve {
            scenario,
            out,
            n_ibr,
            n_scp,
        } => {
            let opts = SolveOptions {
                out,
                ibr_iterations: n_ibr,
                scp_iterations: n_scp,
            };
            let res = cli::solve(&scenario_path(&scenario), &opts)?;
            let s = &res.summary;
            println!("run directory: {}", res.run_dir.display());
            for r in &s.rounds {
                let pursuers: Vec<String> = r
                    .pursuer_status
                    .iter()
                    .zip(&r.pursuer_final_time)
                    .map(|(st, t)| format!("{} {t:.2}s", st.as_str()))
                    .collect();
                println!(
                    "round {:2}: evader {} {:.2}s | pursuers [{}]{}",
                    r.iteration,
                    r.evader_status.as_str(),
                    r.evader_final_time,
                    pursuers.join(", "),
                    r.frobenius_delta.map(|d| format!(" | delta {d:.3e}")).unwrap_or_default()
                );
            }
            if s.no_winner_recorded {
                println!("no winner recorded");
            }
            for w in &s.recorded {
                println!(
                    "recorded {} from round {} at round {}: T = {:.2} s, terminal speed {:.1} ft/s",
                    w.player, w.source_iteration, w.iteration, w.final_time, w.terminal_speed
                );
            }
            match s.settled_at {
                Some(i) => println!("evader settled (delta < {}) from round {i}", s.tolerance),
                None => println!("evader did not settle below {}", s.tolerance),
            }
        }
        Command::Verify {
            run_dir,
            laws,
            ratios,
            closed_loop,
        } => {
            let opts = VerifyOptions {
                laws,
                ratios,
                closed_loop,
            };
            let res = cli::verify(&run_dir, &opts)?;
            if res.runs.is_empty() {
                println!("no recorded evader to verify");
            }
            for r in &res.runs {
                println!(
                    "recorded {} (round {}) {}: {} | {}/{} intercepts, min separation {:.1} ft, asset miss {:.2} ft at {:.2} s, peak input {:.2} G",
                    r.recorded,
                    r.source_iteration,
                    r.mode.as_str(),
                    r.outcome,
                    r.intercepts,
                    r.instances,
                    r.min_separation,
                    r.terminal_miss,
                    r.arrival_time,
                    r.max_input_g
                );
            }
        }
        Command::Report { run_dir } => {
            for p in cli::report(&run_dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
