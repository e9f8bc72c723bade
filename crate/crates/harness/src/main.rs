use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vgm_core::rng::stream_rng;
use vgm_core::{verify_candidate, DiscreteDistribution, VerifyConfig};
use vgm_harness::config::ScenarioConfig;
use vgm_harness::instance::Prepared;
use vgm_harness::lowerbound::{hidden_box_table, needle_table, write_rows};
use vgm_harness::outputs::{write_result, Format};
use vgm_harness::scenarios::{builtin, BUILTINS};
use vgm_harness::{run_scenario, RunOptions};

const EXIT_CONFIG: u8 = 1;
const EXIT_BREACH: u8 = 2;

#[derive(Parser)]
#[command(name = "vgm", version, about = "Learning generative models with an invalidity oracle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file or a built-in name.
    Run {
        config: String,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Fill the wall_ms column (makes output time-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// List built-in scenarios.
    Scenarios {
        /// Also write each built-in config into this directory.
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Check a candidate distribution against a scenario's target and oracle.
    Verify {
        distribution: PathBuf,
        config: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Query-count tables for the lower-bound instances.
    Lowerbound {
        #[command(subcommand)]
        instance: LowerboundCmd,
    },
}

#[derive(Subcommand)]
enum LowerboundCmd {
    /// Needle of size N: proper scan / random probe versus the improper learner.
    Needle {
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Hidden box in dimension d: probes needed to find a planted codeword.
    HiddenBox {
        d: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 16)]
        packing_size: usize,
        #[arg(long, default_value_t = 10_000)]
        max_attempts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn load(config: &str) -> Result<ScenarioConfig, String> {
    let path = Path::new(config);
    if !path.exists() {
        if let Some(b) = builtin(config) {
            return Ok(b.config());
        }
    }
    ScenarioConfig::load(path).map_err(|e| e.to_string())
}

/// Stdout line; a closed pipe is not an error.
fn emit(line: impl std::fmt::Display) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn write_table<T: serde::Serialize>(rows: &[T], out_dir: Option<PathBuf>, name: &str) -> ExitCode {
    let res = match out_dir {
        Some(dir) => std::fs::create_dir_all(&dir)
            .map_err(|e| e.to_string())
            .and_then(|_| std::fs::File::create(dir.join(name)).map_err(|e| e.to_string()))
            .and_then(|f| write_rows(rows, f).map_err(|e| e.to_string())),
        None => write_rows(rows, std::io::stdout().lock()).map_err(|e| e.to_string()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_CONFIG, e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run {
            config,
            seed,
            trials,
            out_dir,
            format,
            jobs,
            timing,
        } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let result = match run_scenario(&cfg, RunOptions { jobs, timing }) {
                Ok(r) => r,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            match write_result(&result, &out_dir, format) {
                Ok(paths) => {
                    for p in paths {
                        eprintln!("wrote {}", p.display());
                    }
                }
                Err(e) => return fail(EXIT_CONFIG, e),
            }
            emit(serde_json::to_string_pretty(&result.summary).expect("summary serializes"));
            if result.summary.breached() {
                return fail(EXIT_BREACH, "success fraction below min_success_fraction");
            }
            ExitCode::SUCCESS
        }
        Command::Scenarios { write } => {
            for b in BUILTINS {
                emit(format_args!("{:<20} {}", b.name, b.description));
            }
            if let Some(dir) = write {
                if let Err(e) = std::fs::create_dir_all(&dir) {
                    return fail(EXIT_CONFIG, e);
                }
                for b in BUILTINS {
                    let p = dir.join(format!("{}.json", b.name));
                    if let Err(e) = std::fs::write(&p, b.config().to_json() + "\n") {
                        return fail(EXIT_CONFIG, e);
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Command::Verify {
            distribution,
            config,
            seed,
        } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let q: DiscreteDistribution = match std::fs::read_to_string(&distribution)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
            {
                Ok(q) => q,
                Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", distribution.display())),
            };
            let seed = seed.unwrap_or(cfg.base_seed);
            let inst = match Prepared::new(&cfg).and_then(|p| {
                p.trial(&cfg, seed).map_err(|e| vgm_harness::ConfigError::Field {
                    field: "instance".into(),
                    message: e.to_string(),
                })
            }) {
                Ok(i) => i,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let vc = VerifyConfig {
                loss: cfg.loss,
                eps1: cfg.eps1,
                eps2: cfg.eps2,
                delta: cfg.verify.delta,
                loss_threshold: cfg.verify.loss_threshold.unwrap_or(cfg.loss.bound()),
            };
            let mut rng = stream_rng(seed, 1);
            match verify_candidate(&q, &*inst.target, &inst.oracle, &vc, &mut rng) {
                Ok(report) => {
                    emit(serde_json::to_string_pretty(&report).expect("report serializes"));
                    if report.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_BREACH)
                    }
                }
                Err(e) => fail(EXIT_CONFIG, e),
            }
        }
        Command::Lowerbound { instance } => match instance {
            LowerboundCmd::Needle {
                n,
                trials,
                seed,
                out_dir,
            } => match needle_table(n, trials, seed) {
                Ok(rows) => write_table(&rows, out_dir, &format!("needle-{n}.csv")),
                Err(e) => fail(EXIT_CONFIG, e),
            },
            LowerboundCmd::HiddenBox {
                d,
                trials,
                packing_size,
                max_attempts,
                seed,
                out_dir,
            } => match hidden_box_table(d, trials, packing_size, max_attempts, seed) {
                Ok(rows) => write_table(&rows, out_dir, &format!("hidden-box-{d}.csv")),
                Err(e) => fail(EXIT_CONFIG, e),
            },
        },
    }
}
