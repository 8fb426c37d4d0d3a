use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gearfuse::cli::{self, RunConfig};
use gearfuse::Result;

#[derive(Parser)]
#[command(name = "gearfuse", version, about = "Gear fault diagnosis with fused ASTFT / DTCWT images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out_dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` assignments, applied last
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset
    Synth(Common),
    /// Run PSO and compute the ASTFT / DTCWT feature cache
    Preprocess(Common),
    /// Train a model on the feature cache
    Train(Common),
    /// Evaluate a saved model on the test split
    Eval(Common),
    /// Train all five variants and write the ablation table
    Ablate(Common),
    /// Export one sample's time-frequency images
    ExportTf {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        sample: usize,
    },
    /// Write a PSO fitness trace for one sample
    PsoTrace {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        sample: usize,
    },
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    for s in &c.sets {
        cfg.apply(s)?;
    }
    Ok(cfg)
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(c) => {
            let path = cli::cmd_synth(&load_config(&c)?)?;
            println!("wrote {}", path.display());
        }
        Command::Preprocess(c) => {
            let path = cli::cmd_preprocess(&load_config(&c)?)?;
            println!("wrote {}", path.display());
        }
        Command::Train(c) => {
            let m = cli::cmd_train(&load_config(&c)?, true)?;
            println!("test accuracy {:.4} (best epoch {}, {:.1}s)", m.test.accuracy, m.best_epoch, m.seconds);
        }
        Command::Eval(c) => {
            let e = cli::cmd_eval(&load_config(&c)?)?;
            println!("test accuracy {:.4}", e.accuracy);
        }
        Command::Ablate(c) => {
            for r in cli::cmd_ablate(&load_config(&c)?)? {
                println!("{:<14} {:.4} {:>8.1}s", r.variant.to_string(), r.accuracy, r.seconds);
            }
        }
        Command::ExportTf { common, sample } => {
            for p in cli::cmd_export_tf(&load_config(&common)?, sample)? {
                println!("wrote {}", p.display());
            }
        }
        Command::PsoTrace { common, sample } => {
            let r = cli::cmd_pso_trace(&load_config(&common)?, sample)?;
            println!("best schedule {} fitness {:.6}", r.best_schedule, r.best_fitness);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Cli::parse();
    if let Some(n) = std::env::var("GEARFUSE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
