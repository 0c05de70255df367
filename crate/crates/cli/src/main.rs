use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tctn_cli::commands::{datagen, eval_cmd, gradcheck_cmd, predict_cmd, train_cmd};
use tctn_cli::error::EXIT_CONFIG;
use tctn_cli::{CliResult, RunConfig};

#[derive(Parser)]
#[command(
    name = "tctn",
    version,
    about = "Video frame prediction with a temporal convolutional transformer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// key = value config file; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the seeds for initialization, training and data generation.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Extra key=value settings applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a bouncing-sprite dataset.
    Datagen,
    /// Train from fresh parameters on `dataset`.
    Train,
    /// Per-step PSNR, SSIM and MAE of `checkpoint` on `dataset`.
    Eval,
    /// Roll out one sequence of `dataset` and export the frames.
    Predict,
    /// Finite-difference check of the full model's gradients.
    Gradcheck,
}

fn run(cli: &Cli) -> CliResult<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(threads) = cli.threads {
        cfg.train.threads = threads;
    }
    cfg.train.validate()?;
    // Ignored if a pool already exists.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.train.threads)
        .build_global();

    let out = &cli.out;
    match cli.command {
        Command::Datagen => {
            let s = datagen(&cfg, out)?;
            println!("wrote {}", s.path.display());
            println!("count {}", s.count);
            println!("extents {:?}", s.extents);
            println!("sha256 {}", s.sha256);
        }
        Command::Train => {
            let s = train_cmd(&cfg, out, |line| println!("{line}"))?;
            match s.final_loss {
                Some(l) => println!(
                    "trained {} steps, final loss {l:.6}, best epoch {}",
                    s.steps, s.best_epoch
                ),
                None => println!("trained 0 steps"),
            }
        }
        Command::Eval => {
            let r = eval_cmd(&cfg, out)?;
            let a = r.aggregate;
            println!("sequences {}", r.sequences);
            println!("psnr {:.4} ssim {:.4} mae {:.4}", a.psnr, a.ssim, a.mae);
        }
        Command::Predict => {
            for path in predict_cmd(&cfg, out)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Gradcheck => {
            let s = gradcheck_cmd(&cfg, out, |line| println!("{line}"))?;
            println!(
                "max relative error {:.3e} over {} elements ({}), tolerance {:e}",
                s.max_error, s.checked, s.worst, cfg.gradcheck.tolerance
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
