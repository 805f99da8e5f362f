use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ldainit::data::Split;
use ldainit::experiment::{self, run_seeds, ExperimentConfig};
use ldainit::init::InitMethod;
use ldainit::lda::CovarianceMode;
use ldainit::network::Model;
use ldainit::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "ldainit", version, about = "LDA initialization of patch-based document segmentation networks")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "LDAINIT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic manuscript dataset.
    Gen(GenArgs),
    /// Initialize a network and evaluate it untrained.
    Init(InitArgs),
    /// Train one model, or two on the identical patch stream.
    Train(TrainArgs),
    /// Evaluate a model and render classification overlays.
    Eval(EvalArgs),
    /// Render the first-layer filters of a model.
    Features(FeaturesArgs),
    /// Run the paired LDA-versus-random experiment over several seeds.
    Repro(ReproArgs),
    /// Check a model file for consistency with its provenance.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = "LDAINIT_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pages: u64,
    #[arg(long, default_value_t = 240, value_parser = clap::value_parser!(u32).range(64..))]
    width: u32,
    #[arg(long, default_value_t = 320, value_parser = clap::value_parser!(u32).range(64..))]
    height: u32,
    #[command(flatten)]
    out: OutDir,
}

/// Flags shared by commands that read an experiment config.
#[derive(Args)]
struct ConfigArgs {
    /// Experiment config JSON; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    ridge: Option<f64>,
    /// `per_class` or `shared`.
    #[arg(long)]
    covariance: Option<CovarianceMode>,
    /// Sample patches uniformly instead of class-balanced.
    #[arg(long)]
    unbalanced: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Patches drawn per epoch.
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    out: OutDir,
}

impl ConfigArgs {
    fn resolve(&self, base: ExperimentConfig) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => base,
        };
        if let Some(m) = &self.manifest {
            c.manifest = Some(m.clone());
        }
        if let Some(k) = self.k {
            c.init.k = k;
        }
        if let Some(r) = self.ridge {
            c.init.ridge = r;
        }
        if let Some(m) = self.covariance {
            c.init.covariance = m;
        }
        if self.unbalanced {
            c.init.balanced = false;
        }
        if let Some(e) = self.epochs {
            c.train.epochs = e;
        }
        if let Some(lr) = self.lr {
            c.train.learning_rate = lr;
        }
        if let Some(b) = self.batch_size {
            c.train.batch_size = b;
        }
        if let Some(s) = self.samples {
            c.train.samples_per_epoch = s;
        }
        if let Some(o) = &self.out.out_dir {
            c.output_dir = o.clone();
        }
        Ok(c)
    }
}

fn required_manifest(c: &ExperimentConfig) -> Result<PathBuf, Error> {
    c.manifest
        .clone()
        .ok_or_else(|| Error::InvalidInput("a dataset manifest is required (--manifest)".into()))
}

#[derive(Args)]
struct InitArgs {
    #[arg(long, default_value = "lda")]
    method: InitMethod,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluation stride for the untrained metrics.
    #[arg(long)]
    stride: Option<usize>,
    /// Base name of the output files (defaults to the method).
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Model to train.
    #[arg(long, conflicts_with = "paired", required_unless_present = "paired")]
    model: Option<PathBuf>,
    /// Two models trained on the identical patch stream.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    paired: Option<Vec<PathBuf>>,
    /// Seed of the patch stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluation stride of the per-epoch curve.
    #[arg(long, default_value_t = 4)]
    stride: usize,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    stride: u64,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    model: PathBuf,
    /// Magnification of each filter tile.
    #[arg(long, default_value_t = 8)]
    scale: u32,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct ReproArgs {
    /// Master seed; run seeds are derived from it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Pages of the generated dataset.
    #[arg(long)]
    pages: Option<usize>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    /// Stride of the test evaluations.
    #[arg(long)]
    stride: Option<usize>,
    /// Stride of the per-epoch curve (0 disables it).
    #[arg(long)]
    curve_stride: Option<usize>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
}

fn out_dir(out: &OutDir, default: &str) -> PathBuf {
    out.out_dir.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Gen(a) => {
            let dir = out_dir(&a.out, "data");
            let manifest = experiment::cmd_gen(a.seed, a.pages as usize, a.width, a.height, &dir)?;
            println!("{}", manifest.display());
        }
        Command::Init(a) => {
            let mut c = a.config.resolve(ExperimentConfig::default())?;
            c.init.method = a.method;
            if let Some(s) = a.stride {
                c.eval_stride = s;
            }
            let manifest = required_manifest(&c)?;
            let name = a.name.unwrap_or_else(|| a.method.to_string());
            let outcome = experiment::cmd_init(&c, &manifest, a.seed, &name)?;
            println!(
                "{}: untrained mean IU {:.4}, accuracy {:.4}, {:.2}s",
                outcome.model_path.display(),
                outcome.metrics.mean_iu,
                outcome.metrics.accuracy,
                outcome.report.duration_secs
            );
        }
        Command::Train(a) => {
            let mut c = a.config.resolve(ExperimentConfig::default())?;
            if let Some(s) = a.seed {
                c.train.seed = s;
            }
            let manifest = required_manifest(&c)?;
            let models = match (a.model, a.paired) {
                (Some(m), _) => vec![m],
                (None, Some(p)) => p,
                (None, None) => unreachable!("clap requires one of --model and --paired"),
            };
            for o in experiment::cmd_train(&c, &manifest, &models, a.stride)? {
                let last = o.curve.last();
                println!(
                    "{}: mean IU {:.4}, accuracy {:.4}",
                    o.model_path.display(),
                    last.map_or(f64::NAN, |p| p.mean_iu),
                    last.map_or(f64::NAN, |p| p.accuracy)
                );
            }
        }
        Command::Eval(a) => {
            let dir = out_dir(&a.out, "eval");
            let m = experiment::cmd_eval(&a.model, &a.manifest, a.split, a.stride as usize, &dir)?;
            println!("mean IU {:.4}, accuracy {:.4}", m.mean_iu, m.accuracy);
        }
        Command::Features(a) => {
            let dir = out_dir(&a.out, "features");
            let path = experiment::cmd_features(&a.model, &dir, a.scale)?;
            println!("{}", path.display());
        }
        Command::Repro(a) => {
            let mut c = a.config.resolve(ExperimentConfig::desk(a.seed.unwrap_or(0)))?;
            if a.seed.is_some() || a.runs.is_some() {
                c.seeds = run_seeds(a.seed.unwrap_or(0), a.runs.unwrap_or(c.seeds.len()));
            }
            if let Some(p) = a.pages {
                c.dataset.pages = p;
            }
            if let Some(w) = a.width {
                c.dataset.width = w;
            }
            if let Some(h) = a.height {
                c.dataset.height = h;
            }
            if let Some(s) = a.stride {
                c.eval_stride = s;
            }
            if let Some(s) = a.curve_stride {
                c.curve_stride = s;
            }
            if a.config.out.out_dir.is_none() && a.config.config.is_none() {
                c.output_dir = PathBuf::from("repro");
            }
            let report = experiment::run_repro(&c)?;
            let s = &report.summary;
            println!(
                "untrained mean IU: lda {:.4} ± {:.4}, random {:.4} ± {:.4}",
                s.lda_untrained_mean_iu, s.lda_untrained_std, s.random_untrained_mean_iu, s.random_untrained_std
            );
            println!(
                "trained mean IU:   lda {:.4} ± {:.4}, random {:.4} ± {:.4} (lda ahead in {}/{} runs)",
                s.lda_trained_mean_iu,
                s.lda_trained_std,
                s.random_trained_mean_iu,
                s.random_trained_std,
                s.lda_wins,
                s.runs
            );
            println!("{}", c.output_dir.display());
        }
        Command::Verify(a) => return verify(&a.model),
    }
    Ok(())
}

fn verify(path: &Path) -> Result<(), Error> {
    let model = Model::load(path)?;
    let checks = experiment::verify_model(&model);
    for c in &checks {
        println!("[{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Error::Data(format!("{} failed verification", path.display())))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) => EXIT_USAGE,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure {n} threads: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
