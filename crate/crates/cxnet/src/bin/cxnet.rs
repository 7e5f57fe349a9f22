//! Command-line interface: train CCN/CTN models, evaluate FPR95/ROC, export
//! complex descriptors, and run the built-in verification suites.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cxnet::cli::{self, DataDescriptor, EvalArgs, RunConfig};
use cxnet::models::{Architecture, DecisionMode, InputConversion, ModelConfig};

#[derive(Parser)]
#[command(name = "cxnet", version, about = "Complex-valued networks for comparing image patches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint + metrics.csv.
    Train(TrainCli),
    /// Evaluate a checkpoint: prints `fpr95=<value>` and writes roc.csv.
    Eval(EvalCli),
    /// Export complex descriptors for every patch of a dataset (CTN only).
    Describe(DescribeCli),
    /// Run the built-in oracle suites and report pass/fail per suite.
    Verify(VerifyCli),
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Ccn,
    Ctn,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Phototour,
    Hpatches,
    Synthetic,
    Container,
}

#[derive(Clone, Copy, ValueEnum)]
enum BnArg {
    PerComponent,
    Covariance,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputArg {
    Dft,
    ZeroImag,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceArg {
    ModulusSum,
    LiteralClamped,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Corrected,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecisionArg {
    Siamese,
    PseudoSiamese,
}

/// Dataset selection flags shared by the subcommands.
#[derive(Args)]
struct DataCli {
    /// Dataset format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Dataset directory (phototour/hpatches) or container file path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// HPatches split file (JSON).
    #[arg(long)]
    split_file: Option<PathBuf>,
    /// Comma-separated split names to load (hpatches).
    #[arg(long, value_delimiter = ',')]
    splits: Option<Vec<String>>,
    /// Synthetic: number of distinct point ids.
    #[arg(long)]
    synth_ids: Option<usize>,
    /// Synthetic: patches per point id.
    #[arg(long)]
    synth_per_id: Option<usize>,
    /// Synthetic: Gaussian noise sigma.
    #[arg(long)]
    synth_sigma: Option<f64>,
    /// Synthetic: maximum absolute pixel shift.
    #[arg(long)]
    synth_shift: Option<usize>,
}

impl DataCli {
    fn descriptor(&self, existing: Option<DataDescriptor>) -> Result<DataDescriptor, String> {
        let Some(format) = self.format else {
            return existing.ok_or_else(|| "--format is required (or provide --config)".into());
        };
        Ok(match format {
            FormatArg::Phototour => DataDescriptor::Phototour {
                dir: self.data.clone().ok_or("--data <dir> is required for phototour")?,
            },
            FormatArg::Hpatches => DataDescriptor::Hpatches {
                dir: self.data.clone().ok_or("--data <dir> is required for hpatches")?,
                split_file: self.split_file.clone().ok_or("--split-file is required for hpatches")?,
                splits: self.splits.clone().unwrap_or_else(|| vec!["a".into(), "b".into(), "c".into()]),
            },
            FormatArg::Synthetic => DataDescriptor::Synthetic {
                num_ids: self.synth_ids.unwrap_or(64),
                patches_per_id: self.synth_per_id.unwrap_or(8),
                noise_sigma: self.synth_sigma.unwrap_or(0.05),
                max_shift: self.synth_shift.unwrap_or(2),
            },
            FormatArg::Container => DataDescriptor::Container {
                path: self.data.clone().ok_or("--data <file> is required for container")?,
            },
        })
    }
}

#[derive(Args)]
struct TrainCli {
    /// Optional JSON run-config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    arch: Option<ArchArg>,
    #[command(flatten)]
    data: DataCli,
    #[arg(long, value_enum)]
    bn: Option<BnArg>,
    #[arg(long, value_enum)]
    input: Option<InputArg>,
    #[arg(long, value_enum)]
    distance: Option<DistanceArg>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long, value_enum)]
    decision: Option<DecisionArg>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    eval_every: Option<u64>,
    #[arg(long)]
    eval_pairs: Option<usize>,
    #[arg(long)]
    pos_fraction: Option<f64>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    #[arg(long)]
    patch_size: Option<usize>,
}

impl TrainCli {
    fn run_config(&self) -> Result<RunConfig, String> {
        let mut cfg: RunConfig = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => {
                let arch = self.arch.ok_or("--arch is required (or provide --config)")?;
                RunConfig {
                    model: ModelConfig::new(match arch {
                        ArchArg::Ccn => Architecture::Ccn,
                        ArchArg::Ctn => Architecture::Ctn,
                    }),
                    data: self.data.descriptor(None)?,
                    batch_size: 128,
                    steps: 2000,
                    eval_every: 0,
                    eval_pairs: 512,
                    pos_fraction: 0.5,
                    checkpoint_every: 0,
                    seed: 0,
                    out_dir: PathBuf::from("out"),
                }
            }
        };
        // Flags win over the config file.
        if let Some(arch) = self.arch {
            cfg.model.architecture = match arch {
                ArchArg::Ccn => Architecture::Ccn,
                ArchArg::Ctn => Architecture::Ctn,
            };
        }
        if self.data.format.is_some() {
            cfg.data = self.data.descriptor(Some(cfg.data.clone()))?;
        }
        if let Some(bn) = self.bn {
            cfg.model.bn_mode = match bn {
                BnArg::PerComponent => cxnet::layers::BnMode::PerComponent,
                BnArg::Covariance => cxnet::layers::BnMode::Covariance,
            };
        }
        if let Some(input) = self.input {
            cfg.model.input_conversion = match input {
                InputArg::Dft => InputConversion::Dft,
                InputArg::ZeroImag => InputConversion::ZeroImag,
            };
        }
        if let Some(d) = self.distance {
            cfg.model.distance_mode = match d {
                DistanceArg::ModulusSum => cxnet::objectives::DistanceMode::ModulusSum,
                DistanceArg::LiteralClamped => cxnet::objectives::DistanceMode::LiteralClamped,
            };
        }
        if let Some(l) = self.loss {
            cfg.model.loss_form = match l {
                LossArg::Corrected => cxnet::objectives::LossForm::Corrected,
                LossArg::Literal => cxnet::objectives::LossForm::Literal,
            };
        }
        if let Some(d) = self.decision {
            cfg.model.decision_mode = match d {
                DecisionArg::Siamese => DecisionMode::Siamese,
                DecisionArg::PseudoSiamese => DecisionMode::PseudoSiamese,
            };
        }
        if let Some(b) = self.batch {
            cfg.batch_size = b;
        }
        if let Some(lr) = self.lr {
            cfg.model.optimizer.lr = lr;
        }
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.model.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(v) = self.eval_every {
            cfg.eval_every = v;
        }
        if let Some(v) = self.eval_pairs {
            cfg.eval_pairs = v;
        }
        if let Some(v) = self.pos_fraction {
            cfg.pos_fraction = v;
        }
        if let Some(v) = self.checkpoint_every {
            cfg.checkpoint_every = v;
        }
        if let Some(v) = self.patch_size {
            cfg.model.patch_size = v;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalCli {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataCli,
    /// m50-style match file defining the evaluation pairs.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    eval_pairs: usize,
    #[arg(long, default_value_t = 0.5)]
    pos_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DescribeCli {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataCli,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyCli {
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => {
            let cfg = match args.run_config() {
                Ok(c) => c,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(2);
                }
            };
            match cli::cmd_train(&cfg) {
                Ok(outcome) => {
                    println!("checkpoint={}", outcome.checkpoint.display());
                    println!("final_loss={}", outcome.final_loss);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Eval(args) => {
            let data = match args.data.descriptor(None) {
                Ok(d) => d,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(2);
                }
            };
            let eval = EvalArgs {
                checkpoint: &args.checkpoint,
                data: &data,
                pairs_file: args.pairs.as_deref(),
                eval_pairs: args.eval_pairs,
                pos_fraction: args.pos_fraction,
                seed: args.seed,
                batch: args.batch,
                out_dir: &args.out,
            };
            match cli::cmd_eval(&eval) {
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Describe(args) => {
            let data = match args.data.descriptor(None) {
                Ok(d) => d,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(2);
                }
            };
            match cli::cmd_describe(&args.checkpoint, &data, &args.out, args.batch, args.seed) {
                Ok(path) => {
                    println!("descriptors={}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Verify(args) => {
            if cli::cmd_verify(args.seed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
