//! Command-line driver: `pretrain`, `finetune`, `crossval`, `evaluate`,
//! `gradcheck`.
//!
//! Exit codes: 0 success, 1 check failure, 2 config or argument error,
//! 3 data error, 4 checkpoint error.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{build_cae, encoder_extract, pretrain, write_pretrain_log, Cae, CaeConfig};
use crate::classifier::{build_cnn, finetune, write_finetune_log, Cnn, CnnConfig};
use crate::data::{kfold_split, load_image_tensor, load_manifest, DatasetManifest, Rng};
use crate::error::Error;
use crate::gradcheck::{run_gradcheck, CheckScale, GRADCHECK_TOLERANCE};
use crate::metrics::{accuracy, crossval_aggregate, evaluate};
use crate::optim::SgdConfig;
use crate::persist::{load_checkpoint, save_checkpoint, Model};
use crate::tensor::Tensor;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CHECKPOINT: i32 = 4;

/// Every hyperparameter and path of a run. All fields are optional in the
/// JSON file; missing ones take the desk-scale defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input_size: [usize; 2],
    pub conv_channels: [usize; 2],
    pub fc_sizes: Vec<usize>,
    pub n_classes: usize,
    pub corruption_fraction: f64,
    pub lr0: f64,
    pub decay: f64,
    pub batch_size: usize,
    pub epochs_pretrain: usize,
    pub epochs_finetune: usize,
    pub seed: u64,
    pub tied_decoder: bool,
    pub freeze_encoder: bool,
    pub folds: usize,
    /// Initialize classifiers from `checkpoint_dir/cae.ckpt`.
    pub use_pretrained: bool,
    pub pretrain_manifest: Option<PathBuf>,
    pub labeled_manifest: Option<PathBuf>,
    pub checkpoint_dir: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_size: [64, 64],
            conv_channels: [8, 16],
            fc_sizes: vec![64, 32],
            n_classes: 3,
            corruption_fraction: 0.2,
            lr0: 0.01,
            decay: 0.98,
            batch_size: 16,
            epochs_pretrain: 10,
            epochs_finetune: 20,
            seed: 0,
            tied_decoder: true,
            freeze_encoder: false,
            folds: 10,
            use_pretrained: true,
            pretrain_manifest: None,
            labeled_manifest: None,
            checkpoint_dir: "checkpoints".into(),
            report_dir: "reports".into(),
        }
    }
}

impl RunConfig {
    /// Layer sizes used for the full-scale run.
    pub fn full_scale() -> Self {
        RunConfig {
            input_size: [256, 256],
            conv_channels: [100, 200],
            fc_sizes: vec![400, 200],
            ..Default::default()
        }
    }

    pub fn cae_config(&self) -> CaeConfig {
        CaeConfig {
            input_size: (self.input_size[0], self.input_size[1]),
            conv_channels: (self.conv_channels[0], self.conv_channels[1]),
            tied_decoder: self.tied_decoder,
            corruption_fraction: self.corruption_fraction,
            ..Default::default()
        }
    }

    pub fn cnn_config(&self) -> CnnConfig {
        CnnConfig {
            fc_sizes: self.fc_sizes.clone(),
            n_classes: self.n_classes,
            freeze_encoder: self.freeze_encoder,
            ..Default::default()
        }
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            lr0: self.lr0,
            decay: self.decay,
            batch_size: self.batch_size,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        self.cae_config().validate()?;
        self.cnn_config().validate()?;
        self.sgd().validate()?;
        if self.folds < 2 {
            return Err(Error::Argument(format!("folds = {}; need at least 2", self.folds)));
        }
        Ok(())
    }

    /// Makes relative paths relative to `base`.
    fn anchor(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.pretrain_manifest.as_mut().map(fix);
        self.labeled_manifest.as_mut().map(fix);
        fix(&mut self.checkpoint_dir);
        fix(&mut self.report_dir);
    }
}

#[derive(Debug, Parser)]
#[command(name = "caenet", version, about = "Convolutional autoencoder pretraining and CNN transfer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Print the resolved configuration and exit without writing anything
    #[arg(long)]
    pub dry_run: bool,
    /// Worker threads (results do not depend on this)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the configured seed
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScaleArg {
    Tiny,
    Small,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the autoencoder on the unlabeled manifest
    Pretrain(CommonArgs),
    /// Train a classifier on the whole labeled manifest
    Finetune(CommonArgs),
    /// Stratified k-fold cross-validation on the labeled manifest
    Crossval(CommonArgs),
    /// Confusion matrix and accuracy of a saved classifier
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Classifier checkpoint (default: checkpoint_dir/cnn.ckpt)
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Labeled manifest (default: labeled_manifest from the config)
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Finite-difference check of every layer and both model stacks
    Gradcheck {
        #[arg(long, value_enum, default_value = "tiny")]
        scale: ScaleArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, hide = true)]
        perturb_analytic: bool,
    },
}

/// Error carrying its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T> = Result<T, CliError>;

fn fail(code: i32) -> impl Fn(Error) -> CliError {
    move |e| CliError {
        code,
        message: e.to_string(),
    }
}

fn io_fail(code: i32, path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError {
        code,
        message: format!("{}: {e}", path.display()),
    }
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError {
        code: EXIT_CONFIG,
        message: format!("cannot read config {}: {e}", path.display()),
    })?;
    let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError {
        code: EXIT_CONFIG,
        message: format!("invalid config {}: {e}", path.display()),
    })?;
    cfg.anchor(path.parent().unwrap_or(Path::new("")));
    Ok(cfg)
}

fn resolve(args: &CommonArgs) -> CliResult<RunConfig> {
    let mut cfg = load_config(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(fail(EXIT_CONFIG))?;
    Ok(cfg)
}

fn echo(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let json = serde_json::to_string_pretty(cfg).expect("config serializes");
    writeln!(out, "{json}").map_err(|e| CliError {
        code: EXIT_DATA,
        message: e.to_string(),
    })
}

fn data_manifest(path: Option<&PathBuf>, what: &str) -> CliResult<DatasetManifest> {
    let path = path.ok_or_else(|| CliError {
        code: EXIT_CONFIG,
        message: format!("config does not name a {what}"),
    })?;
    load_manifest(path).map_err(fail(EXIT_DATA))
}

fn load_images(manifest: &DatasetManifest, size: [usize; 2]) -> CliResult<Vec<Tensor>> {
    (0..manifest.len())
        .into_par_iter()
        .map(|i| {
            let p = manifest.resolve(i);
            load_image_tensor(&p, (size[0], size[1])).map_err(|e| CliError {
                code: EXIT_DATA,
                message: format!("{}: {e}", p.display()),
            })
        })
        .collect()
}

fn labeled_set(cfg: &RunConfig, manifest: &DatasetManifest) -> CliResult<Vec<(Tensor, usize)>> {
    if manifest.classes().len() != cfg.n_classes {
        return Err(CliError {
            code: EXIT_DATA,
            message: format!(
                "manifest has {} classes but n_classes = {}",
                manifest.classes().len(),
                cfg.n_classes
            ),
        });
    }
    let images = load_images(manifest, cfg.input_size)?;
    Ok(images.into_iter().zip(manifest.labels()).collect())
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> crate::Result<()>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_fail(EXIT_DATA, dir))?;
    }
    let file = fs::File::create(path).map_err(io_fail(EXIT_DATA, path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(fail(EXIT_DATA))?;
    w.flush().map_err(io_fail(EXIT_DATA, path))
}

fn save(model: &Model, path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_fail(EXIT_CHECKPOINT, dir))?;
    }
    save_checkpoint(model, path).map_err(fail(EXIT_CHECKPOINT))?;
    Ok(())
}

fn sub_seed(seed: u64, tag: u64, index: u64) -> u64 {
    Rng::derive(seed, &[tag, index]).next_u64()
}

const TAG_HEAD: u64 = 0x4EAD;
const TAG_FINETUNE: u64 = 0xF17E;

fn pretrained_encoder_source(cfg: &RunConfig) -> CliResult<Option<Cae>> {
    if !cfg.use_pretrained {
        return Ok(None);
    }
    let path = cfg.checkpoint_dir.join("cae.ckpt");
    let cae = load_checkpoint(&path)
        .and_then(Model::into_cae)
        .map_err(|e| CliError {
            code: EXIT_CHECKPOINT,
            message: format!("{}: {e}", path.display()),
        })?;
    if cae.config().input_size != (cfg.input_size[0], cfg.input_size[1]) {
        return Err(CliError {
            code: EXIT_CHECKPOINT,
            message: format!("{} was trained for a different input size", path.display()),
        });
    }
    Ok(Some(cae))
}

fn initial_cnn(cfg: &RunConfig, pretrained: Option<&Cae>, index: u64) -> CliResult<Cnn> {
    let encoder = match pretrained {
        Some(cae) => encoder_extract(cae),
        // random encoder drawn the same way a fresh autoencoder would be
        None => encoder_extract(&build_cae(&cfg.cae_config(), cfg.seed).map_err(fail(EXIT_CONFIG))?),
    };
    build_cnn(&encoder, &cfg.cnn_config(), sub_seed(cfg.seed, TAG_HEAD, index)).map_err(fail(EXIT_CONFIG))
}

fn cmd_pretrain(args: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve(args)?;
    echo(&cfg, out)?;
    if args.dry_run {
        return Ok(());
    }
    let manifest = data_manifest(cfg.pretrain_manifest.as_ref(), "pretrain_manifest")?;
    let images = load_images(&manifest, cfg.input_size)?;
    let mut cae = build_cae(&cfg.cae_config(), cfg.seed).map_err(fail(EXIT_CONFIG))?;
    let log = pretrain(&mut cae, &images, &cfg.sgd(), cfg.epochs_pretrain, cfg.seed).map_err(fail(EXIT_DATA))?;
    let ckpt = cfg.checkpoint_dir.join("cae.ckpt");
    save(&Model::Cae(cae), &ckpt)?;
    let log_path = cfg.report_dir.join("pretrain_loss.csv");
    write_file(&log_path, |w| write_pretrain_log(&log, w))?;
    if let (Some(first), Some(last)) = (log.first(), log.last()) {
        let _ = writeln!(out, "pretrain: epoch 0 loss {:.6}, epoch {} loss {:.6}", first.mean_loss, last.epoch, last.mean_loss);
    }
    let _ = writeln!(out, "wrote {} and {}", ckpt.display(), log_path.display());
    Ok(())
}

fn cmd_finetune(args: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve(args)?;
    echo(&cfg, out)?;
    if args.dry_run {
        return Ok(());
    }
    let manifest = data_manifest(cfg.labeled_manifest.as_ref(), "labeled_manifest")?;
    let train = labeled_set(&cfg, &manifest)?;
    let pretrained = pretrained_encoder_source(&cfg)?;
    let mut cnn = initial_cnn(&cfg, pretrained.as_ref(), 0)?;
    let seed = sub_seed(cfg.seed, TAG_FINETUNE, 0);
    let log = finetune(&mut cnn, &train, &cfg.sgd(), cfg.epochs_finetune, seed).map_err(fail(EXIT_DATA))?;
    let ckpt = cfg.checkpoint_dir.join("cnn.ckpt");
    save(&Model::Cnn(cnn), &ckpt)?;
    let log_path = cfg.report_dir.join("finetune_log.csv");
    write_file(&log_path, |w| write_finetune_log(&log, w))?;
    if let Some(last) = log.last() {
        let _ = writeln!(out, "finetune: final train accuracy {:.4}", last.train_accuracy);
    }
    let _ = writeln!(out, "wrote {} and {}", ckpt.display(), log_path.display());
    Ok(())
}

fn cmd_crossval(args: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve(args)?;
    echo(&cfg, out)?;
    if args.dry_run {
        return Ok(());
    }
    let manifest = data_manifest(cfg.labeled_manifest.as_ref(), "labeled_manifest")?;
    let split = kfold_split(&manifest, cfg.folds, cfg.seed).map_err(fail(EXIT_CONFIG))?;
    let data = labeled_set(&cfg, &manifest)?;
    let pretrained = pretrained_encoder_source(&cfg)?;
    let mut accuracies = Vec::with_capacity(split.k());
    for fold in 0..split.k() {
        let train: Vec<(Tensor, usize)> = split.training(fold).iter().map(|&i| data[i].clone()).collect();
        let held: Vec<(Tensor, usize)> = split.validation(fold).iter().map(|&i| data[i].clone()).collect();
        let mut cnn = initial_cnn(&cfg, pretrained.as_ref(), fold as u64)?;
        let seed = sub_seed(cfg.seed, TAG_FINETUNE, fold as u64);
        let log = finetune(&mut cnn, &train, &cfg.sgd(), cfg.epochs_finetune, seed).map_err(fail(EXIT_DATA))?;
        let cm = evaluate(&cnn, &held).map_err(fail(EXIT_DATA))?;
        let acc = accuracy(&cm).map_err(fail(EXIT_DATA))?;
        let _ = writeln!(out, "fold {fold}: accuracy {acc:.4} ({}/{})", cm.trace(), cm.total());
        save(&Model::Cnn(cnn), &cfg.checkpoint_dir.join(format!("cnn_fold{fold}.ckpt")))?;
        write_file(&cfg.report_dir.join(format!("crossval_fold{fold}_log.csv")), |w| {
            write_finetune_log(&log, w)
        })?;
        accuracies.push(acc);
    }
    let report = crossval_aggregate(&accuracies).map_err(fail(EXIT_DATA))?;
    let path = cfg.report_dir.join("crossval_report.csv");
    write_file(&path, |w| report.write_csv(w))?;
    let _ = writeln!(
        out,
        "mean accuracy {:.4}, sd {:.4} (population)\nwrote {}",
        report.mean,
        report.sd,
        path.display()
    );
    Ok(())
}

fn cmd_evaluate(
    args: &CommonArgs,
    checkpoint: Option<&PathBuf>,
    manifest: Option<&PathBuf>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    echo(&cfg, out)?;
    if args.dry_run {
        return Ok(());
    }
    let ckpt = checkpoint.cloned().unwrap_or_else(|| cfg.checkpoint_dir.join("cnn.ckpt"));
    let cnn = load_checkpoint(&ckpt)
        .and_then(Model::into_cnn)
        .map_err(|e| CliError {
            code: EXIT_CHECKPOINT,
            message: format!("{}: {e}", ckpt.display()),
        })?;
    let manifest = data_manifest(manifest.or(cfg.labeled_manifest.as_ref()), "labeled_manifest")?;
    let (h, w) = cnn.encoder().input_size();
    let images = load_images(&manifest, [h, w])?;
    let samples: Vec<(Tensor, usize)> = images.into_iter().zip(manifest.labels()).collect();
    let cm = evaluate(&cnn, &samples).map_err(fail(EXIT_DATA))?;
    let acc = accuracy(&cm).map_err(fail(EXIT_DATA))?;
    let _ = write!(out, "{cm}");
    let _ = writeln!(out, "accuracy: {acc:.4}");
    Ok(())
}

fn cmd_gradcheck(scale: ScaleArg, seed: u64, perturb: bool, out: &mut dyn Write) -> CliResult<bool> {
    let scale = match scale {
        ScaleArg::Tiny => CheckScale::Tiny,
        ScaleArg::Small => CheckScale::Small,
    };
    let rows = run_gradcheck(scale, seed, perturb).map_err(fail(EXIT_CHECK_FAILED))?;
    let _ = writeln!(out, "{:<24} {:>14} {:>8}  status", "component", "max_rel_error", "checked");
    let mut ok = true;
    for r in &rows {
        ok &= r.passed();
        let status = if r.passed() { "ok" } else { "FAIL" };
        let _ = writeln!(out, "{:<24} {:>14.3e} {:>8}  {status}", r.component, r.max_rel_error, r.checked);
    }
    let _ = writeln!(out, "tolerance {GRADCHECK_TOLERANCE:e}: {}", if ok { "all passed" } else { "FAILED" });
    Ok(ok)
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError {
            code: EXIT_CONFIG,
            message: "--threads must be at least 1".into(),
        }),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError {
                code: EXIT_CONFIG,
                message: e.to_string(),
            })?;
            Ok(pool.install(f))
        }
    }
}

/// Parses `args` and runs the command, writing reports to `out` and errors
/// to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = write!(if code == EXIT_OK { &mut *out as &mut dyn Write } else { err }, "{e}");
            return code;
        }
    };
    let result = match &cli.command {
        Command::Pretrain(a) => with_threads(a.threads, || cmd_pretrain(a, out)).and_then(|r| r),
        Command::Finetune(a) => with_threads(a.threads, || cmd_finetune(a, out)).and_then(|r| r),
        Command::Crossval(a) => with_threads(a.threads, || cmd_crossval(a, out)).and_then(|r| r),
        Command::Evaluate {
            common,
            checkpoint,
            manifest,
        } => with_threads(common.threads, || cmd_evaluate(common, checkpoint.as_ref(), manifest.as_ref(), out))
            .and_then(|r| r),
        Command::Gradcheck {
            scale,
            seed,
            threads,
            perturb_analytic,
        } => match with_threads(*threads, || cmd_gradcheck(*scale, *seed, *perturb_analytic, out)).and_then(|r| r) {
            Ok(true) => Ok(()),
            Ok(false) => return EXIT_CHECK_FAILED,
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}
