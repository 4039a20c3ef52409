use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use l1pcanet::classifier::ClassifierOptions;
use l1pcanet::dataio::synth::{generate, SynthSpec};
use l1pcanet::dataio::{
    corrupt_with_block_noise, load_dataset, load_manifest, rng, write_dataset, LabeledDataset, OcclusionSpec,
};
use l1pcanet::harness::oracle_check::oracle_check;
use l1pcanet::harness::spec_file::{ExperimentFile, ExperimentSection, OneOrMany};
use l1pcanet::harness::{emit_results, evaluate_model, load_experiment_data, render_text, run_experiment, train_model};
use l1pcanet::network::{extract_features, read_model, write_model, BlockGrid, NetworkConfig, Variant};
use l1pcanet::Error;

#[derive(Parser)]
#[command(
    name = "l1pcanet",
    version,
    about = "L1-norm 2DPCA filter cascades and PCANet baselines for image classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network and a linear classifier on a whole dataset.
    Train(TrainArgs),
    /// Write the feature vector of every image to CSV.
    Extract(ExtractArgs),
    /// Accuracy of a trained model on a dataset.
    Eval(EvalArgs),
    /// Run a repeated-split experiment and write result tables.
    Experiment(Box<ExperimentArgs>),
    /// Generate a synthetic class-template dataset.
    Synth(SynthArgs),
    /// Check the subspace solvers against independent oracles.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset root (one directory per class) or a manifest CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "L1-2D2PCANet")]
    variant: Variant,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 4)]
    l1: usize,
    #[arg(long, default_value_t = 4)]
    l2: usize,
    #[arg(long, default_value = "4x2")]
    blocks: BlockGrid,
    /// Classifier regularization constant.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Corrupt each image with a noise block covering this area fraction.
    #[arg(long)]
    occlusion: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fill the block with one random value instead of per-pixel noise.
    #[arg(long)]
    uniform_block: bool,
}

/// Every flag mirrors a key of the spec file's `[experiment]` table and
/// overrides it.
#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    train_per_class: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    occlusion: Option<Vec<f64>>,
    #[arg(long)]
    uniform_block: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    block_sweep: Option<Vec<String>>,
    /// `linear` or `nearest`.
    #[arg(long)]
    classifier: Option<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    l2_normalize: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l1: Option<usize>,
    #[arg(long)]
    l2: Option<usize>,
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 12)]
    per_class: usize,
    /// Image size as ROWSxCOLS.
    #[arg(long, default_value = "32x32")]
    size: BlockGrid,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::InvalidParameter(_) => 1,
        Error::Data(_)
        | Error::MixedDimensions { .. }
        | Error::DimensionMismatch { .. }
        | Error::BadMagic
        | Error::UnsupportedVersion(_)
        | Error::MalformedModel(_)
        | Error::Io(_) => 2,
        _ => 3,
    }
}

fn load_data(path: &Path) -> Result<LabeledDataset, Error> {
    if path.is_file() {
        load_manifest(path)
    } else {
        load_dataset(path)
    }
}

fn train(a: TrainArgs) -> Result<(), Error> {
    let ds = load_data(&a.data)?;
    let mut cfg = NetworkConfig::new(a.variant).with_blocks(a.blocks);
    cfg.k = a.k;
    cfg.l1 = a.l1;
    cfg.l2 = a.l2;
    cfg.validate()?;
    let opts = ClassifierOptions { c: a.c, epochs: a.epochs, ..Default::default() };
    let model = train_model(&ds, &cfg, &opts)?;
    write_model(BufWriter::new(File::create(&a.out)?), &model)?;
    println!("trained {} on {} images, {} classes -> {}", cfg.variant, ds.len(), ds.class_count(), a.out.display());
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<(), Error> {
    let model = read_model(BufReader::new(File::open(&a.model)?))?;
    let ds = load_data(&a.data)?;
    let feats = extract_features(ds.images(), &model.network)?;
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(&a.out).map_err(csv_error)?;
    for (j, f) in feats.iter().enumerate() {
        let path = ds.paths().get(j).map(|p| p.display().to_string()).unwrap_or_default();
        let mut rec = vec![path, ds.class_names()[ds.labels()[j]].clone()];
        rec.extend(f.0.iter().map(u32::to_string));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    println!(
        "wrote {} feature vectors of length {} -> {}",
        feats.len(),
        model.network.config.feature_len(),
        a.out.display()
    );
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data(format!("{other:?}")),
    }
}

fn eval(a: EvalArgs) -> Result<(), Error> {
    let model = read_model(BufReader::new(File::open(&a.model)?))?;
    let ds = load_data(&a.data)?;
    let images = match a.occlusion {
        None => ds.images().to_vec(),
        Some(q) => ds
            .images()
            .iter()
            .enumerate()
            .map(|(j, img)| {
                let seed = rng::derive_seed(a.seed, "occlusion", &[j as u64]);
                corrupt_with_block_noise(img, &OcclusionSpec { area_fraction: q, seed, uniform_block: a.uniform_block })
            })
            .collect::<Result<_, _>>()?,
    };
    let acc = evaluate_model(&model, &ds, &images)?;
    println!("accuracy {acc:.6} ({} images)", images.len());
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<(), Error> {
    let base = match &a.spec {
        Some(p) => ExperimentFile::load(p)?,
        None => ExperimentFile::default(),
    };
    let flags = ExperimentFile {
        experiment: ExperimentSection {
            data: a.data,
            manifest: a.manifest,
            out: a.out,
            repeats: a.repeats,
            seed: a.seed,
            train_per_class: a.train_per_class.map(OneOrMany::Many),
            occlusion: a.occlusion.map(OneOrMany::Many),
            uniform_block: a.uniform_block,
            block_sweep: a.block_sweep,
            classifier: a.classifier,
            c: a.c,
            epochs: a.epochs,
            l2_normalize: a.l2_normalize,
            variants: a.variants,
            k: a.k,
            l1: a.l1,
            l2: a.l2,
            blocks: a.blocks,
            tol: a.tol,
            max_iter: a.max_iter,
        },
        network: vec![],
    };
    let spec = base.overridden_by(&flags).resolve()?;
    let out = spec.output_dir.clone().ok_or_else(|| Error::InvalidParameter("no output directory (--out)".into()))?;
    let ds = load_experiment_data(&spec)?;
    let table = run_experiment(&spec, &ds)?;
    emit_results(&table, &out)?;
    print!("{}", render_text(&table)?);
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), Error> {
    let ds = generate(&SynthSpec::new(a.classes, a.per_class, a.size.rows, a.size.cols, a.seed))?;
    let written = write_dataset(&ds, &a.out)?;
    println!("wrote {} images in {} classes -> {}", written.len(), ds.class_count(), a.out.display());
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<(), Error> {
    let lines = oracle_check(a.trials, a.seed)?;
    for l in &lines {
        println!("{} {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.name, l.detail);
    }
    let failed = lines.iter().filter(|l| !l.passed).count();
    if failed > 0 {
        return Err(Error::Numeric(format!("{failed} oracle suite(s) failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Extract(a) => extract(a),
        Command::Eval(a) => eval(a),
        Command::Experiment(a) => experiment(*a),
        Command::Synth(a) => synth(a),
        Command::OracleCheck(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
