//! The `sketchsem` command line.

mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use sketchsem::embed::{
    EmbedConfig, EmbedTrainConfig, FrozenNets, LossWeights, ResampleMultipliers, SegModel, SegTrainConfig,
};
use sketchsem::harness::toy::{load_rgb_png, save_rgb_png};
use sketchsem::harness::{
    embed_sample, eval_embed, eval_ssi, fit_reference, gen_toy_dataset, generate_face, interpolate_faces,
    label_sketch, AccessoryRates, Appearance, ToyConfig, ToyDataset,
};
use sketchsem::pipeline::{synthesize, GrayImage, SegMap, SynthOptions};
use sketchsem::scalar::Scalar;
use sketchsem::seed::root_seed;
use sketchsem::sketch::{CategoryScheme, VectorSketch};
use sketchsem::ssi::{SsiConfig, SsiTrainConfig};
use sketchsem::{EmbedModel, SsiModel};

#[derive(Parser, Debug)]
#[command(name = "sketchsem", version, about = "Semantic sketch labeling and sketch-to-face generation")]
pub struct Cli {
    /// TOML file of flag values: top-level keys and a [subcommand] section.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a procedural toy face dataset.
    GenToy(GenToyArgs),
    /// Turn segmentation maps (and photos) into labeled vector sketches.
    SynthDataset(SynthArgs),
    /// Train the stroke classifier.
    TrainSsi(TrainSsiArgs),
    /// Label the strokes of a sketch file.
    Label(LabelArgs),
    /// Train the segmentation network used by the embedding loss and P_Acc.
    TrainSegnet(TrainSegnetArgs),
    /// Train the sketch-to-face embedding.
    TrainEmbed(TrainEmbedArgs),
    /// Generate a face from a labeled sketch.
    Generate(GenerateArgs),
    /// Faces along the line between two sketches' codes.
    Interpolate(InterpolateArgs),
    /// Stroke accuracy of a classifier on a dataset split.
    EvalSsi(EvalSsiArgs),
    /// P_Acc and Chamfer distance of an embedding model on a dataset split.
    EvalEmbed(EvalEmbedArgs),
    /// Run the HTTP and WebSocket service.
    Serve(ServeArgs),
    /// Print the category table as JSON.
    Categories,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Split {
    Train,
    Test,
}

#[derive(Args, Debug)]
pub struct GenToyArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    /// Root seed; defaults to SKETCHSEM_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = AccessoryRates::default().hat)]
    pub hat_rate: f64,
    #[arg(long, default_value_t = AccessoryRates::default().glasses)]
    pub glasses_rate: f64,
    #[arg(long, default_value_t = AccessoryRates::default().earring)]
    pub earring_rate: f64,
    #[arg(long, default_value_t = AccessoryRates::default().necklace)]
    pub necklace_rate: f64,
    #[arg(long)]
    pub contour_only: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Directory of grayscale PNG label maps.
    #[arg(long)]
    pub seg: PathBuf,
    /// Directory of photos with the same file stems; needed unless --contour-only.
    #[arg(long)]
    pub img: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub contour_only: bool,
    /// Keep the k longest strokes per category (3 or 10 in the usual setup).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub simplify: Option<u32>,
}

#[derive(Args, Debug)]
pub struct TrainSsiArgs {
    /// A generated dataset (split.json) or a directory of sketch files.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = SsiTrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = SsiTrainConfig::default().lr)]
    pub lr: f64,
    #[arg(long, default_value_t = SsiTrainConfig::default().gamma)]
    pub gamma: f64,
    #[arg(long, default_value_t = SsiTrainConfig::default().batch)]
    pub batch: usize,
    #[arg(long, default_value_t = SsiConfig::default().hidden)]
    pub hidden: usize,
    /// Train on full sketches only.
    #[arg(long)]
    pub no_augment: bool,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,
    /// Also write the epoch logs as JSON lines.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LabelArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep per-segment labels instead of voting per parent stroke.
    #[arg(long)]
    pub no_vote: bool,
}

#[derive(Args, Debug)]
pub struct TrainSegnetArgs {
    /// A generated toy dataset.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = SegTrainConfig::default().resolution)]
    pub resolution: usize,
    #[arg(long, default_value_t = SegTrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = SegTrainConfig::default().batch)]
    pub batch: usize,
    #[arg(long, default_value_t = SegTrainConfig::default().lr)]
    pub lr: f64,
}

#[derive(Args, Debug)]
pub struct TrainEmbedArgs {
    /// A generated toy dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// Trained segmentation checkpoint; fixes the image resolution.
    #[arg(long)]
    pub segnet: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pixel L2 weight.
    #[arg(long, default_value_t = LossWeights::default().l2)]
    pub lambda1: f64,
    /// Perceptual weight.
    #[arg(long, default_value_t = LossWeights::default().lpips)]
    pub lambda2: f64,
    /// Semantic feature-matching weight.
    #[arg(long, default_value_t = LossWeights::default().sfm)]
    pub lambda3: f64,
    /// Coarse-row regularization weight.
    #[arg(long, default_value_t = LossWeights::default().reg_coarse)]
    pub lambda4: f64,
    /// Fine-row regularization weight.
    #[arg(long, default_value_t = LossWeights::default().reg_fine)]
    pub lambda5: f64,
    #[arg(long, default_value_t = EmbedTrainConfig::default().steps)]
    pub steps: usize,
    #[arg(long, default_value_t = EmbedTrainConfig::default().lr)]
    pub lr: f64,
    #[arg(long, default_value_t = EmbedTrainConfig::default().batch)]
    pub batch: usize,
    #[arg(long, default_value_t = EmbedConfig::default().latent)]
    pub latent: usize,
    #[arg(long, default_value_t = EmbedConfig::default().generator_channels)]
    pub generator_channels: usize,
    /// Sample every item once per epoch instead of repeating scarce accessories.
    #[arg(long)]
    pub no_resample: bool,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
    /// Also write the step logs as JSON lines.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AppearanceArgs {
    /// Reference face PNG for the appearance.
    #[arg(long = "ref", conflicts_with = "seed")]
    pub reference: Option<PathBuf>,
    /// Appearance seed; defaults to SKETCHSEM_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub sketch: PathBuf,
    #[command(flatten)]
    pub appearance: AppearanceArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    pub steps: u32,
    #[command(flatten)]
    pub appearance: AppearanceArgs,
    /// Output directory for frame_NN.png.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalSsiArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    #[arg(long)]
    pub no_vote: bool,
}

#[derive(Args, Debug)]
pub struct EvalEmbedArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub segnet: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub ssi: PathBuf,
    #[arg(long)]
    pub embed: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Appearance seed for requests that give none.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Flag, then `SKETCHSEM_SEED`, then 0. A configured seed arrives as a flag
/// only when the environment variable is unset.
fn seed_of(flag: Option<u64>) -> u64 {
    flag.unwrap_or_else(|| root_seed(0))
}

/// Parses `args` (program name first), applying `--config`, and runs the
/// subcommand.
pub fn run(args: Vec<OsString>) -> Result<()> {
    let args = config::expand(args, &Cli::command())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => bail!("{e}"),
    };
    match cli.command {
        Command::GenToy(a) => gen_toy(a),
        Command::SynthDataset(a) => synth_dataset(a),
        Command::TrainSsi(a) => match a.precision {
            Precision::F32 => train_ssi_as::<f32>(a),
            Precision::F64 => train_ssi_as::<f64>(a),
        },
        Command::Label(a) => label(a),
        Command::TrainSegnet(a) => train_segnet(a),
        Command::TrainEmbed(a) => match a.precision {
            Precision::F32 => train_embed_as::<f32>(a),
            Precision::F64 => train_embed_as::<f64>(a),
        },
        Command::Generate(a) => generate(a),
        Command::Interpolate(a) => interpolate(a),
        Command::EvalSsi(a) => eval_ssi_cmd(a),
        Command::EvalEmbed(a) => eval_embed_cmd(a),
        Command::Serve(a) => serve(a),
        Command::Categories => {
            print!("{}", CategoryScheme::standard().to_json());
            Ok(())
        }
    }
}

fn gen_toy(a: GenToyArgs) -> Result<()> {
    ensure!(a.count >= 1, "--count must be at least 1");
    let config = ToyConfig {
        count: a.count,
        seed: seed_of(a.seed),
        rates: AccessoryRates {
            hat: a.hat_rate,
            glasses: a.glasses_rate,
            earring: a.earring_rate,
            necklace: a.necklace_rate,
        },
        contour_only: a.contour_only,
    };
    let data = gen_toy_dataset(&config);
    data.save(&a.out)?;
    log::info!("wrote {} train / {} test faces to {}", data.train.len(), data.test.len(), a.out.display());
    Ok(())
}

fn sorted_files(dir: &Path, ext: &[&str]) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| ext.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn synth_dataset(a: SynthArgs) -> Result<()> {
    ensure!(a.contour_only || a.img.is_some(), "--img is required unless --contour-only is set");
    fs::create_dir_all(&a.out)?;
    let opts = SynthOptions {
        contour_only: a.contour_only,
        simplify: a.simplify.map(|k| k as usize),
        ..SynthOptions::default()
    };
    let maps = sorted_files(&a.seg, &["png"])?;
    ensure!(!maps.is_empty(), "no PNG label maps in {}", a.seg.display());
    for path in &maps {
        let stem = path.file_stem().and_then(|s| s.to_str()).context("file name")?;
        let seg = SegMap::load_png(path).with_context(|| format!("{}", path.display()))?;
        let photo = match (&a.img, a.contour_only) {
            (Some(dir), false) => {
                let found = ["png", "jpg", "jpeg"].iter().map(|e| dir.join(format!("{stem}.{e}"))).find(|p| p.exists());
                let p = found.with_context(|| format!("no photo for {stem} in {}", dir.display()))?;
                Some(GrayImage::load(&p).with_context(|| format!("{}", p.display()))?)
            }
            _ => None,
        };
        let sketch = synthesize(&seg, photo.as_ref(), &opts).with_context(|| stem.to_string())?;
        fs::write(a.out.join(format!("{stem}.json")), sketch.to_json())?;
    }
    log::info!("wrote {} sketches to {}", maps.len(), a.out.display());
    Ok(())
}

fn read_sketch(path: &Path) -> Result<VectorSketch> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    VectorSketch::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Train and test sketches of a generated dataset, or every sketch file of a
/// plain directory as training data.
fn load_sketches(dir: &Path) -> Result<(Vec<VectorSketch>, Vec<VectorSketch>)> {
    let split_path = dir.join("split.json");
    if !split_path.exists() {
        let files = sorted_files(dir, &["json"])?;
        ensure!(!files.is_empty(), "no sketch files in {}", dir.display());
        let all = files.iter().map(|p| read_sketch(p)).collect::<Result<Vec<_>>>()?;
        return Ok((all, Vec::new()));
    }
    let split: serde_json::Value = serde_json::from_str(&fs::read_to_string(&split_path)?)?;
    let part = |name: &str| -> Result<Vec<VectorSketch>> {
        split[name]
            .as_array()
            .with_context(|| format!("split.json has no {name} list"))?
            .iter()
            .map(|e| {
                let id = e["id"].as_str().context("split.json entry without id")?;
                read_sketch(&dir.join("sketch").join(format!("{id}.json")))
            })
            .collect()
    };
    Ok((part("train")?, part("test")?))
}

fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let text: String = rows.iter().map(|r| serde_json::to_string(r).map(|s| s + "\n")).collect::<Result<_, _>>()?;
    fs::write(path, text)?;
    Ok(())
}

fn train_ssi_as<T: Scalar>(a: TrainSsiArgs) -> Result<()> {
    let (train, _) = load_sketches(&a.data)?;
    let config = SsiTrainConfig {
        model: SsiConfig {
            hidden: a.hidden,
            ..SsiConfig::default()
        },
        lr: a.lr,
        gamma: a.gamma,
        batch: a.batch,
        epochs: a.epochs,
        seed: seed_of(a.seed),
        augment: !a.no_augment,
    };
    let (model, logs) = sketchsem::ssi::train_ssi::<T>(&train, &config, |l| {
        log::info!("epoch {} loss {:.4} accuracy {:.4}", l.epoch, l.loss, l.accuracy);
    })?;
    model.save(&a.out)?;
    if let Some(p) = &a.log {
        write_jsonl(p, &logs)?;
    }
    log::info!("saved {}", a.out.display());
    Ok(())
}

fn label(a: LabelArgs) -> Result<()> {
    let model = SsiModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let sketch = read_sketch(&a.input)?;
    let out = label_sketch(&model, &sketch, !a.no_vote)?;
    fs::write(&a.out, out.sketch.to_json())?;
    Ok(())
}

fn load_toy(dir: &Path) -> Result<ToyDataset> {
    ToyDataset::load(dir).with_context(|| format!("loading dataset {}", dir.display()))
}

fn train_segnet(a: TrainSegnetArgs) -> Result<()> {
    let data = load_toy(&a.data)?;
    let samples = data
        .train
        .iter()
        .map(|it| embed_sample(it, a.resolution))
        .collect::<Result<Vec<_>, _>>()?;
    let config = SegTrainConfig {
        resolution: a.resolution,
        epochs: a.epochs,
        batch: a.batch,
        lr: a.lr,
        seed: seed_of(a.seed),
    };
    let (model, losses) = sketchsem::embed::train_segnet::<f64>(&samples, &config)?;
    for (i, l) in losses.iter().enumerate() {
        log::info!("epoch {i} loss {l:.4}");
    }
    model.save(&a.out)?;
    Ok(())
}

fn train_embed_as<T: Scalar>(a: TrainEmbedArgs) -> Result<()> {
    let seg = SegModel::<T>::load(&a.segnet).with_context(|| format!("loading {}", a.segnet.display()))?;
    let res = seg.resolution();
    let data = load_toy(&a.data)?;
    let samples = data.train.iter().map(|it| embed_sample(it, res)).collect::<Result<Vec<_>, _>>()?;
    let seed = seed_of(a.seed);
    let config = EmbedTrainConfig {
        model: EmbedConfig {
            resolution: res,
            latent: a.latent,
            generator_channels: a.generator_channels,
            ..EmbedConfig::default()
        },
        weights: LossWeights {
            l2: a.lambda1,
            lpips: a.lambda2,
            sfm: a.lambda3,
            reg_coarse: a.lambda4,
            reg_fine: a.lambda5,
        },
        multipliers: if a.no_resample { ResampleMultipliers::NONE } else { ResampleMultipliers::default() },
        lr: a.lr,
        batch: a.batch,
        steps: a.steps,
        seed,
        perceptual_seed: seed,
    };
    let frozen = FrozenNets::new(seg, config.perceptual_seed);
    let (model, logs) = sketchsem::embed::train_embed::<T>(&samples, &frozen, &config, |l| {
        if l.step % 100 == 0 {
            log::info!("step {} loss {:.4}", l.step, l.loss);
        }
    })?;
    model.save(&a.out)?;
    if let Some(p) = &a.log {
        write_jsonl(p, &logs)?;
    }
    log::info!("saved {}", a.out.display());
    Ok(())
}

fn appearance(args: &AppearanceArgs, side: usize) -> Result<Appearance> {
    Ok(match &args.reference {
        Some(p) => {
            let (w, h, rgb) = load_rgb_png(p).with_context(|| format!("reading {}", p.display()))?;
            Appearance::Reference(fit_reference(w, h, &rgb, side)?)
        }
        None => Appearance::Seed(seed_of(args.seed)),
    })
}

fn load_embed(path: &Path) -> Result<EmbedModel> {
    EmbedModel::load(path).with_context(|| format!("loading {}", path.display()))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let model = load_embed(&a.model)?;
    let side = model.resolution();
    let sketch = read_sketch(&a.sketch)?;
    let rgb = generate_face(&model, &sketch, &appearance(&a.appearance, side)?)?;
    save_rgb_png(&a.out, side, side, &rgb)?;
    Ok(())
}

fn interpolate(a: InterpolateArgs) -> Result<()> {
    let model = load_embed(&a.model)?;
    let side = model.resolution();
    let (sa, sb) = (read_sketch(&a.a)?, read_sketch(&a.b)?);
    let frames = interpolate_faces(&model, &sa, &sb, a.steps as usize, &appearance(&a.appearance, side)?)?;
    fs::create_dir_all(&a.out)?;
    for (i, rgb) in frames.iter().enumerate() {
        save_rgb_png(&a.out.join(format!("frame_{i:02}.png")), side, side, rgb)?;
    }
    Ok(())
}

fn eval_ssi_cmd(a: EvalSsiArgs) -> Result<()> {
    let model = SsiModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let (train, test) = load_sketches(&a.data)?;
    let gt = match a.split {
        Split::Train => train,
        Split::Test => test,
    };
    ensure!(!gt.is_empty(), "the {:?} split is empty", a.split);
    let report = eval_ssi(&model, &gt, !a.no_vote)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn eval_embed_cmd(a: EvalEmbedArgs) -> Result<()> {
    let model = load_embed(&a.model)?;
    let seg = SegModel::<f64>::load(&a.segnet).with_context(|| format!("loading {}", a.segnet.display()))?;
    let data = load_toy(&a.data)?;
    let items = match a.split {
        Split::Train => &data.train,
        Split::Test => &data.test,
    };
    ensure!(!items.is_empty(), "the {:?} split is empty", a.split);
    let samples = items
        .iter()
        .map(|it| embed_sample(it, model.resolution()))
        .collect::<Result<Vec<_>, _>>()?;
    let report = eval_embed(&model, &seg, &samples)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let config = sketchsem_server::ServeConfig {
        host: a.host,
        port: a.port,
        ssi: a.ssi,
        embed: a.embed,
        seed: seed_of(a.seed),
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(sketchsem_server::serve(config))?;
    Ok(())
}
