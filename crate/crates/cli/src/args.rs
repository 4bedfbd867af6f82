use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use earsym::alignment::DEFAULT_CHORDS;
use earsym::embedding::DEFAULT_DIM;
use earsym::metrics::{DEFAULT_FMR_TARGET, DEFAULT_LEVEL};
use earsym::{ClassMode, EmbedderKind, Error, Protocol, Result, SkewConvention};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "earsym",
    version,
    about = "Ear alignment, side-aware matching protocols and verification metrics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Every subcommand; all but `replay` are echoed to `run.json`.
#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "config", rename_all = "kebab-case")]
pub enum Command {
    /// Rotate images so the ear axis is vertical and crop to the mask.
    Align(AlignArgs),
    /// Resolve ear sides from metadata, predictions and mask geometry.
    Side(SideArgs),
    /// Embed images (toy embedder) or fuse precomputed features into a store.
    Embed(EmbedArgs),
    /// Generate the evaluation pair list for a protocol.
    Pairs(PairsArgs),
    /// Cosine-score a pair list against an embedding store.
    Score(ScoreArgs),
    /// Verification metrics and histograms for a score list.
    Metrics(MetricsArgs),
    /// Training class labels, one per subject or per subject and side.
    Arrange(ArrangeArgs),
    /// Synthetic manifest, embeddings, masks, images and ground truth.
    Synth(SynthArgs),
    /// End-to-end experiments on synthetic data.
    #[command(subcommand)]
    Experiment(Experiment),
    /// Closed-set rank-k identification.
    Identify(IdentifyArgs),
    /// Re-run a command from its run.json.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Same-side versus opposite-side matching on synthetic embeddings.
    Symmetry(SymmetryArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AlignArgs {
    /// Directory of `<id>.pgm` images.
    #[arg(long)]
    pub images: PathBuf,
    /// Directory of `<id>.pgm` masks.
    #[arg(long)]
    pub masks: PathBuf,
    /// Restrict to the ids of this manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Number of longest chords averaged into the axis.
    #[arg(long, default_value_t = DEFAULT_CHORDS)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SideArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of `<id>.pgm` masks for the geometric fallback.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// External classifier output, CSV `id,side`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value = "positive-right")]
    pub convention: SkewConvention,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EmbedArgs {
    #[arg(long, default_value = "toy")]
    pub embedder: EmbedderKind,
    /// Directory of `<id>.pgm` images (toy embedder).
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Restrict to the ids of this manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Align with the masks in this directory before embedding.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CHORDS)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    pub dim: usize,
    /// Raw-image features store (file embedder).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Mirrored-image features store (file embedder); fused with `--features`.
    #[arg(long)]
    pub flipped: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PairsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// same-side, opposite-side, all, left-left or right-right.
    #[arg(long, default_value = "same-side")]
    pub protocol: Protocol,
    /// Subsample impostor pairs down to this many.
    #[arg(long)]
    pub impostor_limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ScoreArgs {
    /// Pair list CSV.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Embedding store directory.
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct MetricFlags {
    /// Target false match rate for FNMR@FMR.
    #[arg(long, default_value_t = DEFAULT_FMR_TARGET)]
    pub fmr: f64,
    /// Bootstrap replicates; 0 disables confidence intervals
    /// [default: 1000 for `metrics`, 0 for `experiment`].
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    pub level: f64,
    /// Also write fig5.svg.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct MetricsArgs {
    /// Score list CSV.
    #[arg(long)]
    pub scores: PathBuf,
    #[command(flatten)]
    pub metrics: MetricFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ArrangeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// single (N classes) or split (N x 2 classes).
    #[arg(long, default_value = "single")]
    pub mode: ClassMode,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthFlags {
    #[arg(long, default_value_t = 200)]
    pub n_subjects: usize,
    #[arg(long, default_value_t = 10)]
    pub imgs_per_side: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Bilateral asymmetry magnitude.
    #[arg(long, default_value_t = 0.4)]
    pub delta: f64,
    /// Per-image noise magnitude.
    #[arg(long, default_value_t = 0.3)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub synth: SynthFlags,
    /// Skip rendering masks, textured images and ground truth.
    #[arg(long)]
    pub no_masks: bool,
    #[arg(long, default_value_t = 128)]
    pub canvas: usize,
    /// Mask rotations are uniform in [-max, max] degrees.
    #[arg(long, default_value_t = 30.0)]
    pub max_rotation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SymmetryArgs {
    #[command(flatten)]
    pub synth: SynthFlags,
    #[command(flatten)]
    pub metrics: MetricFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct IdentifyArgs {
    /// Manifest listing the gallery images.
    #[arg(long)]
    pub gallery: PathBuf,
    /// Manifest listing the probe images.
    #[arg(long)]
    pub probes: PathBuf,
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// A run.json written by an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn existing(path: &mut PathBuf) -> Result<()> {
    *path = path
        .canonicalize()
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn existing_opt(path: &mut Option<PathBuf>) -> Result<()> {
    path.as_mut().map_or(Ok(()), existing)
}

fn absolute(path: &mut PathBuf) -> Result<()> {
    if path.is_relative() {
        *path = std::env::current_dir()?.join(&*path);
    }
    Ok(())
}

fn require<T>(value: &Option<T>, flag: &str, why: &str) -> Result<()> {
    match value {
        Some(_) => Ok(()),
        None => Err(Error::InvalidConfig(format!("{flag} is required {why}"))),
    }
}

impl Command {
    pub fn out(&self) -> Option<&Path> {
        Some(match self {
            Command::Align(a) => &a.out,
            Command::Side(a) => &a.out,
            Command::Embed(a) => &a.out,
            Command::Pairs(a) => &a.out,
            Command::Score(a) => &a.out,
            Command::Metrics(a) => &a.out,
            Command::Arrange(a) => &a.out,
            Command::Synth(a) => &a.out,
            Command::Experiment(Experiment::Symmetry(a)) => &a.out,
            Command::Identify(a) => &a.out,
            Command::Replay(_) => return None,
        })
    }

    pub fn set_out(&mut self, out: PathBuf) {
        match self {
            Command::Align(a) => a.out = out,
            Command::Side(a) => a.out = out,
            Command::Embed(a) => a.out = out,
            Command::Pairs(a) => a.out = out,
            Command::Score(a) => a.out = out,
            Command::Metrics(a) => a.out = out,
            Command::Arrange(a) => a.out = out,
            Command::Synth(a) => a.out = out,
            Command::Experiment(Experiment::Symmetry(a)) => a.out = out,
            Command::Identify(a) => a.out = out,
            Command::Replay(a) => a.out = Some(out),
        }
    }

    /// Checks every input path and flag combination and makes paths absolute,
    /// so the echoed configuration replays from any working directory.
    pub fn resolve(&mut self) -> Result<()> {
        match self {
            Command::Align(a) => {
                existing(&mut a.images)?;
                existing(&mut a.masks)?;
                existing_opt(&mut a.manifest)?;
                absolute(&mut a.out)?;
            }
            Command::Side(a) => {
                existing(&mut a.manifest)?;
                existing_opt(&mut a.masks)?;
                existing_opt(&mut a.predictions)?;
                absolute(&mut a.out)?;
            }
            Command::Embed(a) => {
                match a.embedder {
                    EmbedderKind::Toy => require(&a.images, "--images", "for the toy embedder")?,
                    EmbedderKind::File => require(&a.features, "--features", "for the file embedder")?,
                }
                existing_opt(&mut a.images)?;
                existing_opt(&mut a.manifest)?;
                existing_opt(&mut a.masks)?;
                existing_opt(&mut a.features)?;
                existing_opt(&mut a.flipped)?;
                absolute(&mut a.out)?;
            }
            Command::Pairs(a) => {
                existing(&mut a.manifest)?;
                absolute(&mut a.out)?;
            }
            Command::Score(a) => {
                existing(&mut a.pairs)?;
                existing(&mut a.store)?;
                absolute(&mut a.out)?;
            }
            Command::Metrics(a) => {
                existing(&mut a.scores)?;
                absolute(&mut a.out)?;
            }
            Command::Arrange(a) => {
                existing(&mut a.manifest)?;
                absolute(&mut a.out)?;
            }
            Command::Synth(a) => absolute(&mut a.out)?,
            Command::Experiment(Experiment::Symmetry(a)) => absolute(&mut a.out)?,
            Command::Identify(a) => {
                existing(&mut a.gallery)?;
                existing(&mut a.probes)?;
                existing(&mut a.store)?;
                absolute(&mut a.out)?;
            }
            Command::Replay(a) => {
                existing(&mut a.config)?;
                if let Some(out) = &mut a.out {
                    absolute(out)?;
                }
            }
        }
        Ok(())
    }
}
