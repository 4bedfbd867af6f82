use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use earsym::alignment::{align, AlignmentRecord};
use earsym::embedding::{fuse_flip, EmbedderSpec, Embedding, ToyEmbedder};
use earsym::format::to_json_string;
use earsym::metrics::{rank_k, BootstrapConfig, Labeled, MetricConfig, MetricReport, DEFAULT_BOOTSTRAP};
use earsym::pgm::{read_image, read_mask, write_image, write_mask};
use earsym::protocol::{arrange_classes, generate_pairs_with, score_pairs, PairOptions, PairSet, ScoreSet};
use earsym::report::{emit_report, Report};
use earsym::side::{read_predictions, resolve_sides, write_labels};
use earsym::synth::{
    derive_seed, gen_masks_for, gen_subjects, protocol_scores, texture_image, write_truth, SymmetryReport, SynthConfig,
};
use earsym::{EmbedderKind, EmbeddingStore, Error, Manifest, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::*;

pub const RUN_CONFIG: &str = "run.json";

/// Resolves, echoes and executes `cmd`.
pub fn run(mut cmd: Command) -> Result<()> {
    cmd.resolve()?;
    if let Command::Replay(r) = cmd {
        let text = fs::read_to_string(&r.config)?;
        let mut inner: Command = serde_json::from_str(&text)?;
        if matches!(inner, Command::Replay(_)) {
            return Err(Error::InvalidConfig("run.json cannot hold a replay".into()));
        }
        if let Some(out) = r.out {
            inner.set_out(out);
        }
        return run(inner);
    }
    let out = cmd
        .out()
        .expect("non-replay commands have an output directory")
        .to_path_buf();
    fs::create_dir_all(&out)?;
    fs::write(out.join(RUN_CONFIG), to_json_string(&cmd)?)?;
    match &cmd {
        Command::Align(a) => run_align(a),
        Command::Side(a) => run_side(a),
        Command::Embed(a) => run_embed(a),
        Command::Pairs(a) => run_pairs(a),
        Command::Score(a) => run_score(a),
        Command::Metrics(a) => run_metrics(a),
        Command::Arrange(a) => run_arrange(a),
        Command::Synth(a) => run_synth(a),
        Command::Experiment(Experiment::Symmetry(a)) => run_symmetry(a),
        Command::Identify(a) => run_identify(a),
        Command::Replay(_) => unreachable!("handled above"),
    }
}

fn pgm_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.pgm"))
}

/// Manifest ids when given, else the stems of `*.pgm` files in `dir`; sorted.
fn image_ids(manifest: Option<&Path>, dir: &Path) -> Result<Vec<String>> {
    let mut ids: Vec<String> = match manifest {
        Some(m) => Manifest::load(m)?.entries().iter().map(|e| e.id.clone()).collect(),
        None => fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
            .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .collect(),
    };
    ids.sort();
    if ids.is_empty() {
        return Err(Error::InvalidConfig(format!("no images found in {}", dir.display())));
    }
    Ok(ids)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

fn run_align(a: &AlignArgs) -> Result<()> {
    let ids = image_ids(a.manifest.as_deref(), &a.masks)?;
    let aligned = ids
        .par_iter()
        .map(|id| {
            let image = read_image(&pgm_path(&a.images, id))?;
            let mask = read_mask(&pgm_path(&a.masks, id))?;
            Ok((id, align(&image, &mask, a.k)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let image_dir = a.out.join("aligned");
    let mask_dir = a.out.join("aligned_masks");
    fs::create_dir_all(&image_dir)?;
    fs::create_dir_all(&mask_dir)?;
    let mut records = Vec::with_capacity(aligned.len());
    for (id, al) in &aligned {
        write_image(&pgm_path(&image_dir, id), &al.image)?;
        write_mask(&pgm_path(&mask_dir, id), &al.mask)?;
        records.push(AlignmentRecord::new(id.as_str(), &al.result));
    }
    write_json(&a.out.join("alignment.json"), &records)
}

fn run_side(a: &SideArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let masks = match &a.masks {
        Some(dir) => Some(
            manifest
                .entries()
                .par_iter()
                .filter(|e| pgm_path(dir, &e.id).is_file())
                .map(|e| Ok((e.id.clone(), read_mask(&pgm_path(dir, &e.id))?)))
                .collect::<Result<BTreeMap<_, _>>>()?,
        ),
        None => None,
    };
    let predictions = a.predictions.as_deref().map(read_predictions).transpose()?;
    let resolution = resolve_sides(&manifest, masks.as_ref(), predictions.as_ref(), a.convention)?;
    write_labels(&a.out.join("labels.csv"), &resolution.labels)?;
    write_json(&a.out.join("conflicts.json"), &resolution.conflicts)?;
    manifest
        .with_sides(&resolution.labels)
        .save(&a.out.join("manifest.csv"))
}

fn run_embed(a: &EmbedArgs) -> Result<()> {
    let store = match a.embedder {
        EmbedderKind::Toy => {
            let images = a.images.as_deref().expect("checked during resolve");
            let ids = image_ids(a.manifest.as_deref(), images)?;
            let embedder = ToyEmbedder::new(EmbedderSpec::toy(derive_seed(a.seed, "embed"), a.dim))?;
            let embedded = ids
                .par_iter()
                .map(|id| {
                    let image = read_image(&pgm_path(images, id))?;
                    let mask = a.masks.as_deref().map(|d| read_mask(&pgm_path(d, id))).transpose()?;
                    Ok((
                        id.as_str(),
                        embedder.embed_image(&image, mask.as_ref(), mask.is_some())?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            EmbeddingStore::from_embeddings(a.dim, embedded.iter().map(|(id, e)| (*id, e)))?
        }
        EmbedderKind::File => {
            let raw = EmbeddingStore::load(a.features.as_deref().expect("checked during resolve"))?;
            let flipped = a.flipped.as_deref().map(EmbeddingStore::load).transpose()?;
            let mut ids: Vec<String> = match &a.manifest {
                Some(m) => Manifest::load(m)?.entries().iter().map(|e| e.id.clone()).collect(),
                None => raw.ids().to_vec(),
            };
            ids.sort();
            let fused = ids
                .par_iter()
                .map(|id| {
                    let r = raw.embedding(id)?;
                    let e = match &flipped {
                        Some(f) => fuse_flip(&r, &f.embedding(id)?)?,
                        None => r.normalized()?,
                    };
                    Ok((id.as_str(), e))
                })
                .collect::<Result<Vec<(&str, Embedding)>>>()?;
            EmbeddingStore::from_embeddings(raw.dim(), fused.iter().map(|(id, e)| (*id, e)))?
        }
    };
    store.save(&a.out)
}

fn run_pairs(a: &PairsArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let opts = PairOptions {
        impostor_limit: a.impostor_limit,
        seed: derive_seed(a.seed, "pairs"),
    };
    let pairs = generate_pairs_with(&manifest, a.protocol, &opts)?;
    pairs.write_csv(File::create(a.out.join("pairs.csv"))?)
}

fn run_score(a: &ScoreArgs) -> Result<()> {
    let pairs = PairSet::read_csv(BufReader::new(File::open(&a.pairs)?), &a.pairs.display().to_string())?;
    let embeddings = EmbeddingStore::load(&a.store)?.to_map()?;
    let scores = score_pairs(&pairs, &embeddings)?;
    scores.write_csv(File::create(a.out.join("scores.csv"))?)
}

fn metric_config(flags: &MetricFlags, seed: u64, default_replicates: usize) -> MetricConfig {
    let replicates = flags.bootstrap.unwrap_or(default_replicates);
    MetricConfig {
        fmr_target: flags.fmr,
        bootstrap: (replicates > 0).then(|| BootstrapConfig {
            replicates,
            level: flags.level,
            seed: derive_seed(seed, "bootstrap"),
        }),
    }
}

fn run_metrics(a: &MetricsArgs) -> Result<()> {
    let scores = ScoreSet::read_csv(BufReader::new(File::open(&a.scores)?), &a.scores.display().to_string())?;
    let report = MetricReport::compute(
        &scores.genuine(),
        &scores.impostor(),
        &metric_config(&a.metrics, a.seed, DEFAULT_BOOTSTRAP),
    )?;
    emit_report(
        Report::Metrics {
            report: &report,
            scores: &scores,
        },
        &a.out,
        a.metrics.svg,
    )?;
    Ok(())
}

fn run_arrange(a: &ArrangeArgs) -> Result<()> {
    let arrangement = arrange_classes(&Manifest::load(&a.manifest)?, a.mode)?;
    arrangement.write_csv(File::create(a.out.join("classes.csv"))?)?;
    fs::write(a.out.join("classes.json"), arrangement.summary_json()?)?;
    Ok(())
}

fn synth_config(flags: &SynthFlags, seed: u64) -> SynthConfig {
    SynthConfig {
        n_subjects: flags.n_subjects,
        imgs_per_side: flags.imgs_per_side,
        dim: flags.dim,
        delta: flags.delta,
        epsilon: flags.epsilon,
        seed,
    }
}

/// Synthetic embeddings as they come back from an `EARB` store.
fn stored_embeddings(cfg: &SynthConfig) -> Result<(Manifest, EmbeddingStore)> {
    let data = gen_subjects(cfg)?;
    let store = EmbeddingStore::from_embeddings(cfg.dim, data.embeddings.iter().map(|(id, e)| (id.as_str(), e)))?;
    Ok((data.manifest, store))
}

fn run_synth(a: &SynthArgs) -> Result<()> {
    let cfg = synth_config(&a.synth, a.seed);
    let (manifest, store) = stored_embeddings(&cfg)?;
    manifest.save(&a.out.join("manifest.csv"))?;
    store.save(&a.out.join("store"))?;
    if !a.no_masks {
        let masks = gen_masks_for(&manifest, a.canvas, a.max_rotation, a.seed)?;
        let mask_dir = a.out.join("masks");
        let image_dir = a.out.join("images");
        fs::create_dir_all(&mask_dir)?;
        fs::create_dir_all(&image_dir)?;
        masks.par_iter().try_for_each(|(id, mask, _)| {
            write_mask(&pgm_path(&mask_dir, id), mask)?;
            let image = texture_image(mask, derive_seed(a.seed, &format!("image:{id}")));
            write_image(&pgm_path(&image_dir, id), &image)
        })?;
        let truths: Vec<_> = masks.into_iter().map(|(id, _, t)| (id, t)).collect();
        write_truth(File::create(a.out.join("truth.csv"))?, &manifest, &truths)?;
    }
    Ok(())
}

/// Store round-trip and CSV-precision scores, so the result matches the
/// `synth`, `pairs`, `score`, `metrics` chain byte for byte.
fn run_symmetry(a: &SymmetryArgs) -> Result<()> {
    let cfg = synth_config(&a.synth, a.seed);
    let (manifest, store) = stored_embeddings(&cfg)?;
    let (same, opposite) = protocol_scores(&manifest, &store.to_map()?)?;
    let report = SymmetryReport::from_scores(
        same.quantized(),
        opposite.quantized(),
        &metric_config(&a.metrics, a.seed, 0),
    )?;
    emit_report(Report::Symmetry(&report), &a.out, a.metrics.svg)?;
    Ok(())
}

#[derive(Serialize)]
struct IdentifySummary {
    k: usize,
    rank_k: f64,
    n_gallery: usize,
    n_probes: usize,
}

fn run_identify(a: &IdentifyArgs) -> Result<()> {
    let store = EmbeddingStore::load(&a.store)?;
    let labeled = |path: &Path| -> Result<Vec<Labeled>> {
        Manifest::load(path)?
            .entries()
            .iter()
            .map(|e| {
                Ok(Labeled {
                    id: e.id.clone(),
                    subject: e.subject.clone(),
                    embedding: store.embedding(&e.id)?,
                })
            })
            .collect()
    };
    let gallery = labeled(&a.gallery)?;
    let probes = labeled(&a.probes)?;
    let summary = IdentifySummary {
        k: a.k,
        rank_k: rank_k(&gallery, &probes, a.k)?,
        n_gallery: gallery.len(),
        n_probes: probes.len(),
    };
    write_json(&a.out.join("identify.json"), &summary)
}
