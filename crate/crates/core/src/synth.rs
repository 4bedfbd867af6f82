//! Seeded synthetic data with controllable left/right asymmetry.
//!
//! Each subject `s` has a unit identity direction `u_s` and a unit asymmetry
//! direction `m_s` orthogonal to it. The side prototypes are
//! `R_s = norm(u_s + delta m_s)` and `L_s = norm(u_s - delta m_s)`, so
//! `cos(L_s, R_s) = (1 - delta^2) / (1 + delta^2)`. Image embeddings add
//! isotropic noise of expected norm `epsilon` to their prototype and normalize.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{normalize, Embedding};
use crate::error::{Error, Result};
use crate::format::csv_float;
use crate::manifest::{Entry, Manifest, Split};
use crate::metrics::{MetricConfig, MetricReport};
use crate::protocol::{generate_pairs, score_pairs, Protocol, ScoreSet};
use crate::raster::{GrayImage, Mask, Point};
use crate::side::Side;

/// SplitMix64 finalizer; derives independent sub-seeds from one run seed.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut z = seed;
    for b in stage.bytes() {
        z = z.wrapping_mul(0x100_0000_01b3).wrapping_add(u64::from(b));
    }
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub imgs_per_side: usize,
    pub dim: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 200,
            imgs_per_side: 10,
            dim: 64,
            delta: 0.4,
            epsilon: 0.3,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 {
            return Err(Error::InvalidConfig(format!("n_subjects = {} < 2", self.n_subjects)));
        }
        if self.imgs_per_side < 1 {
            return Err(Error::InvalidConfig("imgs_per_side must be at least 1".into()));
        }
        if self.dim < 2 {
            return Err(Error::InvalidConfig(format!("dim = {} < 2", self.dim)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "delta = {} must be finite and >= 0",
                self.delta
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon = {} must be finite and >= 0",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn subject_name(&self, s: usize) -> String {
        let width = digits(self.n_subjects.saturating_sub(1)).max(4);
        format!("s{s:0width$}")
    }

    pub fn image_id(&self, s: usize, side: Side, i: usize) -> String {
        let width = digits(self.imgs_per_side.saturating_sub(1)).max(2);
        format!("{}_{}{i:0width$}", self.subject_name(s), side.code())
    }
}

fn digits(n: usize) -> usize {
    n.to_string().len()
}

/// Latent directions and side prototypes of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectModel {
    pub identity: Vec<f64>,
    pub asymmetry: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

fn gaussian(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn subject_rng(cfg: &SynthConfig, s: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "subjects"));
    rng.set_stream(s as u64);
    rng
}

fn draw_subject(cfg: &SynthConfig, rng: &mut impl Rng) -> Result<SubjectModel> {
    let identity = normalize(gaussian(rng, cfg.dim))?;
    let mut m = gaussian(rng, cfg.dim);
    let along: f64 = m.iter().zip(&identity).map(|(a, b)| a * b).sum();
    for (x, u) in m.iter_mut().zip(&identity) {
        *x -= along * u;
    }
    let asymmetry = normalize(m)?;
    let shifted = |sign: f64| -> Result<Vec<f64>> {
        normalize(
            identity
                .iter()
                .zip(&asymmetry)
                .map(|(u, m)| u + sign * cfg.delta * m)
                .collect(),
        )
    };
    Ok(SubjectModel {
        right: shifted(1.0)?,
        left: shifted(-1.0)?,
        identity,
        asymmetry,
    })
}

/// Latent model of subject `s`, identical to the one used by [`gen_subjects`].
pub fn subject_model(cfg: &SynthConfig, s: usize) -> Result<SubjectModel> {
    cfg.validate()?;
    draw_subject(cfg, &mut subject_rng(cfg, s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    /// All entries TEST, sorted by id.
    pub manifest: Manifest,
    pub embeddings: BTreeMap<String, Embedding>,
}

/// Generates subjects, side prototypes and per-image embeddings.
pub fn gen_subjects(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let per_subject = (0..cfg.n_subjects)
        .into_par_iter()
        .map(|s| {
            let mut rng = subject_rng(cfg, s);
            let model = draw_subject(cfg, &mut rng)?;
            let noise_scale = cfg.epsilon / (cfg.dim as f64).sqrt();
            let mut images = Vec::with_capacity(2 * cfg.imgs_per_side);
            for (side, proto) in [(Side::Left, &model.left), (Side::Right, &model.right)] {
                for i in 0..cfg.imgs_per_side {
                    let g = gaussian(&mut rng, cfg.dim);
                    let v = proto.iter().zip(&g).map(|(p, n)| p + noise_scale * n).collect();
                    images.push((cfg.image_id(s, side, i), side, Embedding::new(normalize(v)?)?));
                }
            }
            Ok((s, images))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut entries = Vec::new();
    let mut embeddings = BTreeMap::new();
    for (s, images) in per_subject {
        let subject = cfg.subject_name(s);
        for (id, side, emb) in images {
            entries.push(Entry {
                id: id.clone(),
                subject: subject.clone(),
                side: Some(side),
                split: Split::Test,
                pose_deg: None,
            });
            embeddings.insert(id, emb);
        }
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(SynthData {
        manifest: Manifest::new(entries)?,
        embeddings,
    })
}

/// Ground truth of a rendered ear mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskTruth {
    pub side: Side,
    pub rotation_deg: f64,
    pub axis_top: Point,
    pub axis_bot: Point,
}

/// Filled ellipse, major axis vertical before a counter-clockwise rotation.
pub fn render_ellipse(
    width: usize,
    height: usize,
    center: Point,
    semi_major: f64,
    semi_minor: f64,
    rotation_deg: f64,
) -> Mask {
    render_shape(width, height, center, semi_major, semi_minor, rotation_deg, None)
}

/// Notch disk in the shape's unrotated frame: `(x, y, radius)` with y up.
type Notch = (f64, f64, f64);

fn render_shape(
    width: usize,
    height: usize,
    center: Point,
    semi_major: f64,
    semi_minor: f64,
    rotation_deg: f64,
    notch: Option<Notch>,
) -> Mask {
    let (sin, cos) = rotation_deg.to_radians().sin_cos();
    Mask::from_fn(width, height, |r, c| {
        let dx = c as f64 - center.1;
        let dy = center.0 - r as f64;
        let x = dx * cos + dy * sin;
        let y = -dx * sin + dy * cos;
        let inside = (x / semi_minor).powi(2) + (y / semi_major).powi(2) <= 1.0;
        let notched = notch.is_some_and(|(nx, ny, nr)| (x - nx).powi(2) + (y - ny).powi(2) <= nr * nr);
        inside && !notched
    })
    .expect("non-empty canvas")
}

fn axis_endpoints(center: Point, semi_major: f64, rotation_deg: f64) -> (Point, Point) {
    let (sin, cos) = rotation_deg.to_radians().sin_cos();
    // (0, +a) rotated: x = -a sin, y = a cos; rows grow downward.
    let top = (center.0 - semi_major * cos, center.1 - semi_major * sin);
    let bot = (center.0 + semi_major * cos, center.1 + semi_major * sin);
    (top, bot)
}

/// Ear-like mask: an upright ellipse of aspect about 1.8 with a concha notch on
/// the side that fixes its label, then rotated counter-clockwise by `rotation_deg`.
///
/// Right ears carry the notch at `+x`, which gives positive column skewness
/// under the default convention. The seed jitters size, aspect, vertical
/// position and notch geometry identically for both sides, so
/// `gen_mask(Left, t)` mirrors `gen_mask(Right, -t)`.
pub fn gen_mask(side: Side, rotation_deg: f64, canvas: usize, seed: u64) -> Result<(Mask, MaskTruth)> {
    if rotation_deg.is_nan() || rotation_deg.abs() > 60.0 {
        return Err(Error::InvalidRotation(rotation_deg));
    }
    if canvas < 64 {
        return Err(Error::InvalidConfig(format!("canvas {canvas} < 64")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = canvas as f64;
    let semi_minor = 0.2 * c * rng.random_range(0.95..1.05);
    let semi_major = semi_minor * 1.8 * rng.random_range(0.97..1.03);
    let center = ((c - 1.0) / 2.0 + c * rng.random_range(-0.02..0.02), (c - 1.0) / 2.0);
    let notch_x = semi_minor * rng.random_range(0.45..0.55);
    let notch_y = semi_major * rng.random_range(-0.1..0.1);
    let notch_r = semi_minor * rng.random_range(0.28..0.34);
    let sign = match side {
        Side::Right => 1.0,
        Side::Left => -1.0,
    };
    let mask = render_shape(
        canvas,
        canvas,
        center,
        semi_major,
        semi_minor,
        rotation_deg,
        Some((sign * notch_x, notch_y, notch_r)),
    );
    let (axis_top, axis_bot) = axis_endpoints(center, semi_major, rotation_deg);
    Ok((
        mask,
        MaskTruth {
            side,
            rotation_deg,
            axis_top,
            axis_bot,
        },
    ))
}

/// One mask per manifest entry; rotation uniform in `[-max_rotation, max_rotation]`.
pub fn gen_masks_for(
    manifest: &Manifest,
    canvas: usize,
    max_rotation: f64,
    seed: u64,
) -> Result<Vec<(String, Mask, MaskTruth)>> {
    manifest
        .entries()
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let side = e.side.ok_or_else(|| Error::MissingSideLabel(e.id.clone()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "masks"));
            rng.set_stream(i as u64);
            let rotation = if max_rotation > 0.0 {
                rng.random_range(-max_rotation..=max_rotation)
            } else {
                0.0
            };
            let (mask, truth) = gen_mask(side, rotation, canvas, rng.random())?;
            Ok((e.id.clone(), mask, truth))
        })
        .collect()
}

/// Grayscale rendering of a mask: a striped, noisy ear on a dark noisy background.
pub fn texture_image(mask: &Mask, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::from_fn(mask.width(), mask.height(), |r, c| {
        let noise: u8 = rng.random_range(0..24);
        if mask.get(r, c) {
            (110 + (r * 5 + c * 3) % 96) as u8 + noise
        } else {
            noise
        }
    })
    .expect("mask has a non-empty canvas")
}

/// Writes `id,subject,side,rotation_deg,top_row,top_col,bot_row,bot_col`,
/// taking subjects from `manifest`.
pub fn write_truth(w: impl Write, manifest: &Manifest, truths: &[(String, MaskTruth)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "id",
        "subject",
        "side",
        "rotation_deg",
        "top_row",
        "top_col",
        "bot_row",
        "bot_col",
    ])?;
    for (id, t) in truths {
        let subject = manifest.get(id).map_or("", |e| e.subject.as_str());
        let mut row = vec![
            id.clone(),
            subject.to_string(),
            t.side.code().to_string(),
            csv_float(t.rotation_deg),
        ];
        row.extend([t.axis_top.0, t.axis_top.1, t.axis_bot.0, t.axis_bot.1].map(csv_float));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Same-side versus opposite-side comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub same_side: MetricReport,
    pub opposite_side: MetricReport,
    pub genuine_mean_same: f64,
    pub genuine_mean_opposite: f64,
    pub impostor_mean_same: f64,
    pub impostor_mean_opposite: f64,
    /// `d'_same - d'_opposite`.
    pub dprime_gap: f64,
    #[serde(skip)]
    pub scores_same: Option<ScoreSet>,
    #[serde(skip)]
    pub scores_opposite: Option<ScoreSet>,
}

impl SymmetryReport {
    pub fn from_scores(same: ScoreSet, opposite: ScoreSet, metrics: &MetricConfig) -> Result<Self> {
        let (gs, is) = (same.genuine(), same.impostor());
        let (go, io) = (opposite.genuine(), opposite.impostor());
        let same_side = MetricReport::compute(&gs, &is, metrics)?;
        let opposite_side = MetricReport::compute(&go, &io, metrics)?;
        Ok(Self {
            dprime_gap: same_side.dprime - opposite_side.dprime,
            same_side,
            opposite_side,
            genuine_mean_same: mean(&gs),
            genuine_mean_opposite: mean(&go),
            impostor_mean_same: mean(&is),
            impostor_mean_opposite: mean(&io),
            scores_same: Some(same),
            scores_opposite: Some(opposite),
        })
    }
}

/// Same-side and opposite-side score sets for a labeled manifest.
pub fn protocol_scores(manifest: &Manifest, embeddings: &BTreeMap<String, Embedding>) -> Result<(ScoreSet, ScoreSet)> {
    let same = score_pairs(&generate_pairs(manifest, Protocol::SameSide)?, embeddings)?;
    let opposite = score_pairs(&generate_pairs(manifest, Protocol::OppositeSide)?, embeddings)?;
    Ok((same, opposite))
}

/// Generate, pair, score and summarise at full precision.
pub fn run_symmetry_experiment(cfg: &SynthConfig, metrics: &MetricConfig) -> Result<SymmetryReport> {
    let data = gen_subjects(cfg)?;
    let (same, opposite) = protocol_scores(&data.manifest, &data.embeddings)?;
    SymmetryReport::from_scores(same, opposite, metrics)
}
