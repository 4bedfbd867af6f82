//! Feature vectors: a deterministic toy embedder, flip fusion and cosine scoring.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::alignment::{align, DEFAULT_CHORDS};
use crate::error::{Error, Result};
use crate::raster::{GrayImage, Mask};

pub const DEFAULT_DIM: usize = 512;

/// Side length of the toy embedder's downsampled input.
pub const TOY_GRID: usize = 16;

/// Finite real feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimMismatch { expected: 1, got: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEmbedding);
        }
        Ok(Self(values))
    }

    pub fn from_f32(values: &[f32]) -> Result<Self> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    /// Unit-norm copy; `ZeroVector` when the norm is below 1e-12.
    pub fn normalized(&self) -> Result<Self> {
        normalize(self.0.clone()).map(Self)
    }

    pub fn scaled(&self, a: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * a).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let n = dot(&v, &v).sqrt();
    if n.is_nan() || n < 1e-12 {
        return Err(Error::ZeroVector);
    }
    for x in &mut v {
        *x /= n;
    }
    Ok(v)
}

fn check_dims(u: &Embedding, v: &Embedding) -> Result<()> {
    if u.dim() != v.dim() {
        return Err(Error::DimMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    Ok(())
}

/// Normalized sum of the raw-image and mirrored-image features.
pub fn fuse_flip(raw: &Embedding, flipped: &Embedding) -> Result<Embedding> {
    check_dims(raw, flipped)?;
    let sum = raw.0.iter().zip(&flipped.0).map(|(a, b)| a + b).collect();
    normalize(sum).map(Embedding)
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(u: &Embedding, v: &Embedding) -> Result<f64> {
    check_dims(u, v)?;
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(&u.0, &v.0) / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Toy,
    File,
}

impl std::str::FromStr for EmbedderKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "toy" => Ok(EmbedderKind::Toy),
            "file" => Ok(EmbedderKind::File),
            other => Err(format!("unknown embedder `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    pub seed: u64,
    pub dim: usize,
}

impl EmbedderSpec {
    pub fn toy(seed: u64, dim: usize) -> Self {
        Self {
            kind: EmbedderKind::Toy,
            seed,
            dim,
        }
    }
}

/// Stand-in feature extractor: 16x16 bilinear thumbnail, centered on mid-gray,
/// projected through a seeded Gaussian matrix and L2-normalized.
#[derive(Debug, Clone)]
pub struct ToyEmbedder {
    spec: EmbedderSpec,
    /// `TOY_GRID^2 x dim`, row-major.
    projection: Vec<f64>,
}

impl ToyEmbedder {
    pub fn new(spec: EmbedderSpec) -> Result<Self> {
        if spec.kind != EmbedderKind::Toy {
            return Err(Error::InvalidEmbedder("toy embedder needs kind = toy".into()));
        }
        if spec.dim < 2 {
            return Err(Error::InvalidEmbedder(format!("dim {} < 2", spec.dim)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let projection = (0..TOY_GRID * TOY_GRID * spec.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(Self { spec, projection })
    }

    pub fn spec(&self) -> EmbedderSpec {
        self.spec
    }

    pub fn embed(&self, image: &GrayImage) -> Result<Embedding> {
        let dim = self.spec.dim;
        let pixels = image.resize_unit(TOY_GRID, TOY_GRID);
        let mut out = vec![0.0; dim];
        for (i, p) in pixels.iter().enumerate() {
            let x = p - 0.5;
            if x == 0.0 {
                continue;
            }
            let row = &self.projection[i * dim..(i + 1) * dim];
            for (o, m) in out.iter_mut().zip(row) {
                *o += x * m;
            }
        }
        normalize(out).map(Embedding)
    }

    /// Flip-fused embedding, optionally after mask-based alignment.
    pub fn embed_image(&self, image: &GrayImage, mask: Option<&Mask>, use_alignment: bool) -> Result<Embedding> {
        let aligned;
        let image = if use_alignment {
            let mask = mask.ok_or_else(|| Error::InvalidEmbedder("alignment requires a mask".into()))?;
            aligned = align(image, mask, DEFAULT_CHORDS)?.image;
            &aligned
        } else {
            image
        };
        let raw = self.embed(image)?;
        let flipped = self.embed(&image.mirror())?;
        fuse_flip(&raw, &flipped)
    }
}

/// One-shot toy embedding of `image`.
pub fn toy_embed(image: &GrayImage, spec: EmbedderSpec) -> Result<Embedding> {
    ToyEmbedder::new(spec)?.embed(image)
}
