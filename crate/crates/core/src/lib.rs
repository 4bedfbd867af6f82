//! Ear-recognition evaluation toolkit: mask-based alignment, ear-side labeling,
//! flip-fused embeddings, same-side versus opposite-side matching protocols,
//! verification metrics and a synthetic bilateral-asymmetry benchmark.

pub mod alignment;
pub mod embedding;
pub mod error;
pub mod format;
pub mod manifest;
pub mod metrics;
pub mod pgm;
pub mod protocol;
pub mod raster;
pub mod report;
pub mod side;
pub mod store;
pub mod synth;

pub use alignment::{align, estimate_angle, longest_chords, Aligned, AlignmentRecord, AlignmentResult, Chord};
pub use embedding::{cosine, fuse_flip, EmbedderKind, EmbedderSpec, Embedding, ToyEmbedder};
pub use error::{Error, ErrorKind, Result};
pub use manifest::{Entry, Manifest, Split};
pub use metrics::{auc, dprime, eer, fnmr_at_fmr, BootstrapConfig, MetricConfig, MetricReport};
pub use protocol::{arrange_classes, generate_pairs, score_pairs, ClassMode, PairSet, Protocol, ScoreSet};
pub use raster::{CropRect, GrayImage, Mask, Raster};
pub use report::{emit_report, Histogram, Report};
pub use side::{classify_side_geometric, resolve_sides, Side, SideLabel, SideSource, SkewConvention};
pub use store::EmbeddingStore;
pub use synth::{gen_mask, gen_subjects, run_symmetry_experiment, SymmetryReport, SynthConfig};
