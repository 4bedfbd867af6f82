//! Mask-driven ear alignment.
//!
//! The ear's principal axis is estimated from the `k` longest chords between
//! boundary pixels of the largest mask component: the mean of the chords' top
//! endpoints and the mean of their bottom endpoints define the axis. The image
//! is then rotated about the mask centroid until that axis points straight
//! down, and both rasters are cropped to the rotated mask's bounding box.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{normalized_size, CropRect, GrayImage, Mask, Pixel, Point, Rotation};

/// Number of chords averaged into the axis estimate.
pub const DEFAULT_CHORDS: usize = 50;

/// Smaller image side after the pre-alignment resize.
pub const NORMALIZED_MIN_SIDE: usize = 80;

/// Straight segment between two boundary pixels. `top` precedes `bottom`
/// in row-major order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chord {
    pub top: Pixel,
    pub bottom: Pixel,
    pub length: f64,
}

impl Chord {
    pub fn new(a: Pixel, b: Pixel) -> Self {
        let (top, bottom) = if a <= b { (a, b) } else { (b, a) };
        Self {
            top,
            bottom,
            length: (squared_distance(top, bottom) as f64).sqrt(),
        }
    }

    pub fn squared_length(&self) -> u64 {
        squared_distance(self.top, self.bottom)
    }
}

fn squared_distance(a: Pixel, b: Pixel) -> u64 {
    let dr = a.0.abs_diff(b.0) as u64;
    let dc = a.1.abs_diff(b.1) as u64;
    dr * dr + dc * dc
}

/// Total order on chords: longer first, then lexicographic on endpoints.
pub fn chord_order(a: &Chord, b: &Chord) -> Ordering {
    b.squared_length()
        .cmp(&a.squared_length())
        .then_with(|| (a.top, a.bottom).cmp(&(b.top, b.bottom)))
}

/// Heap entry whose maximum is the worst retained chord.
#[derive(Clone, Copy)]
struct Ranked {
    sq: u64,
    top: Pixel,
    bottom: Pixel,
}

impl Ranked {
    fn order(&self, other: &Self) -> Ordering {
        other
            .sq
            .cmp(&self.sq)
            .then_with(|| (self.top, self.bottom).cmp(&(other.top, other.bottom)))
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.order(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order(other)
    }
}

struct TopK {
    k: usize,
    heap: BinaryHeap<Ranked>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, cand: Ranked) {
        if self.heap.len() < self.k {
            self.heap.push(cand);
        } else if let Some(worst) = self.heap.peek() {
            if cand < *worst {
                self.heap.pop();
                self.heap.push(cand);
            }
        }
    }

    fn merge(mut self, other: TopK) -> TopK {
        for c in other.heap {
            self.offer(c);
        }
        self
    }
}

/// Boundary pixels of the largest 4-connected component, row-major.
///
/// A pixel is on the boundary when it touches the image border or has an
/// unset 4-neighbour. Equal-sized components resolve to the one met first in
/// row-major order.
pub fn extract_boundary(mask: &Mask) -> Result<Vec<Pixel>> {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![u32::MAX; w * h];
    let mut best: Option<(u32, usize)> = None;
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.data()[start] || labels[start] != u32::MAX {
            continue;
        }
        let label = next;
        next += 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (r, c) = (i / w, i % w);
            let mut visit = |j: usize| {
                if mask.data()[j] && labels[j] == u32::MAX {
                    labels[j] = label;
                    queue.push_back(j);
                }
            };
            if r > 0 {
                visit(i - w);
            }
            if r + 1 < h {
                visit(i + w);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < w {
                visit(i + 1);
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((label, size));
        }
    }
    let (label, _) = best.ok_or(Error::EmptyMask)?;
    let set = |r: usize, c: usize| mask.get(r, c);
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if labels[r * w + c] != label {
                continue;
            }
            let on_border = r == 0 || c == 0 || r + 1 == h || c + 1 == w;
            if on_border || !set(r - 1, c) || !set(r + 1, c) || !set(r, c - 1) || !set(r, c + 1) {
                out.push((r, c));
            }
        }
    }
    Ok(out)
}

/// The `k` longest chords between boundary pixels, longest first.
pub fn longest_chords(mask: &Mask, k: usize) -> Result<Vec<Chord>> {
    let boundary = extract_boundary(mask)?;
    longest_chords_among(&boundary, k)
}

/// Top-`k` chords over all unordered pairs of `points` (row-major sorted).
pub fn longest_chords_among(points: &[Pixel], k: usize) -> Result<Vec<Chord>> {
    if points.len() < 2 {
        return Err(Error::DegenerateMask(format!(
            "boundary has {} pixel(s), need at least 2",
            points.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let top = (0..points.len() - 1)
        .into_par_iter()
        .fold(
            || TopK::new(k),
            |mut acc, i| {
                let a = points[i];
                for &b in &points[i + 1..] {
                    let cand = Ranked {
                        sq: squared_distance(a, b),
                        top: a.min(b),
                        bottom: a.max(b),
                    };
                    acc.offer(cand);
                }
                acc
            },
        )
        .reduce(|| TopK::new(k), TopK::merge);
    let mut chords: Vec<Chord> = top.heap.into_iter().map(|r| Chord::new(r.top, r.bottom)).collect();
    chords.sort_by(chord_order);
    Ok(chords)
}

/// Mean top and mean bottom endpoints of `chords`.
pub fn estimate_axis(chords: &[Chord]) -> Result<(Point, Point)> {
    if chords.is_empty() {
        return Err(Error::EmptyChordList);
    }
    let n = chords.len() as f64;
    let mut top = (0.0, 0.0);
    let mut bot = (0.0, 0.0);
    for ch in chords {
        top.0 += ch.top.0 as f64;
        top.1 += ch.top.1 as f64;
        bot.0 += ch.bottom.0 as f64;
        bot.1 += ch.bottom.1 as f64;
    }
    Ok(((top.0 / n, top.1 / n), (bot.0 / n, bot.1 / n)))
}

/// Counter-clockwise rotation in degrees, in (-180, 180], that turns the
/// vector `top -> bottom` straight down.
pub fn vertical_rotation_deg(top: Point, bottom: Point) -> f64 {
    let dr = bottom.0 - top.0;
    let dc = bottom.1 - top.1;
    if dr == 0.0 && dc == 0.0 {
        return 0.0;
    }
    let heading = (-dr).atan2(dc).to_degrees();
    let mut angle = -90.0 - heading;
    while angle <= -180.0 {
        angle += 360.0;
    }
    while angle > 180.0 {
        angle -= 360.0;
    }
    angle
}

/// Rotation the aligner would apply to `mask` at its native resolution.
pub fn estimate_angle(mask: &Mask, k: usize) -> Result<f64> {
    let chords = longest_chords(mask, k)?;
    let (top, bot) = estimate_axis(&chords)?;
    Ok(vertical_rotation_deg(top, bot))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// Rotation applied, degrees, counter-clockwise positive.
    pub angle_deg: f64,
    /// Axis endpoints in the resized, unrotated frame.
    pub axis_top: Point,
    pub axis_bot: Point,
    /// Crop in the rotated frame.
    pub crop: CropRect,
}

/// One line of the alignment JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub id: String,
    pub angle_deg: f64,
    pub axis_top: [f64; 2],
    pub axis_bot: [f64; 2],
    pub crop: [usize; 4],
}

impl AlignmentRecord {
    pub fn new(id: impl Into<String>, r: &AlignmentResult) -> Self {
        Self {
            id: id.into(),
            angle_deg: r.angle_deg,
            axis_top: [r.axis_top.0, r.axis_top.1],
            axis_bot: [r.axis_bot.0, r.axis_bot.1],
            crop: [r.crop.row, r.crop.col, r.crop.height, r.crop.width],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Aligned {
    pub image: GrayImage,
    pub mask: Mask,
    pub result: AlignmentResult,
    /// Rotation used, defined on the resized frame.
    pub rotation: Rotation,
}

/// Resize, rotate upright and crop an image with its ear mask.
pub fn align(image: &GrayImage, mask: &Mask, k: usize) -> Result<Aligned> {
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(Error::NonMatchingDimensions {
            image_w: image.width(),
            image_h: image.height(),
            mask_w: mask.width(),
            mask_h: mask.height(),
        });
    }
    let (w, h) = normalized_size(mask.width(), mask.height(), NORMALIZED_MIN_SIDE);
    let image = image.resize_bilinear(w, h)?;
    let mask = mask.resize_threshold(w, h)?;

    let chords = match longest_chords(&mask, k) {
        Err(Error::EmptyMask) => return Err(Error::DegenerateMask("mask vanished after resize".into())),
        other => other?,
    };
    let (axis_top, axis_bot) = estimate_axis(&chords)?;
    let angle_deg = vertical_rotation_deg(axis_top, axis_bot);
    let center = mask.centroid().ok_or(Error::EmptyMask)?;
    let rotation = Rotation::new(angle_deg, center, w, h);

    let rotated_mask = rotation.apply_mask(&mask);
    let crop = rotated_mask
        .bounding_box()
        .ok_or_else(|| Error::DegenerateMask("mask vanished after rotation".into()))?;
    let rotated_image = rotation.apply_image(&image);
    Ok(Aligned {
        image: rotated_image.crop(&crop)?,
        mask: rotated_mask.crop(&crop)?,
        result: AlignmentResult {
            angle_deg,
            axis_top,
            axis_bot,
            crop,
        },
        rotation,
    })
}
