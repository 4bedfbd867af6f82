//! Row-major rasters for grayscale images and binary masks, plus the
//! resampling primitives used by alignment and embedding.
//!
//! Coordinates are `(row, col)` with rows growing downward. Continuous
//! coordinates refer to pixel centers, so pixel `(r, c)` covers
//! `[r - 0.5, r + 0.5) x [c - 0.5, c + 0.5)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer pixel coordinate `(row, col)`.
pub type Pixel = (usize, usize);

/// Sub-pixel coordinate `(row, col)`.
pub type Point = (f64, f64);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Binary ear-segmentation raster; `true` marks an ear pixel.
pub type Mask = Raster<bool>;

/// 8-bit grayscale raster.
pub type GrayImage = Raster<u8>;

impl<T: Copy> Raster<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidRaster);
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        Self::from_vec(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::from_vec(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    /// Horizontal mirror (columns reversed).
    pub fn mirror(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks_exact(self.width) {
            data.extend(row.iter().rev().copied());
        }
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Sub-raster of `crop`. The rectangle must lie inside the raster.
    pub fn crop(&self, crop: &CropRect) -> Result<Self> {
        if crop.height == 0
            || crop.width == 0
            || crop.row + crop.height > self.height
            || crop.col + crop.width > self.width
        {
            return Err(Error::InvalidRaster);
        }
        let mut data = Vec::with_capacity(crop.width * crop.height);
        for r in crop.row..crop.row + crop.height {
            let start = r * self.width + crop.col;
            data.extend_from_slice(&self.data[start..start + crop.width]);
        }
        Self::from_vec(crop.width, crop.height, data)
    }
}

/// Axis-aligned rectangle `(row, col, height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl CropRect {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.row && row < self.row + self.height && col >= self.col && col < self.col + self.width
    }
}

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn set_pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / w, i % w))
    }

    /// Tight bounding box of the set pixels, `None` for an empty mask.
    pub fn bounding_box(&self) -> Option<CropRect> {
        let mut rows = (usize::MAX, 0);
        let mut cols = (usize::MAX, 0);
        let mut any = false;
        for (r, c) in self.set_pixels() {
            any = true;
            rows = (rows.0.min(r), rows.1.max(r));
            cols = (cols.0.min(c), cols.1.max(c));
        }
        any.then(|| CropRect {
            row: rows.0,
            col: cols.0,
            height: rows.1 - rows.0 + 1,
            width: cols.1 - cols.0 + 1,
        })
    }

    /// Mean `(row, col)` of the set pixels.
    pub fn centroid(&self) -> Option<Point> {
        let (mut sr, mut sc, mut n) = (0.0, 0.0, 0usize);
        for (r, c) in self.set_pixels() {
            sr += r as f64;
            sc += c as f64;
            n += 1;
        }
        (n > 0).then(|| (sr / n as f64, sc / n as f64))
    }

    /// Integer upscale by pixel replication.
    pub fn upscale(&self, factor: usize) -> Mask {
        let (w, h) = (self.width * factor, self.height * factor);
        Mask::from_fn(w, h, |r, c| self.get(r / factor, c / factor)).expect("factor >= 1")
    }

    /// Places this mask at `(row, col)` inside an empty canvas.
    pub fn embed_in(&self, canvas_w: usize, canvas_h: usize, row: usize, col: usize) -> Result<Mask> {
        if row + self.height > canvas_h || col + self.width > canvas_w {
            return Err(Error::InvalidRaster);
        }
        let mut out = Mask::filled(canvas_w, canvas_h, false)?;
        for (r, c) in self.set_pixels() {
            out.set(r + row, c + col, true);
        }
        Ok(out)
    }
}

impl GrayImage {
    /// Bilinear sample with edge clamping; `None` outside the pixel footprint.
    fn sample_bilinear(&self, row: f64, col: f64) -> Option<f64> {
        let (h, w) = (self.height as f64, self.width as f64);
        if !(row >= -0.5 && row <= h - 0.5 && col >= -0.5 && col <= w - 0.5) {
            return None;
        }
        let r = row.clamp(0.0, h - 1.0);
        let c = col.clamp(0.0, w - 1.0);
        let r0 = r.floor() as usize;
        let c0 = c.floor() as usize;
        let r1 = (r0 + 1).min(self.height - 1);
        let c1 = (c0 + 1).min(self.width - 1);
        let fr = r - r0 as f64;
        let fc = c - c0 as f64;
        let top = self.get(r0, c0) as f64 * (1.0 - fc) + self.get(r0, c1) as f64 * fc;
        let bot = self.get(r1, c0) as f64 * (1.0 - fc) + self.get(r1, c1) as f64 * fc;
        Some(top * (1.0 - fr) + bot * fr)
    }

    /// Bilinear resize to `width x height`, returning intensities scaled to [0, 1].
    pub fn resize_unit(&self, width: usize, height: usize) -> Vec<f64> {
        let sr = self.height as f64 / height as f64;
        let sc = self.width as f64 / width as f64;
        let mut out = Vec::with_capacity(width * height);
        for r in 0..height {
            let src_r = (r as f64 + 0.5) * sr - 0.5;
            for c in 0..width {
                let src_c = (c as f64 + 0.5) * sc - 0.5;
                let v = self
                    .sample_bilinear(
                        src_r.clamp(-0.5, self.height as f64 - 0.5),
                        src_c.clamp(-0.5, self.width as f64 - 0.5),
                    )
                    .unwrap_or(0.0);
                out.push(v / 255.0);
            }
        }
        out
    }

    /// Bilinear resize to `width x height`.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<GrayImage> {
        let unit = self.resize_unit(width, height);
        GrayImage::from_vec(width, height, unit.into_iter().map(|v| to_u8(v * 255.0)).collect())
    }
}

impl Mask {
    /// Bilinear interpolation of the 0/1 occupancy, set at 0.5 and above.
    fn sample_threshold(&self, row: f64, col: f64) -> bool {
        let (h, w) = (self.height as f64, self.width as f64);
        if !(row >= -0.5 && row <= h - 0.5 && col >= -0.5 && col <= w - 0.5) {
            return false;
        }
        let r = row.clamp(0.0, h - 1.0);
        let c = col.clamp(0.0, w - 1.0);
        let r0 = r.floor() as usize;
        let c0 = c.floor() as usize;
        let r1 = (r0 + 1).min(self.height - 1);
        let c1 = (c0 + 1).min(self.width - 1);
        let fr = r - r0 as f64;
        let fc = c - c0 as f64;
        let v = |r, c| if self.get(r, c) { 1.0 } else { 0.0 };
        let top = v(r0, c0) * (1.0 - fc) + v(r0, c1) * fc;
        let bot = v(r1, c0) * (1.0 - fc) + v(r1, c1) * fc;
        top * (1.0 - fr) + bot * fr >= 0.5
    }

    /// Interpolating resize: bilinear occupancy thresholded at 0.5.
    pub fn resize_threshold(&self, width: usize, height: usize) -> Result<Mask> {
        let sr = self.height as f64 / height as f64;
        let sc = self.width as f64 / width as f64;
        Mask::from_fn(width, height, |r, c| {
            let src_r = ((r as f64 + 0.5) * sr - 0.5).clamp(-0.5, self.height as f64 - 0.5);
            let src_c = ((c as f64 + 0.5) * sc - 0.5).clamp(-0.5, self.width as f64 - 0.5);
            self.sample_threshold(src_r, src_c)
        })
    }

    /// Nearest-neighbour resize to `width x height`.
    pub fn resize_nearest(&self, width: usize, height: usize) -> Result<Mask> {
        let sr = self.height as f64 / height as f64;
        let sc = self.width as f64 / width as f64;
        Mask::from_fn(width, height, |r, c| {
            let src_r = (((r as f64 + 0.5) * sr) as usize).min(self.height - 1);
            let src_c = (((c as f64 + 0.5) * sc) as usize).min(self.width - 1);
            self.get(src_r, src_c)
        })
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Dimensions after scaling so the smaller side equals `target`, aspect preserved.
pub fn normalized_size(width: usize, height: usize, target: usize) -> (usize, usize) {
    if height <= width {
        let w = ((width as f64 * target as f64 / height as f64).round() as usize).max(1);
        (w, target)
    } else {
        let h = ((height as f64 * target as f64 / width as f64).round() as usize).max(1);
        (target, h)
    }
}

/// Rigid rotation about a fixed center, counter-clockwise positive as displayed.
///
/// The output canvas is enlarged to hold the whole rotated input so nothing is
/// clipped; samples with no source pixel are zero.
#[derive(Debug, Clone, Copy)]
pub struct Rotation {
    pub angle_deg: f64,
    pub center: Point,
    cos: f64,
    sin: f64,
    /// Offset of output pixel (0, 0) relative to `center`, in the rotated frame.
    origin: (f64, f64),
    pub out_width: usize,
    pub out_height: usize,
}

impl Rotation {
    pub fn new(angle_deg: f64, center: Point, width: usize, height: usize) -> Self {
        let (sin, cos) = angle_deg.to_radians().sin_cos();
        let mut rot = Self {
            angle_deg,
            center,
            cos,
            sin,
            origin: (0.0, 0.0),
            out_width: 0,
            out_height: 0,
        };
        let corners = [
            (0.0, 0.0),
            (0.0, width as f64 - 1.0),
            (height as f64 - 1.0, 0.0),
            (height as f64 - 1.0, width as f64 - 1.0),
        ];
        let (mut rmin, mut rmax, mut cmin, mut cmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in corners {
            let (dr, dc) = rot.forward_offset(p);
            rmin = rmin.min(dr);
            rmax = rmax.max(dr);
            cmin = cmin.min(dc);
            cmax = cmax.max(dc);
        }
        // Snap to 1e-9 so that exact multiples of 90 degrees do not grow the canvas.
        let snap = |v: f64| (v * 1e9).round() / 1e9;
        let (rmin, rmax, cmin, cmax) = (
            snap(rmin).floor(),
            snap(rmax).ceil(),
            snap(cmin).floor(),
            snap(cmax).ceil(),
        );
        rot.origin = (rmin, cmin);
        rot.out_height = (rmax - rmin) as usize + 1;
        rot.out_width = (cmax - cmin) as usize + 1;
        rot
    }

    /// Offset from the center after rotating input point `p`.
    fn forward_offset(&self, p: Point) -> (f64, f64) {
        let dr = p.0 - self.center.0;
        let dc = p.1 - self.center.1;
        (-dc * self.sin + dr * self.cos, dc * self.cos + dr * self.sin)
    }

    /// Maps an input coordinate to the output frame.
    pub fn forward(&self, p: Point) -> Point {
        let (dr, dc) = self.forward_offset(p);
        (dr - self.origin.0, dc - self.origin.1)
    }

    /// Maps an output coordinate back to the input frame.
    pub fn inverse(&self, p: Point) -> Point {
        let dr = p.0 + self.origin.0;
        let dc = p.1 + self.origin.1;
        (
            self.center.0 + dc * self.sin + dr * self.cos,
            self.center.1 + dc * self.cos - dr * self.sin,
        )
    }

    pub fn apply_image(&self, image: &GrayImage) -> GrayImage {
        GrayImage::from_fn(self.out_width, self.out_height, |r, c| {
            let (sr, sc) = self.inverse((r as f64, c as f64));
            image.sample_bilinear(sr, sc).map(to_u8).unwrap_or(0)
        })
        .expect("rotated canvas is non-empty")
    }

    pub fn apply_mask(&self, mask: &Mask) -> Mask {
        Mask::from_fn(self.out_width, self.out_height, |r, c| {
            let (sr, sc) = self.inverse((r as f64, c as f64));
            mask.sample_threshold(sr, sc)
        })
        .expect("rotated canvas is non-empty")
    }
}
