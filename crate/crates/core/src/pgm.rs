//! 8-bit PGM reading and writing for images and masks.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::codecs::pnm::{PnmDecoder, PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};

use crate::error::Result;
use crate::raster::{GrayImage, Mask};

/// Mask pixels at or above this gray level are set.
pub const MASK_THRESHOLD: u8 = 128;

pub fn decode_gray(reader: impl Read) -> Result<GrayImage> {
    let decoder = PnmDecoder::new(BufReader::new(reader))?;
    let img = DynamicImage::from_decoder(decoder)?.into_luma8();
    let (w, h) = img.dimensions();
    GrayImage::from_vec(w as usize, h as usize, img.into_raw())
}

pub fn read_image(path: &Path) -> Result<GrayImage> {
    decode_gray(File::open(path)?)
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    Ok(image_to_mask(&read_image(path)?))
}

pub fn image_to_mask(image: &GrayImage) -> Mask {
    Mask::from_vec(
        image.width(),
        image.height(),
        image.data().iter().map(|&v| v >= MASK_THRESHOLD).collect(),
    )
    .expect("same dimensions")
}

pub fn mask_to_image(mask: &Mask) -> GrayImage {
    GrayImage::from_vec(
        mask.width(),
        mask.height(),
        mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect(),
    )
    .expect("same dimensions")
}

/// Encodes as binary PGM (`P5`, maxval 255).
pub fn encode_gray(image: &GrayImage, writer: impl Write) -> Result<()> {
    let encoder = PnmEncoder::new(writer).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
    encoder.write_image(
        image.data(),
        image.width() as u32,
        image.height() as u32,
        ExtendedColorType::L8,
    )?;
    Ok(())
}

pub fn write_image(path: &Path, image: &GrayImage) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_gray(image, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    write_image(path, &mask_to_image(mask))
}
