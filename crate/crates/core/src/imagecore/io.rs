//! PNG / PGM readers and writers for intensity images and label maps.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use super::{Image, LabelMap};
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<DynamicImage> {
    image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Loads an 8- or 16-bit grayscale PNG or binary PGM, normalizing to `[0, 1]`.
/// Color inputs are reduced to luma.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let (w, h, data): (usize, usize, Vec<f32>) = match open(path)? {
        DynamicImage::ImageLuma8(buf) => (
            buf.width() as usize,
            buf.height() as usize,
            buf.into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
        ),
        DynamicImage::ImageLuma16(buf) => (
            buf.width() as usize,
            buf.height() as usize,
            buf.into_raw()
                .into_iter()
                .map(|v| v as f32 / 65535.0)
                .collect(),
        ),
        other => {
            let buf = other.into_luma16();
            (
                buf.width() as usize,
                buf.height() as usize,
                buf.into_raw()
                    .into_iter()
                    .map(|v| v as f32 / 65535.0)
                    .collect(),
            )
        }
    };
    Image::new(w, h, data)
}

fn save(path: &Path, img: DynamicImage, format: ImageFormat) -> Result<()> {
    img.save_with_format(path, format)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes an 8-bit grayscale PNG.
pub fn save_image_png8(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let raw = image
        .data()
        .iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect();
    let buf = ImageBuffer::<Luma<u8>, Vec<u8>>::from_raw(image.width() as u32, image.height() as u32, raw)
        .expect("buffer size matches");
    save(path.as_ref(), DynamicImage::ImageLuma8(buf), ImageFormat::Png)
}

/// Writes a 16-bit grayscale PNG.
pub fn save_image_png16(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let raw = image
        .data()
        .iter()
        .map(|v| (v * 65535.0).round() as u16)
        .collect();
    let buf = ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(image.width() as u32, image.height() as u32, raw)
        .expect("buffer size matches");
    save(path.as_ref(), DynamicImage::ImageLuma16(buf), ImageFormat::Png)
}

/// Writes a binary (P5) PGM, 8-bit.
pub fn save_image_pgm(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|v| (v * 255.0).round() as u8));
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a label map stored as a grayscale PNG, pixel value = label id.
pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let (w, h, labels): (usize, usize, Vec<u32>) = match open(path)? {
        DynamicImage::ImageLuma16(buf) => (
            buf.width() as usize,
            buf.height() as usize,
            buf.into_raw().into_iter().map(u32::from).collect(),
        ),
        DynamicImage::ImageLuma8(buf) => (
            buf.width() as usize,
            buf.height() as usize,
            buf.into_raw().into_iter().map(u32::from).collect(),
        ),
        _ => {
            return Err(Error::File {
                path: path.to_path_buf(),
                message: "label map must be a single-channel PNG".into(),
            })
        }
    };
    LabelMap::new(w, h, labels)
}

/// Writes a label map as a 16-bit grayscale PNG.
pub fn save_label_map(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw = labels
        .labels()
        .iter()
        .map(|&l| {
            u16::try_from(l).map_err(|_| Error::File {
                path: path.to_path_buf(),
                message: format!("label {l} does not fit in 16 bits"),
            })
        })
        .collect::<Result<Vec<u16>>>()?;
    let buf = ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(labels.width() as u32, labels.height() as u32, raw)
        .expect("buffer size matches");
    save(path, DynamicImage::ImageLuma16(buf), ImageFormat::Png)
}

/// Writes an 8-bit RGB PNG from row-major `[r, g, b]` triples.
pub fn save_rgb_png(width: usize, height: usize, rgb: Vec<[u8; 3]>, path: impl AsRef<Path>) -> Result<()> {
    let raw = rgb.into_iter().flatten().collect();
    let buf = ImageBuffer::<Rgb<u8>, Vec<u8>>::from_raw(width as u32, height as u32, raw)
        .expect("buffer size matches");
    save(path.as_ref(), DynamicImage::ImageRgb8(buf), ImageFormat::Png)
}
