//! PNG interchange for depth (16-bit gray), normals and color (8-bit RGB).

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use super::{read_file, write_atomic};
use crate::error::{Error, Result};
use crate::geometry::{ColorImage, DepthMap, NormalFrame, NormalMap, Vec3};

/// Decoded normals shorter than this are treated as invalid.
pub const MIN_DECODED_NORM: f64 = 0.5;

fn decode(path: &Path) -> Result<DynamicImage> {
    let bytes = read_file(path)?;
    Ok(image::load_from_memory_with_format(
        &bytes,
        ImageFormat::Png,
    )?)
}

fn encode(path: &Path, img: DynamicImage) -> Result<()> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    write_atomic(path, &buf.into_inner())
}

fn check_scale(depth_scale: f64) -> Result<()> {
    if depth_scale > 0.0 && depth_scale.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "depth_scale must be positive, got {depth_scale}"
        )))
    }
}

/// Depth in meters is the stored value times `depth_scale`; 0 is invalid.
pub fn read_depth_png(path: impl AsRef<Path>, depth_scale: f64) -> Result<DepthMap> {
    check_scale(depth_scale)?;
    let path = path.as_ref();
    let DynamicImage::ImageLuma16(img) = decode(path)? else {
        return Err(Error::invalid(format!(
            "{}: depth PNG must be 16-bit grayscale",
            path.display()
        )));
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    DepthMap::from_vec(
        w,
        h,
        img.into_raw()
            .into_iter()
            .map(|v| v as f64 * depth_scale)
            .collect(),
    )
}

pub fn depth_to_png16(depth: &DepthMap, depth_scale: f64) -> Result<Vec<u16>> {
    check_scale(depth_scale)?;
    depth
        .values()
        .iter()
        .map(|&d| {
            if d <= 0.0 {
                return Ok(0);
            }
            let q = (d / depth_scale).round();
            if q > u16::MAX as f64 {
                Err(Error::invalid(format!(
                    "depth {d} m exceeds the 16-bit range at scale {depth_scale}"
                )))
            } else {
                Ok(q as u16)
            }
        })
        .collect()
}

pub fn write_depth_png(path: impl AsRef<Path>, depth: &DepthMap, depth_scale: f64) -> Result<()> {
    let raw = depth_to_png16(depth, depth_scale)?;
    let img =
        ImageBuffer::<Luma<u16>, _>::from_raw(depth.width() as u32, depth.height() as u32, raw)
            .expect("buffer size matches map");
    encode(path.as_ref(), DynamicImage::ImageLuma16(img))
}

/// `n = 2·rgb/255 − 1`, renormalized; short vectors become invalid.
pub fn decode_normal_rgb(rgb: [u8; 3]) -> Vec3 {
    let n =
        Vec3::new(rgb[0] as f64, rgb[1] as f64, rgb[2] as f64) * (2.0 / 255.0) - Vec3::repeat(1.0);
    let len = n.norm();
    if len < MIN_DECODED_NORM {
        Vec3::zeros()
    } else {
        n / len
    }
}

/// Invalid normals encode as mid-gray, which decodes as invalid.
pub fn encode_normal_rgb(n: &Vec3) -> [u8; 3] {
    if n.norm() == 0.0 {
        return [128, 128, 128];
    }
    let q = |c: f64| ((c + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8;
    [q(n.x), q(n.y), q(n.z)]
}

pub fn read_normal_png(path: impl AsRef<Path>, frame: NormalFrame) -> Result<NormalMap> {
    let img = decode(path.as_ref())?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    NormalMap::from_vec(
        w,
        h,
        frame,
        img.pixels().map(|p| decode_normal_rgb(p.0)).collect(),
    )
}

pub fn write_normal_png(path: impl AsRef<Path>, normals: &NormalMap) -> Result<()> {
    let raw: Vec<u8> = normals
        .values()
        .iter()
        .flat_map(encode_normal_rgb)
        .collect();
    let img =
        ImageBuffer::<Rgb<u8>, _>::from_raw(normals.width() as u32, normals.height() as u32, raw)
            .expect("buffer size matches map");
    encode(path.as_ref(), DynamicImage::ImageRgb8(img))
}

pub fn read_color_png(path: impl AsRef<Path>) -> Result<ColorImage> {
    let img = decode(path.as_ref())?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    ColorImage::from_vec(
        w,
        h,
        img.pixels()
            .map(|p| p.0.map(|c| c as f64 / 255.0))
            .collect(),
    )
}

pub fn write_color_png(path: impl AsRef<Path>, color: &ColorImage) -> Result<()> {
    let raw: Vec<u8> = color
        .pixels()
        .iter()
        .flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect();
    let img = ImageBuffer::<Rgb<u8>, _>::from_raw(color.width() as u32, color.height() as u32, raw)
        .expect("buffer size matches image");
    encode(path.as_ref(), DynamicImage::ImageRgb8(img))
}
