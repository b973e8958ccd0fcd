//! Structural similarity with an 11x11 Gaussian window (sigma 1.5) and zero
//! padding, averaged over pixels and channels.

use crate::error::{Error, Result};
use crate::geometry::ColorImage;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

/// Normalised 1-D Gaussian taps.
pub fn gaussian_taps() -> [f64; WINDOW] {
    let mut g = [0.0; WINDOW];
    let half = (WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let x = i as f64 - half;
        *v = (-x * x / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

/// Separable "same" convolution with implicit zeros outside the image.
fn blur(plane: &[f64], w: usize, h: usize, g: &[f64; WINDOW]) -> Vec<f64> {
    let r = (WINDOW / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, gk) in g.iter().enumerate() {
                let xx = x as isize + k as isize - r;
                if xx >= 0 && (xx as usize) < w {
                    acc += gk * plane[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, gk) in g.iter().enumerate() {
                let yy = y as isize + k as isize - r;
                if yy >= 0 && (yy as usize) < h {
                    acc += gk * tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize, g: &[f64; WINDOW]) -> f64 {
    let sq = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = blur(a, w, h, g);
    let mu_b = blur(b, w, h, g);
    let aa = blur(&sq(a, a), w, h, g);
    let bb = blur(&sq(b, b), w, h, g);
    let ab = blur(&sq(a, b), w, h, g);
    let mut sum = 0.0;
    for i in 0..w * h {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        sum +=
            ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
    }
    sum
}

pub(crate) fn check_images(a: &ColorImage, b: &ColorImage) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::invalid(format!(
            "image dimensions differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if a.width() == 0 || a.height() == 0 {
        return Err(Error::invalid("images are empty"));
    }
    Ok(())
}

/// Mean SSIM over all pixels of all three channels.
pub fn ssim(a: &ColorImage, b: &ColorImage) -> Result<f64> {
    check_images(a, b)?;
    let (w, h) = (a.width(), a.height());
    let g = gaussian_taps();
    let total: f64 = (0..3)
        .map(|c| ssim_plane(&a.channel(c), &b.channel(c), w, h, &g))
        .sum();
    Ok(total / (3 * w * h) as f64)
}
