//! PSNR and single-scale SSIM over `[0, 1]` float images.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::image::ImageRgb;

/// Render-quality summary for one comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    /// Number of pixels actually compared.
    pub n_pixels: usize,
}

/// Peak signal-to-noise ratio in dB over the valid pixels (all channels).
/// Identical images yield `f64::INFINITY`; text output caps that at 99 dB.
pub fn psnr(a: &ImageRgb, b: &ImageRgb, mask: Option<&[bool]>) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(invalid("psnr inputs must have equal dimensions"));
    }
    let n_px = a.width() * a.height();
    if let Some(m) = mask {
        if m.len() != n_px {
            return Err(invalid("psnr mask must have one entry per pixel"));
        }
    }
    let mut se = 0.0f64;
    let mut n = 0usize;
    let (da, db) = (a.data(), b.data());
    for p in 0..n_px {
        if mask.map_or(true, |m| m[p]) {
            for ch in 0..3 {
                let d = da[p * 3 + ch] - db[p * 3 + ch];
                se += d * d;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(invalid("psnr needs at least one valid pixel"));
    }
    let mse = se / (n * 3) as f64;
    if mse == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * libm::log10(1.0 / mse))
    }
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let mid = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *v = libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
        sum += *v;
    }
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

/// Horizontal then vertical convolution with the 11-tap kernel, valid
/// region only: output is `(w - 10) x (h - 10)`.
fn blur_valid(src: &[f64], w: usize, h: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - (SSIM_WINDOW - 1);
    let oh = h - (SSIM_WINDOW - 1);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, &kv) in kernel.iter().enumerate() {
                acc += kv * src[y * w + x + t];
            }
            tmp[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, &kv) in kernel.iter().enumerate() {
                acc += kv * tmp[(y + t) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Standard single-scale SSIM: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1.0, averaged over channels and
/// all fully-interior window positions.
pub fn ssim(a: &ImageRgb, b: &ImageRgb) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(invalid("ssim inputs must have equal dimensions"));
    }
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(invalid("ssim inputs must be at least 11x11"));
    }
    let c1 = (SSIM_K1 * 1.0) * (SSIM_K1 * 1.0);
    let c2 = (SSIM_K2 * 1.0) * (SSIM_K2 * 1.0);
    let kernel = gaussian_kernel();
    let n_px = w * h;
    let mut total = 0.0f64;
    let mut count = 0usize;
    let mut xa = vec![0.0; n_px];
    let mut xb = vec![0.0; n_px];
    let mut xaa = vec![0.0; n_px];
    let mut xbb = vec![0.0; n_px];
    let mut xab = vec![0.0; n_px];
    for ch in 0..3 {
        for p in 0..n_px {
            let va = a.data()[p * 3 + ch];
            let vb = b.data()[p * 3 + ch];
            xa[p] = va;
            xb[p] = vb;
            xaa[p] = va * va;
            xbb[p] = vb * vb;
            xab[p] = va * vb;
        }
        let mu_a = blur_valid(&xa, w, h, &kernel);
        let mu_b = blur_valid(&xb, w, h, &kernel);
        let m_aa = blur_valid(&xaa, w, h, &kernel);
        let m_bb = blur_valid(&xbb, w, h, &kernel);
        let m_ab = blur_valid(&xab, w, h, &kernel);
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = m_aa[i] - ma * ma;
            let vb = m_bb[i] - mb * mb;
            let cov = m_ab[i] - ma * mb;
            let s = ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            total += s;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_identical_is_infinite() {
        let a = ImageRgb::constant(16, 16, [0.3, 0.6, 0.9]);
        assert_eq!(psnr(&a, &a, None).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_uniform_tenth_is_20db() {
        let a = ImageRgb::constant(16, 16, [0.5, 0.5, 0.5]);
        let b = ImageRgb::constant(16, 16, [0.6, 0.6, 0.6]);
        assert!((psnr(&a, &b, None).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_is_symmetric() {
        let a = ImageRgb::from_fn(8, 8, |x, y| [(x as f64) / 8.0, (y as f64) / 8.0, 0.5]);
        let b = ImageRgb::constant(8, 8, [0.4, 0.4, 0.4]);
        let ab = psnr(&a, &b, None).unwrap();
        let ba = psnr(&b, &a, None).unwrap();
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn psnr_rejects_degenerate_inputs() {
        let a = ImageRgb::constant(8, 8, [0.1; 3]);
        let b = ImageRgb::constant(8, 4, [0.1; 3]);
        assert!(psnr(&a, &b, None).is_err());
        let empty = vec![false; 64];
        assert!(psnr(&a, &a, Some(&empty)).is_err());
    }

    #[test]
    fn ssim_identical_is_one() {
        let a = ImageRgb::from_fn(24, 24, |x, y| {
            [((x * 7 + y * 3) % 11) as f64 / 11.0, 0.3, (x as f64) / 24.0]
        });
        let s = ssim(&a, &a).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_is_symmetric() {
        let a = ImageRgb::from_fn(20, 20, |x, _| [(x as f64) / 20.0, 0.2, 0.9]);
        let b = ImageRgb::from_fn(20, 20, |_, y| [0.7, (y as f64) / 20.0, 0.1]);
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn ssim_constant_images_match_luminance_term() {
        // Zero variance: contrast/structure term is exactly 1, leaving
        // (2 u1 u2 + C1) / (u1^2 + u2^2 + C1) with C1 = (K1 L)^2 = 1e-4.
        let a = ImageRgb::constant(16, 16, [0.25; 3]);
        let b = ImageRgb::constant(16, 16, [0.75; 3]);
        let s = ssim(&a, &b).unwrap();
        assert!((s - 0.6000639897616381).abs() < 1e-12);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = ImageRgb::constant(10, 16, [0.5; 3]);
        assert!(ssim(&a, &a).is_err());
    }
}
