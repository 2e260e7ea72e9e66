use crate::{Error, Result};

pub const SSIM_WINDOW: usize = 8;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// Summed-area table with a zero border: `t[(r, c)]` is the sum over
/// `[0, r) × [0, c)`.
fn integral(height: usize, width: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
    let w1 = width + 1;
    let mut t = vec![0.0; (height + 1) * w1];
    for r in 0..height {
        let mut row_sum = 0.0;
        for c in 0..width {
            row_sum += f(r * width + c);
            t[(r + 1) * w1 + c + 1] = t[r * w1 + c + 1] + row_sum;
        }
    }
    t
}

fn window_sum(t: &[f64], width: usize, r: usize, c: usize) -> f64 {
    let w1 = width + 1;
    let (r2, c2) = (r + SSIM_WINDOW, c + SSIM_WINDOW);
    t[r2 * w1 + c2] - t[r * w1 + c2] - t[r2 * w1 + c] + t[r * w1 + c]
}

/// Mean structural similarity over all 8×8 windows (stride 1) of two
/// row-major images with dynamic range 1. Local variances and covariance
/// use the unbiased `N − 1` normalisation.
pub fn ssim(a: &[f64], b: &[f64], height: usize, width: usize) -> Result<f64> {
    if a.len() != height * width || b.len() != height * width {
        return Err(Error::Shape(format!("images must hold {height}×{width} pixels")));
    }
    if height < SSIM_WINDOW || width < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "image {height}×{width} is smaller than the {SSIM_WINDOW}×{SSIM_WINDOW} window"
        )));
    }
    let sa = integral(height, width, |i| a[i]);
    let sb = integral(height, width, |i| b[i]);
    let saa = integral(height, width, |i| a[i] * a[i]);
    let sbb = integral(height, width, |i| b[i] * b[i]);
    let sab = integral(height, width, |i| a[i] * b[i]);
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let positions = (height - SSIM_WINDOW + 1) * (width - SSIM_WINDOW + 1);
    for r in 0..=height - SSIM_WINDOW {
        for c in 0..=width - SSIM_WINDOW {
            let ma = window_sum(&sa, width, r, c) / n;
            let mb = window_sum(&sb, width, r, c) / n;
            let va = (window_sum(&saa, width, r, c) - n * ma * ma) / (n - 1.0);
            let vb = (window_sum(&sbb, width, r, c) - n * mb * mb) / (n - 1.0);
            let cov = (window_sum(&sab, width, r, c) - n * ma * mb) / (n - 1.0);
            total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
        }
    }
    Ok(total / positions as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_constant_images() {
        let img: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 / 10.0).collect();
        assert_eq!(ssim(&img, &img, 10, 10).unwrap(), 1.0);
        let a = vec![0.2; 144];
        let b = vec![0.8; 144];
        let expected = (2.0 * 0.16 + C1) / (0.04 + 0.64 + C1);
        assert!((ssim(&a, &b, 12, 12).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.4707).abs() < 1e-4);
        assert!(ssim(&a[..49], &b[..49], 7, 7).is_err());
    }
}
