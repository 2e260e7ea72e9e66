//! Synthetic grey-scale images made of Gaussian blobs, one image per row.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ColumnSchema, TabularDataset};
use crate::seed::rng_from_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub n_images: usize,
    pub height: usize,
    pub width: usize,
    pub max_blobs: usize,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            n_images: 5000,
            height: 28,
            width: 28,
            max_blobs: 3,
            seed: 0,
        }
    }
}

/// Pixel columns named `p<row>_<col>`.
pub fn image_schema(height: usize, width: usize) -> Vec<ColumnSchema> {
    (0..height)
        .flat_map(|r| (0..width).map(move |c| ColumnSchema::continuous(format!("p{r}_{c}"))))
        .collect()
}

/// Each image sums 1 to `max_blobs` isotropic Gaussian bumps with random
/// centre, radius and brightness, clipped to `[0, 1]`.
pub fn generate_blobs(spec: &BlobSpec) -> Result<TabularDataset> {
    if spec.n_images == 0 || spec.height < 2 || spec.width < 2 || spec.max_blobs == 0 {
        return Err(Error::InvalidArgument(format!("invalid blob image spec {spec:?}")));
    }
    let mut rng = rng_from_seed(spec.seed);
    let (h, w) = (spec.height as f64, spec.width as f64);
    let mut values = Vec::with_capacity(spec.n_images * spec.height * spec.width);
    for _ in 0..spec.n_images {
        let count = rng.random_range(1..=spec.max_blobs);
        let blobs: Vec<(f64, f64, f64, f64)> = (0..count)
            .map(|_| {
                (
                    rng.random_range(0.2 * h..0.8 * h),
                    rng.random_range(0.2 * w..0.8 * w),
                    rng.random_range(0.08..0.2) * h.min(w),
                    rng.random_range(0.5..1.0),
                )
            })
            .collect();
        for r in 0..spec.height {
            for c in 0..spec.width {
                let v: f64 = blobs
                    .iter()
                    .map(|&(cy, cx, s, a)| {
                        let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
                        a * (-d2 / (2.0 * s * s)).exp()
                    })
                    .sum();
                values.push(v.clamp(0.0, 1.0));
            }
        }
    }
    TabularDataset::fully_observed(image_schema(spec.height, spec.width), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn images_are_in_range_and_reproducible() {
        let spec = BlobSpec {
            n_images: 20,
            height: 12,
            width: 10,
            max_blobs: 2,
            seed: 4,
        };
        let a = generate_blobs(&spec).unwrap();
        assert_eq!((a.n_samples(), a.n_columns()), (20, 120));
        assert!(a.values().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(a.values().iter().any(|&v| v > 0.4));
        assert_eq!(a, generate_blobs(&spec).unwrap());
        assert_ne!(a, generate_blobs(&BlobSpec { seed: 5, ..spec }).unwrap());
    }
}
