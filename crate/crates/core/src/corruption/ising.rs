//! Spatially correlated masks from a square-lattice Ising model.
//!
//! Spins live on a periodic `height × width` lattice; an up spin marks a
//! present pixel and a down spin a missing one. Single-site Metropolis
//! sweeps run at dimensionless coupling `J` (nearest neighbours) and field
//! `H`. The field is found by bisection so that the final down-spin fraction
//! hits the requested target.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed::rng_from_seed;
use crate::{Error, Result};

const FIELD_BOUND: f64 = 6.0;
const CALIBRATION_STEPS: usize = 40;
const CALIBRATION_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingMask {
    pub height: usize,
    pub width: usize,
    /// Row-major; true = missing (down spin).
    pub missing: Vec<bool>,
    pub coupling: f64,
    pub field: f64,
    pub sweeps: usize,
    pub achieved_fraction: f64,
}

/// Runs the sampler at a fixed field and returns the missing mask.
pub fn ising_sample(
    height: usize,
    width: usize,
    coupling: f64,
    field: f64,
    sweeps: usize,
    seed: u64,
) -> Vec<bool> {
    let mut rng = rng_from_seed(seed);
    let n = height * width;
    let mut spins: Vec<i8> = (0..n)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();

    // acceptance[s][k]: spin s ∈ {−1, +1} (index 0/1) with neighbour sum 2k − 4
    let mut acceptance = [[0.0f64; 5]; 2];
    for (si, s) in [-1.0f64, 1.0].into_iter().enumerate() {
        for k in 0..5 {
            let local = 2.0 * k as f64 - 4.0;
            let delta = 2.0 * s * (coupling * local + field);
            acceptance[si][k] = (-delta).exp().min(1.0);
        }
    }

    for _ in 0..sweeps {
        for r in 0..height {
            let up = (r + height - 1) % height;
            let down = (r + 1) % height;
            for c in 0..width {
                let left = (c + width - 1) % width;
                let right = (c + 1) % width;
                let i = r * width + c;
                let sum = spins[up * width + c] + spins[down * width + c] + spins[r * width + left]
                    + spins[r * width + right];
                let k = ((sum + 4) / 2) as usize;
                let si = usize::from(spins[i] > 0);
                // always draw, so streams align across fields during calibration
                let u: f64 = rng.random();
                if u < acceptance[si][k] {
                    spins[i] = -spins[i];
                }
            }
        }
    }
    spins.into_iter().map(|s| s < 0).collect()
}

fn missing_fraction(mask: &[bool]) -> f64 {
    mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64
}

/// Calibrates the field so the missing fraction lands within ±0.05 of
/// `target_fraction`.
pub fn ising_mask(
    height: usize,
    width: usize,
    target_fraction: f64,
    coupling: f64,
    sweeps: usize,
    seed: u64,
) -> Result<IsingMask> {
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target fraction must lie in (0, 1), got {target_fraction}"
        )));
    }
    if sweeps == 0 || height == 0 || width == 0 {
        return Err(Error::InvalidArgument(
            "ising mask needs at least one sweep and a non-empty lattice".into(),
        ));
    }
    if !coupling.is_finite() {
        return Err(Error::InvalidArgument(format!("coupling {coupling} is not finite")));
    }

    let run = |field: f64| {
        let mask = ising_sample(height, width, coupling, field, sweeps, seed);
        let frac = missing_fraction(&mask);
        (mask, frac, field)
    };
    let mut best = run(0.0);
    let (mut lo, mut hi) = (-FIELD_BOUND, FIELD_BOUND);
    for _ in 0..CALIBRATION_STEPS {
        if (best.1 - target_fraction).abs() <= 0.005 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let candidate = run(mid);
        // a larger field favours present pixels
        if candidate.1 > target_fraction {
            lo = mid;
        } else {
            hi = mid;
        }
        if (candidate.1 - target_fraction).abs() < (best.1 - target_fraction).abs() {
            best = candidate;
        }
    }
    let (missing, achieved, field) = best;
    if (achieved - target_fraction).abs() > CALIBRATION_TOLERANCE {
        return Err(Error::Calibration {
            target: target_fraction,
            achieved,
        });
    }
    Ok(IsingMask {
        height,
        width,
        missing,
        coupling,
        field,
        sweeps,
        achieved_fraction: achieved,
    })
}

/// Fraction of periodic nearest-neighbour pairs in the same state.
pub fn neighbour_agreement(mask: &[bool], height: usize, width: usize) -> f64 {
    let mut same = 0usize;
    for r in 0..height {
        for c in 0..width {
            let v = mask[r * width + c];
            same += usize::from(v == mask[r * width + (c + 1) % width]);
            same += usize::from(v == mask[((r + 1) % height) * width + c]);
        }
    }
    same as f64 / (2 * height * width) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    #[test]
    fn infinite_temperature_is_fair() {
        let mask = ising_sample(64, 64, 0.0, 0.0, 50, 3);
        let f = missing_fraction(&mask);
        assert!((f - 0.5).abs() < 0.02, "{f}");
    }

    #[test]
    fn calibration_hits_target() {
        let m = ising_mask(64, 64, 0.65, 0.4, 200, 7).unwrap();
        assert!((0.60..=0.70).contains(&m.achieved_fraction), "{}", m.achieved_fraction);
        assert_eq!(m.missing.len(), 64 * 64);
        assert_eq!(m, ising_mask(64, 64, 0.65, 0.4, 200, 7).unwrap());
    }

    #[test]
    fn coupling_produces_clusters() {
        let hot = ising_sample(64, 64, 0.0, 0.0, 200, 11);
        let cold = ising_mask(64, 64, 0.5, 0.4, 200, 11).unwrap();
        let a_hot = neighbour_agreement(&hot, 64, 64);
        let a_cold = neighbour_agreement(&cold.missing, 64, 64);
        assert!(a_cold > a_hot + 0.1, "{a_cold} vs {a_hot}");

        let mut shuffled = cold.missing.clone();
        shuffled.shuffle(&mut rng_from_seed(12));
        assert!(a_cold > neighbour_agreement(&shuffled, 64, 64));
    }

    #[test]
    fn invalid_arguments() {
        assert!(ising_mask(8, 8, 0.0, 0.4, 10, 1).is_err());
        assert!(ising_mask(8, 8, 0.5, 0.4, 0, 1).is_err());
    }
}
