use rand::Rng;

use super::DenseMatrix;
use crate::{Error, Result};

/// Glorot-uniform weights of shape `fan_out × fan_in`.
pub fn init_weights<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Result<DenseMatrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::InvalidArgument(format!(
            "weight dimensions must be positive, got fan_in={fan_in} fan_out={fan_out}"
        )));
    }
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Ok(DenseMatrix::from_fn(fan_out, fan_in, |_, _| {
        rng.random_range(-limit..=limit)
    }))
}

/// Inverted-dropout mask: entries are `1/keep_prob` with probability
/// `keep_prob`, otherwise 0.
pub fn dropout_mask<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    keep_prob: f64,
    rng: &mut R,
) -> Result<DenseMatrix> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep probability must lie in (0, 1], got {keep_prob}"
        )));
    }
    if keep_prob == 1.0 {
        return Ok(DenseMatrix::filled(rows, cols, 1.0));
    }
    let scale = 1.0 / keep_prob;
    Ok(DenseMatrix::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() < keep_prob {
            scale
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn glorot_bound_and_determinism() {
        let w = init_weights(3, 3, &mut rng_from_seed(1)).unwrap();
        assert!(w.as_slice().iter().all(|v| v.abs() <= 1.0));
        assert_eq!(w.shape(), (3, 3));
        assert_eq!(w, init_weights(3, 3, &mut rng_from_seed(1)).unwrap());
        assert!(init_weights(0, 3, &mut rng_from_seed(1)).is_err());
    }

    #[test]
    fn glorot_mean_concentrates() {
        let w = init_weights(1000, 1000, &mut rng_from_seed(2)).unwrap();
        let mean = w.as_slice().iter().sum::<f64>() / 1e6;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn dropout_contract() {
        let ones = dropout_mask(4, 5, 1.0, &mut rng_from_seed(3)).unwrap();
        assert!(ones.as_slice().iter().all(|&v| v == 1.0));

        let m = dropout_mask(100, 100, 0.5, &mut rng_from_seed(4)).unwrap();
        let kept = m.as_slice().iter().filter(|&&v| v != 0.0).count() as f64 / 1e4;
        assert!((kept - 0.5).abs() < 0.02, "kept {kept}");
        assert!(m.as_slice().iter().all(|&v| v == 0.0 || v == 2.0));
        assert_eq!(m, dropout_mask(100, 100, 0.5, &mut rng_from_seed(4)).unwrap());

        assert!(dropout_mask(1, 1, 0.0, &mut rng_from_seed(5)).is_err());
        assert!(dropout_mask(1, 1, 1.5, &mut rng_from_seed(5)).is_err());
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let x: Vec<f64> = (0..50).map(|i| 1.0 + (i as f64).sin()).collect();
        let target = x.iter().sum::<f64>() / x.len() as f64;
        for keep in [0.5, 0.7, 0.9] {
            let mut rng = rng_from_seed(6);
            let mut acc = 0.0;
            let draws = 2000;
            for _ in 0..draws {
                let m = dropout_mask(1, x.len(), keep, &mut rng).unwrap();
                acc += m.as_slice().iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            }
            let mean = acc / (draws * x.len()) as f64;
            assert!((mean - target).abs() / target < 0.01, "keep {keep}: {mean} vs {target}");
        }
    }
}
