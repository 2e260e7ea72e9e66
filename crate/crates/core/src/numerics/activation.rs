use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Tanh,
    #[serde(rename = "relu")]
    ReLU,
    Linear,
    Sigmoid,
    /// Only valid on designated output blocks.
    Softmax,
}

impl ActivationKind {
    pub fn is_hidden_capable(self) -> bool {
        !matches!(self, ActivationKind::Softmax)
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Self::Tanh),
            "relu" => Ok(Self::ReLU),
            "linear" => Ok(Self::Linear),
            "sigmoid" => Ok(Self::Sigmoid),
            "softmax" => Ok(Self::Softmax),
            other => Err(Error::InvalidArgument(format!(
                "unknown activation '{other}'"
            ))),
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// In-place softmax over `row[range]`, shifted by the block maximum.
pub(crate) fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

pub fn apply_activation(
    kind: ActivationKind,
    x: &DenseMatrix,
    block_bounds: Option<&[Range<usize>]>,
) -> Result<DenseMatrix> {
    match kind {
        ActivationKind::Tanh => Ok(x.map(f64::tanh)),
        ActivationKind::ReLU => Ok(x.map(|v| v.max(0.0))),
        ActivationKind::Linear => Ok(x.clone()),
        ActivationKind::Sigmoid => Ok(x.map(sigmoid)),
        ActivationKind::Softmax => {
            let blocks = block_bounds.ok_or_else(|| {
                Error::InvalidArgument("softmax requires block bounds".into())
            })?;
            check_blocks(blocks, x.cols())?;
            let mut out = x.clone();
            for r in 0..out.rows() {
                let row = out.row_mut(r);
                for block in blocks {
                    softmax_in_place(&mut row[block.clone()]);
                }
            }
            Ok(out)
        }
    }
}

fn check_blocks(blocks: &[Range<usize>], cols: usize) -> Result<()> {
    let mut sorted: Vec<&Range<usize>> = blocks.iter().collect();
    sorted.sort_by_key(|r| r.start);
    let mut end = 0;
    for r in sorted {
        if r.is_empty() || r.start < end || r.end > cols {
            return Err(Error::InvalidArgument(format!(
                "softmax block {r:?} is empty, overlapping or out of {cols} columns"
            )));
        }
        end = r.end;
    }
    Ok(())
}

/// Elementwise derivative with respect to the pre-activation.
pub fn activation_derivative(kind: ActivationKind, pre_activation: &DenseMatrix) -> Result<DenseMatrix> {
    match kind {
        ActivationKind::Tanh => Ok(pre_activation.map(|v| {
            let t = v.tanh();
            1.0 - t * t
        })),
        ActivationKind::ReLU => Ok(pre_activation.map(|v| if v > 0.0 { 1.0 } else { 0.0 })),
        ActivationKind::Linear => Ok(pre_activation.map(|_| 1.0)),
        ActivationKind::Sigmoid => Ok(pre_activation.map(|v| {
            let s = sigmoid(v);
            s * (1.0 - s)
        })),
        ActivationKind::Softmax => Err(Error::InvalidArgument(
            "softmax derivative is only available through the cross-entropy gradient".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(v: f64) -> DenseMatrix {
        DenseMatrix::row_vector(vec![v])
    }

    #[test]
    fn fixed_points() {
        assert_eq!(apply_activation(ActivationKind::Tanh, &scalar(0.0), None).unwrap().get(0, 0), 0.0);
        assert_eq!(apply_activation(ActivationKind::ReLU, &scalar(-2.0), None).unwrap().get(0, 0), 0.0);
        let sm = apply_activation(
            ActivationKind::Softmax,
            &DenseMatrix::row_vector(vec![0.3; 4]),
            Some(&[0..4]),
        )
        .unwrap();
        for &v in sm.as_slice() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn derivatives_at_known_points() {
        assert_eq!(activation_derivative(ActivationKind::Tanh, &scalar(0.0)).unwrap().get(0, 0), 1.0);
        assert_eq!(activation_derivative(ActivationKind::ReLU, &scalar(3.0)).unwrap().get(0, 0), 1.0);
        assert_eq!(activation_derivative(ActivationKind::ReLU, &scalar(0.0)).unwrap().get(0, 0), 0.0);
        assert_eq!(activation_derivative(ActivationKind::Sigmoid, &scalar(0.0)).unwrap().get(0, 0), 0.25);
    }

    #[test]
    fn softmax_errors() {
        let x = DenseMatrix::zeros(2, 3);
        assert!(apply_activation(ActivationKind::Softmax, &x, None).is_err());
        assert!(apply_activation(ActivationKind::Softmax, &x, Some(&[0..2, 1..3])).is_err());
        assert!(activation_derivative(ActivationKind::Softmax, &x).is_err());
        assert!("gelu".parse::<ActivationKind>().is_err());
    }

    #[test]
    fn softmax_blocks_sum_to_one_and_others_untouched() {
        let x = DenseMatrix::from_fn(3, 6, |r, c| (r as f64 + 1.0) * (c as f64 - 2.5));
        let y = apply_activation(ActivationKind::Softmax, &x, Some(&[1..3, 3..6])).unwrap();
        for r in 0..3 {
            assert_eq!(y.get(r, 0), x.get(r, 0));
            let a: f64 = y.row(r)[1..3].iter().sum();
            let b: f64 = y.row(r)[3..6].iter().sum();
            assert!((a - 1.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn derivative_matches_central_differences(
            kind in prop::sample::select(vec![
                ActivationKind::Tanh, ActivationKind::ReLU,
                ActivationKind::Linear, ActivationKind::Sigmoid,
            ]),
            x in -4.0f64..4.0,
        ) {
            prop_assume!(kind != ActivationKind::ReLU || x.abs() > 1e-3);
            let h = 1e-6;
            let f = |v: f64| apply_activation(kind, &scalar(v), None).unwrap().get(0, 0);
            let numeric = (f(x + h) - f(x - h)) / (2.0 * h);
            let analytic = activation_derivative(kind, &scalar(x)).unwrap().get(0, 0);
            let denom = analytic.abs().max(numeric.abs());
            if denom > 0.0 {
                prop_assert!((analytic - numeric).abs() / denom < 1e-6,
                    "{kind:?} at {x}: {analytic} vs {numeric}");
            } else {
                prop_assert_eq!(numeric, 0.0);
            }
        }
    }
}
