//! First-order update rules: plain SGD, Nesterov momentum, RMSProp and Adam.

use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Nesterov,
    RmsProp,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            rho: 0.9,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            ..Self::default()
        }
    }
}

/// Per-parameter optimizer state.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: OptimizerConfig,
    rows: usize,
    cols: usize,
    /// Velocity (Nesterov) or first moment (Adam).
    first: Vec<f64>,
    /// Squared-gradient average (RMSProp) or second moment (Adam).
    second: Vec<f64>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, rows: usize, cols: usize) -> Result<Self> {
        if !(config.learning_rate > 0.0) || !config.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                config.learning_rate
            )));
        }
        let n = rows * cols;
        let (first, second) = match config.kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Nesterov => (vec![0.0; n], Vec::new()),
            OptimizerKind::RmsProp => (Vec::new(), vec![0.0; n]),
            OptimizerKind::Adam => (vec![0.0; n], vec![0.0; n]),
        };
        Ok(Self {
            config,
            rows,
            cols,
            first,
            second,
            step_count: 0,
        })
    }

    pub fn for_params(config: OptimizerConfig, params: &DenseMatrix) -> Result<Self> {
        Self::new(config, params.rows(), params.cols())
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn accumulators_finite(&self) -> bool {
        self.first.iter().chain(&self.second).all(|v| v.is_finite())
    }

    pub fn step(&mut self, params: &mut DenseMatrix, grads: &DenseMatrix) -> Result<()> {
        if params.shape() != (self.rows, self.cols) || grads.shape() != params.shape() {
            return Err(Error::Shape(format!(
                "optimizer tracks {:?}, got params {:?} and grads {:?}",
                (self.rows, self.cols),
                params.shape(),
                grads.shape()
            )));
        }
        self.step_slice(params.as_mut_slice(), grads.as_slice())
    }

    /// Same as [`step`](Self::step) on flat buffers of `rows · cols` entries.
    pub fn step_slice(&mut self, p: &mut [f64], g: &[f64]) -> Result<()> {
        let n = self.rows * self.cols;
        if p.len() != n || g.len() != n {
            return Err(Error::Shape(format!(
                "optimizer tracks {n} entries, got {} params and {} grads",
                p.len(),
                g.len()
            )));
        }
        self.step_count += 1;
        let c = self.config;
        let lr = c.learning_rate;
        match c.kind {
            OptimizerKind::Sgd => {
                for (p, g) in p.iter_mut().zip(g) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Nesterov => {
                // v ← μv − ηg;  p ← p + μv − ηg
                for ((p, g), v) in p.iter_mut().zip(g).zip(self.first.iter_mut()) {
                    *v = c.momentum * *v - lr * g;
                    *p += c.momentum * *v - lr * g;
                }
            }
            OptimizerKind::RmsProp => {
                for ((p, g), s) in p.iter_mut().zip(g).zip(self.second.iter_mut()) {
                    *s = c.rho * *s + (1.0 - c.rho) * g * g;
                    *p -= lr * g / (s.sqrt() + c.epsilon);
                }
            }
            OptimizerKind::Adam => {
                let t = self.step_count as i32;
                let bc1 = 1.0 - c.beta1.powi(t);
                let bc2 = 1.0 - c.beta2.powi(t);
                for (((p, g), m), v) in p
                    .iter_mut()
                    .zip(g)
                    .zip(self.first.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + c.epsilon);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn one(v: f64) -> DenseMatrix {
        DenseMatrix::row_vector(vec![v])
    }

    fn single_step(config: OptimizerConfig, p: f64, g: f64) -> f64 {
        let mut params = one(p);
        let mut state = OptimizerState::for_params(config, &params).unwrap();
        state.step(&mut params, &one(g)).unwrap();
        assert_eq!(state.step_count(), 1);
        params.get(0, 0)
    }

    #[test]
    fn sgd_step() {
        let p = single_step(OptimizerConfig::new(OptimizerKind::Sgd, 0.5), 1.0, 0.2);
        assert!((p - 0.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_has_learning_rate_magnitude() {
        let p = single_step(OptimizerConfig::new(OptimizerKind::Adam, 0.1), 0.0, 0.5);
        assert!((p + 0.1).abs() < 1e-7, "{p}");
    }

    #[test]
    fn rmsprop_first_step() {
        let cfg = OptimizerConfig {
            epsilon: 0.0,
            ..OptimizerConfig::new(OptimizerKind::RmsProp, 0.01)
        };
        let p = single_step(cfg, 1.0, 0.5);
        let expected = 1.0 - 0.01 * 0.5 / (0.1f64 * 0.25).sqrt();
        assert!((p - expected).abs() < 1e-15);
        assert!((p - 0.96838).abs() < 1e-5);
    }

    #[test]
    fn nesterov_two_steps() {
        // v1 = -0.1, p1 = 1 + 0.9(-0.1) - 0.1 = 0.81
        // v2 = 0.9(-0.1) - 0.1 = -0.19, p2 = 0.81 + 0.9(-0.19) - 0.1 = 0.539
        let mut p = one(1.0);
        let mut s = OptimizerState::for_params(OptimizerConfig::new(OptimizerKind::Nesterov, 0.1), &p).unwrap();
        s.step(&mut p, &one(1.0)).unwrap();
        assert!((p.get(0, 0) - 0.81).abs() < 1e-12);
        s.step(&mut p, &one(1.0)).unwrap();
        assert!((p.get(0, 0) - 0.539).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(OptimizerState::new(OptimizerConfig::new(OptimizerKind::Sgd, 0.0), 1, 1).is_err());
        assert!(OptimizerState::new(OptimizerConfig::new(OptimizerKind::Sgd, -1.0), 1, 1).is_err());
        let mut s = OptimizerState::new(OptimizerConfig::new(OptimizerKind::Adam, 0.1), 1, 2).unwrap();
        let mut p = one(0.0);
        assert!(s.step(&mut p, &one(0.0)).is_err());
    }

    #[test]
    fn accumulators_stay_finite_over_long_streams() {
        let mut rng = crate::seed::rng_from_seed(11);
        for kind in [OptimizerKind::Adam, OptimizerKind::RmsProp, OptimizerKind::Nesterov] {
            let mut p = DenseMatrix::zeros(2, 3);
            let mut s = OptimizerState::for_params(OptimizerConfig::new(kind, 1e-3), &p).unwrap();
            for i in 0..10_000 {
                let scale = if i % 1000 == 0 { 1e6 } else { 1.0 };
                let g = DenseMatrix::from_fn(2, 3, |_, _| rng.random_range(-1.0..1.0) * scale);
                s.step(&mut p, &g).unwrap();
            }
            assert!(s.accumulators_finite() && p.is_finite(), "{kind:?}");
            assert_eq!(s.step_count(), 10_000);
        }
    }

    proptest! {
        #[test]
        fn sgd_is_exact(values in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..20), lr in 1e-4f64..1.0) {
            let n = values.len();
            let mut p = DenseMatrix::new(1, n, values.iter().map(|v| v.0).collect()).unwrap();
            let g = DenseMatrix::new(1, n, values.iter().map(|v| v.1).collect()).unwrap();
            let mut s = OptimizerState::for_params(OptimizerConfig::new(OptimizerKind::Sgd, lr), &p).unwrap();
            s.step(&mut p, &g).unwrap();
            for (i, (p0, g0)) in values.iter().enumerate() {
                prop_assert_eq!(p.get(0, i), p0 - lr * g0);
            }
        }
    }
}
