//! Least-squares inversion of affine branch relations.
//!
//! Every estimator in the crate has the same shape: record `i` falls in a
//! class with known coefficients `x_i`, and `E[y_i] = x_i . theta`. Records
//! are aggregated per class so memory is independent of the shot count.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{QError, Result};

#[derive(Clone, Debug, Default)]
struct ClassStats {
    x: Vec<f64>,
    n: usize,
    sum: f64,
    sum_sq: f64,
}

/// Ordinary least squares with a heteroskedasticity-robust covariance.
#[derive(Clone, Debug, Default)]
pub struct LinearEstimator {
    params: usize,
    classes: BTreeMap<Vec<u64>, ClassStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    pub records: usize,
}

impl LinearEstimator {
    pub fn new(params: usize) -> Self {
        LinearEstimator { params, classes: BTreeMap::new() }
    }

    pub fn add(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.params);
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let entry = self.classes.entry(key).or_insert_with(|| ClassStats { x: x.to_vec(), ..Default::default() });
        entry.n += 1;
        entry.sum += y;
        entry.sum_sq += y * y;
    }

    pub fn records(&self) -> usize {
        self.classes.values().map(|c| c.n).sum()
    }

    pub fn solve(&self) -> Result<Estimate> {
        let records = self.records();
        if records == 0 {
            return Err(QError::Empty("no records to estimate from".into()));
        }
        let p = self.params;
        let mut xtx = DMatrix::<f64>::zeros(p, p);
        let mut xty = DVector::<f64>::zeros(p);
        for c in self.classes.values() {
            let x = DVector::from_column_slice(&c.x);
            xtx += &x * x.transpose() * c.n as f64;
            xty += &x * c.sum;
        }
        let inv = xtx
            .clone()
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or_else(|| QError::InvalidArgument("estimator is not identifiable from these records".into()))?;
        let theta = &inv * xty;
        let mut meat = DMatrix::<f64>::zeros(p, p);
        for c in self.classes.values() {
            let x = DVector::from_column_slice(&c.x);
            let fit = x.dot(&theta);
            let rss = (c.sum_sq - 2.0 * fit * c.sum + c.n as f64 * fit * fit).max(0.0);
            meat += &x * x.transpose() * rss;
        }
        let cov = &inv * meat * &inv;
        Ok(Estimate {
            value: theta.iter().copied().collect(),
            stderr: (0..p).map(|k| cov[(k, k)].max(0.0).sqrt()).collect(),
            records,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_class_is_sample_mean() {
        let mut e = LinearEstimator::new(1);
        for y in [1.0, 2.0, 3.0, 6.0] {
            e.add(&[1.0], y);
        }
        let est = e.solve().unwrap();
        assert!((est.value[0] - 3.0).abs() < 1e-15);
        // HC0: sqrt(sum r^2) / n
        let expect = (4.0f64 + 1.0 + 0.0 + 9.0).sqrt() / 4.0;
        assert!((est.stderr[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn recovers_exact_two_parameter_model() {
        let mut e = LinearEstimator::new(2);
        for (x0, x1) in [(1.0, 0.0), (1.0, 1.0), (0.5, -2.0)] {
            e.add(&[x0, x1], 3.0 * x0 - 0.25 * x1);
        }
        let est = e.solve().unwrap();
        assert!((est.value[0] - 3.0).abs() < 1e-12);
        assert!((est.value[1] + 0.25).abs() < 1e-12);
        assert!(est.stderr.iter().all(|s| *s < 1e-6));
    }

    #[test]
    fn errors_on_empty_and_unidentifiable() {
        assert!(matches!(LinearEstimator::new(1).solve(), Err(QError::Empty(_))));
        let mut e = LinearEstimator::new(2);
        e.add(&[1.0, 1.0], 1.0);
        assert!(matches!(e.solve(), Err(QError::InvalidArgument(_))));
    }
}
