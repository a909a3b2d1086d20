//! Hebbian increments `w_ij += α s_i s_j` (i ≠ j).
//!
//! Learned weights are kept as `W₀ + α·H` where `H` holds exact integer
//! co-activation counts. Repeated identical rank-1 increments then batch
//! into a single multiply without any rounding difference.

use crate::error::{check_dim, Error, Result};
use crate::network::{StateVector, WeightMatrix, WeightRole};

/// Applies one Hebbian increment to a floating-point matrix in place.
pub fn hebbian_update(weights: &mut WeightMatrix, state: &StateVector, alpha: f64) -> Result<()> {
    check_dim("state", weights.n(), state.len())?;
    if !(alpha >= 0.0) {
        return Err(Error::config(format!("learning rate {alpha} must be non-negative")));
    }
    if alpha == 0.0 {
        return Ok(());
    }
    let n = weights.n();
    let s = state.as_slice();
    let w = weights.as_mut_slice();
    for i in 0..n {
        let si = alpha * f64::from(s[i]);
        for j in 0..n {
            if i != j {
                w[i * n + j] += si * f64::from(s[j]);
            }
        }
    }
    Ok(())
}

/// Integer co-activation counts `H`, symmetric with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HebbianCounts {
    n: usize,
    counts: Vec<i64>,
}

impl HebbianCounts {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.counts[i * self.n + j]
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[i64] {
        &self.counts[i * self.n..(i + 1) * self.n]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [i64] {
        &mut self.counts[i * self.n..(i + 1) * self.n]
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// One elementwise pass: `H_ij += s_i s_j` for `i ≠ j`.
    pub fn add_outer(&mut self, s: &[i8]) {
        let n = self.n;
        for i in 0..n {
            let si = i64::from(s[i]);
            let row = &mut self.counts[i * n..(i + 1) * n];
            for (j, c) in row.iter_mut().enumerate() {
                if j != i {
                    *c += si * i64::from(s[j]);
                }
            }
        }
    }

    /// `times` identical increments in one pass.
    pub fn add_outer_times(&mut self, s: &[i8], times: i64) {
        let n = self.n;
        for i in 0..n {
            let si = times * i64::from(s[i]);
            let row = &mut self.counts[i * n..(i + 1) * n];
            for (j, c) in row.iter_mut().enumerate() {
                if j != i {
                    *c += si * i64::from(s[j]);
                }
            }
        }
    }

    /// `base + α·H` as a learned weight matrix.
    pub fn materialize(&self, base: &WeightMatrix, alpha: f64) -> WeightMatrix {
        assert_eq!(base.n(), self.n);
        let data = base
            .as_slice()
            .iter()
            .zip(&self.counts)
            .map(|(&w, &c)| w + alpha * c as f64)
            .collect();
        WeightMatrix::from_raw(self.n, data, WeightRole::Learned)
    }

    /// Consumes the counts, reusing their allocation for the result.
    pub fn into_weights(self, base: &WeightMatrix, alpha: f64) -> WeightMatrix {
        assert_eq!(base.n(), self.n);
        let n = self.n;
        let data: Vec<f64> = self
            .counts
            .into_iter()
            .zip(base.as_slice())
            .map(|(c, &w)| w + alpha * c as f64)
            .collect();
        WeightMatrix::from_raw(n, data, WeightRole::Learned)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_leaves_weights_unchanged() {
        let mut w = WeightMatrix::from_rows(&[vec![0.0, 0.3], vec![0.3, 0.0]]).unwrap();
        let before = w.clone();
        hebbian_update(&mut w, &StateVector::new(vec![1, -1]).unwrap(), 0.0).unwrap();
        assert_eq!(w, before);
    }

    #[test]
    fn single_update_from_zero() {
        let s = StateVector::new(vec![1, -1, 1]).unwrap();
        let mut w = WeightMatrix::zeros(3);
        hebbian_update(&mut w, &s, 0.25).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 0.0 } else { 0.25 * f64::from(s.get(i) * s.get(j)) };
                assert_eq!(w.get(i, j), e);
            }
        }
        assert!(w.is_symmetric() && w.has_zero_diagonal());
    }

    #[test]
    fn negative_rate_rejected() {
        let mut w = WeightMatrix::zeros(2);
        assert!(hebbian_update(&mut w, &StateVector::filled(2, 1), -1.0).is_err());
    }

    #[test]
    fn batched_counts_equal_naive_passes() {
        let s = [1i8, -1, -1, 1, 1, -1, 1];
        let mut naive = HebbianCounts::new(7);
        for _ in 0..1000 {
            naive.add_outer(&s);
        }
        let mut batched = HebbianCounts::new(7);
        batched.add_outer_times(&s, 1000);
        assert_eq!(naive, batched);
        let base = WeightMatrix::zeros(7);
        assert_eq!(naive.materialize(&base, 1e-3), batched.clone().into_weights(&base, 1e-3));
    }
}
