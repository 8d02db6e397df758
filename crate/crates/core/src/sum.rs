//! Compensated summation.
//!
//! Aggregates go through [`NeumaierSum`] so that reorderings and replications
//! of the population change results by far less than the 1e-12 tolerances the
//! invariance checks use.

use std::ops::AddAssign;

/// Kahan–Babuška (Neumaier) running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator of values.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<NeumaierSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_sum() {
        let values = [1e16, 1.0, -1e16, 1.0];
        let naive: f64 = values.iter().sum();
        assert_eq!(naive, 1.0);
        assert_eq!(sum(values), 2.0);
    }

    #[test]
    fn integer_weights_stay_exact() {
        assert_eq!(sum((0..1000).map(|_| 1.0)), 1000.0);
    }

    #[test]
    fn tenths() {
        let s = sum(std::iter::repeat_n(0.1, 10));
        assert_eq!(s, 1.0);
    }
}
