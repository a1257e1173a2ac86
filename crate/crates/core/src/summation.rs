//! Compensated (Kahan-Babuska-Neumaier) summation.

use std::ops::AddAssign;

/// Running sum with a Neumaier error term.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self {
            sum: 0.0,
            compensation: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    /// Multiplies the accumulated value (and its error term) by `factor`.
    pub fn scale(&mut self, factor: f64) {
        self.sum *= factor;
        self.compensation *= factor;
    }
}

impl AddAssign<f64> for CompensatedSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator of values.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Sum of signed terms given as `(sign, ln|term|)` relative to a floating
/// log-scale, so that terms far outside the f64 range can still be combined.
#[derive(Debug, Clone, Copy)]
pub struct LogScaledSum {
    scale: f64,
    signed: CompensatedSum,
    absolute: CompensatedSum,
}

impl Default for LogScaledSum {
    fn default() -> Self {
        Self::new()
    }
}

impl LogScaledSum {
    pub const fn new() -> Self {
        Self {
            scale: f64::NEG_INFINITY,
            signed: CompensatedSum::new(),
            absolute: CompensatedSum::new(),
        }
    }

    /// Adds `sign * exp(ln_magnitude)`.
    pub fn add(&mut self, negative: bool, ln_magnitude: f64) {
        if ln_magnitude == f64::NEG_INFINITY {
            return;
        }
        if ln_magnitude > self.scale {
            if self.scale.is_finite() {
                let factor = (self.scale - ln_magnitude).exp();
                self.signed.scale(factor);
                self.absolute.scale(factor);
            }
            self.scale = ln_magnitude;
        }
        let mag = (ln_magnitude - self.scale).exp();
        self.signed.add(if negative { -mag } else { mag });
        self.absolute.add(mag);
    }

    /// Merges another scaled sum into this one.
    pub fn merge(&mut self, other: &LogScaledSum) {
        if other.scale == f64::NEG_INFINITY {
            return;
        }
        if other.scale > self.scale {
            if self.scale.is_finite() {
                let factor = (self.scale - other.scale).exp();
                self.signed.scale(factor);
                self.absolute.scale(factor);
            }
            self.scale = other.scale;
        }
        let factor = (other.scale - self.scale).exp();
        self.signed.add(other.signed.value() * factor);
        self.absolute.add(other.absolute.value() * factor);
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Signed sum relative to `exp(scale)`.
    pub fn relative_value(&self) -> f64 {
        self.signed.value()
    }

    /// Sum of magnitudes relative to `exp(scale)`.
    pub fn relative_abs(&self) -> f64 {
        self.absolute.value()
    }

    /// `ln|sum|`, or `-inf` when the sum is zero.
    pub fn ln_abs(&self) -> f64 {
        let v = self.signed.value();
        if v == 0.0 || self.scale == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.scale + v.abs().ln()
        }
    }

    pub fn ln_abs_terms(&self) -> f64 {
        let v = self.absolute.value();
        if v == 0.0 || self.scale == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.scale + v.ln()
        }
    }

    pub fn is_negative(&self) -> bool {
        self.signed.value() < 0.0
    }

    /// Ratio of the sum of magnitudes to the magnitude of the sum.
    pub fn cancellation(&self) -> f64 {
        let v = self.signed.value().abs();
        if v == 0.0 {
            if self.absolute.value() == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.absolute.value() / v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_summation() {
        let values = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(values.iter().sum::<f64>(), 0.0);
        assert_eq!(sum(values), 2.0);
    }

    #[test]
    fn log_scaled_sum_handles_huge_magnitudes() {
        let mut acc = LogScaledSum::new();
        acc.add(false, 1000.0);
        acc.add(false, 1000.0 + 2f64.ln());
        acc.add(true, 1000.0);
        // e^1000 * (1 + 2 - 1) = 2 e^1000
        assert!((acc.ln_abs() - (1000.0 + 2f64.ln())).abs() < 1e-13);
        assert!((acc.cancellation() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn merge_matches_sequential_adds() {
        let mut a = LogScaledSum::new();
        let mut b = LogScaledSum::new();
        let mut all = LogScaledSum::new();
        for (i, l) in [3.0, -2.0, 50.0, 7.5].iter().enumerate() {
            let neg = i % 2 == 1;
            if i < 2 {
                a.add(neg, *l);
            } else {
                b.add(neg, *l);
            }
            all.add(neg, *l);
        }
        a.merge(&b);
        assert!((a.ln_abs() - all.ln_abs()).abs() < 1e-13);
    }
}
