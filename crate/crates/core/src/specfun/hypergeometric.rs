//! The power series `sum_n n^{2k} x^n / (2n)!` and the terminating partial
//! sums of the `(2k-1)F(2k)` function it equals.

use crate::summation::CompensatedSum;

const CONSECUTIVE_SMALL_TERMS: u32 = 3;
const MAX_TERMS: usize = 50_000_000;

/// `e^{-sqrt(x)} sum_{n >= 0} n^{2k} x^n / (2n)!`.
///
/// Terms are formed in log space, so the result stays finite long after the
/// unscaled sum overflows (x ~ 5e5). Summation stops once three consecutive
/// terms fall below `tol` times the partial sum.
pub fn series_n2k_scaled(k: u32, x: f64, tol: f64) -> f64 {
    assert!(k >= 1, "series_n2k needs k >= 1");
    assert!(x >= 0.0, "series_n2k needs x >= 0");
    if x == 0.0 {
        return 0.0;
    }
    let ln_x = x.ln();
    let shift = x.sqrt();
    let power = 2.0 * k as f64;
    let mut ln_base = 0.0; // ln(x^n / (2n)!)
    let mut acc = CompensatedSum::new();
    let mut small_run = 0;
    for n in 1..MAX_TERMS {
        let nf = n as f64;
        ln_base += ln_x - (2.0 * nf * (2.0 * nf - 1.0)).ln();
        let term = (power * nf.ln() + ln_base - shift).exp();
        acc.add(term);
        if term < tol * acc.value() {
            small_run += 1;
            if small_run >= CONSECUTIVE_SMALL_TERMS {
                break;
            }
        } else {
            small_run = 0;
        }
    }
    acc.value()
}

/// `sum_{n >= 0} n^{2k} x^n / (2n)!` by direct summation.
pub fn series_n2k(k: u32, x: f64, tol: f64) -> f64 {
    series_n2k_scaled(k, x, tol) * x.sqrt().exp()
}

/// First `n_terms` terms of `(2k-1)F(2k)(2, ..., 2; 1, ..., 1, 3/2; x)`.
///
/// With `2k - 1` upper parameters equal to 2 and lower parameters `2k - 1`
/// ones and a single 3/2, the j-th term is
/// `(j + 1)^{2k - 1} x^j / ((3/2)_j j!)`.
pub fn pfq_special(k: u32, x: f64, n_terms: usize) -> f64 {
    assert!(k >= 1, "pfq_special needs k >= 1");
    let exponent = (2 * k - 1) as i32;
    let mut base = 1.0; // x^j / ((3/2)_j j!)
    let mut acc = CompensatedSum::new();
    for j in 0..n_terms {
        if j > 0 {
            let jf = j as f64;
            base *= x / ((jf + 0.5) * jf);
        }
        acc.add(((j + 1) as f64).powi(exponent) * base);
    }
    acc.value()
}

/// Leading large-argument behaviour of [`series_n2k`]:
/// `x^k e^{sqrt x} / 2^{2k+1}`, returned without the `e^{sqrt x}` factor.
pub fn series_n2k_leading_scaled(k: u32, x: f64) -> f64 {
    x.powi(k as i32) / 2f64.powi(2 * k as i32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Independent partial-sum oracle: factorials accumulated in plain
    /// floating point, no log space.
    fn oracle(k: u32, x: f64, terms: usize) -> f64 {
        let mut sum = 0.0;
        let mut fact = 1.0; // (2n)!
        for n in 1..terms {
            fact *= (2 * n) as f64 * (2 * n - 1) as f64;
            sum += (n as f64).powi(2 * k as i32) * x.powi(n as i32) / fact;
        }
        sum
    }

    #[test]
    fn zero_argument() {
        assert_eq!(series_n2k(1, 0.0, 1e-14), 0.0);
        assert_eq!(pfq_special(1, 0.0, 7), 1.0);
    }

    #[test]
    fn matches_plain_partial_sums() {
        for &(k, x) in &[(1, 4.0), (2, 0.5), (3, 10.0), (1, 60.0)] {
            let v = series_n2k(k, x, 1e-16);
            let o = oracle(k, x, 80);
            assert!(rel(v, o) < 1e-13, "k={k} x={x}: {v} vs {o}");
        }
    }

    #[test]
    fn hypergeometric_identity() {
        for k in 1..=3 {
            for &x in &[0.5, 1.0, 4.0, 10.0] {
                let lhs = series_n2k(k, x, 1e-16);
                let rhs = 0.5 * x * pfq_special(k, x / 4.0, 200);
                assert!(rel(lhs, rhs) < 1e-10, "k={k} x={x}: {lhs} vs {rhs}");
            }
        }
        let cross = pfq_special(1, 1.0, 60);
        let direct = series_n2k(1, 4.0, 1e-14) * 2.0 / 4.0;
        assert!(rel(cross, direct) < 1e-12);
    }

    #[test]
    fn large_argument_limit() {
        let v = series_n2k(2, 400.0, 1e-15);
        let lead = series_n2k_leading_scaled(2, 400.0) * 20f64.exp();
        // the first correction is 6 / sqrt(x) for k = 2, so the ratio at x = 400
        // is 1.317625 (plain double-precision summation of the series)
        assert!((v / lead - 1.317_625).abs() < 1e-9, "{}", v / lead);

        for k in 1..=2 {
            let mut last = f64::INFINITY;
            for &x in &[1e2, 1e4, 1e6] {
                let ratio = series_n2k_scaled(k, x, 1e-15) / series_n2k_leading_scaled(k, x);
                let dev = (ratio - 1.0).abs();
                if x >= 1e4 {
                    assert!(dev <= 10.0 * 2.0 / x.sqrt(), "k={k} x={x} ratio={ratio}");
                }
                assert!(dev < last);
                last = dev;
            }
        }
    }

    #[test]
    fn pfq_large_argument_scaling() {
        // (2k-1)F(2k)(...; w) ~ (4w)^{k-1} e^{2 sqrt w} / 2^{2k}
        let w = 100.0;
        let v = pfq_special(2, w, 400);
        let lead = 4.0 * w * (2.0 * w.sqrt()).exp() / 16.0;
        assert!((v / lead - 1.317_625).abs() < 1e-9, "{}", v / lead);
    }
}
