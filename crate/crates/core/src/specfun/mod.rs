//! Special-function kernels: Bessel `K` of integer order, `erfc`, the
//! large-argument coefficients `a_k(nu)` and the `n^{2k} x^n / (2n)!` series.

mod bessel;
mod hypergeometric;

pub use bessel::{
    ak_coefficient, bessel_k, bessel_k_asymptotic, bessel_k_near_zero, bessel_k_scaled,
    ln_bessel_k_scaled_orders, AsymCoefficients, BesselOrder,
};
pub(crate) use bessel::k01_scaled;
pub use hypergeometric::{pfq_special, series_n2k, series_n2k_leading_scaled, series_n2k_scaled};

/// Complementary error function.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `ln cosh x`, finite for any finite `x`.
#[inline]
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a - std::f64::consts::LN_2 + (-2.0 * a).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_scalar, Tolerance};

    #[test]
    fn erfc_values() {
        assert_eq!(erfc(0.0), 1.0);
        let q = integrate_scalar(
            |t: f64| Ok(2.0 / std::f64::consts::PI.sqrt() * (-t * t).exp()),
            1.0,
            10.0,
            Tolerance { abs: 0.0, rel: 1e-16, max_depth: 30 },
        )
        .unwrap();
        assert!(((erfc(1.0) - q) / q).abs() < 1e-14);
        assert!((erfc(1.0) - 0.157_299_207_050_285_13).abs() < 1e-16);
        for &x in &[0.1, 0.9, 3.0, 12.0] {
            assert!((erfc(x) + erfc(-x) - 2.0).abs() < 4e-16);
        }
    }

    #[test]
    fn erfc_asymptotic_envelope() {
        let mut x = 5.0;
        while x <= 20.0 {
            let scaled = erfc(x) * std::f64::consts::PI.sqrt() * x * (x * x).exp();
            assert!((scaled - 1.0).abs() <= 1.0 / (x * x), "x={x}");
            x += 0.5;
        }
        let x = 10.0_f64;
        let lead = (-x * x).exp() / (std::f64::consts::PI.sqrt() * x);
        assert!(((erfc(x) - lead) / lead).abs() < 0.01);
    }

    #[test]
    fn log_cosh_values() {
        assert_eq!(log_cosh(0.0), 0.0);
        assert!((log_cosh(1000.0) - (1000.0 - std::f64::consts::LN_2)).abs() < 1e-15 * 1000.0);
        assert_eq!(log_cosh(-3.0), log_cosh(3.0));
        assert!((log_cosh(0.7) - 0.7f64.cosh().ln()).abs() < 1e-16);
        assert!(log_cosh(1e8).is_finite());
    }
}
