//! Modified Bessel functions of the second kind, integer order.
//!
//! `K_0` and `K_1` come from their ascending series for `x <= 2` and from
//! Steed's continued fraction (which yields `e^x K_0`, `e^x K_1` directly) for
//! larger arguments. Higher orders follow from the forward recurrence
//! `K_{n+1} = K_{n-1} + (2n/x) K_n`, which is stable because `K_n` grows with
//! `n`.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 2.0;

/// Integer order of `K_nu`; `K_{-nu} = K_nu`, so only `|nu|` is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BesselOrder(i32);

impl BesselOrder {
    pub const fn new(nu: i32) -> Self {
        Self(nu)
    }

    pub const fn get(self) -> i32 {
        self.0
    }

    pub const fn magnitude(self) -> u32 {
        self.0.unsigned_abs()
    }
}

impl From<i32> for BesselOrder {
    fn from(nu: i32) -> Self {
        Self(nu)
    }
}

fn check_positive(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("Bessel K needs 0 < x < inf, got {x}")))
    }
}

/// Unscaled `(K_0(x), K_1(x))` from the ascending series, `0 < x <= 2`.
fn k01_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let ln_half = (0.5 * x).ln();

    // I_0, I_1 and the digamma-weighted companion sums, term by term.
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut k0_tail = 0.0;
    let mut k1_tail = 0.0;
    let mut term0 = 1.0; // q^k / (k!)^2
    let mut term1 = 1.0; // q^k / (k! (k+1)!)
    let mut harmonic = 0.0; // H_k
    for k in 0..60 {
        if k > 0 {
            let kf = k as f64;
            term0 *= q / (kf * kf);
            term1 *= q / (kf * (kf + 1.0));
            harmonic += 1.0 / kf;
        }
        let h_next = harmonic + 1.0 / (k as f64 + 1.0);
        i0 += term0;
        i1 += term1;
        k0_tail += harmonic * term0;
        // psi(k+1) + psi(k+2) = H_k + H_{k+1} - 2 gamma
        k1_tail += (harmonic + h_next - 2.0 * EULER_GAMMA) * term1;
        if term0 < 1e-18 * i0 && term1 < 1e-18 * i1 {
            break;
        }
    }
    i1 *= 0.5 * x;
    let k0 = -(ln_half + EULER_GAMMA) * i0 + k0_tail;
    let k1 = 1.0 / x + ln_half * i1 - 0.25 * x * k1_tail;
    (k0, k1)
}

/// `(e^x K_0(x), e^x K_1(x))` by Steed's method (continued fraction CF2).
fn k01_continued_fraction_scaled(x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-17;
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..100_000 {
        a -= 2.0 * (i - 1) as f64;
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// `(e^x K_0(x), e^x K_1(x))`.
pub(crate) fn k01_scaled(x: f64) -> (f64, f64) {
    if x <= SERIES_LIMIT {
        let (k0, k1) = k01_series(x);
        let e = x.exp();
        (k0 * e, k1 * e)
    } else {
        k01_continued_fraction_scaled(x)
    }
}

/// Exponentially scaled `e^x K_nu(x)`.
pub fn bessel_k_scaled(nu: BesselOrder, x: f64) -> Result<f64> {
    check_positive(x)?;
    let n = nu.magnitude();
    let (k0, k1) = k01_scaled(x);
    if n == 0 {
        return Ok(k0);
    }
    let (mut prev, mut cur) = (k0, k1);
    for j in 1..n {
        let next = prev + (2.0 * j as f64 / x) * cur;
        prev = cur;
        cur = next;
        if !cur.is_finite() {
            return Err(Error::Overflow(format!("K_{}({x})", nu.get())));
        }
    }
    Ok(cur)
}

/// `K_nu(x)`. Underflows to zero beyond `x ~ 745`; use [`bessel_k_scaled`]
/// there.
pub fn bessel_k(nu: BesselOrder, x: f64) -> Result<f64> {
    let scaled = bessel_k_scaled(nu, x)?;
    Ok(scaled * (-x).exp())
}

/// `ln(e^x K_n(x))` for `n = 0..=n_max`, via the recurrence on consecutive
/// ratios so that no intermediate overflows.
pub fn ln_bessel_k_scaled_orders(n_max: usize, x: f64) -> Result<Vec<f64>> {
    check_positive(x)?;
    let (k0, k1) = k01_scaled(x);
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(k0.ln());
    if n_max == 0 {
        return Ok(out);
    }
    out.push(k1.ln());
    // ratio_n = K_{n+1} / K_n = K_{n-1} / K_n + 2n / x
    let mut ratio = k1 / k0;
    for n in 1..n_max {
        ratio = 1.0 / ratio + 2.0 * n as f64 / x;
        let last = out[n];
        out.push(last + ratio.ln());
    }
    Ok(out)
}

/// Coefficient `a_k(nu)` of the large-argument expansion of `K_nu`.
///
/// Built one factor at a time so that `k` can reach a few hundred without
/// forming factorials.
pub fn ak_coefficient(k: u32, nu: f64) -> f64 {
    let four_nu2 = 4.0 * nu * nu;
    let mut a = 1.0;
    for j in 1..=k {
        let odd = (2 * j - 1) as f64;
        a *= (four_nu2 - odd * odd) / (8.0 * j as f64);
    }
    a
}

/// Table of `a_0(nu), ..., a_{k_max}(nu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymCoefficients {
    nu: f64,
    values: Vec<f64>,
}

impl AsymCoefficients {
    pub fn new(nu: f64, k_max: u32) -> Self {
        let four_nu2 = 4.0 * nu * nu;
        let mut values = Vec::with_capacity(k_max as usize + 1);
        let mut a = 1.0;
        values.push(a);
        for j in 1..=k_max {
            let odd = (2 * j - 1) as f64;
            a *= (four_nu2 - odd * odd) / (8.0 * j as f64);
            values.push(a);
        }
        Self { nu, values }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn k_max(&self) -> u32 {
        (self.values.len() - 1) as u32
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Truncated large-argument expansion
/// `sqrt(pi / 2x) e^{-x} sum_{k <= k_max} a_k(nu) / x^k`.
///
/// The series is asymptotic, not convergent; the caller picks `k_max`.
pub fn bessel_k_asymptotic(nu: f64, x: f64, k_max: u32) -> f64 {
    let coeffs = AsymCoefficients::new(nu, k_max);
    let mut sum = 0.0;
    let mut pow = 1.0;
    for a in coeffs.values() {
        sum += a * pow;
        pow /= x;
    }
    (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() * sum
}

/// Leading small-argument form: `-ln x` for `nu = 0`, otherwise
/// `2^{|nu|-1} Gamma(|nu|) x^{-|nu|}`.
pub fn bessel_k_near_zero(nu: BesselOrder, x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!(
            "small-argument form of K needs 0 < x < 1, got {x}"
        )));
    }
    let n = nu.magnitude();
    if n == 0 {
        return Ok(-x.ln());
    }
    // Gamma(n) = (n - 1)!
    let ln_gamma: f64 = (1..n).map(|j| (j as f64).ln()).sum();
    let ln_value = (n as f64 - 1.0) * std::f64::consts::LN_2 + ln_gamma - n as f64 * x.ln();
    let v = ln_value.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!("K_{}({x}) small-argument form", n)))
    }
}
