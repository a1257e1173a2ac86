//! The exact density of `Z = XY`.
//!
//! Everything is evaluated for the standardized variable `Z / (sigma_x
//! sigma_y)` and rescaled at the end. The double series is accumulated in log
//! space relative to a common offset that carries `C`, the `exp(rho x / ...)`
//! factor and the `e^{-y}` removed from the scaled Bessel functions.
//!
//! The inner sums alternate in sign whenever the two standardized
//! conditional means have opposite signs. Far in a tail where
//! `mu_x / sigma_x + mu_y / sigma_y` nearly vanishes this cancellation eats
//! every digit of an f64, so [`DensityRoute::Auto`] measures the loss and,
//! when it exceeds the requested tolerance, evaluates the same double sum
//! through the integral representation
//! `K_nu(y) = 1/2 int exp(-y cosh t + nu t) dt`, under which the series
//! collapses to
//! `1/2 int exp(-y cosh t) cosh(sqrt(u) (alpha e^{t/2} + b e^{-t/2})) dt`
//! with a positive integrand.

use std::f64::consts::PI;

use super::params::{DensityRoute, EvalResult, ProductParams, Route, TruncationPolicy};
use crate::error::{Error, Result};
use crate::specfun::{k01_scaled, ln_bessel_k_scaled_orders, log_cosh};
use crate::summation::LogScaledSum;

const CONSECUTIVE_SMALL_BLOCKS: u32 = 3;

/// `C = exp{-(mu_x^2/sigma_x^2 + mu_y^2/sigma_y^2 - 2 rho mu_x mu_y/(sigma_x sigma_y)) / (2(1 - rho^2))}`.
pub fn constant_c(params: &ProductParams) -> f64 {
    params.ln_constant_c().exp()
}

/// Standardized-variable evaluation before rescaling.
#[derive(Debug, Clone, Copy)]
struct RawDensity {
    ln_value: f64,
    ln_trunc: f64,
    n_used: usize,
    cancellation: f64,
    route: Route,
}

fn check_point(x: f64) -> Result<()> {
    if x == 0.0 {
        Err(Error::Singular)
    } else if !x.is_finite() {
        Err(Error::Domain(format!("density needs a finite point, got {x}")))
    } else {
        Ok(())
    }
}

/// Density of `Z` at `x != 0` from the double series, with the diagnostics
/// described on [`EvalResult`].
pub fn pdf_exact(params: &ProductParams, x: f64, policy: &TruncationPolicy) -> Result<EvalResult> {
    policy.validate()?;
    check_point(x)?;
    let scale = params.scale();
    let std = params.standardized();
    let z = x / scale;
    let raw = match policy.route {
        DensityRoute::Series => {
            let raw = series_standard(&std, z, policy)?;
            if !raw.ln_value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "double series at x = {x} cancelled to a non-positive value"
                )));
            }
            raw
        }
        DensityRoute::Integral => integral_standard(&std, z)?,
        DensityRoute::Auto => {
            let raw = series_standard(&std, z, policy)?;
            if raw.ln_value.is_finite() && raw.cancellation * f64::EPSILON <= policy.rel_tol {
                raw
            } else {
                integral_standard(&std, z)?
            }
        }
    };
    finish(raw, scale, policy)
}

/// `base` with `n_max` raised, if needed, so that the double series at `x` is
/// not cut short.
///
/// The outer terms behave like `lambda^{2n} / (2n)!` with
/// `lambda = (|alpha| + |b|) sqrt(u)`, a Poisson profile in `2n` centred at
/// `lambda`; the bound keeps eight standard deviations past the centre.
pub fn adequate_policy(params: &ProductParams, x: f64, base: &TruncationPolicy) -> TruncationPolicy {
    let setup = Setup::new(&params.standardized(), x / params.scale());
    let lambda = (setup.alpha.abs() + setup.b.abs()) * setup.u.sqrt();
    let needed = ((lambda + 8.0 * lambda.sqrt() + 30.0) / 2.0).ceil();
    let needed = if needed.is_finite() { needed as usize } else { usize::MAX };
    TruncationPolicy {
        n_max: base.n_max.max(needed.min(100_000)),
        ..*base
    }
}

/// `ln f(x)` with the default tolerance and an adequate truncation point.
pub fn ln_pdf_adequate(params: &ProductParams, x: f64) -> Result<f64> {
    let policy = adequate_policy(params, x, &TruncationPolicy::default());
    pdf_exact(params, x, &policy).map(|e| e.log_value)
}

/// Density from the single series valid when `rho = 0` and `mu_y = 0`.
pub fn pdf_mu_y_zero(
    params: &ProductParams,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<EvalResult> {
    policy.validate()?;
    if params.rho() != 0.0 || params.mu_y() != 0.0 {
        return Err(Error::Precondition(format!(
            "single-series density needs rho = 0 and mu_y = 0, got {params}"
        )));
    }
    check_point(x)?;
    let scale = params.scale();
    let mx = params.mu_x() / params.sigma_x();
    let z = (x / scale).abs();
    let offset = -0.5 * mx * mx - z - PI.ln();
    let ln_k = ln_bessel_k_scaled_orders(policy.n_max, z)?;
    let ln_mx2 = if mx == 0.0 { f64::NEG_INFINITY } else { 2.0 * mx.abs().ln() };
    let ln_z = z.ln();

    let mut total = LogScaledSum::new();
    let mut ln_last = f64::NEG_INFINITY;
    let mut n_used = 0;
    let mut small_run = 0;
    let mut ln_level = 0.0; // ln(z^n / (2n)!)
    for n in 0..=policy.n_max {
        if n > 0 {
            let nf = n as f64;
            ln_level += ln_z - (2.0 * nf * (2.0 * nf - 1.0)).ln();
        }
        let ln_term = if n == 0 {
            ln_k[0]
        } else {
            n as f64 * ln_mx2 + ln_level + ln_k[n]
        };
        total.add(false, ln_term);
        n_used = n + 1;
        ln_last = ln_term;
        if n > 0 && ln_term < policy.rel_tol.ln() + total.ln_abs() {
            small_run += 1;
            if small_run >= CONSECUTIVE_SMALL_BLOCKS {
                break;
            }
        } else {
            small_run = 0;
        }
    }
    let raw = RawDensity {
        ln_value: offset + total.ln_abs(),
        ln_trunc: offset + ln_last,
        n_used,
        cancellation: 1.0,
        route: Route::Series,
    };
    finish(raw, scale, policy)
}

/// Closed-form density for `mu_x = mu_y = 0`:
/// `exp(rho x / (s (1 - rho^2))) K_0(|x| / (s (1 - rho^2))) / (pi s sqrt(1 - rho^2))`
/// with `s = sigma_x sigma_y`.
pub fn pdf_zero_mean(params: &ProductParams, x: f64) -> Result<f64> {
    if params.mu_x() != 0.0 || params.mu_y() != 0.0 {
        return Err(Error::Precondition(format!(
            "zero-mean density needs mu_x = mu_y = 0, got {params}"
        )));
    }
    check_point(x)?;
    let s = params.scale();
    let rho = params.rho();
    let r2 = 1.0 - rho * rho;
    let y = x.abs() / (s * r2);
    let (k0_scaled, _) = k01_scaled(y);
    Ok((rho * x / (s * r2) - y).exp() * k0_scaled / (PI * s * r2.sqrt()))
}

fn finish(raw: RawDensity, scale: f64, policy: &TruncationPolicy) -> Result<EvalResult> {
    let log_value = raw.ln_value - scale.ln();
    if log_value.is_nan() {
        return Err(Error::NonFinite("density evaluated to NaN".into()));
    }
    let value = log_value.exp();
    let scaled = !(value.is_normal());
    if scaled && !policy.allow_log_scale {
        return Err(Error::NonFinite(format!(
            "density exp({log_value}) is not representable"
        )));
    }
    let est_trunc_error = (raw.ln_trunc - scale.ln()).exp();
    Ok(EvalResult {
        value,
        log_value,
        n_used: raw.n_used,
        est_trunc_error: if est_trunc_error.is_nan() { 0.0 } else { est_trunc_error },
        scaled,
        route: raw.route,
    })
}

/// Common pieces of both routes for the standardized density at `z != 0`.
struct Setup {
    /// `ln C + rho z / r2 - y - ln pi - ln(r2) / 2`
    offset: f64,
    /// `|z| / r2`, the Bessel argument
    y: f64,
    /// `|z| / r2^2`
    u: f64,
    /// `sign(z) (mu_x - rho mu_y)`
    alpha: f64,
    /// `mu_y - rho mu_x`
    b: f64,
}

impl Setup {
    fn new(std: &ProductParams, z: f64) -> Self {
        let rho = std.rho();
        let r2 = 1.0 - rho * rho;
        let y = z.abs() / r2;
        let a = std.mu_x() - rho * std.mu_y();
        let b = std.mu_y() - rho * std.mu_x();
        Self {
            offset: std.ln_constant_c() + rho * z / r2 - y - PI.ln() - 0.5 * r2.ln(),
            y,
            u: z.abs() / (r2 * r2),
            alpha: if z < 0.0 { -a } else { a },
            b,
        }
    }
}

#[inline]
fn ln_power(count: usize, ln_base: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * ln_base
    }
}

fn series_standard(std: &ProductParams, z: f64, policy: &TruncationPolicy) -> Result<RawDensity> {
    let setup = Setup::new(std, z);
    let n_max = policy.n_max;
    let ln_k = ln_bessel_k_scaled_orders(n_max, setup.y)?;
    let ln_fact: Vec<f64> = {
        let mut v = Vec::with_capacity(2 * n_max + 1);
        v.push(0.0);
        for j in 1..=2 * n_max {
            let last = v[j - 1];
            v.push(last + (j as f64).ln());
        }
        v
    };
    let ln_u = setup.u.ln();
    let ln_alpha = setup.alpha.abs().ln();
    let ln_b = setup.b.abs().ln();
    let alpha_negative = setup.alpha < 0.0;
    let b_negative = setup.b < 0.0;
    let ln_tol = policy.rel_tol.ln();

    let mut total = LogScaledSum::new();
    let mut ln_last = f64::NEG_INFINITY;
    let mut n_used = 0;
    let mut small_run = 0;
    for n in 0..=n_max {
        let two_n = 2 * n;
        let ln_level = n as f64 * ln_u - ln_fact[two_n];
        let (m_lo, m_hi) = match (setup.alpha == 0.0, setup.b == 0.0) {
            (true, true) => {
                if n == 0 {
                    (0, 0)
                } else {
                    (1, 0)
                }
            }
            (true, false) => (0, 0),
            (false, true) => (two_n, two_n),
            (false, false) => (0, two_n),
        };
        let mut block = LogScaledSum::new();
        for m in m_lo..=m_hi {
            let ln_binom = ln_fact[two_n] - ln_fact[m] - ln_fact[two_n - m];
            let order = m.abs_diff(n);
            let ln_term = ln_level
                + ln_binom
                + ln_power(m, ln_alpha)
                + ln_power(two_n - m, ln_b)
                + ln_k[order];
            let negative = (alpha_negative && m % 2 == 1) ^ (b_negative && (two_n - m) % 2 == 1);
            block.add(negative, ln_term);
        }
        total.merge(&block);
        n_used = n + 1;
        let ln_block = block.ln_abs();
        ln_last = ln_block;
        if n > 0 && ln_block < ln_tol + total.ln_abs() {
            small_run += 1;
            if small_run >= CONSECUTIVE_SMALL_BLOCKS {
                break;
            }
        } else {
            small_run = 0;
        }
    }
    let ln_value = if total.is_negative() {
        f64::NEG_INFINITY
    } else {
        setup.offset + total.ln_abs()
    };
    Ok(RawDensity {
        ln_value,
        ln_trunc: setup.offset + ln_last,
        n_used,
        cancellation: total.cancellation(),
        route: Route::Series,
    })
}

fn integral_standard(std: &ProductParams, z: f64) -> Result<RawDensity> {
    let setup = Setup::new(std, z);
    let y = setup.y;
    let root_u = setup.u.sqrt();
    let (alpha, b) = (setup.alpha, setup.b);
    let phi = |t: f64| -> f64 {
        let half = 0.5 * t;
        -y * (t.cosh() - 1.0) + log_cosh(root_u * (alpha * half.exp() + b * (-half).exp()))
    };
    // Upper bound of phi (log_cosh(v) <= |v|) and its slope, used to decide
    // where the integrand is negligible for good.
    let bound = |t: f64| -> (f64, f64) {
        let (ep, em) = ((0.5 * t).exp(), (-0.5 * t).exp());
        let value = -y * (t.cosh() - 1.0) + root_u * (alpha.abs() * ep + b.abs() * em);
        let slope = -y * t.sinh() + 0.5 * root_u * (alpha.abs() * ep - b.abs() * em);
        (value, slope)
    };

    const DROP: f64 = 50.0;
    const T_LIMIT: f64 = 700.0;
    let h0 = 0.125f64.min(0.5 / y.max(1.0).sqrt());

    // March outwards on the coarse grid, recording phi.
    let mut right = vec![phi(0.0)];
    let mut phi_max = right[0];
    let mut t = 0.0;
    loop {
        t += h0;
        let v = phi(t);
        phi_max = phi_max.max(v);
        right.push(v);
        let (ub, slope) = bound(t);
        if (ub < phi_max - DROP && slope < 0.0) || t > T_LIMIT {
            break;
        }
    }
    let mut left = Vec::new();
    t = 0.0;
    loop {
        t -= h0;
        let v = phi(t);
        phi_max = phi_max.max(v);
        left.push(v);
        let (ub, slope) = bound(t);
        if (ub < phi_max - DROP && slope > 0.0) || t < -T_LIMIT {
            break;
        }
    }
    let t_lo = -(left.len() as f64) * h0;
    let t_hi = (right.len() - 1) as f64 * h0;

    // Trapezoid sums of exp(phi - phi_max) on successively halved grids.
    let mut sum: f64 = right
        .iter()
        .chain(left.iter())
        .map(|v| (v - phi_max).exp())
        .sum();
    // endpoints carry half weight; they are negligible by construction
    let mut h = h0;
    let mut estimate = sum * h;
    let mut change = f64::INFINITY;
    for level in 1..=16 {
        let mut mids = 0.0;
        let count = ((t_hi - t_lo) / h).round() as usize;
        for i in 0..count {
            let tm = t_lo + (i as f64 + 0.5) * h;
            mids += (phi(tm) - phi_max).exp();
        }
        sum += mids;
        h *= 0.5;
        let refined = sum * h;
        change = (refined - estimate).abs();
        estimate = refined;
        if level >= 2 && change <= 1e-15 * estimate {
            break;
        }
    }
    if !(estimate > 0.0) || !estimate.is_finite() {
        return Err(Error::NonFinite(format!(
            "integral form of the density at standardized z = {z}"
        )));
    }
    // f = e^{offset} * (1/2) * int exp(phi)
    let ln_value = setup.offset + phi_max + (0.5 * estimate).ln();
    let ln_trunc = setup.offset + phi_max + (0.5 * change.max(f64::MIN_POSITIVE)).ln();
    Ok(RawDensity {
        ln_value,
        ln_trunc,
        n_used: 0,
        cancellation: 1.0,
        route: Route::Integral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn p(mx: f64, my: f64, sx: f64, sy: f64, rho: f64) -> ProductParams {
        ProductParams::new(mx, my, sx, sy, rho).unwrap()
    }

    fn series_only() -> TruncationPolicy {
        TruncationPolicy::default().with_route(DensityRoute::Series)
    }

    #[test]
    fn constant_c_values() {
        assert_eq!(constant_c(&p(0.0, 0.0, 1.0, 1.0, 0.3)), 1.0);
        let v = constant_c(&p(1.0, 1.0, 1.0, 1.0, 0.5));
        assert!(rel(v, (-2.0f64 / 3.0).exp()) < 1e-15);
        let near_one = constant_c(&p(1.5, 1.5, 1.0, 1.0, 0.999));
        assert!(rel(near_one, (-1.5f64 * 1.5 / 1.999).exp()) < 1e-12);
        assert!(near_one > 0.0 && near_one <= 1.0);
    }

    #[test]
    fn zero_mean_closed_form() {
        let std = p(0.0, 0.0, 1.0, 1.0, 0.0);
        let k0_1 = 0.421_024_438_240_708_34;
        assert!(rel(pdf_zero_mean(&std, 1.0).unwrap(), k0_1 / PI) < 1e-15);
        let half = p(0.0, 0.0, 1.0, 1.0, 0.5);
        let ratio = pdf_zero_mean(&half, 1.0).unwrap() / pdf_zero_mean(&half, -1.0).unwrap();
        assert!(rel(ratio, (4.0f64 / 3.0).exp()) < 1e-14);
        let scaled = p(0.0, 0.0, 2.0, 3.0, 0.0);
        assert!(rel(pdf_zero_mean(&scaled, 6.0).unwrap(), k0_1 / PI / 6.0) < 1e-15);
        assert!(matches!(pdf_zero_mean(&std, 0.0), Err(Error::Singular)));
        assert!(matches!(
            pdf_zero_mean(&p(1.0, 0.0, 1.0, 1.0, 0.0), 1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn double_series_reduces_to_zero_mean_form() {
        let params = p(0.0, 0.0, 1.0, 1.0, 0.5);
        let e = pdf_exact(&params, 1.0, &series_only()).unwrap();
        assert!(rel(e.value, pdf_zero_mean(&params, 1.0).unwrap()) < 1e-12);
        let unit = p(0.0, 0.0, 1.0, 1.0, 0.0);
        let e = pdf_exact(&unit, 1.0, &TruncationPolicy::default()).unwrap();
        assert!(rel(e.value, 0.134_016_241_016_994_27) < 1e-14);
    }

    #[test]
    fn double_series_reduces_to_single_series() {
        let params = p(1.0, 0.0, 1.0, 1.0, 0.0);
        let double = pdf_exact(&params, 2.0, &series_only()).unwrap();
        let single = pdf_mu_y_zero(&params, 2.0, &TruncationPolicy::default()).unwrap();
        assert!(rel(double.value, single.value) < 1e-10);
        let sym = p(2.0, 0.0, 1.0, 1.0, 0.0);
        let l = pdf_mu_y_zero(&sym, -1.0, &TruncationPolicy::default()).unwrap();
        let r = pdf_mu_y_zero(&sym, 1.0, &TruncationPolicy::default()).unwrap();
        assert_eq!(l.value, r.value);
        let zero = p(0.0, 0.0, 1.5, 2.0, 0.0);
        let single = pdf_mu_y_zero(&zero, 0.7, &TruncationPolicy::default()).unwrap();
        assert!(rel(single.value, pdf_zero_mean(&zero, 0.7).unwrap()) < 1e-14);
        assert!(matches!(
            pdf_mu_y_zero(&p(1.0, 0.0, 1.0, 1.0, 0.1), 1.0, &TruncationPolicy::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn series_and_integral_routes_agree() {
        let integral = TruncationPolicy::default().with_route(DensityRoute::Integral);
        for &(mx, my, rho) in &[(1.0, 1.0, 0.5), (2.0, 1.0, -0.5), (1.0, 0.0, 0.25), (0.5, -2.0, 0.3)] {
            let params = p(mx, my, 1.0, 1.0, rho);
            for &x in &[-7.0, -1.0, -0.01, 0.2, 2.5, 10.0] {
                let s = pdf_exact(&params, x, &series_only()).unwrap();
                let i = pdf_exact(&params, x, &integral).unwrap();
                let a = pdf_exact(&params, x, &TruncationPolicy::default()).unwrap();
                assert_eq!(s.route, Route::Series);
                assert_eq!(i.route, Route::Integral);
                // the forced series may lose a few digits to sign cancellation
                assert!(rel(s.value, i.value) < 1e-9, "{params} x={x}: {} vs {}", s.value, i.value);
                assert!(rel(a.value, i.value) < 5e-12, "{params} x={x}: {} vs {}", a.value, i.value);
            }
        }
        // high-precision quadrature of the integral form
        let params = p(2.0, 1.0, 1.0, 1.0, -0.5);
        let auto = pdf_exact(&params, -7.0, &TruncationPolicy::default()).unwrap();
        assert!(rel(auto.value, 0.001_259_735_335_480_438_66) < 1e-13);
    }

    #[test]
    fn auto_route_avoids_cancellation() {
        // delta_plus = 0: the inner sums are alternating finite differences
        let params = p(1.0, -1.0, 1.0, 1.0, 0.0);
        let auto = pdf_exact(&params, 300.0, &TruncationPolicy { n_max: 200, ..Default::default() }).unwrap();
        assert_eq!(auto.route, Route::Integral);
        let integral = TruncationPolicy::default().with_route(DensityRoute::Integral);
        assert_eq!(auto.value, pdf_exact(&params, 300.0, &integral).unwrap().value);
    }

    #[test]
    fn singular_at_origin() {
        let params = p(1.0, 1.0, 1.0, 1.0, 0.5);
        assert!(matches!(
            pdf_exact(&params, 0.0, &TruncationPolicy::default()),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn far_tail_is_carried_in_log_space() {
        let params = p(1.0, 1.0, 1.0, 1.0, 0.0);
        let e = pdf_exact(&params, 2000.0, &TruncationPolicy { n_max: 400, ..Default::default() }).unwrap();
        assert!(e.scaled);
        assert!(e.log_value.is_finite() && e.log_value < -700.0);
        let strict = TruncationPolicy {
            n_max: 400,
            allow_log_scale: false,
            ..Default::default()
        };
        assert!(matches!(pdf_exact(&params, 2000.0, &strict), Err(Error::NonFinite(_))));
    }

    #[test]
    fn truncation_diagnostics() {
        let params = p(2.0, 1.0, 1.0, 1.0, -0.5);
        let e = pdf_exact(&params, 5.0, &TruncationPolicy::default()).unwrap();
        assert!(e.n_used > 3 && e.n_used <= 51);
        assert!(e.est_trunc_error >= 0.0 && e.est_trunc_error < 1e-10 * e.value);
        let short = pdf_exact(&params, 5.0, &TruncationPolicy::new(2, 1e-12).unwrap()).unwrap();
        assert_eq!(short.n_used, 3);
        assert!(short.est_trunc_error > 1e-6 * short.value);
    }
}
