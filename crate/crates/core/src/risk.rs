//! Numeric quantiles, VaR and TVaR from the quadrature distribution function.

use crate::asymptotics::quantile_asym;
use crate::error::{Error, Result};
use crate::exact::{moments, ProductDistribution, ProductParams, TruncationPolicy};
use crate::quadrature::{integrate_scalar, Tolerance};

const MAX_DOUBLINGS: u32 = 200;
const MAX_ITERATIONS: u32 = 400;
/// `t = 1 - (1 - p) e^{-s}` is integrated over `s` in `[0, S_MAX]`.
const S_MAX: f64 = 30.0;

/// A quantile level with its stopping tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileRequest {
    pub p: f64,
    /// Allowed `|F(x) - p|`.
    pub p_tol: f64,
    /// Allowed bracket width relative to `max(1, |x|)`.
    pub x_tol: f64,
}

impl QuantileRequest {
    pub fn new(p: f64) -> Result<Self> {
        Self::with_tolerances(p, 1e-10, 1e-9)
    }

    pub fn with_tolerances(p: f64, p_tol: f64, x_tol: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("probability must lie in (0, 1), got {p}")));
        }
        if !(p_tol > 0.0) || !(x_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quantile tolerances must be positive, got p_tol={p_tol}, x_tol={x_tol}"
            )));
        }
        Ok(Self { p, p_tol, x_tol })
    }
}

/// What the root finder matches: the lower mass `F(x) = p` or, for upper
/// levels, the tail mass `P(Z > x) = q` without forming `1 - q`.
#[derive(Debug, Clone, Copy)]
enum Target {
    Lower(f64),
    Upper(f64),
}

impl Target {
    fn of(p: f64) -> Self {
        if p >= 0.5 {
            Target::Upper(1.0 - p)
        } else {
            Target::Lower(p)
        }
    }

    /// Increasing in `x`, zero at the quantile.
    fn residual(&self, dist: &ProductDistribution, x: f64) -> Result<f64> {
        match *self {
            Target::Lower(p) => Ok(dist.cdf(x)? - p),
            Target::Upper(q) => Ok(q - dist.survival(x)?),
        }
    }

    fn probability(&self) -> f64 {
        match *self {
            Target::Lower(p) => p,
            Target::Upper(q) => 1.0 - q,
        }
    }
}

fn initial_guess(params: &ProductParams, p: f64) -> (f64, f64) {
    let (mean, variance) = moments(params);
    let sd = variance.sqrt();
    match quantile_asym(params, p) {
        Ok(a) if a.is_valid() && a.value.is_finite() => (a.value, 0.25 * sd),
        _ => (if p >= 0.5 { mean + sd } else { mean - sd }, sd),
    }
}

fn solve(dist: &ProductDistribution, target: Target, p_tol: f64, x_tol: f64) -> Result<f64> {
    let (guess, step) = initial_guess(dist.params(), target.probability());
    let mut step = step.max(1e-3 * dist.params().scale());
    let (mut lo, mut hi) = (guess - step, guess + step);
    let mut h_lo = target.residual(dist, lo)?;
    let mut h_hi = target.residual(dist, hi)?;
    let mut doublings = 0;
    while h_lo > 0.0 || h_hi < 0.0 {
        if doublings >= MAX_DOUBLINGS {
            return Err(Error::Bracket(format!(
                "could not bracket the {} quantile of {}",
                target.probability(),
                dist.params()
            )));
        }
        step *= 2.0;
        if h_lo > 0.0 {
            hi = lo;
            h_hi = h_lo;
            lo -= step;
            h_lo = target.residual(dist, lo)?;
        } else {
            lo = hi;
            h_lo = h_hi;
            hi += step;
            h_hi = target.residual(dist, hi)?;
        }
        doublings += 1;
    }
    if h_lo == 0.0 {
        return Ok(lo);
    }
    if h_hi == 0.0 {
        return Ok(hi);
    }

    // Illinois false position, falling back to bisection whenever the
    // bracket fails to shrink by half.
    let mut side = 0i8;
    for _ in 0..MAX_ITERATIONS {
        let width = hi - lo;
        let mid = 0.5 * (lo + hi);
        if width <= x_tol * mid.abs().max(1.0) {
            let h_mid = target.residual(dist, mid)?;
            if h_mid.abs() <= p_tol || width <= f64::EPSILON * mid.abs().max(1.0) {
                return Ok(mid);
            }
        }
        let mut x = lo - h_lo * (hi - lo) / (h_hi - h_lo);
        if !(x > lo && x < hi) {
            x = mid;
        }
        let h = target.residual(dist, x)?;
        if h == 0.0 {
            return Ok(x);
        }
        if h < 0.0 {
            lo = x;
            h_lo = h;
            if side == -1 {
                h_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            h_hi = h;
            if side == 1 {
                h_lo *= 0.5;
            }
            side = 1;
        }
        if hi - lo > 0.5 * width {
            let m = 0.5 * (lo + hi);
            let hm = target.residual(dist, m)?;
            if hm < 0.0 {
                lo = m;
                h_lo = hm;
            } else {
                hi = m;
                h_hi = hm;
            }
            side = 0;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `Q(p)` from a prepared distribution.
pub fn quantile_of(dist: &ProductDistribution, req: &QuantileRequest) -> Result<f64> {
    solve(dist, Target::of(req.p), req.p_tol, req.x_tol)
}

/// The point with `P(Z > x) = q`, accurate in `x` even for tiny `q`.
pub fn upper_quantile_of(dist: &ProductDistribution, q: f64, x_tol: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("tail mass must lie in (0, 1), got {q}")));
    }
    solve(dist, Target::Upper(q), 1e-10 * q.min(1.0 - q), x_tol)
}

/// `Q(p)` by root finding on the quadrature distribution function.
pub fn quantile_numeric(params: &ProductParams, req: &QuantileRequest) -> Result<f64> {
    let dist = ProductDistribution::new(*params, TruncationPolicy::default())?;
    quantile_of(&dist, req)
}

/// `TVaR_p = E[Z; Z > Q(p)] / (1 - p)` from a prepared distribution.
pub fn tvar_of(dist: &ProductDistribution, req: &QuantileRequest) -> Result<f64> {
    let q = quantile_of(dist, req)?;
    Ok(dist.tail_expectation(q)? / (1.0 - req.p))
}

/// Numeric TVaR as a conditional tail expectation.
pub fn tvar_numeric(params: &ProductParams, req: &QuantileRequest) -> Result<f64> {
    let dist = ProductDistribution::new(*params, TruncationPolicy::default())?;
    tvar_of(&dist, req)
}

/// TVaR as the average of VaR over `[p, 1]`, integrated in
/// `s = ln((1 - p) / (1 - t))`. Independent of the tail-moment quadrature.
pub fn tvar_var_average(dist: &ProductDistribution, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability must lie in (0, 1), got {p}")));
    }
    let q = 1.0 - p;
    let tol = Tolerance {
        abs: 1e-300,
        rel: 1e-10,
        max_depth: 30,
    };
    let body = integrate_scalar(
        |s| {
            let x = if s == 0.0 {
                quantile_of(dist, &QuantileRequest::with_tolerances(p, 1e-13, 1e-12)?)?
            } else {
                upper_quantile_of(dist, q * (-s).exp(), 1e-12)?
            };
            Ok(x * (-s).exp())
        },
        0.0,
        S_MAX,
        tol,
    )?;
    // beyond S_MAX, Q grows like its leading term: Q ~ Q(S_MAX) + scale (1 + rho) (s - S_MAX)
    let x_end = upper_quantile_of(dist, q * (-S_MAX).exp(), 1e-12)?;
    let slope = dist.params().scale() * (1.0 + dist.params().rho());
    Ok(body + (-S_MAX).exp() * (x_end + slope))
}

/// `TVaR_p - VaR_p` over an increasing grid of levels.
pub fn gap_diagnostic(params: &ProductParams, p_grid: &[f64]) -> Result<Vec<f64>> {
    if p_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("p_grid must be increasing".into()));
    }
    let dist = ProductDistribution::new(*params, TruncationPolicy::default())?;
    p_grid
        .iter()
        .map(|&p| {
            let req = QuantileRequest::new(p)?;
            let q = quantile_of(&dist, &req)?;
            Ok(dist.tail_expectation(q)? / (1.0 - p) - q)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(mx: f64, my: f64, rho: f64) -> ProductDistribution {
        ProductDistribution::new(
            ProductParams::standard(mx, my, rho).unwrap(),
            TruncationPolicy::default(),
        )
        .unwrap()
    }

    #[test]
    fn request_validation() {
        assert!(QuantileRequest::new(0.0).is_err());
        assert!(QuantileRequest::new(1.0).is_err());
        assert!(QuantileRequest::with_tolerances(0.5, 0.0, 1e-9).is_err());
        let r = QuantileRequest::new(0.3).unwrap();
        assert_eq!((r.p_tol, r.x_tol), (1e-10, 1e-9));
    }

    #[test]
    fn roundtrip() {
        let d = dist(1.0, -0.5, 0.3);
        for &p in &[1e-4, 0.01, 0.5, 0.95, 0.999, 1.0 - 1e-4] {
            let x = quantile_of(&d, &QuantileRequest::new(p).unwrap()).unwrap();
            assert!((d.cdf(x).unwrap() - p).abs() <= 1e-10, "p={p}");
        }
    }

    #[test]
    fn symmetric_median() {
        let d = dist(0.0, 0.0, 0.0);
        let x = quantile_of(&d, &QuantileRequest::new(0.5).unwrap()).unwrap();
        assert!(x.abs() < 1e-8, "{x}");
    }

    #[test]
    fn tvar_forms_agree() {
        let d = dist(1.0, 1.0, 0.5);
        for &p in &[0.9, 0.99] {
            let req = QuantileRequest::new(p).unwrap();
            let t = tvar_of(&d, &req).unwrap();
            let v = tvar_var_average(&d, p).unwrap();
            assert!(((t - v) / t).abs() < 1e-7, "p={p}: {t} vs {v}");
            assert!(t >= quantile_of(&d, &req).unwrap());
        }
    }

    #[test]
    fn gap_grid_must_increase() {
        let params = ProductParams::standard(0.0, 0.0, 0.0).unwrap();
        assert!(gap_diagnostic(&params, &[0.99, 0.9]).is_err());
        let gaps = gap_diagnostic(&params, &[0.9, 0.99]).unwrap();
        assert!(gaps.iter().all(|g| *g > 0.0));
    }
}
