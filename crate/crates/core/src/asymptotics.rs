//! Closed-form approximations: the density near the origin, tail densities,
//! tail probabilities, quantiles, VaR and TVaR.
//!
//! Every tail formula is evaluated for the right tail of the standardized
//! variable and mapped back. The left tail of `Z` is the right tail of `-Z`,
//! whose parameters are [`ProductParams::reflected`], and a general
//! `(sigma_x, sigma_y)` only rescales `Z` by `sigma_x sigma_y`.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::exact::ProductParams;
use crate::specfun::{erfc, log_cosh};

/// Which tail a formula approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSide {
    RightTail,
    LeftTail,
}

/// Whether an approximation applies at the requested point.
///
/// A valid result may still carry a warning in `reason`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ApproxValidity {
    pub valid: bool,
    pub reason: String,
}

impl ApproxValidity {
    pub fn ok() -> Self {
        Self {
            valid: true,
            reason: String::new(),
        }
    }

    pub fn warning(reason: impl Into<String>) -> Self {
        Self {
            valid: true,
            reason: reason.into(),
        }
    }

    pub fn invalid(reason: impl Into<String>) -> Self {
        let reason = reason.into();
        debug_assert!(!reason.is_empty());
        Self {
            valid: false,
            reason,
        }
    }
}

/// An approximate value together with its validity.
#[derive(Debug, Clone, PartialEq)]
pub struct Approximation {
    pub value: f64,
    pub validity: ApproxValidity,
}

impl Approximation {
    fn new(value: f64, validity: ApproxValidity) -> Self {
        Self { value, validity }
    }

    pub fn is_valid(&self) -> bool {
        self.validity.valid
    }
}

/// `amp * x^{-1/2} * exp(-a x + b sqrt(x)) = z`, to be solved for large `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpSqrtEquation {
    pub a: f64,
    pub b: f64,
    pub amp: f64,
    pub z: f64,
}

impl ExpSqrtEquation {
    pub fn new(a: f64, b: f64, amp: f64, z: f64) -> Result<Self> {
        if !(a > 0.0) || !(amp > 0.0) || !(z > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exp-sqrt equation needs a > 0, amp > 0, z > 0, got a={a}, b={b}, amp={amp}, z={z}"
            )));
        }
        Ok(Self { a, b, amp, z })
    }

    /// Left-hand side of the equation at `x > 0`.
    pub fn lhs(&self, x: f64) -> f64 {
        self.amp * (-self.a * x + self.b * x.sqrt() - 0.5 * x.ln()).exp()
    }
}

/// Five-term asymptotic solution of an [`ExpSqrtEquation`] as `z -> 0`:
/// `L/a + b sqrt(L)/a^{3/2} - ln(L)/(2a) + b^2/(4a^2) + ln(amp sqrt a)/a`
/// with `L = ln(1/z)`.
pub fn solve_exp_sqrt(eq: &ExpSqrtEquation) -> Result<f64> {
    if !((eq.amp / eq.z).ln() > 1.0) || !(eq.z < 1.0) {
        return Err(Error::Domain(format!(
            "exp-sqrt inversion needs ln(amp / z) > 1 and z < 1, got amp={}, z={}",
            eq.amp, eq.z
        )));
    }
    let l = -eq.z.ln();
    Ok(inversion(eq.a, eq.b, eq.amp.ln(), l))
}

fn inversion(a: f64, b: f64, ln_amp: f64, l: f64) -> f64 {
    l / a + b * l.sqrt() / a.powf(1.5) - l.ln() / (2.0 * a) + b * b / (4.0 * a * a)
        + (ln_amp + 0.5 * a.ln()) / a
}

/// Right-tail density envelope of a standardized product,
/// `amp * t^{-1/2} * exp(-a t) * cosh(b sqrt t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TailEnvelope {
    /// `ln(C / sqrt(2 pi)) + (1 + rho) / (8 (1 - rho)) * delta_minus^2`
    pub ln_amp: f64,
    /// `1 / (1 + rho)`
    pub a: f64,
    /// `|delta_plus| / (1 + rho)`
    pub b: f64,
    /// True when `delta_plus` counts as zero.
    pub delta_zero: bool,
}

impl TailEnvelope {
    /// Envelope of the right tail of `params` in standardized units.
    pub fn right(params: &ProductParams) -> Self {
        let rho = params.rho();
        let delta_zero = delta_is_zero(params, params.delta_plus());
        let dp = if delta_zero { 0.0 } else { params.delta_plus().abs() };
        let dm = params.delta_minus();
        Self {
            ln_amp: params.ln_constant_c() - 0.5 * (2.0 * PI).ln()
                + (1.0 + rho) / (8.0 * (1.0 - rho)) * dm * dm,
            a: 1.0 / (1.0 + rho),
            b: dp / (1.0 + rho),
            delta_zero,
        }
    }

    /// `ln` of the envelope at standardized `t > 0`.
    pub fn ln_density(&self, t: f64) -> f64 {
        self.ln_amp - 0.5 * t.ln() - self.a * t + log_cosh(self.b * t.sqrt())
    }

    /// `int_t^inf` of the envelope, in closed form through `erfc`.
    pub fn mass_beyond(&self, t: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        let root = t.sqrt();
        let piece = |b: f64| -> f64 {
            let arg = (2.0 * a * root - b) / (2.0 * a.sqrt());
            (PI / a).sqrt() * (b * b / (4.0 * a)).exp() * erfc(arg)
        };
        self.ln_amp.exp() * 0.5 * (piece(b) + piece(-b))
    }

    /// `int_t^inf s * envelope(s) ds`, bounded above by `(t + 1/a') mass`
    /// with the effective decay rate at `t`. Only used for closing tails that
    /// are already negligible.
    pub fn first_moment_beyond(&self, t: f64) -> f64 {
        let rate = (self.a - 0.5 * self.b / t.sqrt()).max(0.5 * self.a);
        (t + 1.0 / rate) * self.mass_beyond(t)
    }
}

/// Thm-5 style switch: `delta` treated as zero within `1e-12` of the
/// standardized means.
fn delta_is_zero(params: &ProductParams, delta: f64) -> bool {
    let (a, b) = params.standardized_means();
    delta == 0.0 || delta.abs() <= 1e-12 * (a.abs() + b.abs())
}

/// Near-origin form `-C ln|x| / (pi sigma_x sigma_y sqrt(1 - rho^2))`.
pub fn pdf_near_zero(params: &ProductParams, x: f64) -> Result<f64> {
    if !(x != 0.0 && x.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "near-zero density form needs 0 < |x| < 1, got {x}"
        )));
    }
    let rho = params.rho();
    Ok(-params.ln_constant_c().exp() * x.abs().ln()
        / (PI * params.scale() * (1.0 - rho * rho).sqrt()))
}

fn side_point(params: &ProductParams, x: f64, side: TailSide) -> (ProductParams, f64) {
    match side {
        TailSide::RightTail => (*params, x),
        TailSide::LeftTail => (params.reflected(), -x),
    }
}

fn sign_check(x: f64, side: TailSide) -> ApproxValidity {
    match side {
        TailSide::RightTail if !(x > 0.0) => {
            ApproxValidity::invalid(format!("right-tail formula needs x > 0, got {x}"))
        }
        TailSide::LeftTail if !(x < 0.0) => {
            ApproxValidity::invalid(format!("left-tail formula needs x < 0, got {x}"))
        }
        _ => ApproxValidity::ok(),
    }
}

/// Natural log of the tail density approximation, `None` outside its side.
pub fn ln_pdf_asym(params: &ProductParams, x: f64, side: TailSide) -> Option<f64> {
    if !sign_check(x, side).valid {
        return None;
    }
    let (right, t) = side_point(params, x, side);
    let s = right.scale();
    let env = TailEnvelope::right(&right.standardized());
    Some(env.ln_density(t / s) - s.ln())
}

/// Tail density approximation for `x -> +inf` (right) or `x -> -inf` (left).
pub fn pdf_asym(params: &ProductParams, x: f64, side: TailSide) -> Approximation {
    let validity = sign_check(x, side);
    if !validity.valid {
        return Approximation::new(f64::NAN, validity);
    }
    let (right, t) = side_point(params, x, side);
    let s = right.scale();
    let env = TailEnvelope::right(&right.standardized());
    Approximation::new(env.ln_density(t / s).exp() / s, validity)
}

/// Tail probability approximation: `P(Z > x)` on the right, `P(Z <= x)` on
/// the left. Equals [`pdf_asym`] times `sigma_x sigma_y (1 +- rho)`.
pub fn tail_asym(params: &ProductParams, x: f64, side: TailSide) -> Approximation {
    let density = pdf_asym(params, x, side);
    if !density.is_valid() {
        return density;
    }
    let factor = match side {
        TailSide::RightTail => params.scale() * (1.0 + params.rho()),
        TailSide::LeftTail => params.scale() * (1.0 - params.rho()),
    };
    Approximation::new(density.value * factor, density.validity)
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability must lie in (0, 1), got {p}")))
    }
}

/// Upper-tail quantile expansion `G` for tail mass `q = 1 - p`, before any
/// validity judgement.
fn upper_expansion(params: &ProductParams, q: f64) -> f64 {
    let s = params.scale();
    let rho = params.rho();
    let env = TailEnvelope::right(&params.standardized());
    // the tail mass is s (1 + rho) times the density, and cosh(b sqrt t)
    // behaves as e^{b sqrt t} / 2 unless b = 0
    let ln_amp = env.ln_amp + (1.0 + rho).ln() - if env.delta_zero { 0.0 } else { LN_2 };
    s * inversion(env.a, env.b, ln_amp, -q.ln())
}

fn regime_validity(l: f64) -> ApproxValidity {
    if !(l > 1.0) {
        ApproxValidity::invalid(format!(
            "ln(1/q) = {l} is not in the asymptotic regime (needs > 1)"
        ))
    } else if l <= 3.0 {
        ApproxValidity::warning(format!("asymptotic regime not reached: ln(1/q) = {l}"))
    } else {
        ApproxValidity::ok()
    }
}

/// Quantile approximation: the `p -> 1` expansion for `p >= 1/2` and the
/// `p -> 0` expansion below.
pub fn quantile_asym(params: &ProductParams, p: f64) -> Result<Approximation> {
    check_probability(p)?;
    if p >= 0.5 {
        let q = 1.0 - p;
        let value = upper_expansion(params, q);
        let mut validity = regime_validity(-q.ln());
        if validity.valid && !(value > 0.0) {
            validity = ApproxValidity::invalid(format!(
                "approximate upper quantile {value} is not positive"
            ));
        }
        Ok(Approximation::new(value, validity))
    } else {
        let value = -upper_expansion(&params.reflected(), p);
        let mut validity = regime_validity(-p.ln());
        if validity.valid && !(value < 0.0) {
            validity = ApproxValidity::invalid(format!(
                "approximate lower quantile {value} is not negative"
            ));
        }
        Ok(Approximation::new(value, validity))
    }
}

fn upper_only(params: &ProductParams, p: f64) -> Result<Approximation> {
    check_probability(p)?;
    if p < 0.5 {
        return Ok(Approximation::new(
            f64::NAN,
            ApproxValidity::invalid(format!("VaR/TVaR expansions need p >= 0.5, got {p}")),
        ));
    }
    quantile_asym(params, p)
}

/// VaR approximation, identical to the upper quantile expansion.
pub fn var_asym(params: &ProductParams, p: f64) -> Result<Approximation> {
    upper_only(params, p)
}

/// TVaR approximation `G(p) + sigma_x sigma_y (1 + rho)`.
pub fn tvar_asym(params: &ProductParams, p: f64) -> Result<Approximation> {
    let var = upper_only(params, p)?;
    let gap = params.scale() * (1.0 + params.rho());
    Ok(Approximation::new(var.value + gap, var.validity))
}

/// Fitted log-log slope of `|pdf_asym / pdf - 1|` against `|x|` over
/// `x_grid`, where `pdf` is the exact density.
///
/// Grid points are magnitudes; on the left tail they are applied as `-x`.
pub fn convergence_rate_probe(
    params: &ProductParams,
    side: TailSide,
    x_grid: &[f64],
) -> Result<f64> {
    if x_grid.len() < 4 || x_grid.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::InvalidParameter(
            "convergence probe needs at least 4 positive grid points".into(),
        ));
    }
    let mut points = Vec::with_capacity(x_grid.len());
    for &m in x_grid {
        let x = match side {
            TailSide::RightTail => m,
            TailSide::LeftTail => -m,
        };
        let exact = crate::exact::ln_pdf_adequate(params, x)?;
        let approx = ln_pdf_asym(params, x, side).expect("sign matches side");
        let err = (approx - exact).exp_m1().abs();
        points.push((m.ln(), err.ln()));
    }
    Ok(least_squares_slope(&points))
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
