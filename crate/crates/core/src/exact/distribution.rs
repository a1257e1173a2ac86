//! Distribution function, survival function and partial first moments by
//! quadrature of the exact density.
//!
//! Each half-line of the standardized variable is cut into panels
//! `[0, 1], [1, 2], [2, 4], ...` up to the point `T` where the tail envelope
//! falls below `1e-16`; the mass beyond `T` is taken from the envelope in
//! closed form. Panel masses and first moments are computed once, so a query
//! only integrates the partial panel that contains the point. Upper-tail
//! quantities are summed from the far end, never formed as `1 - F`.

use super::density::{adequate_policy, pdf_exact};
use super::params::{ProductParams, TruncationPolicy};
use crate::asymptotics::TailEnvelope;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

const ENVELOPE_CUTOFF: f64 = 1e-16;
const MAX_DOUBLINGS: u32 = 16;

fn panel_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-300,
        rel: 1e-12,
        max_depth: 45,
    }
}

/// One side of the standardized density, `t -> f(sign * t)` for `t >= 0`.
#[derive(Debug, Clone)]
struct HalfLine {
    std: ProductParams,
    sign: f64,
    policy: TruncationPolicy,
    envelope: TailEnvelope,
    edges: Vec<f64>,
    /// `[mass, moment]` of panels `0..i`
    prefix: Vec<[f64; 2]>,
    /// `[mass, moment]` of panels `i..` plus the closure
    suffix: Vec<[f64; 2]>,
}

impl HalfLine {
    fn new(std: ProductParams, sign: f64, policy: TruncationPolicy) -> Result<Self> {
        let side_params = if sign > 0.0 { std } else { std.reflected() };
        let envelope = TailEnvelope::right(&side_params);
        // past the envelope's maximum and below the cutoff
        let crest = (envelope.b / (2.0 * envelope.a)).powi(2);
        let mut edges = vec![0.0, 1.0];
        let mut top = 1.0;
        let mut doublings = 0;
        while top <= crest || envelope.ln_density(top) >= ENVELOPE_CUTOFF.ln() {
            if doublings >= MAX_DOUBLINGS {
                return Err(Error::Resource(format!(
                    "tail of {std} does not fall below {ENVELOPE_CUTOFF} within {top}"
                )));
            }
            top *= 2.0;
            edges.push(top);
            doublings += 1;
        }
        let mut line = Self {
            std,
            sign,
            policy,
            envelope,
            edges,
            prefix: Vec::new(),
            suffix: Vec::new(),
        };
        let panels: Vec<[f64; 2]> = line
            .edges
            .windows(2)
            .map(|w| line.integrate(w[0], w[1]))
            .collect::<Result<_>>()?;
        let closure = [
            line.envelope.mass_beyond(top),
            line.envelope.first_moment_beyond(top),
        ];
        let mut prefix = vec![[0.0; 2]];
        for panel in &panels {
            let last = prefix[prefix.len() - 1];
            prefix.push([last[0] + panel[0], last[1] + panel[1]]);
        }
        let mut suffix = vec![closure; panels.len() + 1];
        for i in (0..panels.len()).rev() {
            suffix[i] = [suffix[i + 1][0] + panels[i][0], suffix[i + 1][1] + panels[i][1]];
        }
        line.prefix = prefix;
        line.suffix = suffix;
        Ok(line)
    }

    fn density(&self, t: f64) -> Result<f64> {
        let z = self.sign * t;
        let policy = adequate_policy(&self.std, z, &self.policy);
        Ok(pdf_exact(&self.std, z, &policy)?.value)
    }

    fn integrate(&self, a: f64, b: f64) -> Result<[f64; 2]> {
        integrate(
            |t| {
                let f = self.density(t)?;
                Ok([f, t * f])
            },
            a,
            b,
            panel_tolerance(),
        )
    }

    fn top(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    /// Index of the panel containing `t < top`.
    fn panel(&self, t: f64) -> usize {
        self.edges.partition_point(|e| *e <= t) - 1
    }

    fn total(&self) -> [f64; 2] {
        self.suffix[0]
    }

    /// `[int_0^t f, int_0^t s f(s) ds]`.
    fn below(&self, t: f64) -> Result<[f64; 2]> {
        if t >= self.top() {
            let above = self.above(t)?;
            let total = self.total();
            return Ok([total[0] - above[0], total[1] - above[1]]);
        }
        let i = self.panel(t);
        let part = self.integrate(self.edges[i], t)?;
        Ok([self.prefix[i][0] + part[0], self.prefix[i][1] + part[1]])
    }

    /// `[int_t^inf f, int_t^inf s f(s) ds]`.
    fn above(&self, t: f64) -> Result<[f64; 2]> {
        if t >= self.top() {
            return Ok([
                self.envelope.mass_beyond(t),
                self.envelope.first_moment_beyond(t),
            ]);
        }
        let i = self.panel(t);
        let part = self.integrate(t, self.edges[i + 1])?;
        Ok([self.suffix[i + 1][0] + part[0], self.suffix[i + 1][1] + part[1]])
    }
}

/// The law of `Z` with cached panel integrals on both half-lines.
#[derive(Debug, Clone)]
pub struct ProductDistribution {
    params: ProductParams,
    policy: TruncationPolicy,
    right: HalfLine,
    left: HalfLine,
}

impl ProductDistribution {
    pub fn new(params: ProductParams, policy: TruncationPolicy) -> Result<Self> {
        policy.validate()?;
        let std = params.standardized();
        Ok(Self {
            params,
            policy,
            right: HalfLine::new(std, 1.0, policy)?,
            left: HalfLine::new(std, -1.0, policy)?,
        })
    }

    pub fn params(&self) -> &ProductParams {
        &self.params
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    /// Exact density with the truncation point raised as far as `x` needs.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        let policy = adequate_policy(&self.params, x, &self.policy);
        Ok(pdf_exact(&self.params, x, &policy)?.value)
    }

    /// Total mass of the quadrature, `1` up to quadrature error.
    pub fn total_mass(&self) -> f64 {
        self.right.total()[0] + self.left.total()[0]
    }

    /// `E[Z]` by quadrature.
    pub fn mean_by_quadrature(&self) -> f64 {
        self.params.scale() * (self.right.total()[1] - self.left.total()[1])
    }

    fn check(x: f64) -> Result<()> {
        if x.is_nan() {
            Err(Error::Domain("distribution function at NaN".into()))
        } else {
            Ok(())
        }
    }

    /// `P(Z <= x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        let z = x / self.params.scale();
        if z >= 0.0 {
            Ok(self.left.total()[0] + self.right.below(z)?[0])
        } else {
            Ok(self.left.above(-z)?[0])
        }
    }

    /// `P(Z > x)`, integrated directly over the tail.
    pub fn survival(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        let z = x / self.params.scale();
        if z >= 0.0 {
            Ok(self.right.above(z)?[0])
        } else {
            Ok(self.right.total()[0] + self.left.below(-z)?[0])
        }
    }

    /// `E[Z; Z > x]`.
    pub fn tail_expectation(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        let s = self.params.scale();
        let z = x / s;
        let m = if z >= 0.0 {
            self.right.above(z)?[1]
        } else {
            self.right.total()[1] - self.left.below(-z)?[1]
        };
        Ok(s * m)
    }

    /// `P(Z > x)` and `E[Z; Z > x]` from one quadrature.
    pub fn tail_mass_and_expectation(&self, x: f64) -> Result<(f64, f64)> {
        Self::check(x)?;
        let s = self.params.scale();
        let z = x / s;
        let [mass, moment] = if z >= 0.0 {
            self.right.above(z)?
        } else {
            let below = self.left.below(-z)?;
            let right = self.right.total();
            [right[0] + below[0], right[1] - below[1]]
        };
        Ok((mass, s * moment))
    }
}

/// `P(Z <= x)`.
pub fn cdf(params: &ProductParams, x: f64, policy: &TruncationPolicy) -> Result<f64> {
    ProductDistribution::new(*params, *policy)?.cdf(x)
}

/// `P(Z > x)`.
pub fn survival(params: &ProductParams, x: f64, policy: &TruncationPolicy) -> Result<f64> {
    ProductDistribution::new(*params, *policy)?.survival(x)
}

/// Mean and variance of `Z = XY`.
pub fn moments(params: &ProductParams) -> (f64, f64) {
    let (mx, my) = (params.mu_x(), params.mu_y());
    let (sx, sy) = (params.sigma_x(), params.sigma_y());
    let rho = params.rho();
    let mean = mx * my + rho * sx * sy;
    let variance = mx * mx * sy * sy
        + my * my * sx * sx
        + sx * sx * sy * sy * (1.0 + rho * rho)
        + 2.0 * rho * sx * sy * mx * my;
    (mean, variance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(mx: f64, my: f64, sx: f64, sy: f64, rho: f64) -> ProductParams {
        ProductParams::new(mx, my, sx, sy, rho).unwrap()
    }

    fn dist(params: ProductParams) -> ProductDistribution {
        ProductDistribution::new(params, TruncationPolicy::default()).unwrap()
    }

    #[test]
    fn orthant_probabilities() {
        // P(XY <= 0) = 1/2 - arcsin(rho) / pi for centred normals
        let d = dist(p(0.0, 0.0, 1.0, 1.0, 0.5));
        assert!((d.cdf(0.0).unwrap() - 1.0 / 3.0).abs() < 1e-9);
        let d = dist(p(0.0, 0.0, 1.0, 1.0, 0.0));
        assert!((d.cdf(0.0).unwrap() - 0.5).abs() < 1e-9);
        // P(XY > 0) with independent N(1,1), N(0.5,1):
        // Phi(1) Phi(0.5) + Phi(-1) Phi(-0.5)
        let d = dist(p(1.0, 0.5, 1.0, 1.0, 0.0));
        let (a, b) = (0.841_344_746_068_542_9, 0.691_462_461_274_013_1);
        let expected = a * b + (1.0 - a) * (1.0 - b);
        assert!((d.survival(0.0).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn normalisation_and_mean() {
        for params in [
            p(0.0, 0.0, 1.0, 1.0, 0.0),
            p(2.0, -2.0, 1.0, 1.0, 0.5),
            p(-1.0, 2.0, 2.0, 0.5, -0.25),
            p(1.0, 1.0, 1.0, 1.0, 0.5),
        ] {
            let d = dist(params);
            assert!((d.total_mass() - 1.0).abs() < 1e-9, "{params}: {}", d.total_mass());
            let (mean, _) = moments(&params);
            assert!((d.mean_by_quadrature() - mean).abs() < 1e-8, "{params}");
        }
    }

    #[test]
    fn complementarity_and_monotonicity() {
        let d = dist(p(1.0, 1.0, 1.0, 1.0, 0.5));
        let mut last_s = f64::INFINITY;
        for i in 0..60 {
            let x = -6.0 + 0.5 * i as f64;
            let f = d.cdf(x).unwrap();
            let s = d.survival(x).unwrap();
            assert!((f + s - 1.0).abs() < 2e-9, "x={x}");
            assert!(s < last_s);
            last_s = s;
        }
    }

    #[test]
    fn reflection_of_distribution_functions() {
        let params = p(1.0, -0.5, 1.5, 0.8, 0.3);
        let d = dist(params);
        let r = dist(params.reflected());
        for &x in &[-4.0, -1.0, -0.1, 0.3, 2.0, 7.0] {
            assert!((d.cdf(x).unwrap() - r.survival(-x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_expectation_against_direct_quadrature() {
        let params = p(0.5, 1.0, 1.0, 1.0, -0.3);
        let d = dist(params);
        let x = 3.0;
        let direct = crate::quadrature::integrate_scalar(
            |t| Ok(t * d.pdf(t)?),
            x,
            200.0,
            Tolerance::default(),
        )
        .unwrap();
        let e = d.tail_expectation(x).unwrap();
        assert!(((e - direct) / direct).abs() < 1e-10);
        let (mass, moment) = d.tail_mass_and_expectation(-1.0).unwrap();
        assert_eq!(mass, d.survival(-1.0).unwrap());
        assert!((moment - d.tail_expectation(-1.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn moment_formulas() {
        assert_eq!(moments(&p(0.0, 0.0, 1.0, 1.0, 0.3)), (0.3, 1.09));
        assert_eq!(moments(&p(1.0, 1.0, 1.0, 1.0, 0.5)).0, 1.5);
    }

    #[test]
    fn free_functions_agree_with_distribution() {
        let params = p(1.0, 0.0, 1.0, 1.0, 0.0);
        let policy = TruncationPolicy::default();
        let d = dist(params);
        assert_eq!(cdf(&params, 1.5, &policy).unwrap(), d.cdf(1.5).unwrap());
        assert_eq!(survival(&params, 1.5, &policy).unwrap(), d.survival(1.5).unwrap());
    }
}
