use std::fmt;

use crate::error::{Error, Result};

/// Parameters of the bivariate normal pair `(X, Y)` whose product is studied.
///
/// Construction rejects `sigma <= 0` and `|rho| >= 1`, so every value of this
/// type is a valid distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductParams {
    mu_x: f64,
    mu_y: f64,
    sigma_x: f64,
    sigma_y: f64,
    rho: f64,
}

impl ProductParams {
    pub fn new(mu_x: f64, mu_y: f64, sigma_x: f64, sigma_y: f64, rho: f64) -> Result<Self> {
        if !mu_x.is_finite() || !mu_y.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "means must be finite, got ({mu_x}, {mu_y})"
            )));
        }
        if !(sigma_x > 0.0 && sigma_x.is_finite()) || !(sigma_y > 0.0 && sigma_y.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "standard deviations must be positive, got ({sigma_x}, {sigma_y})"
            )));
        }
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "correlation must lie strictly inside (-1, 1), got {rho}"
            )));
        }
        Ok(Self {
            mu_x,
            mu_y,
            sigma_x,
            sigma_y,
            rho,
        })
    }

    /// Unit variances: `(mu_x, mu_y, 1, 1, rho)`.
    pub fn standard(mu_x: f64, mu_y: f64, rho: f64) -> Result<Self> {
        Self::new(mu_x, mu_y, 1.0, 1.0, rho)
    }

    pub fn mu_x(&self) -> f64 {
        self.mu_x
    }
    pub fn mu_y(&self) -> f64 {
        self.mu_y
    }
    pub fn sigma_x(&self) -> f64 {
        self.sigma_x
    }
    pub fn sigma_y(&self) -> f64 {
        self.sigma_y
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `sigma_x * sigma_y`, the natural scale of `Z = XY`.
    pub fn scale(&self) -> f64 {
        self.sigma_x * self.sigma_y
    }

    /// Standardized means `mu_x / sigma_x`, `mu_y / sigma_y`.
    pub fn standardized_means(&self) -> (f64, f64) {
        (self.mu_x / self.sigma_x, self.mu_y / self.sigma_y)
    }

    /// `mu_x / sigma_x + mu_y / sigma_y`; governs the right tail.
    pub fn delta_plus(&self) -> f64 {
        let (a, b) = self.standardized_means();
        a + b
    }

    /// `mu_x / sigma_x - mu_y / sigma_y`; governs the left tail.
    pub fn delta_minus(&self) -> f64 {
        let (a, b) = self.standardized_means();
        a - b
    }

    /// Parameters of `-Z`: `(mu_x, -mu_y, sigma_x, sigma_y, -rho)`.
    pub fn reflected(&self) -> Self {
        Self {
            mu_y: -self.mu_y,
            rho: -self.rho,
            ..*self
        }
    }

    /// Parameters of `Z / (sigma_x sigma_y)`:
    /// `(mu_x / sigma_x, mu_y / sigma_y, 1, 1, rho)`.
    pub fn standardized(&self) -> Self {
        let (a, b) = self.standardized_means();
        Self {
            mu_x: a,
            mu_y: b,
            sigma_x: 1.0,
            sigma_y: 1.0,
            rho: self.rho,
        }
    }

    /// Exponent of the constant `C`, i.e. `ln C <= 0`.
    pub fn ln_constant_c(&self) -> f64 {
        let (a, b) = self.standardized_means();
        -(a * a + b * b - 2.0 * self.rho * a * b) / (2.0 * (1.0 - self.rho * self.rho))
    }
}

impl fmt::Display for ProductParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(mu_x={}, mu_y={}, sigma_x={}, sigma_y={}, rho={})",
            self.mu_x, self.mu_y, self.sigma_x, self.sigma_y, self.rho
        )
    }
}

/// How the exact density is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DensityRoute {
    /// Double series, switching to the integral form when the series loses
    /// more than `rel_tol` to cancellation.
    #[default]
    Auto,
    /// Always the double series.
    Series,
    /// Always the single integral obtained by summing the series under the
    /// integral representation of `K`.
    Integral,
}

/// Truncation control for the density series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub n_max: usize,
    pub rel_tol: f64,
    /// When false, a density that under- or overflows f64 is an error instead
    /// of a result carried only by `log_value`.
    pub allow_log_scale: bool,
    pub route: DensityRoute,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            n_max: 50,
            rel_tol: 1e-12,
            allow_log_scale: true,
            route: DensityRoute::Auto,
        }
    }
}

impl TruncationPolicy {
    pub fn new(n_max: usize, rel_tol: f64) -> Result<Self> {
        let p = Self {
            n_max,
            rel_tol,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_route(mut self, route: DensityRoute) -> Self {
        self.route = route;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Which evaluation produced an [`EvalResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Series,
    Integral,
    ClosedForm,
}

/// A density value with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub value: f64,
    pub log_value: f64,
    /// Outer-series terms used (0 for non-series routes).
    pub n_used: usize,
    /// Magnitude of the last included outer block, or the last refinement
    /// change of the integral route, in density units.
    pub est_trunc_error: f64,
    /// True when `value` is not representable and only `log_value` is exact.
    pub scaled: bool,
    pub route: Route,
}
