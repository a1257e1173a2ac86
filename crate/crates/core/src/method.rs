//! Evaluation strategies behind a common interface, looked up by name.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::asymptotics::{
    pdf_asym, quantile_asym, tail_asym, tvar_asym, var_asym, ApproxValidity, Approximation,
    TailSide,
};
use crate::error::{Error, Result};
use crate::exact::{pdf_exact, ProductDistribution, ProductParams, TruncationPolicy};
use crate::montecarlo::{
    empirical_quantile, empirical_tail_prob, empirical_tvar, empirical_tvar_standard_error,
    simulate, SimulationConfig,
};
use crate::risk::{quantile_of, tvar_of, QuantileRequest};

/// What is being evaluated. `Pdf`, `Cdf` and `Survival` take points `x`;
/// the others take probabilities `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    Pdf,
    Cdf,
    Survival,
    Quantile,
    Var,
    Tvar,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::Pdf,
        Quantity::Cdf,
        Quantity::Survival,
        Quantity::Quantile,
        Quantity::Var,
        Quantity::Tvar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Pdf => "pdf",
            Quantity::Cdf => "cdf",
            Quantity::Survival => "survival",
            Quantity::Quantile => "quantile",
            Quantity::Var => "var",
            Quantity::Tvar => "tvar",
        }
    }

    /// True when inputs are probabilities rather than points.
    pub fn takes_probability(self) -> bool {
        matches!(self, Quantity::Quantile | Quantity::Var | Quantity::Tvar)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown quantity `{s}`")))
    }
}

/// Method-specific accuracy information. Fields a method cannot supply stay
/// `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub n_used: Option<usize>,
    pub est_trunc_error: Option<f64>,
    pub scaled: Option<bool>,
    pub log_value: Option<f64>,
    /// Monte Carlo standard error of the value.
    pub standard_error: Option<f64>,
}

/// One evaluated point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub input: f64,
    pub value: f64,
    pub validity: ApproxValidity,
    pub diagnostics: Diagnostics,
}

impl Evaluation {
    fn plain(input: f64, value: f64) -> Self {
        Self {
            input,
            value,
            validity: ApproxValidity::ok(),
            diagnostics: Diagnostics::default(),
        }
    }

    fn approximate(input: f64, a: Approximation) -> Self {
        Self {
            input,
            value: a.value,
            validity: a.validity,
            diagnostics: Diagnostics::default(),
        }
    }
}

/// A way of computing distributional quantities of `Z = XY`.
pub trait Method: Send + Sync {
    /// Registry key, e.g. `"exact"`.
    fn name(&self) -> &'static str;

    fn supports(&self, quantity: Quantity) -> bool;

    /// One evaluation per input, in input order.
    fn evaluate(
        &self,
        params: &ProductParams,
        quantity: Quantity,
        inputs: &[f64],
    ) -> Result<Vec<Evaluation>>;
}

fn unsupported(method: &dyn Method, quantity: Quantity) -> Error {
    Error::Unsupported {
        method: method.name().to_string(),
        quantity: quantity.name().to_string(),
    }
}

fn check_probabilities(inputs: &[f64]) -> Result<()> {
    match inputs.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        Some(p) => Err(Error::Domain(format!("probability must lie in (0, 1), got {p}"))),
        None => Ok(()),
    }
}

/// Series density, quadrature distribution function and root-found quantiles.
#[derive(Debug, Clone, Default)]
pub struct ExactMethod {
    pub policy: TruncationPolicy,
    /// Bracket tolerance of the quantile root finder, relative to `max(1, |x|)`.
    pub x_tol: f64,
}

impl ExactMethod {
    pub fn new(policy: TruncationPolicy) -> Self {
        Self { policy, x_tol: 1e-9 }
    }
}

impl Method for ExactMethod {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn supports(&self, _quantity: Quantity) -> bool {
        true
    }

    fn evaluate(
        &self,
        params: &ProductParams,
        quantity: Quantity,
        inputs: &[f64],
    ) -> Result<Vec<Evaluation>> {
        self.policy.validate()?;
        if quantity == Quantity::Pdf {
            return inputs
                .iter()
                .map(|&x| {
                    let r = pdf_exact(params, x, &self.policy)?;
                    Ok(Evaluation {
                        input: x,
                        value: r.value,
                        validity: ApproxValidity::ok(),
                        diagnostics: Diagnostics {
                            n_used: Some(r.n_used),
                            est_trunc_error: Some(r.est_trunc_error),
                            scaled: Some(r.scaled),
                            log_value: Some(r.log_value),
                            standard_error: None,
                        },
                    })
                })
                .collect();
        }
        if quantity.takes_probability() {
            check_probabilities(inputs)?;
        }
        let x_tol = if self.x_tol > 0.0 { self.x_tol } else { 1e-9 };
        let dist = ProductDistribution::new(*params, self.policy)?;
        inputs
            .iter()
            .map(|&v| {
                let value = match quantity {
                    Quantity::Cdf => dist.cdf(v)?,
                    Quantity::Survival => dist.survival(v)?,
                    Quantity::Quantile | Quantity::Var => {
                        quantile_of(&dist, &QuantileRequest::with_tolerances(v, 1e-10, x_tol)?)?
                    }
                    Quantity::Tvar => {
                        tvar_of(&dist, &QuantileRequest::with_tolerances(v, 1e-10, x_tol)?)?
                    }
                    Quantity::Pdf => unreachable!("handled above"),
                };
                Ok(Evaluation::plain(v, value))
            })
            .collect()
    }
}

/// Closed-form tail approximations. Results outside their regime come back
/// with `validity.valid == false`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AsymptoticMethod;

impl Method for AsymptoticMethod {
    fn name(&self) -> &'static str {
        "asymptotic"
    }

    fn supports(&self, _quantity: Quantity) -> bool {
        true
    }

    fn evaluate(
        &self,
        params: &ProductParams,
        quantity: Quantity,
        inputs: &[f64],
    ) -> Result<Vec<Evaluation>> {
        if quantity.takes_probability() {
            check_probabilities(inputs)?;
        }
        inputs
            .iter()
            .map(|&v| {
                let side = if v > 0.0 {
                    TailSide::RightTail
                } else {
                    TailSide::LeftTail
                };
                let approx = match quantity {
                    Quantity::Pdf => pdf_asym(params, v, side),
                    Quantity::Cdf | Quantity::Survival => {
                        // the formula gives the mass of the tail containing v
                        let tail = tail_asym(params, v, side);
                        let wanted = match quantity {
                            Quantity::Survival => TailSide::RightTail,
                            _ => TailSide::LeftTail,
                        };
                        if side == wanted {
                            tail
                        } else {
                            Approximation {
                                value: 1.0 - tail.value,
                                validity: tail.validity,
                            }
                        }
                    }
                    Quantity::Quantile => quantile_asym(params, v)?,
                    Quantity::Var => var_asym(params, v)?,
                    Quantity::Tvar => tvar_asym(params, v)?,
                };
                Ok(Evaluation::approximate(v, approx))
            })
            .collect()
    }
}

/// Empirical estimators from one simulation per call.
#[derive(Debug, Clone, Default)]
pub struct MonteCarloMethod {
    pub config: SimulationConfig,
}

impl MonteCarloMethod {
    pub fn new(config: SimulationConfig) -> Self {
        Self { config }
    }
}

impl Method for MonteCarloMethod {
    fn name(&self) -> &'static str {
        "mc"
    }

    fn supports(&self, quantity: Quantity) -> bool {
        quantity != Quantity::Pdf
    }

    fn evaluate(
        &self,
        params: &ProductParams,
        quantity: Quantity,
        inputs: &[f64],
    ) -> Result<Vec<Evaluation>> {
        if !self.supports(quantity) {
            return Err(unsupported(self, quantity));
        }
        let mut config = self.config.clone();
        if quantity.takes_probability() {
            check_probabilities(inputs)?;
            for &p in inputs {
                if p >= 0.5 {
                    config.upper_levels.push(p);
                } else {
                    config.lower_levels.push(p);
                }
            }
        } else {
            config.thresholds.extend_from_slice(inputs);
        }
        let summary = simulate(params, &config)?;
        let n = summary.n as f64;
        inputs
            .iter()
            .map(|&v| {
                let (value, standard_error) = match quantity {
                    Quantity::Survival | Quantity::Cdf => {
                        let s = empirical_tail_prob(&summary, v)?;
                        let value = if quantity == Quantity::Cdf { 1.0 - s } else { s };
                        (value, Some((s * (1.0 - s) / n).sqrt()))
                    }
                    Quantity::Quantile | Quantity::Var => (empirical_quantile(&summary, v)?, None),
                    Quantity::Tvar => (
                        empirical_tvar(&summary, v)?,
                        Some(empirical_tvar_standard_error(&summary, v)?),
                    ),
                    Quantity::Pdf => unreachable!("rejected above"),
                };
                let mut e = Evaluation::plain(v, value);
                e.diagnostics.n_used = Some(summary.n as usize);
                e.diagnostics.standard_error = standard_error;
                Ok(e)
            })
            .collect()
    }
}

/// Methods keyed by [`Method::name`].
#[derive(Default)]
pub struct MethodRegistry {
    methods: BTreeMap<&'static str, Box<dyn Method>>,
}

impl MethodRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `exact`, `asymptotic` and `mc` with the given settings.
    pub fn with_defaults(policy: TruncationPolicy, config: SimulationConfig) -> Self {
        let mut r = Self::new();
        r.register(Box::new(ExactMethod::new(policy)));
        r.register(Box::new(AsymptoticMethod));
        r.register(Box::new(MonteCarloMethod::new(config)));
        r
    }

    /// Adds `method`, replacing any method of the same name.
    pub fn register(&mut self, method: Box<dyn Method>) {
        self.methods.insert(method.name(), method);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Method> {
        self.methods
            .get(name)
            .map(|m| m.as_ref())
            .ok_or_else(|| Error::UnknownMethod(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }
}

impl fmt::Debug for MethodRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MethodRegistry")
            .field("methods", &self.names())
            .finish()
    }
}
