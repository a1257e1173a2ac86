//! Exact density, distribution function and moments of `Z = XY`.

mod density;
mod distribution;
mod params;

pub use density::{
    adequate_policy, constant_c, ln_pdf_adequate, pdf_exact, pdf_mu_y_zero, pdf_zero_mean,
};
pub use distribution::{cdf, moments, survival, ProductDistribution};
pub use params::{DensityRoute, EvalResult, ProductParams, Route, TruncationPolicy};
