//! Relative-error tables of the asymptotic formulas on the standard
//! parameter grid (`sigma_x = sigma_y = 1`).
//!
//! Every cell is `(approximation - reference) / reference`; a cell is `None`
//! when the approximation does not apply.

use rayon::prelude::*;

use crate::asymptotics::{pdf_asym, quantile_asym, tail_asym, tvar_asym, TailSide};
use crate::error::{Error, Result};
use crate::exact::{pdf_exact, ProductDistribution, ProductParams, TruncationPolicy};
use crate::montecarlo::{
    empirical_quantile, empirical_tvar, order_index, simulate, SimulationConfig,
};
use crate::risk::{quantile_of, QuantileRequest};

/// `(mu_x, mu_y, rho)` rows of the standard grid, in table order.
pub const GRID_ROWS: [(f64, f64, f64); 30] = {
    const RHOS: [f64; 5] = [-0.5, -0.25, 0.0, 0.25, 0.5];
    const MEANS: [(f64, f64); 6] = [(0.0, 0.0), (1.0, -1.0), (2.0, -2.0), (1.0, 0.0), (1.0, 1.0), (2.0, 1.0)];
    let mut rows = [(0.0, 0.0, 0.0); 30];
    let mut i = 0;
    while i < 30 {
        let (mx, my) = MEANS[i / 5];
        rows[i] = (mx, my, RHOS[i % 5]);
        i += 1;
    }
    rows
};

/// Density evaluation points of the PDF table.
pub const PDF_POINTS: [f64; 6] = [2.5, 5.0, 7.5, 10.0, 12.5, 15.0];

/// Probability levels of the tail, quantile and TVaR tables.
pub const LEVELS: [f64; 6] = [0.95, 0.975, 0.99, 0.995, 0.999, 0.9999];

/// Which approximation a table scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// Tail density at fixed points against the exact series.
    Pdf,
    /// Tail probability at the true quantiles.
    TailProbability,
    Quantile,
    Tvar,
}

impl TableKind {
    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            1 => Ok(Self::Pdf),
            2 => Ok(Self::TailProbability),
            3 => Ok(Self::Quantile),
            4 => Ok(Self::Tvar),
            _ => Err(Error::InvalidParameter(format!("no table {n}; tables are 1 to 4"))),
        }
    }

    pub fn number(self) -> u32 {
        match self {
            Self::Pdf => 1,
            Self::TailProbability => 2,
            Self::Quantile => 3,
            Self::Tvar => 4,
        }
    }

    /// Column headers after the parameter triple.
    pub fn columns(self) -> Vec<String> {
        match self {
            Self::Pdf => PDF_POINTS.iter().map(|x| format!("{x}")).collect(),
            Self::TailProbability => LEVELS.iter().map(|p| format!("q_{p}")).collect(),
            Self::Quantile | Self::Tvar => LEVELS.iter().map(|p| format!("{p}")).collect(),
        }
    }
}

/// Source of the true values of tail quantities.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// Root finding and tail integrals on the quadrature distribution.
    Quadrature,
    /// Empirical estimators of a simulation with the given configuration.
    MonteCarlo(SimulationConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub mu_x: f64,
    pub mu_y: f64,
    pub rho: f64,
    /// Signed relative errors; `None` where the approximation is not valid.
    pub cells: Vec<Option<f64>>,
}

/// Relative errors of one row.
pub fn table_row(kind: TableKind, row: (f64, f64, f64), reference: &Reference) -> Result<TableRow> {
    let (mu_x, mu_y, rho) = row;
    let params = ProductParams::standard(mu_x, mu_y, rho)?;
    let cells = match kind {
        TableKind::Pdf => pdf_row(&params)?,
        _ => tail_row(kind, &params, reference)?,
    };
    Ok(TableRow {
        mu_x,
        mu_y,
        rho,
        cells,
    })
}

/// All rows of a table, computed in parallel and returned in grid order.
pub fn compute_table(kind: TableKind, reference: &Reference) -> Result<Vec<TableRow>> {
    GRID_ROWS
        .par_iter()
        .map(|&row| table_row(kind, row, reference))
        .collect()
}

fn relative(approx: f64, truth: f64) -> f64 {
    (approx - truth) / truth
}

fn pdf_row(params: &ProductParams) -> Result<Vec<Option<f64>>> {
    let policy = TruncationPolicy::default();
    PDF_POINTS
        .iter()
        .map(|&x| {
            let exact = pdf_exact(params, x, &policy)?.value;
            let approx = pdf_asym(params, x, TailSide::RightTail);
            Ok(approx.is_valid().then(|| relative(approx.value, exact)))
        })
        .collect()
}

/// True quantile, tail mass at it and TVaR for each level.
struct TailTruth {
    quantile: f64,
    tail_mass: f64,
    tvar: f64,
}

fn truths(params: &ProductParams, reference: &Reference) -> Result<Vec<TailTruth>> {
    match reference {
        Reference::Quadrature => {
            let dist = ProductDistribution::new(*params, TruncationPolicy::default())?;
            LEVELS
                .iter()
                .map(|&p| {
                    let quantile = quantile_of(&dist, &QuantileRequest::new(p)?)?;
                    let (tail_mass, moment) = dist.tail_mass_and_expectation(quantile)?;
                    Ok(TailTruth {
                        quantile,
                        tail_mass,
                        tvar: moment / (1.0 - p),
                    })
                })
                .collect()
        }
        Reference::MonteCarlo(config) => {
            let mut config = config.clone();
            config.upper_levels = LEVELS.to_vec();
            let summary = simulate(params, &config)?;
            LEVELS
                .iter()
                .map(|&p| {
                    let quantile = empirical_quantile(&summary, p)?;
                    // the k-th largest has k - 1 samples strictly above it
                    let k = order_index(summary.n, p);
                    Ok(TailTruth {
                        quantile,
                        tail_mass: (k - 1) as f64 / summary.n as f64,
                        tvar: empirical_tvar(&summary, p)?,
                    })
                })
                .collect()
        }
    }
}

fn tail_row(
    kind: TableKind,
    params: &ProductParams,
    reference: &Reference,
) -> Result<Vec<Option<f64>>> {
    let truth = truths(params, reference)?;
    LEVELS
        .iter()
        .zip(truth)
        .map(|(&p, t)| {
            let approx = match kind {
                TableKind::TailProbability => tail_asym(params, t.quantile, TailSide::RightTail),
                TableKind::Quantile => quantile_asym(params, p)?,
                TableKind::Tvar => tvar_asym(params, p)?,
                TableKind::Pdf => unreachable!("density rows are computed separately"),
            };
            let reference = match kind {
                TableKind::TailProbability => t.tail_mass,
                TableKind::Quantile => t.quantile,
                _ => t.tvar,
            };
            Ok(approx.is_valid().then(|| relative(approx.value, reference)))
        })
        .collect()
}

/// `value` to two significant figures as `d.dE±XX`, e.g. `4.4E-02`.
pub fn format_two_sig(value: f64) -> String {
    if !value.is_finite() {
        return format!("{value}");
    }
    let s = format!("{value:.1E}");
    let (mantissa, exponent) = s.split_once('E').expect("exponent present");
    let e: i32 = exponent.parse().expect("integer exponent");
    format!("{mantissa}E{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

/// Cell text for human-readable tables.
pub fn format_cell(cell: Option<f64>) -> String {
    cell.map_or_else(|| "N/A".to_string(), format_two_sig)
}
