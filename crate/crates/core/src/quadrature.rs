//! Gauss-Legendre panels with recursive bisection.
//!
//! The integrands in this crate are smooth away from isolated points (the
//! logarithmic singularity of the density at the origin), so a fixed 20-point
//! rule compared against its two-halves refinement is an adequate error
//! estimate. Integrands may be vector valued (`[f64; D]`) so that, for
//! instance, mass and first moment share density evaluations.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const ORDER: usize = 20;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_rule(ORDER))
}

/// Nodes and weights on [-1, 1] by Newton iteration on P_n.
fn gauss_legendre_rule(n: usize) -> Rule {
    let mut nodes = [0.0; ORDER];
    let mut weights = [0.0; ORDER];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    Rule { nodes, weights }
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_depth: u32,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-14,
            rel: 1e-13,
            max_depth: 60,
        }
    }
}

/// Fixed 20-point Gauss-Legendre estimate on `[a, b]`.
pub fn gauss_legendre<const D: usize, F>(f: &mut F, a: f64, b: f64) -> Result<[f64; D]>
where
    F: FnMut(f64) -> Result<[f64; D]>,
{
    let r = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = [0.0; D];
    for (x, w) in r.nodes.iter().zip(r.weights.iter()) {
        let v = f(mid + half * x)?;
        for d in 0..D {
            acc[d] += w * v[d];
        }
    }
    for a in acc.iter_mut() {
        *a *= half;
    }
    Ok(acc)
}

/// Adaptive integral of a vector-valued function over `[a, b]`.
///
/// A panel is accepted when its two-halves estimate agrees with the whole-panel
/// estimate in every component to `max(abs, rel * |I|)`, where `I` is the
/// one-panel estimate over all of `[a, b]`. Tolerances are not split between
/// children. Panels at `max_depth` are accepted as they are.
pub fn integrate<const D: usize, F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<[f64; D]>
where
    F: FnMut(f64) -> Result<[f64; D]>,
{
    if a == b {
        return Ok([0.0; D]);
    }
    let whole = gauss_legendre(&mut f, a, b)?;
    let mut scale = [0.0; D];
    for d in 0..D {
        scale[d] = tol.abs.max(tol.rel * whole[d].abs());
    }
    let mut total = [0.0; D];
    recurse(&mut f, a, b, whole, &scale, tol.max_depth, 0, &mut total)?;
    for v in total.iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("integral over [{a}, {b}]")));
        }
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn recurse<const D: usize, F>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: [f64; D],
    accept: &[f64; D],
    max_depth: u32,
    depth: u32,
    total: &mut [f64; D],
) -> Result<()>
where
    F: FnMut(f64) -> Result<[f64; D]>,
{
    let m = 0.5 * (a + b);
    let left = gauss_legendre(f, a, m)?;
    let right = gauss_legendre(f, m, b)?;
    let mut converged = true;
    for d in 0..D {
        let refined = left[d] + right[d];
        let err = (refined - whole[d]).abs();
        if err > accept[d].max(f64::EPSILON * refined.abs()) {
            converged = false;
        }
    }
    if converged || depth >= max_depth || m <= a || m >= b {
        for d in 0..D {
            total[d] += left[d] + right[d];
        }
        return Ok(());
    }
    recurse(f, a, m, left, accept, max_depth, depth + 1, total)?;
    recurse(f, m, b, right, accept, max_depth, depth + 1, total)
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate(|x| f(x).map(|v| [v]), a, b, tol).map(|v| v[0])
}
