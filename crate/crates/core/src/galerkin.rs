//! Convergence of the Galerkin truncations `phi^N(t, proj_N x)` as the level
//! grows, for diagonal quadratic data where every level is available exactly.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadratic::{QuadraticData, QuadraticSolution};
use crate::spectral::EigenSpectrum;

/// How the evaluation point is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PointRule {
    List { values: Vec<f64> },
    /// `x_i = 1 / (i + 1)` for `i < len`.
    Harmonic { len: usize },
}

impl PointRule {
    pub fn coords(&self) -> Vec<f64> {
        match self {
            PointRule::List { values } => values.clone(),
            PointRule::Harmonic { len } => (0..*len).map(|i| 1.0 / (i + 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeRow {
    pub level: usize,
    pub value: f64,
    /// `|phi^{2N} - phi^N|` at the projected points.
    pub cauchy_diff: f64,
    /// Certified upper bound on `sum_{i>N} lambda_i^{-1} log(1 + lambda_i mu0_i t)`.
    pub c_tail: f64,
    /// `(1/2t) sum_{i>N} lambda_i^{-1} x_i^2`.
    pub psi_tail: f64,
    pub tail_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeTable {
    pub t: f64,
    pub rows: Vec<ConvergeRow>,
    /// The difference and bound columns are both non-increasing.
    pub monotone: bool,
    pub tolerance: f64,
    pub pass: bool,
}

fn level_value(spectrum: &EigenSpectrum, data: &QuadraticData, level: usize, t: f64, x: &[f64]) -> Result<f64> {
    let q = QuadraticSolution::new(spectrum.clone(), data.clone()).with_level(level);
    let len = x.len().min(level + 1);
    q.value(t, &x[..len])
}

/// Upper bound on `sum_{i > level} lambda_i^{-1} log(1 + lambda_i mu0_i t)`.
fn c_tail(spectrum: &EigenSpectrum, data: &QuadraticData, level: usize, t: f64, tol: f64) -> Result<f64> {
    let term = |i: usize| {
        let l = spectrum.lambda(i);
        (l * data.mu0(i) * t).ln_1p() / l
    };
    let end = match (spectrum.capacity(), data.support()) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    if let Some(end) = end {
        return Ok((level + 1..end).map(term).sum());
    }
    // constant curvature on an unbounded spectrum: full series minus the head
    let full = spectrum.log_series(data.sup() * t, None, tol)?;
    let head: f64 = (0..=level).map(term).sum();
    Ok((full.value - head + full.error_bound).max(0.0))
}

/// One row per level in `levels`, each comparing level `N` with `2N`.
pub fn converge(
    spectrum: &EigenSpectrum,
    data: &QuadraticData,
    t: f64,
    x: &[f64],
    levels: &[usize],
    tol: f64,
) -> Result<ConvergeTable> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be positive"));
    }
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("levels", "need a strictly increasing, non-empty list"));
    }
    if !data.is_admissible() {
        return Err(crate::Error::NotConvex("quadratic data with negative curvature".into()));
    }
    if let Some(cap) = spectrum.capacity() {
        if 2 * levels[levels.len() - 1] + 1 > cap {
            return Err(invalid("levels", format!("level 2N must fit the {cap} modes of the spectrum")));
        }
    }
    let rows = levels
        .iter()
        .map(|&n| {
            let value = level_value(spectrum, data, n, t, x)?;
            let doubled = level_value(spectrum, data, 2 * n, t, x)?;
            let c = c_tail(spectrum, data, n, t, 0.1 * tol)?;
            let psi: f64 = x.iter().enumerate().skip(n + 1).map(|(i, v)| v * v / spectrum.lambda(i)).sum::<f64>() / (2.0 * t);
            let diff = (doubled - value).abs();
            Ok(ConvergeRow {
                level: n,
                value,
                cauchy_diff: diff,
                c_tail: c,
                psi_tail: psi,
                tail_bound: c + psi,
                pass: diff <= c + psi + tol,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = rows
        .windows(2)
        .all(|w| w[1].cauchy_diff <= w[0].cauchy_diff && w[1].tail_bound <= w[0].tail_bound);
    let pass = monotone && rows.iter().all(|r| r.pass);
    Ok(ConvergeTable { t, rows, monotone, tolerance: tol, pass })
}
