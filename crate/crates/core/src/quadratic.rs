//! Exact solutions for diagonal quadratic initial data.
//!
//! With `phi_0(x) = 1/2 sum mu0_i x_i^2` the solution stays quadratic:
//! `phi(t, x) = c(t) + 1/2 sum mu_i(t) x_i^2`, where each curvature follows
//! the Riccati flow `mu' = -lambda mu^2` and `c' = sum mu_i`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::CompensatedSum;
use crate::spectral::{CertifiedSum, EigenSpectrum};

/// Initial curvatures `mu0_i`, given by a rule so the level can grow freely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mu0Rule {
    /// `mu0_i = value` for every mode.
    Constant { value: f64 },
    /// `mu0_i = values[i]`, zero past the end of the list.
    List { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticData {
    pub mu0: Mu0Rule,
}

impl QuadraticData {
    pub fn new(mu0: Mu0Rule) -> Result<Self> {
        let ok = match &mu0 {
            Mu0Rule::Constant { value } => value.is_finite(),
            Mu0Rule::List { values } => values.iter().all(|v| v.is_finite()),
        };
        if !ok {
            return Err(invalid("mu0", "curvatures must be finite"));
        }
        Ok(Self { mu0 })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(Mu0Rule::Constant { value })
    }

    pub fn list(values: Vec<f64>) -> Result<Self> {
        Self::new(Mu0Rule::List { values })
    }

    pub fn mu0(&self, i: usize) -> f64 {
        match &self.mu0 {
            Mu0Rule::Constant { value } => *value,
            Mu0Rule::List { values } => values.get(i).copied().unwrap_or(0.0),
        }
    }

    /// Number of modes that may carry nonzero curvature (`None`: all).
    pub fn support(&self) -> Option<usize> {
        match &self.mu0 {
            Mu0Rule::Constant { value } if *value == 0.0 => Some(0),
            Mu0Rule::Constant { .. } => None,
            Mu0Rule::List { values } => Some(values.len()),
        }
    }

    /// `sup_i mu0_i` (0 for an empty list).
    pub fn sup(&self) -> f64 {
        match &self.mu0 {
            Mu0Rule::Constant { value } => *value,
            Mu0Rule::List { values } => values.iter().copied().fold(0.0, f64::max),
        }
    }

    /// True iff every curvature is non-negative, i.e. the solution is global.
    pub fn is_admissible(&self) -> bool {
        match &self.mu0 {
            Mu0Rule::Constant { value } => *value >= 0.0,
            Mu0Rule::List { values } => values.iter().all(|v| *v >= 0.0),
        }
    }

    /// `phi_0(x) = 1/2 sum mu0_i x_i^2`.
    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .enumerate()
            .map(|(i, v)| self.mu0(i) * v * v)
            .sum::<f64>()
    }
}

/// Blow-up time `-1/(lambda mu0)` of a nonconvex mode, `None` if convex.
pub fn blowup_time(mu0: f64, lambda: f64) -> Option<f64> {
    (mu0 < 0.0).then(|| -1.0 / (lambda * mu0))
}

/// `mu(t) = mu0 / (1 + lambda mu0 t)`.
pub fn riccati_mu(mu0: f64, lambda: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("time must be non-negative, got {t}")));
    }
    if let Some(t_star) = blowup_time(mu0, lambda) {
        if t >= t_star {
            return Err(Error::BlowUp {
                t_star,
                t,
                mode: None,
            });
        }
    }
    Ok(mu0 / (1.0 + lambda * mu0 * t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiCrossCheck {
    pub closed_form: f64,
    pub integrated: f64,
    pub abs_error: f64,
}

/// Closed form against classical RK4 on `mu' = -lambda mu^2` with `steps`
/// uniform steps.
pub fn riccati_ode_crosscheck(mu0: f64, lambda: f64, t: f64, steps: usize) -> Result<RiccatiCrossCheck> {
    if steps < 10 {
        return Err(invalid("steps", format!("need at least 10 steps, got {steps}")));
    }
    let closed_form = riccati_mu(mu0, lambda, t)?;
    let f = |m: f64| -lambda * m * m;
    let h = t / steps as f64;
    let mut m = mu0;
    for _ in 0..steps {
        let k1 = f(m);
        let k2 = f(m + 0.5 * h * k1);
        let k3 = f(m + 0.5 * h * k2);
        let k4 = f(m + h * k3);
        m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(RiccatiCrossCheck {
        closed_form,
        integrated: m,
        abs_error: (closed_form - m).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Value,
    Gradient,
    HessianDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Evaluation {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Evaluation {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Evaluation::Scalar(v) => Some(*v),
            Evaluation::Vector(_) => None,
        }
    }

    pub fn vector(&self) -> Option<&[f64]> {
        match self {
            Evaluation::Vector(v) => Some(v),
            Evaluation::Scalar(_) => None,
        }
    }
}

pub const DEFAULT_SERIES_TOL: f64 = 1e-12;

/// Closed-form solution `c(t) + 1/2 sum mu_i(t) x_i^2`, optionally restricted
/// to the Galerkin space `H_level`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSolution {
    spectrum: EigenSpectrum,
    data: QuadraticData,
    level: Option<usize>,
    series_tol: f64,
}

impl QuadraticSolution {
    pub fn new(spectrum: EigenSpectrum, data: QuadraticData) -> Self {
        Self {
            spectrum,
            data,
            level: None,
            series_tol: DEFAULT_SERIES_TOL,
        }
    }

    /// Restricts to modes `0..=level`.
    pub fn with_level(mut self, level: usize) -> Self {
        self.level = Some(level);
        self
    }

    pub fn with_series_tol(mut self, tol: f64) -> Self {
        self.series_tol = tol;
        self
    }

    pub fn spectrum(&self) -> &EigenSpectrum {
        &self.spectrum
    }

    pub fn data(&self) -> &QuadraticData {
        &self.data
    }

    pub fn level(&self) -> Option<usize> {
        self.level
    }

    /// Modes that carry curvature, `None` if infinitely many.
    pub fn modes(&self) -> Option<usize> {
        match (self.spectrum.active_modes(self.level), self.data.support()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        }
    }

    /// Largest coordinate count accepted by point queries.
    pub fn max_point_len(&self) -> Option<usize> {
        self.spectrum.active_modes(self.level)
    }

    /// Earliest blow-up over all active modes; `Some(0.0)` when infinitely
    /// many modes are nonconvex.
    pub fn horizon(&self) -> Option<f64> {
        match self.modes() {
            Some(n) => (0..n)
                .filter_map(|i| blowup_time(self.data.mu0(i), self.spectrum.lambda(i)))
                .reduce(f64::min),
            None => (!self.data.is_admissible()).then_some(0.0),
        }
    }

    fn check_horizon(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid("t", format!("time must be finite and non-negative, got {t}")));
        }
        if let Some(t_star) = self.horizon() {
            if t >= t_star {
                let mode = self.modes().and_then(|n| {
                    (0..n).find(|&i| {
                        blowup_time(self.data.mu0(i), self.spectrum.lambda(i)) == Some(t_star)
                    })
                });
                return Err(Error::BlowUp { t_star, t, mode });
            }
        }
        Ok(())
    }

    pub fn mu(&self, i: usize, t: f64) -> Result<f64> {
        riccati_mu(self.data.mu0(i), self.spectrum.lambda(i), t).map_err(|e| match e {
            Error::BlowUp { t_star, t, .. } => Error::BlowUp {
                t_star,
                t,
                mode: Some(i),
            },
            other => other,
        })
    }

    /// `c(t) = sum_i lambda_i^{-1} log(1 + lambda_i mu0_i t)` with a
    /// certified bound on the neglected tail.
    pub fn c_of_t(&self, t: f64, tol: f64) -> Result<CertifiedSum> {
        self.check_horizon(t)?;
        match self.modes() {
            Some(n) => {
                let s: CompensatedSum = (0..n)
                    .map(|i| {
                        let l = self.spectrum.lambda(i);
                        (l * self.data.mu0(i) * t).ln_1p() / l
                    })
                    .collect();
                Ok(CertifiedSum::exact(s.value(), n))
            }
            // Infinitely many modes only arise for a constant rule.
            None => self.spectrum.log_series(self.data.sup() * t, self.level, tol),
        }
    }

    /// `c'(t) = sum_i mu_i(t)`.
    pub fn c_dot(&self, t: f64, tol: f64) -> Result<CertifiedSum> {
        self.check_horizon(t)?;
        match self.modes() {
            Some(n) => {
                let s: CompensatedSum = (0..n)
                    .map(|i| self.mu(i, t))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .collect();
                Ok(CertifiedSum::exact(s.value(), n))
            }
            None => {
                let m = self.data.sup();
                if t == 0.0 {
                    // sum of a nonzero constant over infinitely many modes
                    return Err(invalid("t", "c'(0) diverges for a constant curvature rule"));
                }
                let s = self.spectrum.rational_series(m * t, self.level, tol * t)?;
                Ok(CertifiedSum {
                    value: s.value / t,
                    error_bound: s.error_bound / t,
                    terms: s.terms,
                })
            }
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if let Some(max) = self.max_point_len() {
            if x.len() > max {
                return Err(invalid(
                    "x",
                    format!("{} coordinates but the solution lives on {max} modes", x.len()),
                ));
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let c = self.c_of_t(t, self.series_tol)?.value;
        let q: CompensatedSum = x
            .iter()
            .enumerate()
            .map(|(i, v)| self.mu(i, t).map(|m| 0.5 * m * v * v))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .collect();
        Ok(c + q.value())
    }

    pub fn gradient(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.check_horizon(t)?;
        x.iter()
            .enumerate()
            .map(|(i, v)| self.mu(i, t).map(|m| m * v))
            .collect()
    }

    pub fn hessian_diagonal(&self, t: f64, len: usize) -> Result<Vec<f64>> {
        self.check_horizon(t)?;
        (0..len).map(|i| self.mu(i, t)).collect()
    }

    /// `d_t phi = c'(t) - 1/2 sum lambda_i mu_i(t)^2 x_i^2`.
    pub fn time_derivative(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let cdot = self.c_dot(t, self.series_tol)?.value;
        let q: f64 = x
            .iter()
            .enumerate()
            .map(|(i, v)| {
                self.mu(i, t)
                    .map(|m| 0.5 * self.spectrum.lambda(i) * m * m * v * v)
            })
            .sum::<Result<f64>>()?;
        Ok(cdot - q)
    }

    pub fn eval(&self, t: f64, x: &[f64], mode: EvalMode) -> Result<Evaluation> {
        Ok(match mode {
            EvalMode::Value => Evaluation::Scalar(self.value(t, x)?),
            EvalMode::Gradient => Evaluation::Vector(self.gradient(t, x)?),
            EvalMode::HessianDiagonal => {
                self.check_point(x)?;
                Evaluation::Vector(self.hessian_diagonal(t, x.len())?)
            }
        })
    }
}
