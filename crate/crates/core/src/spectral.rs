//! The operator `A` through its eigenvalue sequence, truncated points in the
//! eigenbasis, and certified sums of the series that the summability
//! assumption makes finite.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::CompensatedSum;

/// Serialized description of a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumDescriptor {
    /// `lambda_i = (i + 1)^alpha`.
    PowerLaw { alpha: f64 },
    /// Eigenvalues of `I - N^2 Delta_disc` on `sites` periodic sites.
    Circle { sites: usize },
    /// A finite, explicitly listed spectrum.
    Explicit { values: Vec<f64> },
}

/// Eigenvalues of `A`, non-decreasing, generated on demand.
///
/// Power-law spectra are unbounded in the mode index; circle and explicit
/// spectra cap the truncation level at their length.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    descriptor: SpectrumDescriptor,
    finite: Option<Vec<f64>>,
}

impl EigenSpectrum {
    pub fn new(descriptor: SpectrumDescriptor) -> Result<Self> {
        let finite = match &descriptor {
            SpectrumDescriptor::PowerLaw { alpha } => {
                if !(alpha.is_finite() && *alpha > 1.0) {
                    return Err(Error::InvalidSpectrum(format!(
                        "power-law exponent must exceed 1 for summability, got {alpha}"
                    )));
                }
                None
            }
            SpectrumDescriptor::Circle { sites } => {
                if *sites < 2 {
                    return Err(Error::InvalidSpectrum(format!(
                        "circle needs at least 2 sites, got {sites}"
                    )));
                }
                Some(circle_eigenvalues(*sites))
            }
            SpectrumDescriptor::Explicit { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidSpectrum("empty eigenvalue list".into()));
                }
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    return Err(Error::InvalidSpectrum(format!(
                        "eigenvalues must be finite and positive, got {v}"
                    )));
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidSpectrum(
                        "eigenvalues must be listed in non-decreasing order".into(),
                    ));
                }
                Some(values.clone())
            }
        };
        Ok(Self { descriptor, finite })
    }

    pub fn power_law(alpha: f64) -> Result<Self> {
        Self::new(SpectrumDescriptor::PowerLaw { alpha })
    }

    pub fn circle(sites: usize) -> Result<Self> {
        Self::new(SpectrumDescriptor::Circle { sites })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        Self::new(SpectrumDescriptor::Explicit { values })
    }

    pub fn descriptor(&self) -> &SpectrumDescriptor {
        &self.descriptor
    }

    /// Number of available modes, `None` when unbounded.
    pub fn capacity(&self) -> Option<usize> {
        self.finite.as_ref().map(Vec::len)
    }

    pub fn try_lambda(&self, i: usize) -> Option<f64> {
        match (&self.descriptor, &self.finite) {
            (SpectrumDescriptor::PowerLaw { alpha }, _) => Some(((i + 1) as f64).powf(*alpha)),
            (_, Some(v)) => v.get(i).copied(),
            (_, None) => None,
        }
    }

    /// `lambda_i`. Panics past the capacity of a finite spectrum.
    pub fn lambda(&self, i: usize) -> f64 {
        self.try_lambda(i).unwrap_or_else(|| {
            panic!(
                "mode {i} beyond spectrum capacity {:?}",
                self.capacity().unwrap_or(usize::MAX)
            )
        })
    }

    /// First `n` eigenvalues (fewer if the spectrum is finite and shorter).
    pub fn eigenvalues(&self, n: usize) -> Vec<f64> {
        let n = self.capacity().map_or(n, |c| c.min(n));
        (0..n).map(|i| self.lambda(i)).collect()
    }

    /// Errors if a point with `len` coordinates does not fit the spectrum.
    pub fn check_len(&self, len: usize) -> Result<()> {
        match self.capacity() {
            Some(cap) if len > cap => Err(invalid(
                "point",
                format!("{len} coordinates but the spectrum only has {cap} modes"),
            )),
            _ => Ok(()),
        }
    }

    /// Mode count used when a quantity covers "all modes": the capacity, or
    /// `level + 1` when a Galerkin level is imposed.
    pub fn active_modes(&self, level: Option<usize>) -> Option<usize> {
        match (self.capacity(), level) {
            (Some(c), Some(l)) => Some(c.min(l + 1)),
            (Some(c), None) => Some(c),
            (None, Some(l)) => Some(l + 1),
            (None, None) => None,
        }
    }

    /// Certified `sum_i lambda_i^{-1} log(1 + lambda_i a)` over the active
    /// modes. `a` is the same for every mode.
    pub fn log_series(&self, a: f64, level: Option<usize>, tol: f64) -> Result<CertifiedSum> {
        self.uniform_series(a, level, tol, SeriesKind::Log)
    }

    /// Certified `sum_i a / (1 + lambda_i a)` over the active modes.
    pub fn rational_series(&self, a: f64, level: Option<usize>, tol: f64) -> Result<CertifiedSum> {
        self.uniform_series(a, level, tol, SeriesKind::Rational)
    }

    /// Certified `sum_i lambda_i^{-1}` over modes `i >= from`.
    pub fn inverse_tail(&self, from: usize, tol: f64) -> Result<CertifiedSum> {
        match (&self.descriptor, self.capacity()) {
            (_, Some(cap)) => {
                let s: CompensatedSum = (from.min(cap)..cap).map(|i| 1.0 / self.lambda(i)).collect();
                Ok(CertifiedSum::exact(s.value(), cap.saturating_sub(from)))
            }
            (SpectrumDescriptor::PowerLaw { alpha }, None) => {
                let alpha = *alpha;
                let term = |m: f64| m.powf(-alpha);
                let tail = |x: f64| x.powf(1.0 - alpha) / (alpha - 1.0);
                certified_power_sum(from, term, tail, |_| true, tol)
            }
            _ => unreachable!("only power-law spectra are unbounded"),
        }
    }

    fn uniform_series(
        &self,
        a: f64,
        level: Option<usize>,
        tol: f64,
        kind: SeriesKind,
    ) -> Result<CertifiedSum> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(invalid("a", format!("series parameter must be finite and >= 0, got {a}")));
        }
        if !(tol > 0.0) {
            return Err(invalid("tol", "tolerance must be positive"));
        }
        let term = |lambda: f64| match kind {
            SeriesKind::Log => (lambda * a).ln_1p() / lambda,
            SeriesKind::Rational => a / (1.0 + lambda * a),
        };
        if a == 0.0 {
            return Ok(CertifiedSum::exact(0.0, 0));
        }
        if let Some(n) = self.active_modes(level) {
            let s: CompensatedSum = (0..n).map(|i| term(self.lambda(i))).collect();
            return Ok(CertifiedSum::exact(s.value(), n));
        }
        let SpectrumDescriptor::PowerLaw { alpha } = self.descriptor else {
            unreachable!("only power-law spectra are unbounded");
        };
        let power_term = |m: f64| term(m.powf(alpha));
        let tail = |x: f64| match kind {
            SeriesKind::Log => log_tail_integral(alpha, a, x),
            SeriesKind::Rational => rational_tail_integral(alpha, a, x),
        };
        // The alternating expansion in the tail integrals needs a x^alpha >= 2,
        // which also makes the rational term convex. The log term is convex
        // once log(1 + a x^alpha) >= (2 alpha + 1) / (alpha + 1), which
        // a x^alpha >= e^2 - 1 guarantees.
        let threshold = match kind {
            SeriesKind::Log => 8.0,
            SeriesKind::Rational => 2.0,
        };
        let ready = |x: f64| a * x.powf(alpha) >= threshold;
        certified_power_sum(0, power_term, tail, ready, tol)
    }
}

impl fmt::Display for EigenSpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.descriptor {
            SpectrumDescriptor::PowerLaw { alpha } => write!(f, "power_law(alpha={alpha})"),
            SpectrumDescriptor::Circle { sites } => write!(f, "circle(sites={sites})"),
            SpectrumDescriptor::Explicit { values } => write!(f, "explicit({} modes)", values.len()),
        }
    }
}

/// Eigenvalues `1 + 4 N^2 sin^2(pi k / N)` ordered to match the real
/// Fourier basis: `k = 0`, then the (cos, sin) pair for each `0 < k < N/2`,
/// then `k = N/2` when `N` is even. This order is ascending.
pub fn circle_eigenvalues(sites: usize) -> Vec<f64> {
    (0..sites)
        .map(|j| {
            let k = circle_frequency(j);
            let s = (PI * k as f64 / sites as f64).sin();
            1.0 + 4.0 * (sites * sites) as f64 * s * s
        })
        .collect()
}

/// Fourier frequency carried by circle mode `j`.
pub fn circle_frequency(j: usize) -> usize {
    j.div_ceil(2)
}

#[derive(Debug, Clone, Copy)]
enum SeriesKind {
    Log,
    Rational,
}

/// A partial sum plus a rigorous bound on the distance to the full series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedSum {
    pub value: f64,
    pub error_bound: f64,
    pub terms: usize,
}

impl CertifiedSum {
    pub fn exact(value: f64, terms: usize) -> Self {
        Self {
            value,
            error_bound: 0.0,
            terms,
        }
    }
}

const MAX_SERIES_TERMS: usize = 1 << 26;

/// Sums `term(m)` for `m = from + 1, from + 2, ...` where `term` is
/// decreasing and `tail(x) = int_x^inf term`. Once `ready(m)` holds the term
/// is convex on `[m, inf)`, so the remainder after `m` lies between the
/// trapezoid bound `tail(m + 1) + term(m + 1) / 2` and the midpoint bound
/// `tail(m + 1/2)`. The centre of that bracket is added and half its width
/// reported.
fn certified_power_sum(
    from: usize,
    term: impl Fn(f64) -> f64,
    tail: impl Fn(f64) -> f64,
    ready: impl Fn(f64) -> bool,
    tol: f64,
) -> Result<CertifiedSum> {
    let mut acc = CompensatedSum::new();
    let mut m = from;
    let mut next_check = (from + 64).max(2 * from);
    loop {
        while m < next_check {
            m += 1;
            acc.add(term(m as f64));
        }
        let x = m as f64;
        if ready(x) {
            let upper = tail(x + 0.5);
            let lower = tail(x + 1.0) + 0.5 * term(x + 1.0);
            let half_width = 0.5 * (upper - lower).abs();
            // Allow for rounding in the partial sum and the closed-form tails.
            let rounding = 4.0 * f64::EPSILON * (acc.value().abs() + upper.abs()) * (m as f64).log2();
            if half_width + rounding <= tol {
                return Ok(CertifiedSum {
                    value: acc.value() + 0.5 * (upper + lower),
                    error_bound: half_width + rounding,
                    terms: m - from,
                });
            }
        }
        if m >= MAX_SERIES_TERMS {
            return Err(Error::TailNotCertifiable {
                tol,
                max_terms: MAX_SERIES_TERMS,
            });
        }
        next_check = (2 * m).min(MAX_SERIES_TERMS);
    }
}

/// `int_x^inf a / (1 + a s^alpha) ds`, requires `a x^alpha >= 2`.
fn rational_tail_integral(alpha: f64, a: f64, x: f64) -> f64 {
    let r = 1.0 / (a * x.powf(alpha));
    debug_assert!(r <= 0.5 + 1e-12);
    let lead = x.powf(1.0 - alpha);
    let mut sum = CompensatedSum::new();
    let mut rk = 1.0;
    for k in 0..200 {
        let t = rk / (alpha * (k + 1) as f64 - 1.0);
        sum.add(if k % 2 == 0 { t } else { -t });
        if t < 1e-18 * sum.value().abs() {
            break;
        }
        rk *= r;
    }
    lead * sum.value()
}

/// Upper bound on `int_x^inf a / (1 + a s^alpha) ds` valid for any x > 0.
fn rational_tail_bound(alpha: f64, a: f64, x: f64) -> f64 {
    if a * x.powf(alpha) >= 2.0 {
        rational_tail_integral(alpha, a, x)
    } else {
        x.powf(1.0 - alpha) / (alpha - 1.0)
    }
}

/// `int_x^inf log(1 + a s^alpha) / s^alpha ds` by parts:
/// `x^{1-alpha} log(1 + a x^alpha)/(alpha-1) + alpha/(alpha-1) * J(x)`.
fn log_tail_integral(alpha: f64, a: f64, x: f64) -> f64 {
    x.powf(1.0 - alpha) * (a * x.powf(alpha)).ln_1p() / (alpha - 1.0)
        + alpha / (alpha - 1.0) * rational_tail_integral(alpha, a, x)
}

/// Which side of the summability series a report's tail refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    /// Integral-comparison majorant of an infinite remainder.
    IntegralMajorant,
    /// Exact remainder of a finite spectrum (zero once exhausted).
    FiniteRemainder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    pub n_terms: usize,
    pub partial_sum: f64,
    pub tail_bound: f64,
    pub tail_kind: TailKind,
    pub converges: bool,
}

/// Partial sum of `sum_i log(1 + lambda_i) / lambda_i` and its remainder.
pub fn summability_report(spectrum: &EigenSpectrum, n_terms: usize) -> Result<SummabilityReport> {
    if n_terms == 0 {
        return Err(invalid("n_terms", "must be at least 1"));
    }
    let term = |l: f64| l.ln_1p() / l;
    let summed = spectrum.capacity().map_or(n_terms, |c| c.min(n_terms));
    let partial: CompensatedSum = (0..summed).map(|i| term(spectrum.lambda(i))).collect();
    let (tail_bound, tail_kind) = match (spectrum.descriptor(), spectrum.capacity()) {
        (SpectrumDescriptor::PowerLaw { alpha }, None) => {
            let x = n_terms as f64;
            let alpha = *alpha;
            // log(1 + s^alpha)/s^alpha is decreasing, so the remainder over
            // m > n is at most the integral from n.
            let bound = x.powf(1.0 - alpha) * x.powf(alpha).ln_1p() / (alpha - 1.0)
                + alpha / (alpha - 1.0) * rational_tail_bound(alpha, 1.0, x);
            (bound, TailKind::IntegralMajorant)
        }
        (_, Some(cap)) => {
            let rest: CompensatedSum = (summed..cap).map(|i| term(spectrum.lambda(i))).collect();
            (rest.value(), TailKind::FiniteRemainder)
        }
        _ => unreachable!("only power-law spectra are unbounded"),
    };
    Ok(SummabilityReport {
        n_terms,
        partial_sum: partial.value(),
        tail_bound,
        tail_kind,
        converges: tail_bound.is_finite(),
    })
}

/// Coordinates `(x_0, ..., x_N)` of a point of `H_N` in the eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TruncatedPoint(Vec<f64>);

impl TruncatedPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("point", "a truncated point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("point", "coordinates must be finite"));
        }
        Ok(Self(coords))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len.max(1)])
    }

    /// Unit vector `e_i` in `H_i`.
    pub fn basis(i: usize) -> Self {
        let mut v = vec![0.0; i + 1];
        v[i] = 1.0;
        Self(v)
    }

    pub fn level(&self) -> usize {
        self.0.len() - 1
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Orthogonal projection onto `H_level` (pads with zeros if shorter).
    pub fn project(&self, level: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(level + 1, 0.0);
        Self(v)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f64>> for TruncatedPoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TruncatedPoint> for Vec<f64> {
    fn from(p: TruncatedPoint) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    A,
    AInverse,
    /// `B = A^{-1/2}`.
    B,
    /// `B^2 = A^{-1}`.
    BSquared,
}

/// Diagonal action of `A`, `A^{-1}`, `B` or `B^2` in the eigenbasis.
pub fn apply_operator(
    spectrum: &EigenSpectrum,
    which: Operator,
    point: &TruncatedPoint,
) -> Result<TruncatedPoint> {
    spectrum.check_len(point.len())?;
    let coords = point
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let l = spectrum.lambda(i);
            match which {
                Operator::A => l * x,
                Operator::AInverse | Operator::BSquared => x / l,
                Operator::B => x / l.sqrt(),
            }
        })
        .collect();
    Ok(TruncatedPoint(coords))
}

/// `<A^{-1} x, x>` over the coordinates of `x`.
pub fn inverse_metric(spectrum: &EigenSpectrum, x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| v * v / spectrum.lambda(i))
        .sum()
}

/// `<A x, x>` over the coordinates of `x`.
pub fn forward_metric(spectrum: &EigenSpectrum, x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| spectrum.lambda(i) * v * v)
        .sum()
}
