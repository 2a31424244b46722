use crate::error::{Error, Result};
use crate::initial::SeparableData;
use crate::numeric::CompensatedSum;
use crate::quadratic::QuadraticSolution;
use crate::spectral::EigenSpectrum;

use super::cole_hopf::{separable_points, ColeHopfPoint, QuadratureConfig};
use super::grid::GridField;

/// Exact solution for separable data, one Cole-Hopf oracle per mode.
#[derive(Debug, Clone)]
pub struct SeparableOracle {
    pub data: SeparableData,
    pub spectrum: EigenSpectrum,
    pub quadrature: QuadratureConfig,
}

impl SeparableOracle {
    pub fn new(data: SeparableData, spectrum: EigenSpectrum) -> Result<Self> {
        spectrum.check_len(data.profiles.len())?;
        Ok(Self {
            data,
            spectrum,
            quadrature: QuadratureConfig::default(),
        })
    }

    pub fn points(&self, t: f64, x: &[f64]) -> Result<Vec<ColeHopfPoint>> {
        separable_points(&self.data, &self.spectrum, t, x, &self.quadrature)
    }

    fn at_zero<T>(&self, t: f64, x: &[f64], f: impl FnOnce() -> T) -> Result<Option<T>> {
        if t < 0.0 {
            return Err(Error::OutOfDomain {
                t,
                x: x.to_vec(),
                reason: "negative time".into(),
            });
        }
        Ok((t == 0.0).then(f))
    }
}

/// A solution of the truncated viscous equation with a common query surface.
#[derive(Debug, Clone)]
pub enum SolutionField {
    ClosedFormQuadratic(QuadraticSolution),
    SeparableOracle(SeparableOracle),
    Grid(GridField),
}

impl SolutionField {
    /// Number of modes the field resolves, `None` if unbounded.
    pub fn dim(&self) -> Option<usize> {
        match self {
            SolutionField::ClosedFormQuadratic(q) => q.max_point_len(),
            SolutionField::SeparableOracle(s) => Some(s.data.profiles.len()),
            SolutionField::Grid(g) => Some(g.dim()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SolutionField::ClosedFormQuadratic(_) => "closed_form_quadratic",
            SolutionField::SeparableOracle(_) => "separable_oracle",
            SolutionField::Grid(_) => "grid",
        }
    }

    pub fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        match self {
            SolutionField::ClosedFormQuadratic(q) => q.value(t, x),
            SolutionField::SeparableOracle(s) => {
                let zero = || {
                    let v: f64 = s.data.profiles.iter().enumerate().map(|(i, p)| p.value(x.get(i).copied().unwrap_or(0.0))).sum();
                    v + s.data.offset
                };
                if let Some(v) = s.at_zero(t, x, zero)? {
                    return Ok(v);
                }
                let sum: CompensatedSum = s.points(t, x)?.iter().map(|p| p.value).collect();
                Ok(s.data.offset + sum.value())
            }
            SolutionField::Grid(g) => g.value(t, x),
        }
    }

    /// Partial derivatives over the coordinates of `x`.
    pub fn gradient(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            SolutionField::ClosedFormQuadratic(q) => q.gradient(t, x),
            SolutionField::SeparableOracle(s) => {
                let zero = || {
                    (0..x.len())
                        .map(|i| s.data.profiles.get(i).map_or(0.0, |p| p.derivative(x[i])))
                        .collect()
                };
                if let Some(v) = s.at_zero(t, x, zero)? {
                    return Ok(v);
                }
                let pts = s.points(t, x)?;
                Ok((0..x.len()).map(|i| pts.get(i).map_or(0.0, |p| p.derivative)).collect())
            }
            SolutionField::Grid(g) => g.gradient(t, x),
        }
    }

    pub fn hessian_entry(&self, t: f64, x: &[f64], i: usize, j: usize) -> Result<f64> {
        match self {
            SolutionField::ClosedFormQuadratic(q) => {
                if i != j {
                    return Ok(0.0);
                }
                Ok(q.hessian_diagonal(t, i + 1)?[i])
            }
            SolutionField::SeparableOracle(s) => {
                if i != j || i >= s.data.profiles.len() {
                    return Ok(0.0);
                }
                let xi = x.get(i).copied().unwrap_or(0.0);
                if t == 0.0 {
                    return s.data.profiles[i]
                        .second_derivative(xi)
                        .ok_or_else(|| Error::Unsupported("profile has no second derivative".into()));
                }
                let p = &s.data.profiles[i];
                let pt = super::cole_hopf::cole_hopf_point(p, s.spectrum.lambda(i), t, xi, &s.quadrature)?;
                Ok(pt.second_derivative)
            }
            SolutionField::Grid(g) => g.hessian_entry(t, x, i, j),
        }
    }

    pub fn hessian_diagonal(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            SolutionField::ClosedFormQuadratic(q) => q.hessian_diagonal(t, x.len()),
            SolutionField::SeparableOracle(s) if t > 0.0 => {
                let pts = s.points(t, x)?;
                Ok((0..x.len()).map(|i| pts.get(i).map_or(0.0, |p| p.second_derivative)).collect())
            }
            _ => (0..x.len()).map(|i| self.hessian_entry(t, x, i, i)).collect(),
        }
    }

    pub fn time_derivative(&self, t: f64, x: &[f64]) -> Result<f64> {
        match self {
            SolutionField::ClosedFormQuadratic(q) => q.time_derivative(t, x),
            SolutionField::SeparableOracle(s) => {
                if t <= 0.0 {
                    return Err(Error::OutOfDomain {
                        t,
                        x: x.to_vec(),
                        reason: "time derivative needs t > 0".into(),
                    });
                }
                let sum: CompensatedSum = s.points(t, x)?.iter().map(|p| p.time_derivative).collect();
                Ok(sum.value())
            }
            SolutionField::Grid(g) => g.time_derivative(t, x),
        }
    }
}
