//! One-dimensional exact solutions through the Cole-Hopf transform.
//!
//! With `w = exp(-lambda u / 2)` the equation `u_t = u_xx - lambda/2 u_x^2`
//! becomes the heat equation, so
//!
//! ```text
//! u(t, x) = -(2/lambda) log[(4 pi t)^{-1/2} int exp(-(x-y)^2/4t - lambda f(y)/2) dy].
//! ```
//!
//! The integrand is log-concave for convex `f`. Its peak is the proximal
//! point of `f` with parameter `lambda t`, which anchors the quadrature
//! window. Derivatives come from moments of the normalized integrand:
//! `u_x = E[x - y]/(lambda t)` and `u_xx = (2/lambda)(1/2t - Var y/4t^2)`;
//! `u_t` then follows from the equation itself.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::initial::{Profile, SeparableData};
use crate::numeric::CompensatedSum;
use crate::quadratic::{EvalMode, Evaluation};
use crate::spectral::EigenSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// The window stops where the integrand has fallen to `exp(edge_log_decay)`
    /// of its peak; `ln 1e-14` is about `-32.2`.
    pub edge_log_decay: f64,
    /// Relative agreement required between two successive step halvings.
    pub rel_tol: f64,
    pub max_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            edge_log_decay: -36.0,
            rel_tol: 1e-13,
            max_nodes: 1 << 22,
        }
    }
}

/// Value and derivatives of a 1-D solution at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColeHopfPoint {
    pub value: f64,
    pub derivative: f64,
    pub second_derivative: f64,
    pub time_derivative: f64,
}

struct Moments {
    log_integral: f64,
    mean_offset: f64,
    variance: f64,
}

fn sums(g: &impl Fn(f64) -> f64, y0: f64, g0: f64, h: f64, ks: impl Iterator<Item = i64>) -> [CompensatedSum; 3] {
    let mut s = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
    for k in ks {
        let d = k as f64 * h;
        let w = (g(y0 + d) - g0).exp();
        s[0].add(w);
        s[1].add(w * d);
        s[2].add(w * d * d);
    }
    s
}

fn moments_from(s: &[CompensatedSum; 3], h: f64, g0: f64, t: f64) -> Moments {
    let (s0, s1, s2) = (s[0].value(), s[1].value(), s[2].value());
    let mean_offset = s1 / s0;
    Moments {
        log_integral: g0 + (h * s0).ln() - 0.5 * (4.0 * PI * t).ln(),
        mean_offset,
        variance: (s2 / s0 - mean_offset * mean_offset).max(0.0),
    }
}

/// Solution of `u_t = u_xx - lambda/2 u_x^2`, `u(0) = f`, at `(t, x)`.
pub fn cole_hopf_point(
    profile: &Profile,
    lambda: f64,
    t: f64,
    x: f64,
    quad: &QuadratureConfig,
) -> Result<ColeHopfPoint> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("need t > 0 (query the profile at t = 0), got {t}")));
    }
    if !(lambda > 0.0) {
        return Err(invalid("lambda", "must be positive"));
    }
    if !profile.is_convex() {
        return Err(Error::NotConvex("Cole-Hopf oracle requires a convex profile".into()));
    }
    if let Profile::Constant { value } = profile {
        return Ok(ColeHopfPoint {
            value: *value,
            derivative: 0.0,
            second_derivative: 0.0,
            time_derivative: 0.0,
        });
    }

    let g = |y: f64| -(x - y) * (x - y) / (4.0 * t) - 0.5 * lambda * profile.value(y);
    let y0 = profile.proximal_point(x, lambda * t);
    let g0 = g(y0);
    let curv_at = |y: f64| {
        let f2 = profile.second_derivative(y).unwrap_or_else(|| {
            let e = 1e-5 * (1.0 + y.abs());
            (profile.derivative(y + e) - profile.derivative(y - e)) / (2.0 * e)
        });
        1.0 / (2.0 * t) + 0.5 * lambda * f2.max(0.0)
    };
    let width = curv_at(y0).sqrt().recip();

    let mut reach = [0.0f64; 2];
    for (side, dir) in [(0usize, -1.0), (1, 1.0)] {
        let mut d = width;
        while g(y0 + dir * d) - g0 > quad.edge_log_decay {
            d *= 2.0;
            if d > 1e8 * (1.0 + width) {
                return Err(Error::WindowTooSmall(format!(
                    "integrand has not decayed to exp({}) of its peak within {d:e} of y = {y0}",
                    quad.edge_log_decay
                )));
            }
        }
        reach[side] = d;
    }

    // Initial step resolves the sharpest curvature the profile can have.
    let sharpest = {
        let cb = profile.curvature_bound();
        if cb.is_finite() {
            (1.0 / (2.0 * t) + 0.5 * lambda * cb).sqrt().recip()
        } else {
            width
        }
    };
    let mut h = sharpest.min(width) / 4.0;
    let span = |h: f64| (-((reach[0] / h).ceil() as i64), (reach[1] / h).ceil() as i64);
    let (mut lo, mut hi) = span(h);
    let mut acc = sums(&g, y0, g0, h, lo..=hi);
    let mut prev = moments_from(&acc, h, g0, t);
    loop {
        if ((hi - lo) as usize) * 2 > quad.max_nodes {
            return Err(Error::WindowTooSmall(format!(
                "quadrature did not settle within {} nodes",
                quad.max_nodes
            )));
        }
        // Halve the step: old nodes keep their sums, odd nodes are new.
        h *= 0.5;
        lo *= 2;
        hi *= 2;
        let odd = sums(&g, y0, g0, h, (lo..=hi).filter(|k| k % 2 != 0));
        for (a, o) in acc.iter_mut().zip(&odd) {
            a.add(o.value());
        }
        let next = moments_from(&acc, h, g0, t);
        let scale = 1.0 + next.log_integral.abs();
        let settled = (next.log_integral - prev.log_integral).abs() <= quad.rel_tol * scale
            && (next.mean_offset - prev.mean_offset).abs() <= quad.rel_tol * (width + next.mean_offset.abs())
            && (next.variance - prev.variance).abs() <= quad.rel_tol.sqrt() * 1e-3 * next.variance.max(width * width);
        prev = next;
        if settled {
            break;
        }
    }

    let m = prev;
    let value = -2.0 / lambda * m.log_integral;
    let derivative = (x - y0 - m.mean_offset) / (lambda * t);
    let second_derivative = 2.0 / lambda * (1.0 / (2.0 * t) - m.variance / (4.0 * t * t));
    Ok(ColeHopfPoint {
        value,
        derivative,
        second_derivative,
        time_derivative: second_derivative - 0.5 * lambda * derivative * derivative,
    })
}

pub fn cole_hopf_1d(profile: &Profile, lambda: f64, t: f64, x: f64, quad: &QuadratureConfig) -> Result<f64> {
    cole_hopf_point(profile, lambda, t, x, quad).map(|p| p.value)
}

/// Per-mode points of a separable solution. Coordinates past the end of
/// `x` are taken as 0; modes past the last profile carry zero data.
pub fn separable_points(
    data: &SeparableData,
    spectrum: &EigenSpectrum,
    t: f64,
    x: &[f64],
    quad: &QuadratureConfig,
) -> Result<Vec<ColeHopfPoint>> {
    spectrum.check_len(data.profiles.len())?;
    data.profiles
        .iter()
        .enumerate()
        .map(|(i, p)| cole_hopf_point(p, spectrum.lambda(i), t, x.get(i).copied().unwrap_or(0.0), quad))
        .collect()
}

/// Tensorized oracle for separable data: value, gradient (over the
/// coordinates of `x`) or per-mode second derivatives.
pub fn separable_eval(
    data: &SeparableData,
    spectrum: &EigenSpectrum,
    t: f64,
    x: &[f64],
    mode: EvalMode,
    quad: &QuadratureConfig,
) -> Result<Evaluation> {
    let pts = separable_points(data, spectrum, t, x, quad)?;
    let per_coord = |f: fn(&ColeHopfPoint) -> f64| -> Vec<f64> {
        (0..x.len()).map(|i| pts.get(i).map_or(0.0, f)).collect()
    };
    Ok(match mode {
        EvalMode::Value => {
            let s: CompensatedSum = pts.iter().map(|p| p.value).collect();
            Evaluation::Scalar(data.offset + s.value())
        }
        EvalMode::Gradient => Evaluation::Vector(per_coord(|p| p.derivative)),
        EvalMode::HessianDiagonal => Evaluation::Vector(per_coord(|p| p.second_derivative)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::{QuadraticData, QuadraticSolution};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    /// Quadratic profile: `mu x^2 / (2(1+lambda mu t)) + log(1+lambda mu t)/lambda`.
    fn quadratic_closed(mu: f64, lambda: f64, t: f64, x: f64) -> f64 {
        let d = 1.0 + lambda * mu * t;
        0.5 * mu * x * x / d + d.ln() / lambda
    }

    #[test]
    fn examples() {
        let v = cole_hopf_1d(&Profile::Quadratic { mu: 1.0 }, 1.0, 1.0, 0.0, &q()).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-8, "{v}");
        let v = cole_hopf_1d(&Profile::Quadratic { mu: 4.0 }, 2.0, 0.25, 1.0, &q()).unwrap();
        assert!((v - (2.0 / 3.0 + 0.5 * 3f64.ln())).abs() < 1e-8, "{v}");
        for (t, x) in [(0.1, -3.0), (5.0, 2.0)] {
            assert_eq!(cole_hopf_1d(&Profile::Constant { value: 3.0 }, 1.7, t, x, &q()).unwrap(), 3.0);
        }
        assert!(cole_hopf_1d(&Profile::Quadratic { mu: 1.0 }, 1.0, 0.0, 0.0, &q()).is_err());
    }

    #[test]
    fn derivatives_match_closed_form() {
        for &(mu, lambda, t, x) in &[(1.0, 1.0, 1.0, 2.0), (4.0, 2.0, 0.25, -1.0), (0.3, 9.0, 0.05, 0.7)] {
            let p = cole_hopf_point(&Profile::Quadratic { mu }, lambda, t, x, &q()).unwrap();
            let m = mu / (1.0 + lambda * mu * t);
            assert_relative_eq!(p.value, quadratic_closed(mu, lambda, t, x), epsilon = 1e-10);
            assert_relative_eq!(p.derivative, m * x, epsilon = 1e-9);
            assert_relative_eq!(p.second_derivative, m, epsilon = 1e-9);
            let ut = mu / (1.0 + lambda * mu * t) - 0.5 * lambda * m * m * x * x;
            assert_relative_eq!(p.time_derivative, ut, epsilon = 1e-8);
        }
    }

    #[test]
    fn pseudo_huber_satisfies_pde_by_differences() {
        // Independent check of the moment formulas: finite differences of
        // the value in x and t must satisfy u_t = u_xx - lambda/2 u_x^2.
        let f = Profile::PseudoHuber { scale: 1.0, width: 0.3 };
        let (lambda, t, x, e) = (1.5, 0.4, 0.35, 1e-3);
        let u = |t: f64, x: f64| cole_hopf_1d(&f, lambda, t, x, &q()).unwrap();
        let ux = (u(t, x + e) - u(t, x - e)) / (2.0 * e);
        let uxx = (u(t, x + e) - 2.0 * u(t, x) + u(t, x - e)) / (e * e);
        let ut = (u(t + e, x) - u(t - e, x)) / (2.0 * e);
        let p = cole_hopf_point(&f, lambda, t, x, &q()).unwrap();
        assert!((p.derivative - ux).abs() < 1e-6);
        assert!((p.second_derivative - uxx).abs() < 1e-5);
        assert!((p.time_derivative - ut).abs() < 1e-5);
        assert!((ut - (uxx - 0.5 * lambda * ux * ux)).abs() < 1e-5);
    }

    #[test]
    fn separable_examples() {
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let data = SeparableData {
            profiles: vec![Profile::Quadratic { mu: 1.0 }; 3],
            offset: 0.0,
        };
        let v = separable_eval(&data, &sp, 1.0, &[1.0, 1.0, 1.0], EvalMode::Value, &q())
            .unwrap()
            .scalar()
            .unwrap();
        let expect: f64 = [1.0f64, 4.0, 9.0].iter().map(|l| 0.5 / (1.0 + l) + (1.0 + l).ln() / l).sum();
        assert_relative_eq!(v, expect, epsilon = 1e-10);

        let qs = QuadraticSolution::new(sp.clone(), QuadraticData::list(vec![1.0, 2.0, 0.5]).unwrap());
        let data = SeparableData {
            profiles: vec![
                Profile::Quadratic { mu: 1.0 },
                Profile::Quadratic { mu: 2.0 },
                Profile::Quadratic { mu: 0.5 },
            ],
            offset: 0.0,
        };
        let x = [0.3, -1.2, 2.0];
        let v = separable_eval(&data, &sp, 0.7, &x, EvalMode::Value, &q()).unwrap();
        assert!((v.scalar().unwrap() - qs.value(0.7, &x).unwrap()).abs() < 1e-8);
        let g = separable_eval(&data, &sp, 0.7, &x, EvalMode::Gradient, &q()).unwrap();
        for (a, b) in g.vector().unwrap().iter().zip(qs.gradient(0.7, &x).unwrap()) {
            assert!((a - b).abs() < 1e-8);
        }

        let single = SeparableData {
            profiles: vec![Profile::PseudoHuber { scale: 1.0, width: 0.2 }],
            offset: 0.0,
        };
        let v = separable_eval(&single, &sp, 0.5, &[0.8], EvalMode::Value, &q()).unwrap();
        assert_eq!(
            v.scalar().unwrap(),
            cole_hopf_1d(&single.profiles[0], 1.0, 0.5, 0.8, &q()).unwrap()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn quadratic_oracle_agrees(mu in 0.0f64..10.0, lambda in 0.5f64..50.0, t in 0.01f64..5.0, x in -5.0f64..5.0) {
            let v = cole_hopf_1d(&Profile::Quadratic { mu }, lambda, t, x, &q()).unwrap();
            let e = quadratic_closed(mu, lambda, t, x);
            prop_assert!((v - e).abs() <= 1e-9 * (1.0 + e.abs()), "{} vs {}", v, e);
        }

        #[test]
        fn viscous_value_sits_between_envelope_and_data(t in 0.01f64..3.0, x in -4.0f64..4.0, w in 0.05f64..1.0) {
            // psi <= u, and u <= f by Jensen on the convex exponent.
            let f = Profile::PseudoHuber { scale: 1.0, width: w };
            let u = cole_hopf_1d(&f, 1.0, t, x, &q()).unwrap();
            prop_assert!(u >= f.envelope(x, t) - 1e-10);
            let cb = f.curvature_bound();
            prop_assert!(u <= f.envelope(x, t) + (1.0 + cb * t).ln() + 1e-10);
        }
    }
}
