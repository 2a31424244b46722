//! The first-order problem `d_t psi + 1/2 <A grad psi, grad psi> = 0`,
//! solved pointwise through the Lax-Oleinik formula
//!
//! ```text
//! psi(t, x) = inf_y { phi_0(y) + <A^{-1}(x - y), x - y> / (2t) }
//! ```
//!
//! plus the two counterexamples showing what fails without convexity or
//! coercivity.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::initial::InitialCondition;
use crate::quadratic::QuadraticData;
use crate::spectral::{inverse_metric, EigenSpectrum, TruncatedPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stop once `|grad J| <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Step for finite-difference curvature estimates of generic data.
    pub fd_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100_000,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaxOleinikResult {
    pub minimizer: TruncatedPoint,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Objective<'a> {
    phi0: &'a InitialCondition,
    x: &'a [f64],
    /// `1 / (t lambda_i)`.
    weight: Vec<f64>,
}

impl Objective<'_> {
    fn value(&self, y: &[f64]) -> f64 {
        let metric: f64 = y
            .iter()
            .zip(self.x)
            .zip(&self.weight)
            .map(|((yi, xi), w)| w * (xi - yi) * (xi - yi))
            .sum();
        self.phi0.value(y) + 0.5 * metric
    }

    fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let mut g = self.phi0.gradient(y);
        for ((gi, (yi, xi)), w) in g.iter_mut().zip(y.iter().zip(self.x)).zip(&self.weight) {
            *gi += w * (yi - xi);
        }
        g
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Minimizes `J(y) = phi_0(y) + (1/2t) sum lambda_i^{-1} (x_i - y_i)^2` over
/// `H_N` (same level as `x`) by preconditioned accelerated gradient descent.
///
/// The preconditioner is the inverse of `diag(D^2 phi_0) + (t A)^{-1}` at the
/// warm start `y = x`, which is exact for diagonal quadratic data.
pub fn lax_oleinik_solve(
    phi0: &InitialCondition,
    spectrum: &EigenSpectrum,
    t: f64,
    x: &TruncatedPoint,
    cfg: &SolverConfig,
) -> Result<LaxOleinikResult> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("time must be positive, got {t}")));
    }
    if !phi0.is_convex() {
        return Err(Error::NotConvex(
            "the Lax-Oleinik solver requires convex initial data".into(),
        ));
    }
    spectrum.check_len(x.len())?;
    let n = x.len();
    let xs = x.coords();
    let obj = Objective {
        phi0,
        x: xs,
        weight: (0..n).map(|i| 1.0 / (t * spectrum.lambda(i))).collect(),
    };

    let curv = phi0.hessian_diagonal(xs).unwrap_or_else(|| {
        let g0 = phi0.gradient(xs);
        (0..n)
            .map(|i| {
                let mut xp = xs.to_vec();
                xp[i] += cfg.fd_step;
                ((phi0.gradient(&xp)[i] - g0[i]) / cfg.fd_step).max(0.0)
            })
            .collect()
    });
    let precond: Vec<f64> = curv
        .iter()
        .zip(&obj.weight)
        .map(|(h, w)| 1.0 / (h.max(0.0) + w))
        .collect();

    let mut y = xs.to_vec();
    let mut y_prev = y.clone();
    let mut f_y = obj.value(&y);
    let mut g_y = obj.gradient(&y);
    let mut residual = norm(&g_y);
    let mut momentum_k = 0usize;
    let mut step = 1.0;
    let mut iterations = 0;
    let mut best_residual = residual;
    let mut stalled = 0;

    while residual > cfg.tol && iterations < cfg.max_iter {
        iterations += 1;
        let beta = momentum_k as f64 / (momentum_k as f64 + 3.0);
        let z: Vec<f64> = y
            .iter()
            .zip(&y_prev)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        let f_z = obj.value(&z);
        let g_z = if beta == 0.0 { g_y.clone() } else { obj.gradient(&z) };
        let dg: Vec<f64> = g_z.iter().zip(&precond).map(|(g, d)| g * d).collect();
        let decrease: f64 = g_z.iter().zip(&dg).map(|(g, d)| g * d).sum();

        // Backtracking on the preconditioned step.
        let mut candidate;
        let mut f_c;
        loop {
            candidate = z.iter().zip(&dg).map(|(a, d)| a - step * d).collect::<Vec<_>>();
            f_c = obj.value(&candidate);
            // Near the minimum the decrease drops below the resolution of f,
            // so comparisons carry a few ulps of slack.
            let slack = 4.0 * f64::EPSILON * f_z.abs();
            if f_c <= f_z - 0.5 * step * decrease + slack || step < 1e-12 {
                break;
            }
            step *= 0.5;
        }

        if f_c > f_y + 4.0 * f64::EPSILON * f_y.abs() {
            // Function-value restart: drop momentum and retry from y.
            if momentum_k == 0 {
                // No progress possible at machine precision.
                break;
            }
            momentum_k = 0;
            y_prev = y.clone();
            continue;
        }
        y_prev = std::mem::replace(&mut y, candidate);
        f_y = f_c;
        g_y = obj.gradient(&y);
        let r = norm(&g_y);
        if r < 0.999 * best_residual {
            best_residual = r;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 200 {
                residual = r;
                break;
            }
        }
        residual = r;
        momentum_k += 1;
        step = (step * 1.5).min(1.0);
    }

    Ok(LaxOleinikResult {
        minimizer: TruncatedPoint::new(y)?,
        value: f_y,
        residual,
        iterations,
        converged: residual <= cfg.tol,
    })
}

/// Closed-form minimizer and value for diagonal quadratic data:
/// `y*_i = x_i / (1 + t lambda_i mu0_i)`, `psi = 1/2 sum mu0_i x_i^2 / (1 + lambda_i mu0_i t)`.
pub fn lax_oleinik_quadratic_closed(
    data: &QuadraticData,
    spectrum: &EigenSpectrum,
    t: f64,
    x: &TruncatedPoint,
) -> Result<(TruncatedPoint, f64)> {
    if !(t > 0.0) {
        return Err(invalid("t", format!("time must be positive, got {t}")));
    }
    if !data.is_admissible() {
        return Err(Error::NotConvex("negative curvature in quadratic data".into()));
    }
    spectrum.check_len(x.len())?;
    let mut value = 0.0;
    let y = x
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let m = data.mu0(i);
            let d = 1.0 + t * spectrum.lambda(i) * m;
            value += 0.5 * m * xi * xi / d;
            xi / d
        })
        .collect();
    Ok((TruncatedPoint::new(y)?, value))
}

/// `psi(t, x)` by the cheapest exact route available: closed form for
/// quadratic data, per-coordinate 1-D envelopes for separable data, the
/// iterative solver otherwise. At `t = 0` returns `phi_0(x)`.
pub fn psi_value(
    phi0: &InitialCondition,
    spectrum: &EigenSpectrum,
    t: f64,
    x: &[f64],
    cfg: &SolverConfig,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(phi0.value(x));
    }
    match phi0 {
        InitialCondition::DiagonalQuadratic(q) => {
            lax_oleinik_quadratic_closed(q, spectrum, t, &TruncatedPoint::new(x.to_vec())?).map(|r| r.1)
        }
        InitialCondition::Separable(s) => {
            if !phi0.is_convex() {
                return Err(Error::NotConvex("separable profile is not convex".into()));
            }
            spectrum.check_len(x.len())?;
            let mut v = s.offset;
            for (i, p) in s.profiles.iter().enumerate() {
                let xi = x.get(i).copied().unwrap_or(0.0);
                v += if i < x.len() {
                    p.envelope(xi, t * spectrum.lambda(i))
                } else {
                    p.value(0.0)
                };
            }
            Ok(v)
        }
        InitialCondition::GenericConvex(_) => {
            let r = lax_oleinik_solve(phi0, spectrum, t, &TruncatedPoint::new(x.to_vec())?, cfg)?;
            Ok(r.value)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    /// `psi(t, x) - psi(s, x)`, must be `>= -tol`.
    pub monotone_margin: f64,
    /// `<Ax, x>/(2t) + phi_0(0) - psi(t, x)`.
    pub origin_margin: f64,
    /// `phi_0(x) - psi(t, x)`.
    pub identity_margin: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Monotonicity in time and the upper bound
/// `psi(t,x) <= min{ <Ax,x>/(2t) + phi_0(0), phi_0(x) }`.
#[allow(clippy::too_many_arguments)]
pub fn deterministic_bounds_check(
    at_t: &LaxOleinikResult,
    at_s: &LaxOleinikResult,
    phi0: &InitialCondition,
    spectrum: &EigenSpectrum,
    t: f64,
    s: f64,
    x: &TruncatedPoint,
    tol: f64,
) -> Result<BoundsReport> {
    if !(0.0 < t && t <= s) {
        return Err(invalid("s", format!("need 0 < t <= s, got t = {t}, s = {s}")));
    }
    let xs = x.coords();
    let ax: f64 = crate::spectral::forward_metric(spectrum, xs);
    let zero = vec![0.0; xs.len()];
    let monotone_margin = at_t.value - at_s.value;
    let origin_margin = ax / (2.0 * t) + phi0.value(&zero) - at_t.value;
    let identity_margin = phi0.value(xs) - at_t.value;
    let pass = monotone_margin >= -tol && origin_margin >= -tol && identity_margin >= -tol;
    Ok(BoundsReport {
        monotone_margin,
        origin_margin,
        identity_margin,
        tol,
        pass,
    })
}

/// Value of the explicit competitor for the rank-one data
/// `phi_0(y) = <y, x*>^2`, `x*_n = (n+1)^{-beta}`, `lambda_n = (n+1)^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    /// `J(z)`, an upper estimate of `psi(t, x)`.
    pub value: f64,
    /// `<z, x*>^2`, zero up to rounding by construction of `z`.
    pub phi0_at_z: f64,
    /// `lambda_N^{-1} (z_N - x_N)^2 / (2t)`.
    pub pivot_term: f64,
    /// `sum_{i > N} lambda_i^{-1} x_i^2 / (2t)`.
    pub tail_term: f64,
    /// `((N+1)^{2 beta - alpha} + (N+1)^{1 - alpha}) / (2t)`, the shape the
    /// estimate follows up to a constant.
    pub rate: f64,
}

pub fn counterexample_growth(
    alpha: f64,
    beta: f64,
    t: f64,
    x: &TruncatedPoint,
    pivot: usize,
) -> Result<GrowthEstimate> {
    if !(alpha > 2.0 * beta && 2.0 * beta > 1.0) {
        return Err(invalid(
            "alpha/beta",
            format!("need alpha > 2 beta > 1, got alpha = {alpha}, beta = {beta}"),
        ));
    }
    if !(t > 0.0) {
        return Err(invalid("t", "time must be positive"));
    }
    let spectrum = EigenSpectrum::power_law(alpha)?;
    let xstar = |n: usize| ((n + 1) as f64).powf(-beta);
    let xs = x.coords();
    let coord = |k: usize| xs.get(k).copied().unwrap_or(0.0);

    let len = xs.len().max(pivot + 1);
    let mut z = vec![0.0; len];
    for (k, zk) in z.iter_mut().enumerate().take(pivot) {
        *zk = coord(k);
    }
    let dot: f64 = (0..pivot).map(|i| xstar(i) * z[i]).sum();
    z[pivot] = -dot / xstar(pivot);

    let phi0_at_z = {
        let d: f64 = z.iter().enumerate().map(|(i, v)| xstar(i) * v).sum();
        d * d
    };
    let diff: Vec<f64> = (0..len).map(|k| coord(k) - z[k]).collect();
    let pivot_term = diff[pivot] * diff[pivot] / spectrum.lambda(pivot) / (2.0 * t);
    let tail_term = inverse_metric(&spectrum, &diff) / (2.0 * t) - pivot_term;
    let np1 = (pivot + 1) as f64;
    Ok(GrowthEstimate {
        value: phi0_at_z + pivot_term + tail_term,
        phi0_at_z,
        pivot_term,
        tail_term,
        rate: (np1.powf(2.0 * beta - alpha) + np1.powf(1.0 - alpha)) / (2.0 * t),
    })
}

/// The nonconvex data `|x|^2` outside the unit ball, `2 - |x|^2` inside.
pub fn nonconvex_bump(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 >= 1.0 {
        r2
    } else {
        2.0 - r2
    }
}

/// Running minimum of `J(e_n)` over `n = 0..=n_probe` for the nonconvex
/// bump at `x = 0`. Tends to 1 while `phi_0(0) = 2`.
pub fn counterexample_nonconvex(spectrum: &EigenSpectrum, t: f64, n_probe: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", "time must be positive"));
    }
    spectrum.check_len(n_probe + 1)?;
    let mut best = f64::INFINITY;
    for n in 0..=n_probe {
        let e = TruncatedPoint::basis(n);
        let j = nonconvex_bump(e.coords()) + inverse_metric(spectrum, e.coords()) / (2.0 * t);
        best = best.min(j);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::{GenericConvex, Profile};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn single_quadratic() -> (InitialCondition, EigenSpectrum) {
        (
            InitialCondition::quadratic(QuadraticData::constant(1.0).unwrap()),
            EigenSpectrum::explicit(vec![1.0]).unwrap(),
        )
    }

    #[test]
    fn solver_single_mode() {
        let (ic, sp) = single_quadratic();
        let x = TruncatedPoint::new(vec![2.0]).unwrap();
        let r = lax_oleinik_solve(&ic, &sp, 1.0, &x, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.minimizer.coords()[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn solver_at_global_minimizer_stays() {
        let ic = InitialCondition::separable(vec![
            Profile::PseudoHuber { scale: 1.0, width: 0.2 },
            Profile::Quadratic { mu: 3.0 },
        ])
        .unwrap();
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let x = TruncatedPoint::zeros(2);
        let r = lax_oleinik_solve(&ic, &sp, 0.7, &x, &SolverConfig::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.minimizer.coords(), &[0.0, 0.0]);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn constant_data_is_preserved() {
        let ic = InitialCondition::constant(3.0);
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        for t in [0.1, 1.0, 10.0] {
            let x = TruncatedPoint::new(vec![1.0, -2.0, 0.5]).unwrap();
            let r = lax_oleinik_solve(&ic, &sp, t, &x, &SolverConfig::default()).unwrap();
            assert_eq!(r.value, 3.0);
            assert_eq!(psi_value(&ic, &sp, t, x.coords(), &SolverConfig::default()).unwrap(), 3.0);
        }
    }

    #[test]
    fn rejects_nonconvex() {
        let ic = InitialCondition::quadratic(QuadraticData::list(vec![1.0, -1.0]).unwrap());
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let x = TruncatedPoint::zeros(2);
        assert!(matches!(
            lax_oleinik_solve(&ic, &sp, 1.0, &x, &SolverConfig::default()),
            Err(Error::NotConvex(_))
        ));
    }

    #[test]
    fn closed_form_examples() {
        let sp = EigenSpectrum::explicit(vec![1.0]).unwrap();
        let q = QuadraticData::constant(1.0).unwrap();
        let (y, v) = lax_oleinik_quadratic_closed(&q, &sp, 1.0, &TruncatedPoint::new(vec![2.0]).unwrap()).unwrap();
        assert_eq!(y.coords(), &[1.0]);
        assert_eq!(v, 1.0);
        let (y, v) = lax_oleinik_quadratic_closed(&q, &sp, 1.0, &TruncatedPoint::zeros(1)).unwrap();
        assert_eq!((y.coords()[0], v), (0.0, 0.0));
        // t -> 0 recovers phi_0(x) = 2
        let x = TruncatedPoint::new(vec![2.0]).unwrap();
        let mut prev = 0.0;
        for t in [1e-1, 1e-2, 1e-4, 1e-8] {
            let v = lax_oleinik_quadratic_closed(&q, &sp, t, &x).unwrap().1;
            assert!(v > prev);
            prev = v;
        }
        assert!((prev - 2.0).abs() < 1e-7);
    }

    #[test]
    fn bounds_examples() {
        let (ic, sp) = single_quadratic();
        let cfg = SolverConfig::default();
        let x = TruncatedPoint::new(vec![1.0]).unwrap();
        let a = lax_oleinik_solve(&ic, &sp, 0.5, &x, &cfg).unwrap();
        let b = lax_oleinik_solve(&ic, &sp, 1.0, &x, &cfg).unwrap();
        assert_relative_eq!(a.value, 1.0 / 3.0, epsilon = 1e-10);
        assert_relative_eq!(b.value, 0.25, epsilon = 1e-10);
        let rep = deterministic_bounds_check(&a, &b, &ic, &sp, 0.5, 1.0, &x, 1e-8).unwrap();
        assert!(rep.pass, "{rep:?}");

        let z = TruncatedPoint::zeros(1);
        let a = lax_oleinik_solve(&ic, &sp, 0.5, &z, &cfg).unwrap();
        let b = lax_oleinik_solve(&ic, &sp, 1.0, &z, &cfg).unwrap();
        let rep = deterministic_bounds_check(&a, &b, &ic, &sp, 0.5, 1.0, &z, 1e-8).unwrap();
        assert!(rep.pass && a.value == 0.0);

        let c = InitialCondition::constant(2.0);
        let a = lax_oleinik_solve(&c, &sp, 0.5, &x, &cfg).unwrap();
        let b = lax_oleinik_solve(&c, &sp, 1.0, &x, &cfg).unwrap();
        let rep = deterministic_bounds_check(&a, &b, &c, &sp, 0.5, 1.0, &x, 1e-8).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.monotone_margin, 0.0);
    }

    #[test]
    fn solver_matches_closed_form_on_random_data() {
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = SolverConfig::default();
        for n in [4usize, 16, 64, 256] {
            let mu: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
            let q = QuadraticData::list(mu).unwrap();
            let x = TruncatedPoint::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
            let t = rng.random_range(0.05..2.0);
            let ic = InitialCondition::quadratic(q.clone());
            let r = lax_oleinik_solve(&ic, &sp, t, &x, &cfg).unwrap();
            let (y, v) = lax_oleinik_quadratic_closed(&q, &sp, t, &x).unwrap();
            assert!(r.converged);
            assert!((r.value - v).abs() <= 10.0 * cfg.tol);
            let gap: f64 = r
                .minimizer
                .coords()
                .iter()
                .zip(y.coords())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(gap <= 100.0 * cfg.tol);
        }
    }

    #[test]
    fn generic_solver_matches_separable_envelopes() {
        // Same pseudo-Huber data through the generic (callable) interface.
        let profiles = vec![
            Profile::PseudoHuber { scale: 1.0, width: 0.3 },
            Profile::PseudoHuber { scale: 2.0, width: 0.5 },
            Profile::Quadratic { mu: 1.5 },
        ];
        let sep = InitialCondition::separable(profiles.clone()).unwrap();
        let (pv, pg) = (profiles.clone(), profiles);
        let generic = InitialCondition::GenericConvex(GenericConvex {
            value: Arc::new(move |x: &[f64]| pv.iter().zip(x).map(|(p, v)| p.value(*v)).sum()),
            gradient: Arc::new(move |x: &[f64]| pg.iter().zip(x).map(|(p, v)| p.derivative(*v)).collect()),
            convex: true,
            coercive: true,
            lower_bound: 0.0,
            lipschitz: Some(4.0),
        });
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let cfg = SolverConfig::default();
        for (t, x) in [(0.3, vec![1.0, -2.0, 0.5]), (2.0, vec![-0.1, 0.05, 3.0])] {
            let exact = psi_value(&sep, &sp, t, &x, &cfg).unwrap();
            let r = lax_oleinik_solve(&generic, &sp, t, &TruncatedPoint::new(x).unwrap(), &cfg).unwrap();
            assert!(r.converged, "{r:?}");
            assert!((r.value - exact).abs() < 1e-9, "{} vs {exact}", r.value);
        }
    }

    #[test]
    fn psi_is_convex_in_x() {
        let ic = InitialCondition::separable(vec![
            Profile::PseudoHuber { scale: 1.0, width: 0.3 },
            Profile::Quadratic { mu: 2.0 },
        ])
        .unwrap();
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let cfg = SolverConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let m: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
            let f = |x: &[f64]| psi_value(&ic, &sp, 0.4, x, &cfg).unwrap();
            assert!(f(&m) <= 0.5 * (f(&a) + f(&b)) + 1e-8);
        }
    }

    #[test]
    fn galerkin_psi_increases_to_limit() {
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let q = QuadraticData::constant(1.0).unwrap();
        let t = 0.8;
        let x: Vec<f64> = (0..400).map(|i| 1.0 / (i + 1) as f64).collect();
        let full = lax_oleinik_quadratic_closed(&q, &sp, t, &TruncatedPoint::new(x.clone()).unwrap()).unwrap().1;
        let mut prev = f64::NEG_INFINITY;
        for level in [0usize, 1, 3, 7, 15, 31, 63] {
            let px = TruncatedPoint::new(x[..=level].to_vec()).unwrap();
            let v = lax_oleinik_quadratic_closed(&q, &sp, t, &px).unwrap().1;
            assert!(v >= prev);
            let sandwich: f64 = (level + 1..x.len()).map(|i| x[i] * x[i] / sp.lambda(i)).sum::<f64>() / (2.0 * t);
            assert!(full - v >= -1e-15 && full - v <= sandwich + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn growth_counterexample() {
        let x = TruncatedPoint::new((0..20_000).map(|n| 1.0 / (n + 1) as f64).collect()).unwrap();
        let a = counterexample_growth(3.0, 1.0, 0.1, &x, 10).unwrap();
        let b = counterexample_growth(3.0, 1.0, 0.1, &x, 20).unwrap();
        assert!(a.value > 0.0 && b.value < a.value);
        assert!(a.phi0_at_z.abs() < 1e-20);
        let ratio = a.value / b.value;
        assert!((1.8..=2.2).contains(&ratio), "{ratio}");
        let zero = counterexample_growth(3.0, 1.0, 0.1, &TruncatedPoint::zeros(30), 10).unwrap();
        assert_eq!(zero.value, 0.0);
        assert!(counterexample_growth(2.0, 1.0, 0.1, &x, 10).is_err());
        // decays to zero at fixed t
        let far = counterexample_growth(3.0, 1.0, 0.1, &x, 2000).unwrap();
        assert!(far.value < 1e-2 * a.value);
    }

    #[test]
    fn nonconvex_counterexample() {
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let e = counterexample_nonconvex(&sp, 1.0, 100).unwrap();
        assert_relative_eq!(e, 1.0 + 1.0 / (2.0 * 101.0 * 101.0), epsilon = 1e-15);
        assert_eq!(counterexample_nonconvex(&sp, 1.0, 0).unwrap(), 1.5);
        assert_eq!(nonconvex_bump(&[0.0]), 2.0);
    }
}
