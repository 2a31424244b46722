//! A priori estimates, the sandwich bound, residual bands and comparison
//! gaps, evaluated on any [`SolutionField`].
//!
//! Every check walks a sample set in parallel and keeps the smallest signed
//! margin `bound - lhs`; a check passes when that margin is at least
//! `-tolerance`. Query failures (a point outside a grid, say) are errors, a
//! violated inequality is not.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deterministic::{psi_value, SolverConfig};
use crate::error::{invalid, Result};
use crate::initial::InitialCondition;
use crate::numeric::{first_primes, radical_inverse};
use crate::spectral::{CertifiedSum, EigenSpectrum};
use crate::viscous::SolutionField;

/// One space-time sample point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub description: String,
    pub points: Vec<Sample>,
}

/// Parameters of a shifted Halton lattice over `[t_min, t_max] x [-L, L]^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatticeConfig {
    pub dim: usize,
    pub count: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub half_width: f64,
    pub seed: u64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            count: 200,
            t_min: 0.1,
            t_max: 1.0,
            half_width: 2.0,
            seed: 0,
        }
    }
}

impl SampleSet {
    /// Halton points with a seeded Cranley-Patterson rotation.
    pub fn lattice(cfg: &LatticeConfig) -> Result<Self> {
        if cfg.dim == 0 || cfg.count == 0 {
            return Err(invalid("lattice", "dim and count must be positive"));
        }
        if !(cfg.t_min > 0.0 && cfg.t_max >= cfg.t_min && cfg.t_max.is_finite()) {
            return Err(invalid("lattice", format!("bad time window [{}, {}]", cfg.t_min, cfg.t_max)));
        }
        if !(cfg.half_width >= 0.0 && cfg.half_width.is_finite()) {
            return Err(invalid("lattice", "half_width must be finite and non-negative"));
        }
        let bases = first_primes(cfg.dim + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let shift: Vec<f64> = (0..=cfg.dim).map(|_| rng.random::<f64>()).collect();
        let unit = |k: usize, a: usize| (radical_inverse(k as u64 + 1, bases[a]) + shift[a]).fract();
        let points = (0..cfg.count)
            .map(|k| Sample {
                t: cfg.t_min + (cfg.t_max - cfg.t_min) * unit(k, 0),
                x: (1..=cfg.dim).map(|a| cfg.half_width * (2.0 * unit(k, a) - 1.0)).collect(),
            })
            .collect();
        Ok(Self {
            description: format!(
                "halton n={} t=[{}, {}] x=[-{L}, {L}]^{} seed={}",
                cfg.count, cfg.t_min, cfg.t_max, cfg.dim, cfg.seed,
                L = cfg.half_width
            ),
            points,
        })
    }

    /// Every time paired with every point.
    pub fn product(times: &[f64], xs: &[Vec<f64>]) -> Self {
        Self {
            description: format!("{} times x {} points", times.len(), xs.len()),
            points: times
                .iter()
                .flat_map(|&t| xs.iter().map(move |x| Sample { t, x: x.clone() }))
                .collect(),
        }
    }

    /// Distinct times in increasing order.
    pub fn times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.points.iter().map(|s| s.t).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub t: f64,
    pub x: Vec<f64>,
    /// Which inequality or direction produced the margin.
    pub direction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub samples: String,
    pub count: usize,
    pub worst_margin: f64,
    pub worst_location: Option<Location>,
    pub tolerance: f64,
    pub pass: bool,
}

impl EstimateReport {
    fn from_margins(name: &str, samples: &SampleSet, tolerance: f64, worst: Option<(f64, Location)>, count: usize) -> Self {
        let (worst_margin, worst_location) = match worst {
            Some((m, l)) => (m, Some(l)),
            None => (f64::INFINITY, None),
        };
        Self {
            name: name.into(),
            samples: samples.description.clone(),
            count,
            worst_margin,
            worst_location,
            tolerance,
            pass: worst_margin >= -tolerance,
        }
    }

    /// One fixed-width line for terminal tables.
    pub fn table_row(&self) -> String {
        let at = self.worst_location.as_ref().map_or(String::new(), |l| {
            let dir = l.direction.as_deref().map_or(String::new(), |d| format!(" [{d}]"));
            format!("t={:.4} x={:?}{dir}", l.t, l.x.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>())
        });
        format!(
            "{:<28} {:>5} {:>7} {:>12.4e} {:>9.1e}  {at}",
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.count,
            self.worst_margin,
            self.tolerance
        )
    }
}

/// Scheme-aware default tolerance.
pub fn default_tolerance(field: &SolutionField) -> f64 {
    match field {
        SolutionField::Grid(g) if g.dim() == 1 => 5e-3,
        SolutionField::Grid(_) => 1e-2,
        _ => 1e-8,
    }
}

type Margin = (f64, Location);

/// Evaluates `f` on every sample in parallel and keeps the smallest margin,
/// ties broken by sample order so the result does not depend on scheduling.
fn worst_over<F>(samples: &SampleSet, f: F) -> Result<(Option<Margin>, usize)>
where
    F: Fn(&Sample) -> Result<Vec<Margin>> + Sync,
{
    let per: Vec<Vec<Margin>> = samples.points.par_iter().map(&f).collect::<Result<_>>()?;
    let count = per.iter().map(Vec::len).sum();
    let worst = per
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.0 < a.0 { b } else { a });
    Ok((worst, count))
}

fn loc(s: &Sample, dir: impl Into<Option<String>>) -> Location {
    Location {
        t: s.t,
        x: s.x.clone(),
        direction: dir.into(),
    }
}

/// `omega(t) = sum_i lambda_i^{-1} log(1 + C lambda_i t)`.
#[derive(Debug, Clone)]
pub struct Modulus {
    pub spectrum: EigenSpectrum,
    pub c: f64,
    /// Restricts the series to modes `0..=level`.
    pub level: Option<usize>,
}

impl Modulus {
    pub fn new(spectrum: EigenSpectrum, c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(invalid("C", format!("must be finite and non-negative, got {c}")));
        }
        Ok(Self { spectrum, c, level: None })
    }

    pub fn omega(&self, t: f64, tol: f64) -> Result<CertifiedSum> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid("t", format!("time must be finite and non-negative, got {t}")));
        }
        if t == 0.0 || self.c == 0.0 {
            return Ok(CertifiedSum::exact(0.0, 0));
        }
        self.spectrum.log_series(self.c * t, self.level, tol)
    }
}

#[allow(clippy::needless_range_loop)]
fn hessian(field: &SolutionField, t: f64, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    let mut h = vec![vec![0.0; n]; n];
    let diag = field.hessian_diagonal(t, x)?;
    for i in 0..n {
        h[i][i] = diag[i];
        for j in i + 1..n {
            let v = field.hessian_entry(t, x, i, j)?;
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    Ok(h)
}

/// `phi_ii(t, x) <= phi0_ii / (1 + lambda_i phi0_ii t)` for every mode of `x`.
pub fn check_second_derivative_decay(
    field: &SolutionField,
    spectrum: &EigenSpectrum,
    phi0_ii_sup: &[f64],
    samples: &SampleSet,
    tol: f64,
) -> Result<EstimateReport> {
    let (worst, count) = worst_over(samples, |s| {
        let diag = field.hessian_diagonal(s.t, &s.x)?;
        Ok(diag
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let c = phi0_ii_sup.get(i).copied().unwrap_or(f64::INFINITY);
                let lam = spectrum.lambda(i);
                let bound = if c.is_infinite() { 1.0 / (lam * s.t) } else { c / (1.0 + lam * c * s.t) };
                (bound - h, loc(s, format!("mode {i}")))
            })
            .collect())
    })?;
    Ok(EstimateReport::from_margins("second_derivative_decay", samples, tol, worst, count))
}

/// `xi^T D^2 phi xi <= t^{-1} <A^{-1} xi, xi>` for each direction, plus
/// `|phi_ij| <= sqrt(b_i b_j)` with `b_i = 1 / (lambda_i t)`.
pub fn check_hessian_metric_bound(
    field: &SolutionField,
    spectrum: &EigenSpectrum,
    samples: &SampleSet,
    directions: &[Vec<f64>],
    tol: f64,
) -> Result<EstimateReport> {
    let (worst, count) = worst_over(samples, |s| {
        let h = hessian(field, s.t, &s.x)?;
        let n = s.x.len();
        let b: Vec<f64> = (0..n).map(|i| 1.0 / (spectrum.lambda(i) * s.t)).collect();
        let mut out = Vec::with_capacity(directions.len() + n * n / 2);
        for (k, xi) in directions.iter().enumerate() {
            if xi.len() != n {
                return Err(invalid("directions", format!("direction {k} has {} entries, points have {n}", xi.len())));
            }
            let mut quad = 0.0;
            let mut bound = 0.0;
            for i in 0..n {
                bound += xi[i] * xi[i] * b[i];
                for j in 0..n {
                    quad += xi[i] * h[i][j] * xi[j];
                }
            }
            out.push((bound - quad, loc(s, format!("xi #{k}"))));
        }
        for i in 0..n {
            for j in i + 1..n {
                out.push(((b[i] * b[j]).sqrt() - h[i][j].abs(), loc(s, format!("off-diagonal ({i},{j})"))));
            }
        }
        Ok(out)
    })?;
    Ok(EstimateReport::from_margins("hessian_metric_bound", samples, tol, worst, count))
}

/// The three first-derivative bounds in terms of `phi - inf phi0`.
pub fn check_gradient_bounds(
    field: &SolutionField,
    spectrum: &EigenSpectrum,
    phi0_inf: f64,
    samples: &SampleSet,
    tol: f64,
) -> Result<EstimateReport> {
    let (worst, count) = worst_over(samples, |s| {
        let g = field.gradient(s.t, &s.x)?;
        let excess = (field.value(s.t, &s.x)? - phi0_inf).max(0.0);
        let root = (2.0 * excess / s.t).sqrt();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let metric: f64 = g.iter().enumerate().map(|(i, v)| spectrum.lambda(i) * v * v).sum();
        let mut out = vec![(root - norm, loc(s, "|grad|".to_string()))];
        out.extend(g.iter().enumerate().map(|(i, v)| {
            (root / spectrum.lambda(i).sqrt() - v.abs(), loc(s, format!("|phi_{i}|")))
        }));
        out.push((4.0 * (excess / s.t).powi(2) - metric, loc(s, "<A grad, grad>".to_string())));
        Ok(out)
    })?;
    Ok(EstimateReport::from_margins("gradient_bounds", samples, tol, worst, count))
}

/// `psi - tol <= phi <= psi + omega(t) + tol`, with `psi` the first-order
/// solution from the same data.
pub fn check_sandwich(
    field: &SolutionField,
    phi0: &InitialCondition,
    spectrum: &EigenSpectrum,
    modulus: &Modulus,
    samples: &SampleSet,
    tol: f64,
) -> Result<EstimateReport> {
    let cfg = SolverConfig::default();
    let series_tol = (0.01 * tol).max(1e-13);
    let (worst, count) = worst_over(samples, |s| {
        let phi = field.value(s.t, &s.x)?;
        let psi = psi_value(phi0, spectrum, s.t, &s.x, &cfg)?;
        let omega = modulus.omega(s.t, series_tol)?;
        Ok(vec![
            (phi - psi, loc(s, "lower".to_string())),
            (psi + omega.value + omega.error_bound - phi, loc(s, "upper".to_string())),
        ])
    })?;
    Ok(EstimateReport::from_margins("sandwich", samples, tol, worst, count))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub active_modes: usize,
    /// `eps_d = sum_{i >= d} lambda_i^{-1}`; the band is `[-tol, eps_d / t + tol]`.
    pub eps_d: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    /// Smallest distance to either edge of the band, signed.
    pub worst_margin: f64,
    pub worst_location: Option<Location>,
    pub tolerance: f64,
    pub pass: bool,
}

/// The residual of the transformed equation for `v(t, Bx) = phi(t, x)` with
/// the second-order term truncated to the first `d` modes. In `phi` terms
/// `R = d_t phi + 1/2 <A grad phi, grad phi> - sum_{i<d} phi_ii`.
pub fn transformed_residual(
    field: &SolutionField,
    spectrum: &EigenSpectrum,
    d: usize,
    samples: &SampleSet,
    tol: f64,
) -> Result<ResidualReport> {
    let eps = spectrum.inverse_tail(d, 1e-14)?;
    let eps_d = eps.value + eps.error_bound;
    let values: Vec<(f64, &Sample)> = samples
        .points
        .par_iter()
        .map(|s| {
            let dt = field.time_derivative(s.t, &s.x)?;
            let g = field.gradient(s.t, &s.x)?;
            let metric: f64 = g.iter().enumerate().map(|(i, v)| spectrum.lambda(i) * v * v).sum();
            let mut x = s.x.clone();
            if x.len() < d {
                x.resize(d, 0.0);
            }
            let diag = field.hessian_diagonal(s.t, &x)?;
            let lap: f64 = diag[..d].iter().sum();
            Ok((dt + 0.5 * metric - lap, s))
        })
        .collect::<Result<_>>()?;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut worst: Option<(f64, Location)> = None;
    for (r, s) in &values {
        min = min.min(*r);
        max = max.max(*r);
        let (lo, hi) = (*r, eps_d / s.t - r);
        let (m, side) = if lo <= hi { (lo, "lower") } else { (hi, "upper") };
        if worst.as_ref().is_none_or(|w| m < w.0) {
            worst = Some((m, loc(s, side.to_string())));
        }
    }
    let (worst_margin, worst_location) = worst.map_or((f64::INFINITY, None), |(m, l)| (m, Some(l)));
    Ok(ResidualReport {
        active_modes: d,
        eps_d,
        min,
        max,
        count: values.len(),
        worst_margin,
        worst_location,
        tolerance: tol,
        pass: worst_margin >= -tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gamma: f64,
    pub horizon: f64,
    pub sup_gap: f64,
    pub location: Option<Location>,
    /// Sup of the gap on the earliest slice `t = gamma`.
    pub gap_at_gamma: f64,
    pub tolerance: f64,
    /// `sup_gap <= gap_at_gamma + tolerance`: no interior growth.
    pub pass: bool,
}

/// Shared time set for a sweep over `gammas`: a uniform grid of `n_times`
/// points on `[min gamma, T]` together with every gamma, sorted. Restricting
/// one set to `t >= gamma` nests the sup windows, so the sups are monotone.
pub fn comparison_times(gammas: &[f64], horizon: f64, n_times: usize) -> Vec<f64> {
    let lo = gammas.iter().copied().fold(horizon, f64::min);
    let mut times: Vec<f64> = match n_times {
        0 => vec![],
        1 => vec![lo],
        n => (0..n).map(|k| lo + (horizon - lo) * k as f64 / (n - 1) as f64).collect(),
    };
    times.extend_from_slice(gammas);
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// `sup |phi_a - phi_b|` over the members of `times` in `[gamma, T]`
/// crossed with `xs`. `times` must contain `gamma`.
pub fn comparison_gap(
    a: &SolutionField,
    b: &SolutionField,
    gamma: f64,
    times: &[f64],
    xs: &[Vec<f64>],
    tol: f64,
) -> Result<GapReport> {
    if !(gamma > 0.0) || !times.contains(&gamma) {
        return Err(invalid("gamma", format!("need gamma > 0 among the sample times, got {gamma}")));
    }
    let horizon = times.iter().copied().fold(gamma, f64::max);
    let times: Vec<f64> = times.iter().copied().filter(|&t| t >= gamma).collect();
    let samples = SampleSet::product(&times, xs);
    let gaps: Vec<f64> = samples
        .points
        .par_iter()
        .map(|s| Ok((a.value(s.t, &s.x)? - b.value(s.t, &s.x)?).abs()))
        .collect::<Result<_>>()?;
    let mut sup = 0.0;
    let mut at = None;
    let mut at_gamma: f64 = 0.0;
    for (g, s) in gaps.iter().zip(&samples.points) {
        if s.t == gamma {
            at_gamma = at_gamma.max(*g);
        }
        if *g > sup || at.is_none() {
            sup = *g;
            at = Some(loc(s, None));
        }
    }
    Ok(GapReport {
        gamma,
        horizon,
        sup_gap: sup,
        location: at,
        gap_at_gamma: at_gamma,
        tolerance: tol,
        pass: sup <= at_gamma + tol,
    })
}

/// `sup |(phi_b - phi_a) - delta|` over the samples, for runs started from
/// `phi0` and `phi0 + delta`.
pub fn shift_defect(a: &SolutionField, b: &SolutionField, delta: f64, samples: &SampleSet) -> Result<f64> {
    let d: Vec<f64> = samples
        .points
        .par_iter()
        .map(|s| Ok((b.value(s.t, &s.x)? - a.value(s.t, &s.x)? - delta).abs()))
        .collect::<Result<_>>()?;
    Ok(d.into_iter().fold(0.0, f64::max))
}

/// Per-time growth ratio `sup_x |d_t phi| / (|Bx|^2 + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRatio {
    pub t: f64,
    pub ratio: f64,
}

pub fn growth_ratios(field: &SolutionField, spectrum: &EigenSpectrum, samples: &SampleSet) -> Result<Vec<GrowthRatio>> {
    let per: Vec<(f64, f64)> = samples
        .points
        .par_iter()
        .map(|s| {
            let bx: f64 = s.x.iter().enumerate().map(|(i, v)| v * v / spectrum.lambda(i)).sum();
            Ok((s.t, field.time_derivative(s.t, &s.x)?.abs() / (bx + 1.0)))
        })
        .collect::<Result<_>>()?;
    Ok(samples
        .times()
        .into_iter()
        .map(|t| GrowthRatio {
            t,
            ratio: per.iter().filter(|p| p.0 == t).map(|p| p.1).fold(0.0, f64::max),
        })
        .collect())
}

/// The growth ratio must be finite at every sampled time and non-increasing
/// from one sampled time to the next, up to `tol` relative.
pub fn time_derivative_growth_check(
    field: &SolutionField,
    spectrum: &EigenSpectrum,
    samples: &SampleSet,
    tol: f64,
) -> Result<EstimateReport> {
    let ratios = growth_ratios(field, spectrum, samples)?;
    let mut worst: Option<Margin> = None;
    let mut keep = |m: f64, t: f64, what: String| {
        if worst.as_ref().is_none_or(|w| m < w.0) {
            worst = Some((m, Location { t, x: vec![], direction: Some(what) }));
        }
    };
    for r in &ratios {
        if !r.ratio.is_finite() {
            keep(f64::NEG_INFINITY, r.t, "non-finite ratio".into());
        }
    }
    for w in ratios.windows(2) {
        let scale = w[0].ratio.max(1.0);
        keep((w[0].ratio - w[1].ratio) / scale, w[1].t, format!("ratio {:.4e} -> {:.4e}", w[0].ratio, w[1].ratio));
    }
    let count = ratios.len();
    Ok(EstimateReport::from_margins("time_derivative_growth", samples, tol, worst, count))
}

/// Unit basis vectors, the normalised diagonal, and `extra` random unit
/// directions drawn from `seed`.
pub fn default_directions(dim: usize, extra: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    if dim > 1 {
        out.push(vec![1.0 / (dim as f64).sqrt(); dim]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..extra {
        let v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-8 {
            out.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    out
}

/// Everything the estimate suite needs besides the field itself.
pub struct SuiteInput<'a> {
    pub field: &'a SolutionField,
    pub phi0: &'a InitialCondition,
    pub spectrum: &'a EigenSpectrum,
    pub samples: &'a SampleSet,
    /// Time slices and points for the growth check.
    pub growth_samples: &'a SampleSet,
    pub tolerance: f64,
    pub seed: u64,
}

/// Runs every estimate check and returns the reports in a fixed order.
pub fn run_suite(input: &SuiteInput) -> Result<Vec<EstimateReport>> {
    let SuiteInput { field, phi0, spectrum, samples, growth_samples, tolerance: tol, seed } = *input;
    let dim = samples.points.first().map_or(0, |s| s.x.len());
    let c = phi0
        .c11_bound()
        .ok_or_else(|| invalid("phi0", "the sandwich needs a C^{1,1} bound on the data"))?;
    let modulus = Modulus::new(spectrum.clone(), c)?;
    Ok(vec![
        check_second_derivative_decay(field, spectrum, &phi0.curvature_bounds(dim), samples, tol)?,
        check_hessian_metric_bound(field, spectrum, samples, &default_directions(dim, 2, seed), tol)?,
        check_gradient_bounds(field, spectrum, phi0.lower_bound(), samples, tol)?,
        check_sandwich(field, phi0, spectrum, &modulus, samples, tol)?,
        time_derivative_growth_check(field, spectrum, growth_samples, tol)?,
    ])
}
