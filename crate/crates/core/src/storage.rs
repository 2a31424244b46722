//! The storage market on a circle of `N` sites in the potential case.
//!
//! The value field lives in the real Fourier eigenbasis of the circle
//! operator `A = I - N^2 Delta_disc`; site-basis quantities are obtained with
//! the orthonormal real DFT. Time in the value field is time-to-go, so the
//! price at calendar time `s` is `grad phi(T - s, K_s)`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{exact_sum, CompensatedSum};
use crate::quadratic::{QuadraticData, QuadraticSolution};
use crate::spectral::{circle_frequency, EigenSpectrum};
use crate::viscous::SolutionField;

fn default_sigma() -> f64 {
    1.0
}

fn default_checkpoints() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub sites: usize,
    /// Noise scale of the economy. The simulated dynamics are normalised to
    /// a unit Laplacian, so this only labels output.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    /// Terminal objective, diagonal in the circle eigenbasis.
    pub objective: QuadraticData,
    /// Number of equal intervals at which states are recorded.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
}

impl MarketConfig {
    /// The transfer-cost scale `c = N^-2`.
    pub fn transfer_cost(&self) -> f64 {
        1.0 / (self.sites * self.sites) as f64
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(invalid("sites", "need at least two sites"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", "must be finite and non-negative"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(invalid("dt", format!("need 0 < dt <= T, got {}", self.dt)));
        }
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(invalid("dt", "horizon must be a whole number of steps"));
        }
        if self.paths == 0 {
            return Err(invalid("paths", "need at least one path"));
        }
        if self.checkpoints == 0 || self.checkpoints > self.steps() {
            return Err(invalid("checkpoints", "must lie in 1..=steps"));
        }
        if !self.objective.is_admissible() {
            return Err(Error::NotConvex("terminal objective has a negative curvature".into()));
        }
        Ok(())
    }
}

/// Orthonormal real Fourier basis of the circle, columns ordered like
/// [`crate::spectral::circle_eigenvalues`].
#[derive(Debug, Clone)]
pub struct FourierBasis {
    n: usize,
    /// Row-major `n x n`: entry `(site, mode)`.
    q: Vec<f64>,
}

impl FourierBasis {
    pub fn new(n: usize) -> Self {
        let nf = n as f64;
        let mut q = vec![0.0; n * n];
        for j in 0..n {
            let k = circle_frequency(j);
            for site in 0..n {
                let angle = 2.0 * PI * (k * site) as f64 / nf;
                q[site * n + j] = if k == 0 {
                    1.0 / nf.sqrt()
                } else if 2 * k == n {
                    (if site % 2 == 0 { 1.0 } else { -1.0 }) / nf.sqrt()
                } else if j % 2 == 1 {
                    (2.0 / nf).sqrt() * angle.cos()
                } else {
                    (2.0 / nf).sqrt() * angle.sin()
                };
            }
        }
        Self { n, q }
    }

    pub fn sites(&self) -> usize {
        self.n
    }

    pub fn to_sites(&self, modes: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|s| self.q[s * self.n..(s + 1) * self.n].iter().zip(modes).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn to_modes(&self, sites: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| (0..self.n).map(|s| self.q[s * self.n + j] * sites[s]).sum())
            .collect()
    }
}

/// The closed-form value field of the circle market.
pub fn circle_value_field(config: &MarketConfig) -> Result<SolutionField> {
    if config.sites < 2 {
        return Err(invalid("sites", "need at least two sites"));
    }
    if !config.objective.is_admissible() {
        return Err(Error::NotConvex("terminal objective has a negative curvature".into()));
    }
    let spectrum = EigenSpectrum::circle(config.sites)?;
    Ok(SolutionField::ClosedFormQuadratic(QuadraticSolution::new(spectrum, config.objective.clone())))
}

/// `p = grad phi(time_to_go, k)` in the site basis.
pub fn equilibrium_prices(field: &SolutionField, basis: &FourierBasis, time_to_go: f64, k: &[f64]) -> Result<Vec<f64>> {
    if k.len() != basis.sites() {
        return Err(invalid("k", format!("{} levels for {} sites", k.len(), basis.sites())));
    }
    let g = field.gradient(time_to_go, &basis.to_modes(k))?;
    Ok(basis.to_sites(&g))
}

/// `f_n = (p_{n+1} - p_n) / c`, indices mod `N`.
pub fn transfer_flows(prices: &[f64], c: f64) -> Vec<f64> {
    let n = prices.len();
    (0..n).map(|i| (prices[(i + 1) % n] - prices[i]) / c).collect()
}

/// Net inflow `f_{n-1} - f_n` at each site.
pub fn net_inflow(flows: &[f64]) -> Vec<f64> {
    let n = flows.len();
    (0..n).map(|i| flows[(i + n - 1) % n] - flows[i]).collect()
}

/// The exact real value of `sum_n (f_{n-1} - f_n)`, with no rounding in the
/// differences. Zero whenever every flow leaving one site enters the next.
pub fn conservation_residual(flows: &[f64]) -> f64 {
    let n = flows.len();
    exact_sum((0..n).flat_map(|i| [flows[(i + n - 1) % n], -flows[i]]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageState {
    /// Calendar time.
    pub s: f64,
    pub levels: Vec<f64>,
    pub prices: Vec<f64>,
    pub flows: Vec<f64>,
    pub running_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConservationLog {
    pub steps_checked: u64,
    /// Steps where the exact sum of net inflows was not zero.
    pub violations: u64,
    pub max_abs_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub config: MarketConfig,
    pub initial_levels: Vec<f64>,
    /// Calendar times of the recorded states.
    pub checkpoint_times: Vec<f64>,
    /// `paths[p][j]` is path `p` at checkpoint `j`.
    pub paths: Vec<Vec<StorageState>>,
    pub terminal_cost: Vec<f64>,
    pub conservation: ConservationLog,
}

impl PathEnsemble {
    /// Running plus terminal cost of each path.
    pub fn total_costs(&self) -> Vec<f64> {
        self.paths
            .iter()
            .zip(&self.terminal_cost)
            .map(|(p, t)| p.last().map_or(0.0, |s| s.running_cost) + t)
            .collect()
    }
}

/// Mean and standard error of the mean, summed in a fixed order.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).collect::<CompensatedSum>().value();
    (mean, (ss / (n - 1.0) / n).sqrt())
}

/// Euler-Maruyama paths of `dK = -A grad phi(T - s, K) ds + sqrt(2) dW`.
pub fn simulate_paths(config: &MarketConfig, k0: &[f64]) -> Result<PathEnsemble> {
    simulate_rotated(config, k0, 0)
}

/// As [`simulate_paths`] with the per-site noise streams rotated by
/// `offset` sites, so that rotating `k0` by the same amount rotates paths.
pub(crate) fn simulate_rotated(config: &MarketConfig, k0: &[f64], offset: usize) -> Result<PathEnsemble> {
    config.validate()?;
    let n = config.sites;
    if k0.len() != n {
        return Err(invalid("k0", format!("{} levels for {n} sites", k0.len())));
    }
    let field = circle_value_field(config)?;
    let basis = FourierBasis::new(n);
    let spectrum = EigenSpectrum::circle(n)?;
    let lambdas = spectrum.eigenvalues(n);
    let stiffness = (0..n)
        .map(|i| lambdas[i] * config.objective.mu0(i))
        .fold(0.0, f64::max);
    if stiffness * config.dt > 0.5 {
        return Err(Error::Stability(format!(
            "lambda mu0 dt = {} exceeds 0.5; reduce dt",
            stiffness * config.dt
        )));
    }
    let steps = config.steps();
    let record: Vec<usize> = (0..=config.checkpoints).map(|j| (j * steps) / config.checkpoints).collect();
    let c = config.transfer_cost();
    let dt = config.dt;
    let root = (2.0 * dt).sqrt();

    let run_path = |p: usize| -> Result<(Vec<StorageState>, f64, ConservationLog)> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(p as u64);
        let mut x = basis.to_modes(k0);
        let mut running = CompensatedSum::new();
        let mut states = Vec::with_capacity(record.len());
        let mut log = ConservationLog::default();
        let mut next = 0;
        let mut z = vec![0.0; n];
        for step in 0..=steps {
            let s = step as f64 * dt;
            let tau = (config.horizon - s).max(0.0);
            let g = field.gradient(tau, &x)?;
            let prices = basis.to_sites(&g);
            let flows = transfer_flows(&prices, c);
            let residual = conservation_residual(&flows);
            log.steps_checked += 1;
            if residual != 0.0 {
                log.violations += 1;
                log.max_abs_residual = log.max_abs_residual.max(residual.abs());
            }
            if next < record.len() && record[next] == step {
                states.push(StorageState {
                    s,
                    levels: basis.to_sites(&x),
                    prices,
                    flows,
                    running_cost: running.value(),
                });
                next += 1;
            }
            if step == steps {
                break;
            }
            // control alpha = -A grad phi, cost 1/2 <A^-1 alpha, alpha> = 1/2 <A g, g>
            let cost: f64 = g.iter().zip(&lambdas).map(|(v, l)| l * v * v).sum();
            running.add(0.5 * cost * dt);
            z.iter_mut().for_each(|zi| *zi = StandardNormal.sample(&mut rng));
            z.rotate_right(offset % n);
            let dw = basis.to_modes(&z);
            for i in 0..n {
                x[i] += -lambdas[i] * g[i] * dt + root * dw[i];
            }
        }
        Ok((states, config.objective.value(&x), log))
    };

    let results: Vec<_> = (0..config.paths).into_par_iter().map(run_path).collect::<Result<_>>()?;
    let mut conservation = ConservationLog::default();
    let mut paths = Vec::with_capacity(results.len());
    let mut terminal_cost = Vec::with_capacity(results.len());
    for (states, terminal, log) in results {
        conservation.steps_checked += log.steps_checked;
        conservation.violations += log.violations;
        conservation.max_abs_residual = conservation.max_abs_residual.max(log.max_abs_residual);
        paths.push(states);
        terminal_cost.push(terminal);
    }
    Ok(PathEnsemble {
        config: config.clone(),
        initial_levels: k0.to_vec(),
        checkpoint_times: record.iter().map(|&k| k as f64 * dt).collect(),
        paths,
        terminal_cost,
        conservation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCheck {
    pub mc_estimate: f64,
    pub std_error: f64,
    pub field_value: f64,
    pub z_score: f64,
    pub bias_allowance: f64,
    /// `|mc - field| <= 3 se + bias_allowance`.
    pub pass: bool,
}

/// Compares the mean realised cost with `phi(T, k0)`.
pub fn verify_value_mc(ensemble: &PathEnsemble, field: &SolutionField, bias_allowance: f64) -> Result<ValueCheck> {
    let basis = FourierBasis::new(ensemble.config.sites);
    let field_value = field.value(ensemble.config.horizon, &basis.to_modes(&ensemble.initial_levels))?;
    let (mc, se) = mean_and_se(&ensemble.total_costs());
    let diff = (mc - field_value).abs();
    let z = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(ValueCheck {
        mc_estimate: mc,
        std_error: se,
        field_value,
        z_score: z,
        bias_allowance,
        pass: diff <= 3.0 * se + bias_allowance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleRow {
    /// Index of the interval's left checkpoint.
    pub checkpoint: usize,
    pub s_start: f64,
    pub s_end: f64,
    pub site: usize,
    pub mean_k: f64,
    pub mean_p: f64,
    pub se_p: f64,
    /// `E[p(s_end)] - E[p(s_start)]` from paired differences.
    pub drift: f64,
    pub se_drift: f64,
    pub pass: bool,
}

/// Per-site price drift between consecutive checkpoints; each must be within
/// three standard errors of zero.
pub fn martingale_diagnostic(ensemble: &PathEnsemble) -> Vec<MartingaleRow> {
    let n = ensemble.config.sites;
    let checkpoints = ensemble.checkpoint_times.len();
    let mut rows = Vec::new();
    for j in 0..checkpoints.saturating_sub(1) {
        for site in 0..n {
            let col = |k: usize, f: fn(&StorageState) -> &Vec<f64>| -> Vec<f64> {
                ensemble.paths.iter().map(|p| f(&p[k])[site]).collect()
            };
            let (p0, p1) = (col(j, |s| &s.prices), col(j + 1, |s| &s.prices));
            let (mean_k, _) = mean_and_se(&col(j + 1, |s| &s.levels));
            let (mean_p, se_p) = mean_and_se(&p1);
            let diffs: Vec<f64> = p1.iter().zip(&p0).map(|(a, b)| a - b).collect();
            let (drift, se_drift) = mean_and_se(&diffs);
            rows.push(MartingaleRow {
                checkpoint: j,
                s_start: ensemble.checkpoint_times[j],
                s_end: ensemble.checkpoint_times[j + 1],
                site,
                mean_k,
                mean_p,
                se_p,
                drift,
                se_drift,
                pass: drift.abs() <= 3.0 * se_drift || drift == 0.0,
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(sites: usize, mu0: QuadraticData, paths: usize) -> MarketConfig {
        MarketConfig {
            sites,
            sigma: 1.0,
            horizon: 1.0,
            dt: 5e-3,
            paths,
            seed: 11,
            objective: mu0,
            checkpoints: 5,
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn basis_is_orthonormal_and_diagonalises_the_circle() {
        for n in [2, 3, 4, 7, 8] {
            let b = FourierBasis::new(n);
            let lam = EigenSpectrum::circle(n).unwrap().eigenvalues(n);
            for j in 0..n {
                let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
                let v = b.to_sites(&e);
                assert!((v.iter().map(|a| a * a).sum::<f64>() - 1.0).abs() < 1e-14);
                // (I - N^2 Delta) v = lambda_j v, brute force
                let nn = (n * n) as f64;
                for s in 0..n {
                    let lap = v[(s + 1) % n] - 2.0 * v[s] + v[(s + n - 1) % n];
                    assert!((v[s] - nn * lap - lam[j] * v[s]).abs() < 1e-10 * lam[j]);
                }
                let back = b.to_modes(&v);
                assert!(back.iter().zip(&e).all(|(a, b)| (a - b).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn field_examples() {
        let f = circle_value_field(&config(4, QuadraticData::constant(1.0).unwrap(), 1)).unwrap();
        let expect: f64 = [1.0f64, 33.0, 33.0, 65.0].iter().map(|l| l.ln_1p() / l).sum();
        assert!((f.value(1.0, &[0.0; 4]).unwrap() - expect).abs() < 1e-14);
        let zero = circle_value_field(&config(3, QuadraticData::constant(0.0).unwrap(), 1)).unwrap();
        assert_eq!(zero.value(0.7, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let b = FourierBasis::new(3);
        assert_eq!(equilibrium_prices(&zero, &b, 0.7, &[1.0, -1.0, 0.5]).unwrap(), vec![0.0; 3]);
        assert!(circle_value_field(&config(4, QuadraticData::constant(-1.0).unwrap(), 1)).is_err());
    }

    #[test]
    fn two_site_prices_load_the_constant_mode() {
        let f = circle_value_field(&config(2, QuadraticData::constant(1.0).unwrap(), 1)).unwrap();
        let b = FourierBasis::new(2);
        let p = equilibrium_prices(&f, &b, 1.0, &[1.0, 1.0]).unwrap();
        // (1, 1) = sqrt(2) e_0 and mu_0(1) = 1/2, so p = 1/2 (1, 1)
        assert!(p.iter().all(|v| (v - 0.5).abs() < 1e-15), "{p:?}");
        assert_eq!(equilibrium_prices(&f, &b, 1.0, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn prices_are_circulant_equivariant() {
        let data = QuadraticData::list(vec![0.5, 2.0, 1.0, 3.0, 0.2]).unwrap();
        let f = circle_value_field(&config(5, data, 1)).unwrap();
        let b = FourierBasis::new(5);
        let k = [0.3, -1.2, 0.8, 2.0, -0.4];
        let p = equilibrium_prices(&f, &b, 0.6, &k).unwrap();
        let mut kr = k;
        kr.rotate_right(1);
        let mut pr = p.clone();
        pr.rotate_right(1);
        let q = equilibrium_prices(&f, &b, 0.6, &kr).unwrap();
        // sin/cos pairs share an eigenvalue only if their mu0 match
        let data_sym = QuadraticData::list(vec![0.5, 2.0, 2.0, 3.0, 3.0]).unwrap();
        let fs = circle_value_field(&config(5, data_sym, 1)).unwrap();
        let ps = equilibrium_prices(&fs, &b, 0.6, &k).unwrap();
        let mut psr = ps.clone();
        psr.rotate_right(1);
        let qs = equilibrium_prices(&fs, &b, 0.6, &kr).unwrap();
        assert!(psr.iter().zip(&qs).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(pr.iter().zip(&q).any(|(a, b)| (a - b).abs() > 1e-6));
    }

    #[test]
    fn flows_examples() {
        assert_eq!(transfer_flows(&[2.0; 5], 0.04), vec![0.0; 5]);
        assert_eq!(transfer_flows(&[0.0, 1.0, 0.0, 1.0], 1.0 / 16.0), vec![16.0, -16.0, 16.0, -16.0]);
        let p = [0.3, -1.7, 2.2, 0.01, 9.5, -3.3];
        assert_eq!(conservation_residual(&transfer_flows(&p, 1.0 / 36.0)), 0.0);
        let inflow: f64 = net_inflow(&transfer_flows(&p, 1.0 / 36.0)).iter().sum();
        assert!(inflow.abs() < 1e-12);
    }

    #[test]
    fn zero_objective_is_free_brownian_motion() {
        let cfg = config(3, QuadraticData::constant(0.0).unwrap(), 200);
        let e = simulate_paths(&cfg, &[0.0; 3]).unwrap();
        assert!(e.total_costs().iter().all(|c| *c == 0.0));
        let f = circle_value_field(&cfg).unwrap();
        let v = verify_value_mc(&e, &f, 0.0).unwrap();
        assert_eq!((v.mc_estimate, v.field_value), (0.0, 0.0));
        // each site's variance at T is 2 T
        let finals: Vec<f64> = e.paths.iter().map(|p| p.last().unwrap().levels[0]).collect();
        let var = finals.iter().map(|v| v * v).sum::<f64>() / finals.len() as f64;
        assert!((var - 2.0).abs() < 0.5, "{var}");
    }

    #[test]
    fn streams_do_not_depend_on_path_count() {
        let mu = QuadraticData::constant(1.0).unwrap();
        let small = simulate_paths(&config(4, mu.clone(), 8), &[0.5, 0.0, -0.5, 1.0]).unwrap();
        let large = simulate_paths(&config(4, mu, 16), &[0.5, 0.0, -0.5, 1.0]).unwrap();
        assert_eq!(small.paths[..], large.paths[..8]);
        assert_eq!(small.terminal_cost[..], large.terminal_cost[..8]);
    }

    #[test]
    fn rotating_levels_and_streams_rotates_paths() {
        let mu = QuadraticData::list(vec![1.0, 2.0, 2.0, 0.5]).unwrap();
        let cfg = config(4, mu, 4);
        let k0 = [0.5, 0.1, -0.5, 1.0];
        let mut kr = k0;
        kr.rotate_right(1);
        let a = simulate_rotated(&cfg, &k0, 0).unwrap();
        let b = simulate_rotated(&cfg, &kr, 1).unwrap();
        for (pa, pb) in a.paths.iter().zip(&b.paths) {
            for (sa, sb) in pa.iter().zip(pb) {
                let mut l = sa.levels.clone();
                l.rotate_right(1);
                assert!(l.iter().zip(&sb.levels).all(|(x, y)| (x - y).abs() < 1e-10));
                assert!((sa.running_cost - sb.running_cost).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn single_mode_mean_follows_the_feedback_ode() {
        let mu = QuadraticData::list(vec![1.0]).unwrap();
        let mut cfg = config(2, mu, 4000);
        cfg.dt = 1e-3;
        let m0 = 2.0;
        let k0 = FourierBasis::new(2).to_sites(&[m0, 0.0]);
        let e = simulate_paths(&cfg, &k0).unwrap();
        let b = FourierBasis::new(2);
        // RK4 on dm/ds = -mu(T - s) m with mu(tau) = 1 / (1 + tau)
        let rhs = |s: f64, m: f64| -m / (1.0 + cfg.horizon - s);
        for (j, &s_end) in e.checkpoint_times.iter().enumerate() {
            let (mut m, mut s) = (m0, 0.0);
            let h = 1e-4;
            while s < s_end - 1e-12 {
                let k1 = rhs(s, m);
                let k2 = rhs(s + h / 2.0, m + h / 2.0 * k1);
                let k3 = rhs(s + h / 2.0, m + h / 2.0 * k2);
                let k4 = rhs(s + h, m + h * k3);
                m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                s += h;
            }
            let coords: Vec<f64> = e.paths.iter().map(|p| b.to_modes(&p[j].levels)[0]).collect();
            let (mean, se) = mean_and_se(&coords);
            assert!((mean - m).abs() <= 3.0 * se + 1e-9, "s={s_end} {mean} {m} {se}");
        }
    }

    #[test]
    fn value_and_martingale_checks() {
        let mu = QuadraticData::list(vec![1.0]).unwrap();
        let mut cfg = config(2, mu, 2000);
        cfg.dt = 1e-3;
        let k0 = FourierBasis::new(2).to_sites(&[2.0, 0.0]);
        let e = simulate_paths(&cfg, &k0).unwrap();
        let f = circle_value_field(&cfg).unwrap();
        let v = verify_value_mc(&e, &f, 0.0).unwrap();
        assert!((v.field_value - (2f64.ln() + 1.0)).abs() < 1e-14);
        assert!(v.pass, "{v:?}");
        let rows = martingale_diagnostic(&e);
        assert_eq!(rows.len(), 5 * 2);
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");
        // E[p] stays at mu(T) times the initial mode coordinate
        let expect = b_price(0.5 * 2.0);
        for r in &rows {
            assert!((r.mean_p - expect).abs() <= 3.0 * r.se_p + 1e-12);
        }
        assert_eq!(e.conservation.violations, 0);
        assert_eq!(e.conservation.steps_checked, 2000 * 1001);
    }

    fn b_price(mode0: f64) -> f64 {
        FourierBasis::new(2).to_sites(&[mode0, 0.0])[0]
    }

    #[test]
    fn config_validation() {
        let mut cfg = config(4, QuadraticData::constant(1.0).unwrap(), 1);
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.transfer_cost(), 1.0 / 16.0);
        cfg.dt = 0.3;
        assert!(cfg.validate().is_err());
        cfg.dt = 0.01;
        cfg.objective = QuadraticData::constant(1.0).unwrap();
        assert!(matches!(simulate_paths(&cfg, &[0.0; 4]), Err(Error::Stability(_))));
        cfg.sites = 1;
        assert!(cfg.validate().is_err());
    }
}
