//! Monotone finite-difference solver for `d_t phi = Delta phi - 1/2 sum lambda_i phi_i^2`
//! on a box in `H_N`, `N <= 3`.
//!
//! Each step applies the Hamiltonian explicitly (Heun's method), together
//! with a share `theta` of the diffusion, between two half steps of the remaining
//! diffusion taken implicitly, one tridiagonal sweep per axis (Strang
//! splitting). With the central Hamiltonian,
//! `theta` is the largest cell Peclet number, the least explicit diffusion
//! that keeps all stencil weights non-negative; with Godunov upwinding the
//! diffusion is fully implicit. Either way each sub-step is monotone.
//! Boundary nodes take the first-order value `psi`, which is within
//! `omega(t)` of the true solution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deterministic::{psi_value, SolverConfig};
use crate::error::{invalid, Error, Result};
use crate::initial::InitialCondition;
use crate::numeric::cubic_weights;
use crate::spectral::{EigenSpectrum, SpectrumDescriptor};

use super::field::SolutionField;

/// Discretization of `1/2 lambda p^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianScheme {
    /// Centered gradient, paired with enough explicit diffusion to keep
    /// every stencil weight non-negative (cell Peclet number <= 1).
    #[default]
    Central,
    /// Godunov upwinding; first order.
    Godunov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionScheme {
    #[default]
    Implicit,
    Explicit,
}

fn default_cfl() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Per-axis half-width `L`; the box is `[-L, L]` on each axis.
    pub half_width: Vec<f64>,
    /// Per-axis node count, odd and at least 11.
    pub nodes: Vec<usize>,
    /// Time step; chosen from the CFL number when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    pub horizon: f64,
    #[serde(default)]
    pub hamiltonian: HamiltonianScheme,
    #[serde(default)]
    pub diffusion: DiffusionScheme,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Required excess of `phi_0` at each axis end over `phi_0(0)`.
    #[serde(default)]
    pub boundary_margin: f64,
    /// Steps between stored slices; about 50 slices when absent.
    #[serde(default)]
    pub store_every: Option<usize>,
}

impl GridSpec {
    /// Same half-width and spacing `h` on every axis.
    pub fn uniform(dim: usize, half_width: f64, h: f64, horizon: f64) -> Result<Self> {
        if !(h > 0.0 && half_width > 0.0) {
            return Err(invalid("grid", "half-width and spacing must be positive"));
        }
        let n = 2 * (half_width / h).round() as usize + 1;
        let spec = Self {
            half_width: vec![half_width; dim],
            nodes: vec![n; dim],
            dt: None,
            horizon,
            hamiltonian: HamiltonianScheme::Central,
            diffusion: DiffusionScheme::Implicit,
            cfl: default_cfl(),
            boundary_margin: 0.0,
            store_every: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_width[axis] / (self.nodes[axis] - 1) as f64
    }

    pub fn coordinate(&self, axis: usize, j: usize) -> f64 {
        -self.half_width[axis] + j as f64 * self.spacing(axis)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !(1..=3).contains(&dim) {
            return Err(invalid("dim", format!("grid solver supports 1 to 3 axes, got {dim}")));
        }
        if self.half_width.len() != dim {
            return Err(invalid("half_width", "one entry per axis"));
        }
        for (&n, &l) in self.nodes.iter().zip(&self.half_width) {
            if n < 11 || n % 2 == 0 {
                return Err(invalid("nodes", format!("node counts must be odd and >= 11, got {n}")));
            }
            if !(l > 0.0 && l.is_finite()) {
                return Err(invalid("half_width", "must be positive"));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", "must be positive"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt <= self.horizon) {
                return Err(invalid("dt", "must lie in (0, horizon]"));
            }
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(invalid("cfl", "must lie in (0, 1]"));
        }
        if self.store_every == Some(0) {
            return Err(invalid("store_every", "must be positive"));
        }
        Ok(())
    }

    fn total_nodes(&self) -> usize {
        self.nodes.iter().product()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for a in (0..self.dim().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.nodes[a + 1];
        }
        s
    }
}

/// Stored time slices of a grid solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    /// Grid layout, with the time step actually used filled in.
    pub spec: GridSpec,
    pub spectrum: SpectrumDescriptor,
    pub lambdas: Vec<f64>,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub slices: Vec<Vec<f64>>,
}

impl GridField {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn slice_len(&self) -> usize {
        self.spec.total_nodes()
    }

    /// Node value by multi-index at stored slice `k`.
    pub fn node_value(&self, k: usize, index: &[usize]) -> f64 {
        let strides = self.spec.strides();
        self.slices[k][index.iter().zip(&strides).map(|(i, s)| i * s).sum::<usize>()]
    }

    fn check_point(&self, t: f64, x: &[f64], margin_cells: f64) -> Result<()> {
        let out = |reason: String| Error::OutOfDomain {
            t,
            x: x.to_vec(),
            reason,
        };
        if x.len() != self.dim() {
            return Err(out(format!("grid has {} axes, point has {}", self.dim(), x.len())));
        }
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        if !(t >= t0 && t <= t1) {
            return Err(out(format!("time outside [{t0}, {t1}]")));
        }
        for (a, &xa) in x.iter().enumerate() {
            let lim = self.spec.half_width[a] - margin_cells * self.spec.spacing(a);
            if !(xa.abs() <= lim * (1.0 + 1e-12)) {
                return Err(out(format!("axis {a} coordinate outside [-{lim}, {lim}]")));
            }
        }
        Ok(())
    }

    /// Four-point stencil start and weights along one axis.
    fn stencil(n: usize, pos: f64) -> (usize, [f64; 4]) {
        let j = (pos.floor() as isize).clamp(1, n as isize - 3) as usize;
        (j - 1, cubic_weights(pos - j as f64))
    }

    fn spatial(&self, slice: &[f64], x: &[f64]) -> f64 {
        let dim = self.dim();
        let strides = self.spec.strides();
        let mut starts = [0usize; 3];
        let mut weights = [[0.0; 4]; 3];
        for a in 0..dim {
            let pos = (x[a] + self.spec.half_width[a]) / self.spec.spacing(a);
            let (s, w) = Self::stencil(self.spec.nodes[a], pos);
            starts[a] = s;
            weights[a] = w;
        }
        let mut total = 0.0;
        for c in 0..4usize.pow(dim as u32) {
            let mut idx = 0;
            let mut w = 1.0;
            let mut rem = c;
            for a in 0..dim {
                let o = rem % 4;
                rem /= 4;
                idx += (starts[a] + o) * strides[a];
                w *= weights[a][o];
            }
            total += w * slice[idx];
        }
        total
    }

    fn interpolate(&self, t: f64, x: &[f64]) -> f64 {
        let n = self.times.len();
        let tau = self.times[1] - self.times[0];
        if n < 4 {
            let k = ((t / tau).floor() as usize).min(n - 2);
            let s = (t - self.times[k]) / tau;
            return (1.0 - s) * self.spatial(&self.slices[k], x) + s * self.spatial(&self.slices[k + 1], x);
        }
        let pos = (t - self.times[0]) / tau;
        // Exact slice hit avoids needless interpolation error.
        let r = pos.round();
        if (pos - r).abs() < 1e-9 {
            return self.spatial(&self.slices[r as usize], x);
        }
        let (k0, w) = Self::stencil(n, pos);
        (0..4).map(|o| w[o] * self.spatial(&self.slices[k0 + o], x)).sum()
    }

    pub fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check_point(t, x, 0.0)?;
        Ok(self.interpolate(t, x))
    }

    fn shifted(x: &[f64], a: usize, d: f64) -> Vec<f64> {
        let mut y = x.to_vec();
        y[a] += d;
        y
    }

    pub fn gradient(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(t, x, 1.0)?;
        Ok((0..self.dim())
            .map(|a| {
                let h = self.spec.spacing(a);
                (self.interpolate(t, &Self::shifted(x, a, h)) - self.interpolate(t, &Self::shifted(x, a, -h)))
                    / (2.0 * h)
            })
            .collect())
    }

    pub fn hessian_entry(&self, t: f64, x: &[f64], i: usize, j: usize) -> Result<f64> {
        self.check_point(t, x, 1.0)?;
        if i >= self.dim() || j >= self.dim() {
            return Ok(0.0);
        }
        let (hi, hj) = (self.spec.spacing(i), self.spec.spacing(j));
        if i == j {
            let c = self.interpolate(t, x);
            let p = self.interpolate(t, &Self::shifted(x, i, hi));
            let m = self.interpolate(t, &Self::shifted(x, i, -hi));
            return Ok((p - 2.0 * c + m) / (hi * hi));
        }
        let at = |si: f64, sj: f64| {
            let y = Self::shifted(&Self::shifted(x, i, si * hi), j, sj * hj);
            self.interpolate(t, &y)
        };
        Ok((at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * hi * hj))
    }

    /// Centered difference across one slice interval, one-sided at the ends.
    pub fn time_derivative(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check_point(t, x, 0.0)?;
        let tau = self.times[1] - self.times[0];
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        let a = (t - tau).max(t0);
        let b = (t + tau).min(t1);
        Ok((self.interpolate(b, x) - self.interpolate(a, x)) / (b - a))
    }
}

/// Boundary nodes of the box with their coordinates.
fn boundary_nodes(spec: &GridSpec) -> Vec<(usize, Vec<f64>)> {
    let dim = spec.dim();
    let strides = spec.strides();
    (0..spec.total_nodes())
        .filter_map(|idx| {
            let mi: Vec<usize> = (0..dim).map(|a| (idx / strides[a]) % spec.nodes[a]).collect();
            let on_edge = mi.iter().zip(&spec.nodes).any(|(&j, &n)| j == 0 || j == n - 1);
            on_edge.then(|| (idx, (0..dim).map(|a| spec.coordinate(a, mi[a])).collect()))
        })
        .collect()
}

/// Whether every axis index of the row (all axes but the last) is interior.
fn row_is_interior(spec: &GridSpec, strides: &[usize], row: usize) -> bool {
    let dim = spec.dim();
    let first = row * spec.nodes[dim - 1];
    (0..dim - 1).all(|a| {
        let j = (first / strides[a]) % spec.nodes[a];
        j > 0 && j < spec.nodes[a] - 1
    })
}

/// Per-axis largest one-sided difference quotient `|p|` seen in a sweep.
#[derive(Clone, Copy, Default)]
struct Sweep {
    steep: [f64; 3],
}

impl Sweep {
    fn merge(a: Sweep, b: Sweep) -> Sweep {
        let mut s = a.steep;
        s.iter_mut().zip(b.steep).for_each(|(x, y)| *x = x.max(y));
        Sweep { steep: s }
    }
}

struct Stepper<'a> {
    spec: &'a GridSpec,
    strides: Vec<usize>,
    lambdas: &'a [f64],
    h: Vec<f64>,
    /// Share of the diffusion taken explicitly, per axis.
    theta: [f64; 3],
    central: bool,
}

impl Stepper<'_> {
    /// Cell Peclet number `lambda |p| h / 2` on `axis`.
    fn peclet(&self, sweep: &Sweep, axis: usize) -> f64 {
        0.5 * self.lambdas[axis] * sweep.steep[axis] * self.h[axis]
    }

    /// Bound on the self-weight loss `1 - d u_new / d u_old` per unit `dt`.
    fn factor(&self, sweep: &Sweep) -> f64 {
        (0..self.spec.dim())
            .map(|a| {
                let h = self.h[a];
                let upwind = if self.central { 0.0 } else { self.lambdas[a] * sweep.steep[a] / h };
                2.0 * self.theta[a] / (h * h) + upwind
            })
            .sum()
    }

    /// Explicit part of one step; with `dt = 0` only gathers statistics.
    fn explicit(&self, dt: f64, u: &[f64], out: &mut [f64]) -> Sweep {
        let dim = self.spec.dim();
        let n_last = self.spec.nodes[dim - 1];
        out.par_chunks_mut(n_last)
            .with_min_len(8)
            .enumerate()
            .map(|(row, chunk)| {
                let base = row * n_last;
                let src = &u[base..base + n_last];
                chunk.copy_from_slice(src);
                let mut sw = Sweep::default();
                if !row_is_interior(self.spec, &self.strides, row) {
                    return sw;
                }
                for a in 0..dim {
                    let s = self.strides[a];
                    let ih = 1.0 / self.h[a];
                    let diff = self.theta[a] * ih * ih * dt;
                    let half_lam = 0.5 * self.lambdas[a] * dt;
                    let below = &u[base + 1 - s..base + n_last - 1 - s];
                    let above = &u[base + 1 + s..base + n_last - 1 + s];
                    let centre = &src[1..n_last - 1];
                    let mut steep = 0.0f64;
                    for (((o, &c), &um), &up) in chunk[1..n_last - 1].iter_mut().zip(centre).zip(below).zip(above) {
                        let dm = (c - um) * ih;
                        let dp = (up - c) * ih;
                        steep = steep.max(dm.abs()).max(dp.abs());
                        let p2 = if self.central {
                            0.25 * (dm + dp) * (dm + dp)
                        } else {
                            dm.max(0.0).powi(2).max(dp.min(0.0).powi(2))
                        };
                        *o += diff * (up - 2.0 * c + um) - half_lam * p2;
                    }
                    sw.steep[a] = steep;
                }
                sw
            })
            .reduce(Sweep::default, Sweep::merge)
    }

    /// Backward-Euler diffusion with weight `1 - theta` along `axis`,
    /// boundary values held fixed. The constant-coefficient Thomas sweep runs
    /// over whole blocks of lines at once.
    fn implicit(&self, axis: usize, dt: f64, u: &mut [f64]) {
        let weight = 1.0 - self.theta[axis];
        if weight <= 0.0 {
            return;
        }
        let n = self.spec.nodes[axis];
        let inner = self.strides[axis];
        let r = weight * dt / (self.h[axis] * self.h[axis]);
        let m = n - 2;
        // Forward elimination factors for rows 1..=m.
        let mut denom = vec![0.0; n];
        let mut up = vec![0.0; n];
        for i in 1..=m {
            denom[i] = 1.0 + 2.0 * r - if i > 1 { r * up[i - 1] } else { 0.0 };
            up[i] = r / denom[i];
        }
        let inv: Vec<f64> = denom.iter().map(|d| if *d != 0.0 { 1.0 / d } else { 0.0 }).collect();
        let dim = self.spec.dim();
        let active: Vec<bool> = (0..inner)
            .map(|k| {
                (axis + 1..dim).all(|a| {
                    let j = (k / self.strides[a]) % self.spec.nodes[a];
                    j > 0 && j < self.spec.nodes[a] - 1
                })
            })
            .collect();
        let block = n * inner;
        u.par_chunks_mut(block).with_min_len(1).enumerate().for_each(|(o, chunk)| {
            let first = o * block;
            let outer_ok = (0..axis).all(|a| {
                let j = (first / self.strides[a]) % self.spec.nodes[a];
                j > 0 && j < self.spec.nodes[a] - 1
            });
            if !outer_ok {
                return;
            }
            // Row-major sweeps keep the inner index contiguous.
            for i in 1..=m {
                let (done, rest) = chunk.split_at_mut(i * inner);
                let prev = &done[(i - 1) * inner..];
                let (row, tail) = rest.split_at_mut(inner);
                let right = (i == m).then(|| &tail[(n - 2 - i) * inner..(n - 1 - i) * inner]);
                for k in 0..inner {
                    if active[k] {
                        let mut d = row[k] + r * prev[k];
                        if let Some(right) = right {
                            d += r * right[k];
                        }
                        row[k] = d * inv[i];
                    }
                }
            }
            for i in (1..m).rev() {
                let (head, rest) = chunk.split_at_mut((i + 1) * inner);
                let row = &mut head[i * inner..];
                let below = &rest[..inner];
                for k in 0..inner {
                    if active[k] {
                        row[k] += up[i] * below[k];
                    }
                }
            }
        });
    }
}

/// Advances the truncated viscous equation on a grid over `dim` modes.
pub fn solve_fd(
    phi0: &InitialCondition,
    spectrum: &EigenSpectrum,
    dim: usize,
    grid: &GridSpec,
) -> Result<SolutionField> {
    grid.validate()?;
    if grid.dim() != dim {
        return Err(invalid("dim", format!("grid has {} axes but dim = {dim}", grid.dim())));
    }
    if !phi0.is_convex() {
        return Err(Error::NotConvex("grid solver requires convex initial data".into()));
    }
    if phi0.c11_bound().is_none() {
        return Err(invalid("phi0", "a C^{1,1} bound is required"));
    }
    spectrum.check_len(dim)?;
    let lambdas = spectrum.eigenvalues(dim);
    let strides = grid.strides();
    let total = grid.total_nodes();

    let origin = vec![0.0; dim];
    let center = phi0.value(&origin);
    for a in 0..dim {
        for sign in [-1.0, 1.0] {
            let mut e = origin.clone();
            e[a] = sign * grid.half_width[a];
            let excess = phi0.value(&e) - center;
            if excess < grid.boundary_margin {
                return Err(Error::BoundaryMargin(format!(
                    "phi_0 at axis {a} end {sign:+} exceeds the center by {excess}, need {}",
                    grid.boundary_margin
                )));
            }
        }
    }

    let coords = |idx: usize| -> Vec<f64> {
        (0..dim)
            .map(|a| grid.coordinate(a, (idx / strides[a]) % grid.nodes[a]))
            .collect()
    };
    let mut u: Vec<f64> = (0..total).into_par_iter().map(|idx| phi0.value(&coords(idx))).collect();
    let mut next = vec![0.0; total];
    let mut stage = vec![0.0; total];

    let mut stepper = Stepper {
        spec: grid,
        strides: strides.clone(),
        lambdas: &lambdas,
        h: (0..dim).map(|a| grid.spacing(a)).collect(),
        theta: [0.0; 3],
        central: grid.hamiltonian == HamiltonianScheme::Central,
    };
    let initial = stepper.explicit(0.0, &u, &mut next);
    for a in 0..dim {
        stepper.theta[a] = match (grid.diffusion, stepper.central) {
            (DiffusionScheme::Explicit, _) => 1.0,
            // Gradients of convex data do not grow, so the initial Peclet
            // number (with a little slack) bounds every later one.
            (DiffusionScheme::Implicit, true) => (1.05 * stepper.peclet(&initial, a)).min(1.0),
            (DiffusionScheme::Implicit, false) => 0.0,
        };
        if stepper.central && stepper.peclet(&initial, a) > 1.0 {
            return Err(Error::Stability(format!(
                "cell Peclet number {} > 1 on axis {a}; refine the grid or use the Godunov Hamiltonian",
                stepper.peclet(&initial, a)
            )));
        }
    }
    let rate = stepper.factor(&initial);

    let h_min = stepper.h.iter().copied().fold(f64::INFINITY, f64::min);
    let dt = match grid.dt {
        Some(dt) => dt,
        None => {
            let dt = if rate > 0.0 { grid.cfl / rate } else { h_min };
            dt.min(h_min)
        }
    };
    if grid.diffusion == DiffusionScheme::Explicit {
        let limit = h_min * h_min / (2.0 * dim as f64);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Stability(format!(
                "explicit diffusion needs dt <= h^2/(2 dim) = {limit:e}, got {dt:e}"
            )));
        }
    }
    let mut steps = (grid.horizon / dt).ceil() as usize;
    let store_every = grid.store_every.unwrap_or_else(|| steps.div_ceil(50).max(1));
    steps = steps.div_ceil(store_every) * store_every;
    let dt = grid.horizon / steps as f64;

    let boundary = boundary_nodes(grid);
    let solver = SolverConfig::default();
    let mut times = vec![0.0];
    let mut slices = vec![u.clone()];
    let boundary_values = |t: f64| -> Result<Vec<f64>> {
        boundary
            .par_iter()
            .map(|(_, x)| psi_value(phi0, spectrum, t, x, &solver))
            .collect()
    };
    // Strang splitting: half the implicit diffusion on each side of the
    // explicit part, so the splitting error is second order in dt.
    for step in 1..=steps {
        // pinned so the last slice sits exactly on the horizon
        let t = if step == steps { grid.horizon } else { step as f64 * dt };
        for axis in 0..dim {
            stepper.implicit(axis, 0.5 * dt, &mut u);
        }
        // Heun's method: a convex combination of two monotone Euler steps.
        // The Euler stage stands for time t, so it carries that boundary.
        let edge = boundary_values(t)?;
        let sweep = stepper.explicit(dt, &u, &mut next);
        for ((idx, _), v) in boundary.iter().zip(&edge) {
            next[*idx] = *v;
        }
        let second = stepper.explicit(dt, &next, &mut stage);
        next.par_iter_mut()
            .zip(&u)
            .zip(&stage)
            .for_each(|((n, a), b)| *n = 0.5 * (a + b));
        for ((idx, _), v) in boundary.iter().zip(&edge) {
            next[*idx] = *v;
        }
        let sweep = Sweep::merge(sweep, second);
        let factor = dt * stepper.factor(&sweep);
        if factor > 1.0 + 1e-12 {
            return Err(Error::Stability(format!(
                "monotonicity factor {factor} > 1 at step {step} (dt = {dt:e}); reduce dt"
            )));
        }
        if stepper.central {
            if let Some(a) = (0..dim).find(|&a| stepper.peclet(&sweep, a) > stepper.theta[a] * (1.0 + 1e-12) + 1e-9) {
                return Err(Error::Stability(format!(
                    "cell Peclet number {} exceeds the explicit diffusion share {} on axis {a} at step {step}",
                    stepper.peclet(&sweep, a),
                    stepper.theta[a]
                )));
            }
        }
        std::mem::swap(&mut u, &mut next);
        for axis in (0..dim).rev() {
            stepper.implicit(axis, 0.5 * dt, &mut u);
        }
        if step % store_every == 0 {
            times.push(t);
            slices.push(u.clone());
        }
    }

    let mut spec = grid.clone();
    spec.dt = Some(dt);
    spec.store_every = Some(store_every);
    Ok(SolutionField::Grid(GridField {
        spec,
        spectrum: spectrum.descriptor().clone(),
        lambdas,
        times,
        slices,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::Profile;
    use crate::quadratic::QuadraticData;

    #[test]
    fn spec_validation() {
        assert!(GridSpec::uniform(1, 4.0, 0.5, 1.0).is_ok());
        assert!(GridSpec::uniform(4, 4.0, 0.5, 1.0).is_err());
        assert!(GridSpec::uniform(1, 4.0, 1.0, 1.0).is_err()); // 9 nodes
        let mut s = GridSpec::uniform(2, 4.0, 0.5, 1.0).unwrap();
        s.nodes[1] = 20;
        assert!(s.validate().is_err());
    }

    #[test]
    fn constant_stays_constant() {
        let ic = InitialCondition::constant(3.0);
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let f = solve_fd(&ic, &sp, 2, &GridSpec::uniform(2, 2.0, 0.1, 1.0).unwrap()).unwrap();
        let SolutionField::Grid(g) = f else { unreachable!() };
        for s in &g.slices {
            assert!(s.iter().all(|v| (v - 3.0).abs() <= 1e-10));
        }
    }

    #[test]
    fn quadratic_single_mode() {
        let ic = InitialCondition::quadratic(QuadraticData::constant(1.0).unwrap());
        let sp = EigenSpectrum::explicit(vec![1.0]).unwrap();
        let f = solve_fd(&ic, &sp, 1, &GridSpec::uniform(1, 8.0, 0.01, 1.0).unwrap()).unwrap();
        let v = f.value(1.0, &[0.0]).unwrap();
        assert!((v - 2f64.ln()).abs() < 5e-3, "{v}");
        let g = f.gradient(1.0, &[1.0]).unwrap()[0];
        assert!((g - 0.5).abs() < 5e-3, "{g}");
    }

    fn oracle_gap(f: &SolutionField, ic: &InitialCondition, sp: &EigenSpectrum, t: f64) -> f64 {
        let InitialCondition::Separable(data) = ic else { unreachable!() };
        let oracle = SolutionField::SeparableOracle(super::super::SeparableOracle::new(data.clone(), sp.clone()).unwrap());
        (-20..=20)
            .map(|k| {
                let x = [k as f64 * 0.1];
                (f.value(t, &x).unwrap() - oracle.value(t, &x).unwrap()).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn every_scheme_tracks_the_oracle() {
        let ic = InitialCondition::separable(vec![Profile::PseudoHuber { scale: 1.0, width: 0.5 }]).unwrap();
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let base = GridSpec::uniform(1, 6.0, 0.05, 0.5).unwrap();
        let mut explicit = base.clone();
        explicit.diffusion = DiffusionScheme::Explicit;
        let mut godunov = base.clone();
        godunov.hamiltonian = HamiltonianScheme::Godunov;
        for (spec, tol) in [(&base, 5e-3), (&explicit, 5e-3), (&godunov, 2e-2)] {
            let f = solve_fd(&ic, &sp, 1, spec).unwrap();
            let gap = oracle_gap(&f, &ic, &sp, 0.5);
            assert!(gap < tol, "{:?} {:?}: {gap}", spec.hamiltonian, spec.diffusion);
        }
        explicit.dt = Some(0.01);
        assert!(matches!(solve_fd(&ic, &sp, 1, &explicit), Err(Error::Stability(_))));
    }

    #[test]
    fn refinement_improves_error() {
        let ic = InitialCondition::separable(vec![Profile::PseudoHuber { scale: 1.0, width: 0.2 }]).unwrap();
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let coarse = solve_fd(&ic, &sp, 1, &GridSpec::uniform(1, 6.0, 0.04, 0.5).unwrap()).unwrap();
        let fine = solve_fd(&ic, &sp, 1, &GridSpec::uniform(1, 6.0, 0.02, 0.5).unwrap()).unwrap();
        let (ec, ef) = (oracle_gap(&coarse, &ic, &sp, 0.5), oracle_gap(&fine, &ic, &sp, 0.5));
        assert!(ec / ef > 1.7, "{ec} {ef}");
    }

    #[test]
    fn ordered_data_gives_ordered_solutions() {
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let low = InitialCondition::separable(vec![Profile::PseudoHuber { scale: 1.0, width: 0.3 }]).unwrap();
        let high = InitialCondition::separable(vec![Profile::PseudoHuber { scale: 1.5, width: 0.3 }]).unwrap();
        let spec = GridSpec::uniform(1, 4.0, 0.05, 0.5).unwrap();
        let (SolutionField::Grid(a), SolutionField::Grid(b)) =
            (solve_fd(&low, &sp, 1, &spec).unwrap(), solve_fd(&high, &sp, 1, &spec).unwrap())
        else {
            unreachable!()
        };
        // the data are ordered pointwise, so the solutions must be
        let stored = a.slices.len().min(b.slices.len());
        for k in 0..stored {
            if a.times[k] != b.times[k] {
                continue;
            }
            assert!(a.slices[k].iter().zip(&b.slices[k]).all(|(p, q)| p <= &(q + 1e-12)));
        }
    }

    #[test]
    fn convexity_propagates() {
        let ic = InitialCondition::separable(vec![
            Profile::PseudoHuber { scale: 1.0, width: 0.3 },
            Profile::Quadratic { mu: 0.5 },
        ])
        .unwrap();
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let SolutionField::Grid(g) = solve_fd(&ic, &sp, 2, &GridSpec::uniform(2, 3.0, 0.1, 0.3).unwrap()).unwrap() else {
            unreachable!()
        };
        let (n0, n1) = (g.spec.nodes[0], g.spec.nodes[1]);
        let last = g.slices.len() - 1;
        // the Dirichlet data lag the viscous solution, so stay clear of the edges
        for i in n0 / 4..3 * n0 / 4 {
            for j in n1 / 4..3 * n1 / 4 {
                let at = |a: usize, b: usize| g.node_value(last, &[a, b]);
                let c = at(i, j);
                let (d0, d1) = (at(i - 1, j) - 2.0 * c + at(i + 1, j), at(i, j - 1) - 2.0 * c + at(i, j + 1));
                assert!(d0 >= -1e-10 && d1 >= -1e-10, "{i} {j} {d0} {d1}");
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let sp = EigenSpectrum::power_law(2.0).unwrap();
        let nonconvex = InitialCondition::quadratic(QuadraticData::constant(-1.0).unwrap());
        let spec = GridSpec::uniform(1, 2.0, 0.1, 1.0).unwrap();
        assert!(matches!(solve_fd(&nonconvex, &sp, 1, &spec), Err(Error::NotConvex(_))));
        let ic = InitialCondition::quadratic(QuadraticData::constant(1.0).unwrap());
        let mut spec2 = spec.clone();
        spec2.boundary_margin = 10.0;
        assert!(matches!(solve_fd(&ic, &sp, 1, &spec2), Err(Error::BoundaryMargin(_))));
        assert!(solve_fd(&ic, &sp, 2, &spec).is_err());
        let mut spec3 = spec;
        spec3.dt = Some(0.5);
        assert!(matches!(solve_fd(&ic, &sp, 1, &spec3), Err(Error::Stability(_))));
    }
}
