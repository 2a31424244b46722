//! Initial conditions `phi_0` and one-dimensional convex profiles.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadratic::QuadraticData;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A one-dimensional profile `f`, used coordinate-wise by separable data.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `1/2 mu y^2`.
    Quadratic { mu: f64 },
    /// `value` everywhere.
    Constant { value: f64 },
    /// `scale (sqrt(y^2 + width^2) - width)`: a smoothed `scale |y|`.
    PseudoHuber { scale: f64, width: f64 },
    /// User-supplied profile; not serializable.
    #[serde(skip)]
    Custom(CustomProfile),
}

#[derive(Clone)]
pub struct CustomProfile {
    pub value: ScalarFn,
    pub derivative: ScalarFn,
    pub second_derivative: Option<ScalarFn>,
    pub curvature_bound: f64,
    pub lower_bound: f64,
    pub convex: bool,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Quadratic { mu } => write!(f, "Quadratic {{ mu: {mu} }}"),
            Profile::Constant { value } => write!(f, "Constant {{ value: {value} }}"),
            Profile::PseudoHuber { scale, width } => {
                write!(f, "PseudoHuber {{ scale: {scale}, width: {width} }}")
            }
            Profile::Custom(c) => write!(
                f,
                "Custom {{ curvature_bound: {}, convex: {} }}",
                c.curvature_bound, c.convex
            ),
        }
    }
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::Quadratic { mu } if !mu.is_finite() => Err(invalid("mu", "must be finite")),
            Profile::Constant { value } if !value.is_finite() => {
                Err(invalid("value", "must be finite"))
            }
            Profile::PseudoHuber { scale, width } if !(*scale >= 0.0 && *width > 0.0) => Err(
                invalid("pseudo_huber", "scale must be >= 0 and width > 0"),
            ),
            _ => Ok(()),
        }
    }

    pub fn value(&self, y: f64) -> f64 {
        match self {
            Profile::Quadratic { mu } => 0.5 * mu * y * y,
            Profile::Constant { value } => *value,
            Profile::PseudoHuber { scale, width } => scale * (y.hypot(*width) - width),
            Profile::Custom(c) => (c.value)(y),
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match self {
            Profile::Quadratic { mu } => mu * y,
            Profile::Constant { .. } => 0.0,
            Profile::PseudoHuber { scale, width } => scale * y / y.hypot(*width),
            Profile::Custom(c) => (c.derivative)(y),
        }
    }

    pub fn second_derivative(&self, y: f64) -> Option<f64> {
        match self {
            Profile::Quadratic { mu } => Some(*mu),
            Profile::Constant { .. } => Some(0.0),
            Profile::PseudoHuber { scale, width } => {
                let r = y.hypot(*width);
                Some(scale * width * width / (r * r * r))
            }
            Profile::Custom(c) => c.second_derivative.as_ref().map(|f| f(y)),
        }
    }

    /// `sup f''`.
    pub fn curvature_bound(&self) -> f64 {
        match self {
            Profile::Quadratic { mu } => mu.max(0.0),
            Profile::Constant { .. } => 0.0,
            Profile::PseudoHuber { scale, width } => scale / width,
            Profile::Custom(c) => c.curvature_bound,
        }
    }

    /// `inf f` (`-inf` when unbounded below).
    pub fn lower_bound(&self) -> f64 {
        match self {
            Profile::Quadratic { mu } if *mu >= 0.0 => 0.0,
            Profile::Quadratic { .. } => f64::NEG_INFINITY,
            Profile::Constant { value } => *value,
            Profile::PseudoHuber { .. } => 0.0,
            Profile::Custom(c) => c.lower_bound,
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            Profile::Quadratic { mu } => *mu >= 0.0,
            Profile::Constant { .. } | Profile::PseudoHuber { .. } => true,
            Profile::Custom(c) => c.convex,
        }
    }

    /// Grows without bound in both directions.
    pub fn is_coercive(&self) -> bool {
        match self {
            Profile::Quadratic { mu } => *mu > 0.0,
            Profile::Constant { .. } => false,
            Profile::PseudoHuber { scale, .. } => *scale > 0.0,
            Profile::Custom(c) => c.convex && (c.value)(1e6) > (c.value)(0.0) && (c.value)(-1e6) > (c.value)(0.0),
        }
    }

    /// Minimizer of `f(y) + (x - y)^2 / (2 s)` for convex `f`, `s > 0`.
    ///
    /// The stationarity map `f'(y) + (y - x)/s` is increasing and changes
    /// sign on `[x - s f'(x), x]` (or the mirrored interval), so a
    /// safeguarded Newton iteration on that bracket converges.
    pub fn proximal_point(&self, x: f64, s: f64) -> f64 {
        match self {
            Profile::Quadratic { mu } => return x / (1.0 + s * mu),
            Profile::Constant { .. } => return x,
            _ => {}
        }
        let g = |y: f64| self.derivative(y) + (y - x) / s;
        let step = s * self.derivative(x);
        if step == 0.0 {
            return x;
        }
        let (mut lo, mut hi) = if step > 0.0 { (x - step, x) } else { (x, x - step) };
        let mut y = 0.5 * (lo + hi);
        for _ in 0..200 {
            let gy = g(y);
            if gy == 0.0 {
                return y;
            }
            if gy > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let newton = self
                .second_derivative(y)
                .map(|d2| y - gy / (d2 + 1.0 / s))
                .filter(|n| *n > lo && *n < hi);
            let next = newton.unwrap_or(0.5 * (lo + hi));
            if (next - y).abs() <= 4.0 * f64::EPSILON * (1.0 + y.abs()) || hi - lo <= f64::EPSILON * (1.0 + y.abs()) {
                return next;
            }
            y = next;
        }
        y
    }

    /// `min_y f(y) + (x - y)^2 / (2 s)` (the 1-D Moreau envelope).
    pub fn envelope(&self, x: f64, s: f64) -> f64 {
        let y = self.proximal_point(x, s);
        self.value(y) + (x - y) * (x - y) / (2.0 * s)
    }
}

/// A convex `phi_0` given by callables.
#[derive(Clone)]
pub struct GenericConvex {
    pub value: VectorFn,
    pub gradient: GradientFn,
    pub convex: bool,
    pub coercive: bool,
    pub lower_bound: f64,
    /// Lipschitz constant of the gradient (the `C^{1,1}` bound), if known.
    pub lipschitz: Option<f64>,
}

impl fmt::Debug for GenericConvex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericConvex")
            .field("convex", &self.convex)
            .field("coercive", &self.coercive)
            .field("lower_bound", &self.lower_bound)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// Separable data `sum_i f_i(x_i) + offset`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparableData {
    pub profiles: Vec<Profile>,
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    DiagonalQuadratic(QuadraticData),
    Separable(SeparableData),
    #[serde(skip)]
    GenericConvex(GenericConvex),
}

impl InitialCondition {
    pub fn quadratic(data: QuadraticData) -> Self {
        InitialCondition::DiagonalQuadratic(data)
    }

    pub fn separable(profiles: Vec<Profile>) -> Result<Self> {
        Self::separable_with_offset(profiles, 0.0)
    }

    pub fn separable_with_offset(profiles: Vec<Profile>, offset: f64) -> Result<Self> {
        if profiles.is_empty() {
            return Err(invalid("profiles", "need at least one profile"));
        }
        for p in &profiles {
            p.validate()?;
        }
        Ok(InitialCondition::Separable(SeparableData { profiles, offset }))
    }

    pub fn constant(value: f64) -> Self {
        InitialCondition::Separable(SeparableData {
            profiles: vec![Profile::Constant { value: 0.0 }],
            offset: value,
        })
    }

    /// The same data plus a constant.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        match self {
            InitialCondition::Separable(s) => Ok(InitialCondition::Separable(SeparableData {
                profiles: s.profiles.clone(),
                offset: s.offset + delta,
            })),
            InitialCondition::GenericConvex(g) => {
                let (v, d) = (g.value.clone(), delta);
                Ok(InitialCondition::GenericConvex(GenericConvex {
                    value: Arc::new(move |x| v(x) + d),
                    lower_bound: g.lower_bound + delta,
                    ..g.clone()
                }))
            }
            InitialCondition::DiagonalQuadratic(_) => Err(Error::Unsupported(
                "shift quadratic data by converting it to separable profiles first".into(),
            )),
        }
    }

    /// Number of modes the data depends on, `None` if unbounded.
    pub fn support(&self) -> Option<usize> {
        match self {
            InitialCondition::DiagonalQuadratic(q) => q.support(),
            InitialCondition::Separable(s) => Some(s.profiles.len()),
            InitialCondition::GenericConvex(_) => None,
        }
    }

    /// `phi_0((x, 0))`.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            InitialCondition::DiagonalQuadratic(q) => q.value(x),
            InitialCondition::Separable(s) => {
                s.offset
                    + s.profiles
                        .iter()
                        .enumerate()
                        .map(|(i, p)| p.value(x.get(i).copied().unwrap_or(0.0)))
                        .sum::<f64>()
            }
            InitialCondition::GenericConvex(g) => (g.value)(x),
        }
    }

    /// Gradient restricted to the coordinates of `x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            InitialCondition::DiagonalQuadratic(q) => {
                x.iter().enumerate().map(|(i, v)| q.mu0(i) * v).collect()
            }
            InitialCondition::Separable(s) => x
                .iter()
                .enumerate()
                .map(|(i, v)| s.profiles.get(i).map_or(0.0, |p| p.derivative(*v)))
                .collect(),
            InitialCondition::GenericConvex(g) => (g.gradient)(x),
        }
    }

    /// Diagonal of the Hessian where it is known in closed form.
    pub fn hessian_diagonal(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            InitialCondition::DiagonalQuadratic(q) => Some((0..x.len()).map(|i| q.mu0(i)).collect()),
            InitialCondition::Separable(s) => x
                .iter()
                .enumerate()
                .map(|(i, v)| match s.profiles.get(i) {
                    Some(p) => p.second_derivative(*v),
                    None => Some(0.0),
                })
                .collect(),
            InitialCondition::GenericConvex(_) => None,
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            InitialCondition::DiagonalQuadratic(q) => q.is_admissible(),
            InitialCondition::Separable(s) => s.profiles.iter().all(Profile::is_convex),
            InitialCondition::GenericConvex(g) => g.convex,
        }
    }

    /// Coercive on the modes it depends on.
    pub fn is_coercive(&self) -> bool {
        match self {
            InitialCondition::DiagonalQuadratic(q) => match &q.mu0 {
                crate::quadratic::Mu0Rule::Constant { value } => *value > 0.0,
                crate::quadratic::Mu0Rule::List { values } => values.iter().all(|v| *v > 0.0),
            },
            InitialCondition::Separable(s) => s.profiles.iter().all(Profile::is_coercive),
            InitialCondition::GenericConvex(g) => g.coercive,
        }
    }

    /// `inf phi_0`.
    pub fn lower_bound(&self) -> f64 {
        match self {
            InitialCondition::DiagonalQuadratic(q) if q.is_admissible() => 0.0,
            InitialCondition::DiagonalQuadratic(_) => f64::NEG_INFINITY,
            InitialCondition::Separable(s) => {
                s.offset + s.profiles.iter().map(Profile::lower_bound).sum::<f64>()
            }
            InitialCondition::GenericConvex(g) => g.lower_bound,
        }
    }

    /// Per-mode `sup phi_ii` for the first `n` modes.
    pub fn curvature_bounds(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| match self {
                InitialCondition::DiagonalQuadratic(q) => q.mu0(i).max(0.0),
                InitialCondition::Separable(s) => {
                    s.profiles.get(i).map_or(0.0, Profile::curvature_bound)
                }
                InitialCondition::GenericConvex(g) => g.lipschitz.unwrap_or(f64::INFINITY),
            })
            .collect()
    }

    /// The `C^{1,1}` bound `C` used by the modulus `omega`.
    pub fn c11_bound(&self) -> Option<f64> {
        match self {
            InitialCondition::DiagonalQuadratic(q) => Some(q.sup().max(0.0)),
            InitialCondition::Separable(s) => Some(
                s.profiles
                    .iter()
                    .map(Profile::curvature_bound)
                    .fold(0.0, f64::max),
            ),
            InitialCondition::GenericConvex(g) => g.lipschitz,
        }
    }

    /// Midpoint convexity probes `f((x+y)/2) <= (f(x)+f(y))/2 + 1e-10` on
    /// `pairs` random pairs in `[-radius, radius]^dim`.
    pub fn probe_convexity(&self, dim: usize, radius: f64, pairs: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..pairs {
            let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..=radius)).collect();
            let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..=radius)).collect();
            let m: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
            let gap = self.value(&m) - 0.5 * (self.value(&a) + self.value(&b));
            if gap > 1e-10 {
                return Err(Error::NotConvex(format!(
                    "midpoint probe violated by {gap:e} between {a:?} and {b:?}"
                )));
            }
        }
        Ok(())
    }

    /// Checks growth beyond `level` along `rays` random unit directions.
    pub fn probe_coercivity(&self, dim: usize, level: f64, rays: usize, seed: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..rays).all(|_| {
            let mut d: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let n = d.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            d.iter_mut().for_each(|v| *v /= n);
            let mut r = 1.0;
            while r < 1e12 {
                let x: Vec<f64> = d.iter().map(|v| v * r).collect();
                if self.value(&x) > level {
                    return true;
                }
                r *= 4.0;
            }
            false
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pseudo_huber_derivatives() {
        let p = Profile::PseudoHuber { scale: 2.0, width: 0.5 };
        let h = 1e-6;
        for y in [-3.0, -0.2, 0.0, 0.7, 4.0] {
            let fd = (p.value(y + h) - p.value(y - h)) / (2.0 * h);
            assert!((fd - p.derivative(y)).abs() < 1e-8);
            let fd2 = (p.derivative(y + h) - p.derivative(y - h)) / (2.0 * h);
            assert!((fd2 - p.second_derivative(y).unwrap()).abs() < 1e-6);
            assert!(p.second_derivative(y).unwrap() <= p.curvature_bound() + 1e-12);
        }
    }

    #[test]
    fn proximal_point_is_stationary() {
        let profiles = [
            Profile::PseudoHuber { scale: 1.5, width: 0.3 },
            Profile::Quadratic { mu: 2.0 },
            Profile::Constant { value: 1.0 },
        ];
        for p in &profiles {
            for (x, s) in [(2.0, 0.5), (-1.0, 3.0), (0.1, 0.01), (5.0, 10.0)] {
                let y = p.proximal_point(x, s);
                assert!((p.derivative(y) + (y - x) / s).abs() < 1e-10, "{p:?} {x} {s}");
                // the envelope lies below the value at x and at nearby points
                let e = p.envelope(x, s);
                assert!(e <= p.value(x) + 1e-14);
                for dy in [-1e-3, 1e-3] {
                    let z = y + dy;
                    assert!(e <= p.value(z) + (x - z) * (x - z) / (2.0 * s) + 1e-14);
                }
            }
        }
    }

    #[test]
    fn convexity_probes() {
        let convex = InitialCondition::separable(vec![
            Profile::PseudoHuber { scale: 1.0, width: 0.5 },
            Profile::Quadratic { mu: 1.0 },
        ])
        .unwrap();
        assert!(convex.probe_convexity(2, 5.0, 500, 7).is_ok());
        assert!(convex.probe_coercivity(2, 100.0, 20, 3));

        let bump = InitialCondition::GenericConvex(GenericConvex {
            value: Arc::new(|x: &[f64]| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 >= 1.0 { r2 } else { 2.0 - r2 }
            }),
            gradient: Arc::new(|x: &[f64]| x.to_vec()),
            convex: false,
            coercive: true,
            lower_bound: 1.0,
            lipschitz: None,
        });
        assert!(bump.probe_convexity(2, 1.5, 500, 7).is_err());
        assert!(!InitialCondition::constant(3.0).probe_coercivity(1, 10.0, 4, 1));
    }

    #[test]
    fn separable_value_includes_unlisted_coordinates() {
        let ic = InitialCondition::separable_with_offset(
            vec![Profile::Quadratic { mu: 2.0 }, Profile::Constant { value: 0.5 }],
            1.0,
        )
        .unwrap();
        assert_eq!(ic.value(&[1.0]), 1.0 + 1.0 + 0.5);
        assert_eq!(ic.lower_bound(), 1.5);
        assert_eq!(ic.shifted(0.25).unwrap().value(&[1.0]), 2.75);
    }

    #[test]
    fn serde_shapes() {
        let ic: InitialCondition = serde_json::from_str(
            r#"{"kind":"separable","profiles":[{"kind":"pseudo_huber","scale":1.0,"width":0.5}]}"#,
        )
        .unwrap();
        assert!(matches!(ic, InitialCondition::Separable(_)));
        let ic: InitialCondition = serde_json::from_str(
            r#"{"kind":"diagonal_quadratic","mu0":{"kind":"constant","value":1.0}}"#,
        )
        .unwrap();
        assert!(ic.is_convex());
    }
}
