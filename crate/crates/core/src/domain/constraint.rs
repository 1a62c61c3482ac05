//! Scalar constraint functions with analytic Jacobians.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar function `c(x, t)` together with its derivatives.
///
/// Built-in kinds implement this through [`ConstraintKind`]; anything else has to supply
/// its own gradient and time derivative.
pub trait ConstraintFunction: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64], t: f64) -> f64;
    /// Writes `∇ₓ c(x, t)` into `out` (length equal to the state dimension).
    fn gradient_x(&self, x: &[f64], t: f64, out: &mut [f64]);
    fn partial_t(&self, x: &[f64], t: f64) -> f64;
    /// `true` when `c` is affine in `x`, which lets projections skip multistarts.
    fn is_affine_in_x(&self) -> bool {
        false
    }
}

/// Continuous piecewise-linear function of time, constant outside its breakpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    /// `(t, value)` breakpoints with strictly increasing `t`.
    pub points: Vec<(f64, f64)>,
}

impl LoadProfile {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let profile = Self { points };
        profile.validate()?;
        Ok(profile)
    }

    pub fn ramp(t0: f64, v0: f64, t1: f64, v1: f64) -> Self {
        Self {
            points: vec![(t0, v0), (t1, v1)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidArgument(
                "load profile needs at least one breakpoint".into(),
            ));
        }
        if self.points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidArgument(
                "load profile times must be strictly increasing".into(),
            ));
        }
        if self
            .points
            .iter()
            .any(|(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "load profile contains non-finite values".into(),
            ));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        let pts = &self.points;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t < t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        pts[pts.len() - 1].1
    }

    /// Right derivative in `t`.
    pub fn slope(&self, t: f64) -> f64 {
        let pts = &self.points;
        if t < pts[0].0 {
            return 0.0;
        }
        for w in pts.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t < t1 {
                return (v1 - v0) / (t1 - t0);
            }
        }
        0.0
    }

    /// Largest absolute segment slope, a Lipschitz constant in `t`.
    pub fn lipschitz(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0, f64::max)
    }
}

fn default_bus_indices() -> [usize; 4] {
    [0, 1, 2, 3]
}

/// Registry of named constraint kinds loadable from JSON.
///
/// The power-flow kinds read the state as `(p_G, q_G, v, θ₂)` at the positions given by
/// `indices`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintKind {
    /// `coeffs·x + time·t + offset`
    Affine {
        coeffs: Vec<f64>,
        #[serde(default)]
        time: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `xᵀ Q x + linear·x + time·t + offset`; an empty `linear` means zero.
    Quadratic {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        linear: Vec<f64>,
        #[serde(default)]
        time: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `p_G − p_L(t) − v sin θ₂`
    PowerFlowActive {
        load: LoadProfile,
        #[serde(default = "default_bus_indices")]
        indices: [usize; 4],
    },
    /// `q_G + v cos θ₂ − v²`
    PowerFlowReactive {
        #[serde(default = "default_bus_indices")]
        indices: [usize; 4],
    },
}

impl ConstraintKind {
    pub fn affine(coeffs: Vec<f64>, time: f64, offset: f64) -> Self {
        Self::Affine {
            coeffs,
            time,
            offset,
        }
    }

    /// Minimum state dimension the kind reads from, and a validation pass.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            Self::Affine { coeffs, .. } => {
                if coeffs.len() != dim {
                    return bad(format!(
                        "affine constraint has {} coefficients, dimension is {dim}",
                        coeffs.len()
                    ));
                }
            }
            Self::Quadratic { matrix, linear, .. } => {
                if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
                    return bad(format!("quadratic constraint matrix must be {dim}x{dim}"));
                }
                if !linear.is_empty() && linear.len() != dim {
                    return bad(format!(
                        "quadratic constraint linear part must have length {dim}"
                    ));
                }
            }
            Self::PowerFlowActive { load, indices } => {
                load.validate()?;
                if indices.iter().any(|&i| i >= dim) {
                    return bad(format!(
                        "power-flow indices {indices:?} exceed dimension {dim}"
                    ));
                }
            }
            Self::PowerFlowReactive { indices } => {
                if indices.iter().any(|&i| i >= dim) {
                    return bad(format!(
                        "power-flow indices {indices:?} exceed dimension {dim}"
                    ));
                }
            }
        }
        Ok(())
    }
}

impl ConstraintFunction for ConstraintKind {
    fn value(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Self::Affine {
                coeffs,
                time,
                offset,
            } => crate::linalg::dot(coeffs, x) + time * t + offset,
            Self::Quadratic {
                matrix,
                linear,
                time,
                offset,
            } => {
                let mut q = 0.0;
                for (i, row) in matrix.iter().enumerate() {
                    q += x[i] * crate::linalg::dot(row, x);
                }
                let l = if linear.is_empty() {
                    0.0
                } else {
                    crate::linalg::dot(linear, x)
                };
                q + l + time * t + offset
            }
            Self::PowerFlowActive {
                load,
                indices: [p, _, v, th],
            } => x[*p] - load.value(t) - x[*v] * x[*th].sin(),
            Self::PowerFlowReactive {
                indices: [_, q, v, th],
            } => x[*q] + x[*v] * x[*th].cos() - x[*v] * x[*v],
        }
    }

    fn gradient_x(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self {
            Self::Affine { coeffs, .. } => out.copy_from_slice(coeffs),
            Self::Quadratic { matrix, linear, .. } => {
                let n = x.len();
                for i in 0..n {
                    let mut g = if linear.is_empty() { 0.0 } else { linear[i] };
                    for j in 0..n {
                        g += (matrix[i][j] + matrix[j][i]) * x[j];
                    }
                    out[i] = g;
                }
            }
            Self::PowerFlowActive {
                indices: [p, _, v, th],
                ..
            } => {
                out[*p] = 1.0;
                out[*v] = -x[*th].sin();
                out[*th] = -x[*v] * x[*th].cos();
            }
            Self::PowerFlowReactive {
                indices: [_, q, v, th],
            } => {
                out[*q] = 1.0;
                out[*v] = x[*th].cos() - 2.0 * x[*v];
                out[*th] = -x[*v] * x[*th].sin();
            }
        }
    }

    fn partial_t(&self, _x: &[f64], t: f64) -> f64 {
        match self {
            Self::Affine { time, .. } | Self::Quadratic { time, .. } => *time,
            Self::PowerFlowActive { load, .. } => -load.slope(t),
            Self::PowerFlowReactive { .. } => 0.0,
        }
    }

    fn is_affine_in_x(&self) -> bool {
        matches!(self, Self::Affine { .. })
    }
}

/// Wraps user closures as a [`ConstraintFunction`].
pub struct FnConstraint<V, G, T> {
    pub value: V,
    pub gradient_x: G,
    pub partial_t: T,
}

impl<V, G, T> fmt::Debug for FnConstraint<V, G, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnConstraint")
    }
}

impl<V, G, T> ConstraintFunction for FnConstraint<V, G, T>
where
    V: Fn(&[f64], f64) -> f64 + Send + Sync,
    G: Fn(&[f64], f64, &mut [f64]) + Send + Sync,
    T: Fn(&[f64], f64) -> f64 + Send + Sync,
{
    fn value(&self, x: &[f64], t: f64) -> f64 {
        (self.value)(x, t)
    }
    fn gradient_x(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (self.gradient_x)(x, t, out)
    }
    fn partial_t(&self, x: &[f64], t: f64) -> f64 {
        (self.partial_t)(x, t)
    }
}

/// One scalar constraint of fixed arity.
#[derive(Clone, Debug)]
pub struct ScalarConstraint {
    arity: usize,
    func: Arc<dyn ConstraintFunction>,
    kind: Option<ConstraintKind>,
}

impl ScalarConstraint {
    pub fn from_kind(arity: usize, kind: ConstraintKind) -> Result<Self> {
        kind.validate(arity)?;
        Ok(Self {
            arity,
            func: Arc::new(kind.clone()),
            kind: Some(kind),
        })
    }

    pub fn custom(arity: usize, func: Arc<dyn ConstraintFunction>) -> Self {
        Self {
            arity,
            func,
            kind: None,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// The registry kind this constraint was built from, if any.
    pub fn kind(&self) -> Option<&ConstraintKind> {
        self.kind.as_ref()
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        self.func.value(x, t)
    }

    pub fn gradient_x(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.arity];
        self.func.gradient_x(x, t, &mut out);
        out
    }

    pub fn partial_t(&self, x: &[f64], t: f64) -> f64 {
        self.func.partial_t(x, t)
    }

    pub fn is_affine_in_x(&self) -> bool {
        self.func.is_affine_in_x()
    }
}
