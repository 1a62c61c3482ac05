//! Time stepping of `ẋ ∈ Π_X f(x, t)`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::temporal_tangent_union;
use crate::domain::PiecewiseDomain;
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::projection::{project_to_set, project_union, SetProjectionOptions};

type FieldFn = dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync;

/// Serializable field kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero {
        dimension: usize,
    },
    Constant {
        value: Vec<f64>,
    },
    /// `matrix · x + offset`
    Linear {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    /// Gradient descent on `½(x[index] − target)²`.
    Feedback {
        dimension: usize,
        index: usize,
        target: f64,
    },
}

impl FieldSpec {
    pub fn build(&self) -> Result<VectorField> {
        match self {
            Self::Zero { dimension } => Ok(VectorField::constant(vec![0.0; *dimension])),
            Self::Constant { value } => Ok(VectorField::constant(value.clone())),
            Self::Linear { matrix, offset } => {
                let n = offset.len();
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidArgument(format!(
                        "linear field matrix must be {n}x{n}"
                    )));
                }
                Ok(VectorField::linear(matrix.clone(), offset.clone()))
            }
            Self::Feedback {
                dimension,
                index,
                target,
            } => {
                if index >= dimension {
                    return Err(Error::InvalidArgument("feedback index out of range".into()));
                }
                let mut matrix = vec![vec![0.0; *dimension]; *dimension];
                matrix[*index][*index] = -1.0;
                let mut offset = vec![0.0; *dimension];
                offset[*index] = *target;
                Ok(VectorField::linear(matrix, offset).with_spec(self.clone()))
            }
        }
    }
}

/// A single-valued field `f(x, t)`.
#[derive(Clone)]
pub struct VectorField {
    arity: usize,
    func: Arc<FieldFn>,
    pub lipschitz_hint: Option<f64>,
    spec: Option<FieldSpec>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("arity", &self.arity)
            .field("lipschitz_hint", &self.lipschitz_hint)
            .field("spec", &self.spec)
            .finish()
    }
}

impl VectorField {
    pub fn new(
        arity: usize,
        func: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            arity,
            func: Arc::new(func),
            lipschitz_hint: None,
            spec: None,
        }
    }

    pub fn constant(value: Vec<f64>) -> Self {
        let spec = FieldSpec::Constant {
            value: value.clone(),
        };
        let mut f = Self::new(value.len(), move |_, _| value.clone());
        f.lipschitz_hint = Some(0.0);
        f.spec = Some(spec);
        f
    }

    pub fn linear(matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Self {
        let spec = FieldSpec::Linear {
            matrix: matrix.clone(),
            offset: offset.clone(),
        };
        let lip = matrix
            .iter()
            .map(|r| linalg::norm(r))
            .fold(0.0, |a: f64, b| a + b * b)
            .sqrt();
        let m = matrix.clone();
        let mut f = Self::new(offset.len(), move |x, _| {
            m.iter()
                .zip(&offset)
                .map(|(row, o)| linalg::dot(row, x) + o)
                .collect()
        });
        f.lipschitz_hint = Some(lip);
        f.spec = Some(spec);
        f
    }

    fn with_spec(mut self, spec: FieldSpec) -> Self {
        self.spec = Some(spec);
        self
    }

    pub fn with_lipschitz_hint(mut self, l: f64) -> Self {
        self.lipschitz_hint = Some(l);
        self
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn spec(&self) -> Option<&FieldSpec> {
        self.spec.as_ref()
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        (self.func)(x, t)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `x⁺ = P_{X(t+Δt)}(x + Δt f(x,t))`
    #[default]
    CatchingUp,
    /// `x⁺ = P_{X(t+Δt)}(x + Δt Π_X f(x,t))`
    TangentEuler,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CatchingUp => "catching-up",
            Self::TangentEuler => "tangent-euler",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepOptions {
    pub scheme: Scheme,
    pub projection: SetProjectionOptions,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::CatchingUp,
            projection: SetProjectionOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub piece_index: usize,
    pub feas_residual: f64,
    /// `Π_X f(x, t)` for the tangent scheme.
    pub tangent_velocity: Option<Vec<f64>>,
    /// Distance moved by the restoring projection.
    pub restoration: f64,
}

/// One step from a feasible `x` at `t`.
pub fn step(
    domain: &PiecewiseDomain,
    field: &VectorField,
    x: &[f64],
    t: f64,
    dt: f64,
    opts: &StepOptions,
) -> Result<(Vec<f64>, StepDiagnostics)> {
    check_dim(domain.dim(), x.len())?;
    check_dim(domain.dim(), field.arity())?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("time step must be positive".into()));
    }
    let residual = domain.residual(x, t);
    if residual > domain.tolerances().feasibility {
        return Err(Error::Infeasible { t, residual });
    }
    let wrap = |e: Error| Error::Step {
        x: x.to_vec(),
        t,
        source: Box::new(e),
    };

    let (velocity, tangent_velocity) = match opts.scheme {
        Scheme::CatchingUp => (field.eval(x, t), None),
        Scheme::TangentEuler => {
            let union = temporal_tangent_union(domain, x, t).map_err(wrap)?;
            let v = project_union(&field.eval(x, t), &union)
                .map_err(wrap)?
                .vector;
            (v.clone(), Some(v))
        }
    };
    let y: Vec<f64> = x
        .iter()
        .zip(&velocity)
        .map(|(xi, vi)| xi + dt * vi)
        .collect();
    let t_next = t + dt;
    let proj = project_to_set(&y, domain, t_next, &opts.projection).map_err(wrap)?;
    let feas_residual = domain.piece(proj.piece_index).residual(&proj.point, t_next);
    Ok((
        proj.point,
        StepDiagnostics {
            piece_index: proj.piece_index,
            feas_residual,
            tangent_velocity,
            restoration: proj.distance,
        },
    ))
}

/// A time-stamped discrete trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dim: usize,
    pub scheme: Scheme,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub piece_indices: Vec<usize>,
    pub feas_residuals: Vec<f64>,
    /// `‖x_k − x_{k−1}‖ / Δt` of the step arriving at node `k`; 0 at the first node.
    pub speeds: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_speed(&self) -> f64 {
        self.speeds.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_feas_residual(&self) -> f64 {
        self.feas_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has a start node")
    }

    /// `(node index, from piece, to piece)` for every change of piece.
    pub fn transitions(&self) -> Vec<(usize, usize, usize)> {
        self.piece_indices
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(|(k, w)| (k + 1, w[0], w[1]))
            .collect()
    }

    /// Columns `t, x1..xn, piece, feas_residual, speed`; `piece` is 1-based.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let n = self.dim;
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend(["piece", "feas_residual", "speed"].map(String::from));
        out.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.states[k].iter().map(f64::to_string));
            row.push((self.piece_indices[k] + 1).to_string());
            row.push(self.feas_residuals[k].to_string());
            row.push(self.speeds[k].to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Sup-norm deviation from a reference solution evaluated at the nodes.
    pub fn sup_deviation(&self, exact: impl Fn(f64) -> Vec<f64>) -> f64 {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, x)| {
                linalg::norm_inf(
                    &x.iter()
                        .zip(exact(t))
                        .map(|(a, b)| a - b)
                        .collect::<Vec<_>>(),
                )
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub step: StepOptions,
}

impl SimulationConfig {
    pub fn new(t0: f64, t_end: f64, dt: f64, scheme: Scheme) -> Self {
        Self {
            t0,
            t_end,
            dt,
            step: StepOptions {
                scheme,
                ..StepOptions::default()
            },
        }
    }

    pub fn steps(&self) -> usize {
        ((self.t_end - self.t0) / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Aborted run: the trajectory up to the failing step plus the cause.
#[derive(Debug, thiserror::Error)]
#[error("simulation aborted after {} nodes: {source}", partial.len())]
pub struct SimulationFailure {
    pub partial: Box<Trajectory>,
    #[source]
    pub source: Error,
}

pub fn simulate(
    domain: &PiecewiseDomain,
    field: &VectorField,
    x0: &[f64],
    config: &SimulationConfig,
) -> Result<Trajectory, SimulationFailure> {
    let mut traj = Trajectory {
        dim: domain.dim(),
        scheme: config.step.scheme,
        dt: config.dt,
        times: Vec::new(),
        states: Vec::new(),
        piece_indices: Vec::new(),
        feas_residuals: Vec::new(),
        speeds: Vec::new(),
    };
    let fail = |traj: Trajectory, source| {
        Err(SimulationFailure {
            partial: Box::new(traj),
            source,
        })
    };
    if let Err(e) = check_dim(domain.dim(), x0.len()) {
        return fail(traj, e);
    }
    if !(config.dt > 0.0) || !(config.t_end >= config.t0) {
        return fail(
            traj,
            Error::InvalidArgument("need dt > 0 and t_end >= t0".into()),
        );
    }
    let Some(piece) = domain.locate(x0, config.t0) else {
        let residual = domain.residual(x0, config.t0);
        return fail(
            traj,
            Error::Infeasible {
                t: config.t0,
                residual,
            },
        );
    };
    traj.times.push(config.t0);
    traj.states.push(x0.to_vec());
    traj.piece_indices.push(piece);
    traj.feas_residuals
        .push(domain.piece(piece).residual(x0, config.t0));
    traj.speeds.push(0.0);

    let steps = config.steps();
    for k in 1..=steps {
        let t = traj.times[k - 1];
        let t_next = if k == steps {
            config.t_end
        } else {
            config.t0 + k as f64 * config.dt
        };
        let h = t_next - t;
        let x = traj.states[k - 1].clone();
        match step(domain, field, &x, t, h, &config.step) {
            Ok((x_next, diag)) => {
                traj.speeds.push(linalg::dist(&x_next, &x) / h);
                traj.times.push(t_next);
                traj.states.push(x_next);
                traj.piece_indices.push(diag.piece_index);
                traj.feas_residuals.push(diag.feas_residual);
            }
            Err(e) => return fail(traj, e),
        }
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dt_coarse: f64,
    pub dt_fine: f64,
    /// Sup-norm distance between the two runs at the coarse nodes.
    pub deviation: f64,
}

/// Runs the simulation at each step size and compares consecutive pairs.
pub fn convergence_study(
    domain: &PiecewiseDomain,
    field: &VectorField,
    x0: &[f64],
    base: &SimulationConfig,
    dts: &[f64],
) -> Result<Vec<ConvergenceRow>> {
    if dts.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument(
            "step sizes must be strictly decreasing".into(),
        ));
    }
    let horizon = base.t_end - base.t0;
    for &dt in dts {
        let m = horizon / dt;
        if (m - m.round()).abs() > 1e-6 * m.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "step {dt} does not divide the horizon {horizon}"
            )));
        }
    }
    if dts.len() < 2 {
        return Ok(Vec::new());
    }
    let runs: Vec<Trajectory> = dts
        .par_iter()
        .map(|&dt| {
            let cfg = SimulationConfig { dt, ..base.clone() };
            simulate(domain, field, x0, &cfg).map_err(|f| f.source)
        })
        .collect::<Result<_>>()?;
    Ok(runs
        .windows(2)
        .map(|w| {
            let (coarse, fine) = (&w[0], &w[1]);
            let ratio = (coarse.dt / fine.dt).round() as usize;
            let deviation = coarse
                .states
                .iter()
                .enumerate()
                .map(|(k, xc)| {
                    let xf = &fine.states[(k * ratio).min(fine.states.len() - 1)];
                    xc.iter()
                        .zip(xf)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            ConvergenceRow {
                dt_coarse: coarse.dt,
                dt_fine: fine.dt,
                deviation,
            }
        })
        .collect())
}

/// Least-squares slope of `log deviation` against `log dt`.
pub fn fitted_order(rows: &[ConvergenceRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.deviation > 0.0)
        .map(|r| (r.dt_coarse.ln(), r.deviation.ln()))
        .collect();
    crate::analysis::log_slope(&pts)
}
