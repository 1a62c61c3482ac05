//! Temporal tangent polyhedra and their unions over the pieces of a domain.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{
    qualification, BasicSet, LinearSystem, PiecewiseDomain, QualificationReport,
    QualificationStatus,
};
use crate::error::{check_dim, Error, Result};
use crate::integrator::VectorField;
use crate::projection::{project_to_set, projected_field, SetProjectionOptions};

/// `{v | A v <= b, E v = e}` anchored at `(x, t)`.
///
/// When the domain does not move (`∇ₜ = 0`) the right-hand sides vanish and this is the
/// ordinary tangent cone; otherwise it is an affine polyhedron with the time rate fixed
/// to one.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalTangentPolyhedron {
    pub anchor_x: Vec<f64>,
    pub anchor_t: f64,
    /// Inequality indices (in the piece) behind the rows of `a`.
    pub active: Vec<usize>,
    pub system: LinearSystem,
    pub qualification: QualificationReport,
}

impl TemporalTangentPolyhedron {
    /// Builds the polyhedron directly from matrices, grading it on construction.
    pub fn from_system(system: LinearSystem, anchor_x: Vec<f64>, anchor_t: f64) -> Self {
        let qualification = qualification::grade(&system);
        let active = (0..system.a.nrows()).collect();
        Self {
            anchor_x,
            anchor_t,
            active,
            system,
            qualification,
        }
    }

    /// Inequalities only, `{v | A v <= b}`.
    pub fn from_inequalities(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        let n = a.ncols();
        let system = LinearSystem {
            a,
            b,
            e_mat: DMatrix::zeros(0, n),
            e_vec: DVector::zeros(0),
        };
        Self::from_system(system, vec![0.0; n], 0.0)
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.system.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.system.b
    }

    pub fn e_mat(&self) -> &DMatrix<f64> {
        &self.system.e_mat
    }

    pub fn e_vec(&self) -> &DVector<f64> {
        &self.system.e_vec
    }

    pub fn is_empty(&self) -> bool {
        self.qualification.status == QualificationStatus::Empty
    }

    /// Rank-deficient rows; the polyhedron is still emitted but flagged.
    pub fn is_degenerate(&self) -> bool {
        self.qualification.status == QualificationStatus::DegenerateNonempty
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        let v = DVector::from_column_slice(v);
        let ineq = (&self.system.a * &v - &self.system.b)
            .iter()
            .all(|&r| r <= tol);
        let eq = (&self.system.e_mat * &v - &self.system.e_vec)
            .iter()
            .all(|r| r.abs() <= tol);
        ineq && eq
    }
}

/// The members of `T(∪ Xᵢ)` at a point: one polyhedron per piece containing it.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyhedronUnion {
    pub members: Vec<(usize, TemporalTangentPolyhedron)>,
}

impl PolyhedronUnion {
    /// Every member is empty.
    pub fn is_empty(&self) -> bool {
        self.members.iter().all(|(_, p)| p.is_empty())
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.members.iter().any(|(_, p)| p.contains(v, tol))
    }
}

/// Temporal tangent polyhedron of one basic set at a feasible point.
pub fn temporal_tangent(set: &BasicSet, x: &[f64], t: f64) -> Result<TemporalTangentPolyhedron> {
    let active = set.active_indices(x, t, set.tolerances.activation)?;
    let system = LinearSystem::at(set, x, t, &active);
    let qualification = qualification::grade(&system);
    Ok(TemporalTangentPolyhedron {
        anchor_x: x.to_vec(),
        anchor_t: t,
        active: active.indices,
        system,
        qualification,
    })
}

/// Polyhedra of every piece containing `x` at `t`.
pub fn temporal_tangent_union(
    domain: &PiecewiseDomain,
    x: &[f64],
    t: f64,
) -> Result<PolyhedronUnion> {
    check_dim(domain.dim(), x.len())?;
    let members = domain
        .pieces_containing(x, t)
        .into_iter()
        .map(|i| temporal_tangent(domain.piece(i), x, t).map(|p| (i, p)))
        .collect::<Result<Vec<_>>>()?;
    if members.is_empty() {
        return Err(Error::Infeasible {
            t,
            residual: domain.residual(x, t),
        });
    }
    Ok(PolyhedronUnion { members })
}

/// Projected-field values at random feasible points of the `eps`-ball around `x`.
///
/// The first sample is always `Π_X f(x, t)` itself; the convex hull of the returned cloud
/// is an inner approximation of the Krasovskii regularization at `(x, t)`. Draws that
/// land outside the domain are projected back and kept if they stay within the ball.
pub fn krasovskii_hull_sample(
    field: &VectorField,
    domain: &PiecewiseDomain,
    x: &[f64],
    t: f64,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_dim(domain.dim(), x.len())?;
    if !(eps >= 0.0) || samples == 0 {
        return Err(Error::InvalidArgument(
            "need eps >= 0 and at least one sample".into(),
        ));
    }
    let n = x.len();
    let mut out = Vec::with_capacity(samples);
    out.push(projected_field(field, domain, x, t)?.vector);
    if eps == 0.0 {
        while out.len() < samples {
            out.push(out[0].clone());
        }
        return Ok(out);
    }

    let opts = SetProjectionOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_draws = 100 * samples;
    let mut draws = 0;
    while out.len() < samples {
        if draws >= max_draws {
            return Err(Error::NoFeasibleSample { draws });
        }
        draws += 1;
        let y = sample_ball(&mut rng, x, eps);
        let candidate = if domain.contains(&y, t) {
            y
        } else {
            match project_to_set(&y, domain, t, &opts) {
                Ok(p) if crate::linalg::dist(&p.point, x) <= eps => p.point,
                _ => continue,
            }
        };
        if let Ok(p) = projected_field(field, domain, &candidate, t) {
            debug_assert_eq!(p.vector.len(), n);
            out.push(p.vector);
        }
    }
    Ok(out)
}

/// Uniform sample of the Euclidean ball of radius `r` around `c`.
pub(crate) fn sample_ball<R: Rng>(rng: &mut R, c: &[f64], r: f64) -> Vec<f64> {
    let n = c.len();
    let dir: Vec<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let norm = crate::linalg::norm(&dir).max(f64::MIN_POSITIVE);
    let radius = r * rng.random::<f64>().powf(1.0 / n as f64);
    c.iter()
        .zip(&dir)
        .map(|(ci, di)| ci + radius * di / norm)
        .collect()
}

/// JSON view of a polyhedron: `{A, b, E, e, qualification, active}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyhedronJson {
    pub piece: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(rename = "E")]
    pub e_mat: Vec<Vec<f64>>,
    pub e: Vec<f64>,
    pub active: Vec<usize>,
    pub qualification: QualificationReport,
    pub degenerate: bool,
}

impl PolyhedronJson {
    pub fn new(piece: usize, p: &TemporalTangentPolyhedron) -> Self {
        let rows = |m: &DMatrix<f64>| {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        };
        Self {
            piece,
            a: rows(p.a()),
            b: p.b().iter().copied().collect(),
            e_mat: rows(p.e_mat()),
            e: p.e_vec().iter().copied().collect(),
            active: p.active.clone(),
            qualification: p.qualification,
            degenerate: p.is_degenerate(),
        }
    }
}
