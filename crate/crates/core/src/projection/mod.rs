//! Euclidean projections: vectors onto temporal tangent polyhedra, points onto the
//! nonlinear domain, and brute-force grid oracles for both.

mod oracle;
mod qp;
mod set;

pub use oracle::{
    grid_argmin, oracle_project, random_polyhedron_instance, refined_grid_argmin, GridBox,
};
pub use set::{project_to_piece, project_to_set, SetProjection, SetProjectionOptions};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cones::{temporal_tangent_union, PolyhedronUnion, TemporalTangentPolyhedron};
use crate::domain::{LinearSystem, PiecewiseDomain};
use crate::error::{check_dim, Error, Result};
use crate::integrator::VectorField;
use crate::linalg;

/// Default iteration cap of the polyhedral solver.
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

/// Outcome of a polyhedral projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub vector: Vec<f64>,
    pub distance: f64,
    /// Union member the result came from; `None` for single-polyhedron calls.
    pub piece_index: Option<usize>,
    /// Inequality rows tight at the result.
    pub active_rows: Vec<usize>,
    pub iterations: usize,
    /// Inequality multipliers, one per row of `A`.
    pub multipliers: Vec<f64>,
    /// Equality multipliers, one per row of `E`.
    pub equality_multipliers: Vec<f64>,
    /// Max of primal infeasibility and stationarity error `‖v − f + Aᵀλ + Eᵀμ‖∞`.
    pub kkt_residual: f64,
}

/// Projects `f` onto `{v | A v <= b, E v = e}`. Equalities are eliminated first, the
/// inequalities are handled by the dual active-set solver on the reduced space.
pub(crate) fn project_system(
    f: &[f64],
    system: &LinearSystem,
    max_iterations: usize,
) -> Result<ProjectionResult, ProjectionFailure> {
    let n = system.dim();
    let fv = DVector::from_column_slice(f);
    let sub = linalg::affine_subspace(&system.e_mat, &system.e_vec, 1e-9)
        .ok_or(ProjectionFailure::Empty)?;

    let (v, lambda, iterations) = if sub.basis.ncols() == 0 {
        let v = sub.offset.clone();
        let viol = if system.a.nrows() == 0 {
            0.0
        } else {
            (&system.a * &v - &system.b).max()
        };
        if viol > 1e-9 * (1.0 + system.b.amax()) {
            return Err(ProjectionFailure::Empty);
        }
        (v, vec![0.0; system.a.nrows()], 0)
    } else {
        let g = &system.a * &sub.basis;
        let h = &system.b - &system.a * &sub.offset;
        let z0 = sub.basis.transpose() * (&fv - &sub.offset);
        let sol = qp::project_halfspaces(&z0, &g, &h, max_iterations).map_err(|e| match e {
            qp::QpFailure::Infeasible => ProjectionFailure::Empty,
            qp::QpFailure::IterationCap { best, iterations } => ProjectionFailure::IterationCap {
                best: (&sub.offset + &sub.basis * best).iter().copied().collect(),
                iterations,
            },
        })?;
        (
            &sub.offset + &sub.basis * &sol.z,
            sol.multipliers,
            sol.iterations,
        )
    };

    // Equality multipliers from the stationarity condition.
    let lam = DVector::from_column_slice(&lambda);
    let mut grad = &v - &fv;
    if system.a.nrows() > 0 {
        grad += system.a.transpose() * &lam;
    }
    let mu = if system.e_mat.nrows() > 0 {
        linalg::lstsq(&system.e_mat.transpose(), &(-&grad))
    } else {
        DVector::zeros(0)
    };
    if system.e_mat.nrows() > 0 {
        grad += system.e_mat.transpose() * &mu;
    }
    let primal = primal_violation(system, &v);
    let kkt_residual = grad.amax().max(primal);
    let active_rows = (0..system.a.nrows())
        .filter(|&i| (system.a.row(i) * &v)[0] - system.b[i] >= -1e-9 * (1.0 + system.b[i].abs()))
        .collect();
    let vector: Vec<f64> = v.iter().copied().collect();
    debug_assert_eq!(vector.len(), n);
    Ok(ProjectionResult {
        distance: linalg::dist(&vector, f),
        vector,
        piece_index: None,
        active_rows,
        iterations,
        multipliers: lambda,
        equality_multipliers: mu.iter().copied().collect(),
        kkt_residual,
    })
}

fn primal_violation(system: &LinearSystem, v: &DVector<f64>) -> f64 {
    let ineq = if system.a.nrows() == 0 {
        0.0
    } else {
        (&system.a * v - &system.b).max().max(0.0)
    };
    let eq = if system.e_mat.nrows() == 0 {
        0.0
    } else {
        (&system.e_mat * v - &system.e_vec).amax()
    };
    ineq.max(eq)
}

pub(crate) enum ProjectionFailure {
    Empty,
    IterationCap { best: Vec<f64>, iterations: usize },
}

impl ProjectionFailure {
    fn into_error(self, x: &[f64], t: f64) -> Error {
        match self {
            Self::Empty => Error::EmptyTangent { x: x.to_vec(), t },
            Self::IterationCap { best, iterations } => Error::IterationCap { best, iterations },
        }
    }
}

/// Euclidean projection of `f` onto a non-empty temporal tangent polyhedron.
pub fn project_polyhedron(
    f: &[f64],
    polyhedron: &TemporalTangentPolyhedron,
) -> Result<ProjectionResult> {
    project_polyhedron_with(f, polyhedron, DEFAULT_MAX_ITERATIONS)
}

pub fn project_polyhedron_with(
    f: &[f64],
    polyhedron: &TemporalTangentPolyhedron,
    max_iterations: usize,
) -> Result<ProjectionResult> {
    check_dim(polyhedron.dim(), f.len())?;
    if polyhedron.is_empty() {
        return Err(Error::EmptyTangent {
            x: polyhedron.anchor_x.clone(),
            t: polyhedron.anchor_t,
        });
    }
    project_system(f, &polyhedron.system, max_iterations)
        .map_err(|e| e.into_error(&polyhedron.anchor_x, polyhedron.anchor_t))
}

/// Best member projection; ties in distance go to the lowest piece index.
pub fn project_union(f: &[f64], union: &PolyhedronUnion) -> Result<ProjectionResult> {
    let mut best: Option<ProjectionResult> = None;
    let mut last_err = None;
    for (piece, poly) in &union.members {
        if poly.is_empty() {
            continue;
        }
        match project_polyhedron(f, poly) {
            Ok(mut r) => {
                r.piece_index = Some(*piece);
                if best
                    .as_ref()
                    .is_none_or(|b| strictly_closer(r.distance, b.distance))
                {
                    best = Some(r);
                }
            }
            Err(e @ Error::IterationCap { .. }) => last_err = Some(e),
            Err(_) => {}
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| {
            let (x, t) = union
                .members
                .first()
                .map(|(_, p)| (p.anchor_x.clone(), p.anchor_t))
                .unwrap_or_default();
            Error::EmptyTangent { x, t }
        })
    })
}

/// `a` beats `b` by more than rounding noise.
pub(crate) fn strictly_closer(a: f64, b: f64) -> bool {
    a < b - 1e-9 * b.max(1e-12) - 1e-15
}

/// `Π_X f(x, t)`: the field projected onto the temporal tangent union at `(x, t)`.
pub fn projected_field(
    field: &VectorField,
    domain: &PiecewiseDomain,
    x: &[f64],
    t: f64,
) -> Result<ProjectionResult> {
    let union = temporal_tangent_union(domain, x, t)?;
    project_union(&field.eval(x, t), &union)
}

/// Convenience constructor used by tests and the oracle comparison.
pub fn polyhedron(rows: &[Vec<f64>], b: &[f64]) -> TemporalTangentPolyhedron {
    let n = rows.first().map_or(0, |r| r.len());
    TemporalTangentPolyhedron::from_inequalities(
        linalg::from_rows(rows, n),
        DVector::from_column_slice(b),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn half_space_projection() {
        let p = polyhedron(&[vec![0.0, -1.0]], &[0.0]);
        let r = project_polyhedron(&[0.0, -1.0], &p).unwrap();
        assert!(linalg::dist(&r.vector, &[0.0, 0.0]) < 1e-14);
        assert!((r.distance - 1.0).abs() < 1e-14);
        assert_eq!(r.active_rows, vec![0]);
    }

    #[test]
    fn wedge_member_projection() {
        let p = polyhedron(
            &[vec![-1.0, 0.0], vec![0.0, -1.0], vec![-1.0, 1.0]],
            &[0.0, 0.0, -1.0],
        );
        let r = project_polyhedron(&[0.0, 0.0], &p).unwrap();
        assert!(linalg::dist(&r.vector, &[1.0, 0.0]) < 1e-12);
        assert!((r.distance - 1.0).abs() < 1e-12);
        assert!(r.kkt_residual <= 1e-9);
    }

    #[test]
    fn box_clipping() {
        let p = polyhedron(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]);
        let r = project_polyhedron(&[2.0, 1.0], &p).unwrap();
        assert!(linalg::dist(&r.vector, &[1.0, 1.0]) < 1e-14);
    }

    #[test]
    fn equality_rows_are_enforced() {
        let system = LinearSystem {
            a: nalgebra::DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
            b: DVector::from_vec(vec![0.5]),
            e_mat: nalgebra::DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 1.0]),
            e_vec: DVector::from_vec(vec![1.0]),
        };
        let p = TemporalTangentPolyhedron::from_system(system, vec![0.0; 3], 0.0);
        let r = project_polyhedron(&[2.0, 0.0, 0.0], &p).unwrap();
        assert!(
            linalg::dist(&r.vector, &[0.5, 0.5, 0.5]) < 1e-12,
            "{:?}",
            r.vector
        );
        assert!(r.kkt_residual < 1e-12);
    }

    #[test]
    fn empty_polyhedron_is_an_error() {
        let u = temporal_tangent_union(&scenarios::parabola_domain(), &[0.0, 0.0], 0.0).unwrap();
        assert!(matches!(
            project_polyhedron(&[0.0, 0.0], &u.members[0].1),
            Err(Error::EmptyTangent { .. })
        ));
        assert!(matches!(
            project_union(&[0.0, 0.0], &u),
            Err(Error::EmptyTangent { .. })
        ));
    }

    #[test]
    fn wedge_union_tie_goes_to_lowest_piece() {
        let u = temporal_tangent_union(&scenarios::wedge_domain(), &[0.0, 0.0], 0.0).unwrap();
        let r = project_union(&[0.0, 0.0], &u).unwrap();
        assert_eq!(r.piece_index, Some(0));
        assert!(linalg::dist(&r.vector, &[1.0, 0.0]) < 1e-12);
        assert!((r.distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wedge_union_projection_of_upward_field_matches_oracle() {
        let u = temporal_tangent_union(&scenarios::wedge_domain(), &[0.0, 0.0], 0.0).unwrap();
        let r = project_union(&[0.0, 3.0], &u).unwrap();
        assert_eq!(r.piece_index, Some(0));
        assert!(
            linalg::dist(&r.vector, &[2.0, 1.0]) < 1e-12,
            "{:?}",
            r.vector
        );
        let grid = oracle::refined_grid_argmin(
            &[0.0, 3.0],
            &oracle::GridBox::centered(&[0.0, 3.0], 4.0),
            1e-3,
            64,
            |v| u.members.iter().any(|(_, p)| p.contains(v, 1e-12)),
        )
        .unwrap();
        let oracle_distance = linalg::dist(&grid, &[0.0, 3.0]);
        assert!((oracle_distance - r.distance).abs() < 2e-3);
    }

    #[test]
    fn union_projection_of_member_point_is_identity() {
        let u = temporal_tangent_union(&scenarios::wedge_domain(), &[0.0, 0.0], 0.0).unwrap();
        let r = project_union(&[-3.0, 1.0], &u).unwrap();
        assert_eq!(r.piece_index, Some(1));
        assert!(r.distance < 1e-14);
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let p = polyhedron(
            &[vec![-1.0, 0.0], vec![0.0, -1.0], vec![-1.0, 1.0]],
            &[0.0, 0.0, -1.0],
        );
        match project_polyhedron_with(&[0.0, 0.0], &p, 1) {
            Err(Error::IterationCap { best, iterations }) => {
                assert_eq!(best.len(), 2);
                assert_eq!(iterations, 1);
            }
            other => panic!("{other:?}"),
        }
    }
}
