//! Linearized temporal system at a point and its qualification grade.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ActiveSet, BasicSet};
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QualificationStatus {
    /// `[∇ₓh; ∇ₓg_I]` has full row rank.
    FullRank,
    /// Rank-deficient, but `{A v <= b, E v = e}` is still feasible.
    DegenerateNonempty,
    /// The linearized system has no solution.
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualificationReport {
    pub status: QualificationStatus,
    pub rank: usize,
    pub active_row_count: usize,
}

/// `A v <= b`, `E v = e` with rows from the active inequalities and all equalities:
/// `A = ∇ₓg_I`, `b = −∇ₜg_I`, `E = ∇ₓh`, `e = −∇ₜh`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub e_mat: DMatrix<f64>,
    pub e_vec: DVector<f64>,
}

impl LinearSystem {
    pub fn at(set: &BasicSet, x: &[f64], t: f64, active: &ActiveSet) -> Self {
        let n = set.dim();
        let a_rows: Vec<Vec<f64>> = active
            .indices
            .iter()
            .map(|&i| set.inequalities[i].gradient_x(x, t))
            .collect();
        let b = active
            .indices
            .iter()
            .map(|&i| 0.0 - set.inequalities[i].partial_t(x, t))
            .collect::<Vec<_>>();
        let e_rows: Vec<Vec<f64>> = set.equalities.iter().map(|h| h.gradient_x(x, t)).collect();
        let e = set
            .equalities
            .iter()
            .map(|h| 0.0 - h.partial_t(x, t))
            .collect::<Vec<_>>();
        Self {
            a: linalg::from_rows(&a_rows, n),
            b: DVector::from_vec(b),
            e_mat: linalg::from_rows(&e_rows, n),
            e_vec: DVector::from_vec(e),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// `[E; A]` stacked.
    pub fn stacked(&self) -> DMatrix<f64> {
        let n = self.dim();
        let (p, k) = (self.e_mat.nrows(), self.a.nrows());
        let mut m = DMatrix::zeros(p + k, n);
        m.view_mut((0, 0), (p, n)).copy_from(&self.e_mat);
        m.view_mut((p, 0), (k, n)).copy_from(&self.a);
        m
    }

    /// Feasibility of the system as a linear program with free variables.
    pub fn is_feasible_lp(&self) -> bool {
        let n = self.dim();
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = (0..n)
            .map(|_| problem.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        let mut add = |row: nalgebra::RowDVector<f64>, op: ComparisonOp, rhs: f64| {
            let expr: Vec<_> = vars
                .iter()
                .zip(row.iter())
                .filter(|(_, c)| **c != 0.0)
                .map(|(v, c)| (*v, *c))
                .collect();
            if expr.is_empty() {
                return Some(match op {
                    ComparisonOp::Le => 0.0 <= rhs + 1e-12,
                    _ => rhs.abs() <= 1e-12,
                });
            }
            problem.add_constraint(expr.as_slice(), op, rhs);
            None
        };
        let mut trivially_ok = true;
        for i in 0..self.a.nrows() {
            if let Some(ok) = add(self.a.row(i).into_owned(), ComparisonOp::Le, self.b[i]) {
                trivially_ok &= ok;
            }
        }
        for j in 0..self.e_mat.nrows() {
            if let Some(ok) = add(
                self.e_mat.row(j).into_owned(),
                ComparisonOp::Eq,
                self.e_vec[j],
            ) {
                trivially_ok &= ok;
            }
        }
        trivially_ok && problem.solve().is_ok()
    }
}

/// Grades the constraint qualification of `set` at `(x, t)` for the given active set.
pub fn qualification_check(
    set: &BasicSet,
    x: &[f64],
    t: f64,
    active: &ActiveSet,
) -> QualificationReport {
    let system = LinearSystem::at(set, x, t, active);
    grade(&system)
}

pub(crate) fn grade(system: &LinearSystem) -> QualificationReport {
    let stacked = system.stacked();
    let rows = stacked.nrows();
    let rank = linalg::rank(&stacked);
    let status = if rank == rows {
        QualificationStatus::FullRank
    } else if system.is_feasible_lp() {
        QualificationStatus::DegenerateNonempty
    } else {
        QualificationStatus::Empty
    };
    QualificationReport {
        status,
        rank,
        active_row_count: rows,
    }
}
