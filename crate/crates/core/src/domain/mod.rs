//! Time-varying constraint sets and their piecewise unions.

mod constraint;
pub(crate) mod qualification;
mod schema;

pub use constraint::{
    ConstraintFunction, ConstraintKind, FnConstraint, LoadProfile, ScalarConstraint,
};
pub use qualification::{
    qualification_check, LinearSystem, QualificationReport, QualificationStatus,
};
pub use schema::{DomainSpec, PieceSpec};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Feasibility and activation tolerances, both absolute on constraint values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_tol")]
    pub feasibility: f64,
    #[serde(default = "default_tol")]
    pub activation: f64,
}

fn default_tol() -> f64 {
    1e-8
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-8,
            activation: 1e-8,
        }
    }
}

/// `{x | g(x,t) <= 0, h(x,t) = 0}` for one smooth regime.
#[derive(Clone, Debug)]
pub struct BasicSet {
    dim: usize,
    pub label: String,
    pub inequalities: Vec<ScalarConstraint>,
    pub equalities: Vec<ScalarConstraint>,
    pub tolerances: Tolerances,
}

/// Indices of the inequalities active at a point of one piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub piece_index: usize,
    pub indices: Vec<usize>,
    pub tau_act: f64,
}

impl BasicSet {
    pub fn new(
        dim: usize,
        inequalities: Vec<ScalarConstraint>,
        equalities: Vec<ScalarConstraint>,
    ) -> Result<Self> {
        for c in inequalities.iter().chain(&equalities) {
            check_dim(dim, c.arity())?;
        }
        Ok(Self {
            dim,
            label: String::new(),
            inequalities,
            equalities,
            tolerances: Tolerances::default(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All constraints affine in `x`: the set is a polyhedron at every `t`.
    pub fn is_polyhedral(&self) -> bool {
        self.inequalities
            .iter()
            .chain(&self.equalities)
            .all(ScalarConstraint::is_affine_in_x)
    }

    pub fn inequality_values(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.inequalities.iter().map(|g| g.value(x, t)).collect()
    }

    pub fn equality_values(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.equalities.iter().map(|h| h.value(x, t)).collect()
    }

    /// Largest constraint violation, `max(0, max gᵢ, max |hⱼ|)`.
    pub fn residual(&self, x: &[f64], t: f64) -> f64 {
        let g = self
            .inequalities
            .iter()
            .map(|g| g.value(x, t))
            .fold(0.0, f64::max);
        let h = self
            .equalities
            .iter()
            .map(|h| h.value(x, t).abs())
            .fold(0.0, f64::max);
        g.max(h)
    }

    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        self.residual(x, t) <= self.tolerances.feasibility
    }

    /// Inequalities with `|gᵢ(x,t)| <= tau_act`. Equalities are always active and are not
    /// listed. Fails when `x` is not feasible.
    pub fn active_indices(&self, x: &[f64], t: f64, tau_act: f64) -> Result<ActiveSet> {
        check_dim(self.dim, x.len())?;
        let residual = self.residual(x, t);
        if residual > self.tolerances.feasibility {
            return Err(Error::Infeasible { t, residual });
        }
        let indices = self
            .inequalities
            .iter()
            .enumerate()
            .filter(|(_, g)| g.value(x, t).abs() <= tau_act)
            .map(|(i, _)| i)
            .collect();
        Ok(ActiveSet {
            piece_index: 0,
            indices,
            tau_act,
        })
    }
}

/// Ordered finite union of basic sets, the moving domain `X(t)`.
#[derive(Clone, Debug)]
pub struct PiecewiseDomain {
    dim: usize,
    pieces: Vec<BasicSet>,
    tolerances: Tolerances,
}

impl PiecewiseDomain {
    pub fn new(pieces: Vec<BasicSet>) -> Result<Self> {
        let first = pieces
            .first()
            .ok_or_else(|| Error::InvalidArgument("a domain needs at least one piece".into()))?;
        let dim = first.dim();
        for p in &pieces {
            check_dim(dim, p.dim())?;
        }
        let tolerances = first.tolerances;
        Ok(Self {
            dim,
            pieces,
            tolerances,
        })
    }

    pub fn single(set: BasicSet) -> Self {
        Self::new(vec![set]).expect("one piece")
    }

    /// Overrides the tolerances of the domain and of every piece.
    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        for p in &mut self.pieces {
            p.tolerances = tolerances;
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances
    }

    pub fn pieces(&self) -> &[BasicSet] {
        &self.pieces
    }

    pub fn piece(&self, index: usize) -> &BasicSet {
        &self.pieces[index]
    }

    /// Smallest violation over the pieces.
    pub fn residual(&self, x: &[f64], t: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.residual(x, t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        self.pieces.iter().any(|p| p.contains(x, t))
    }

    pub fn pieces_containing(&self, x: &[f64], t: f64) -> Vec<usize> {
        (0..self.pieces.len())
            .filter(|&i| self.pieces[i].contains(x, t))
            .collect()
    }

    /// Lowest-index piece containing `x`.
    pub fn locate(&self, x: &[f64], t: f64) -> Option<usize> {
        (0..self.pieces.len()).find(|&i| self.pieces[i].contains(x, t))
    }

    pub fn active_indices(&self, piece: usize, x: &[f64], t: f64) -> Result<ActiveSet> {
        let mut active = self.pieces[piece].active_indices(x, t, self.tolerances.activation)?;
        active.piece_index = piece;
        Ok(active)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(c: Vec<f64>, time: f64, off: f64) -> ScalarConstraint {
        let n = c.len();
        ScalarConstraint::from_kind(n, ConstraintKind::affine(c, time, off)).unwrap()
    }

    #[test]
    fn active_indices_picks_tight_rows() {
        // g = (x1 - t, -x2)
        let set = BasicSet::new(
            2,
            vec![
                affine(vec![1.0, 0.0], -1.0, 0.0),
                affine(vec![0.0, -1.0], 0.0, 0.0),
            ],
            vec![],
        )
        .unwrap();
        let a = set.active_indices(&[0.0, 0.5], 0.0, 1e-8).unwrap();
        assert_eq!(a.indices, vec![0]);
        let a = set.active_indices(&[-1.0, 0.5], 0.0, 1e-8).unwrap();
        assert!(a.indices.is_empty());
    }

    #[test]
    fn active_indices_rejects_infeasible_points() {
        let set = BasicSet::new(1, vec![affine(vec![1.0], 0.0, -1.0)], vec![]).unwrap();
        assert!(matches!(
            set.active_indices(&[2.0], 0.0, 1e-8),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn union_membership_is_any_piece() {
        let left = BasicSet::new(1, vec![affine(vec![1.0], 0.0, 1.0)], vec![]).unwrap(); // x <= -1
        let right = BasicSet::new(1, vec![affine(vec![-1.0], 0.0, 1.0)], vec![]).unwrap(); // x >= 1
        let d = PiecewiseDomain::new(vec![left, right]).unwrap();
        assert!(d.contains(&[-2.0], 0.0));
        assert!(d.contains(&[2.0], 0.0));
        assert!(!d.contains(&[0.0], 0.0));
        assert_eq!(d.locate(&[2.0], 0.0), Some(1));
        assert_eq!(d.pieces_containing(&[0.0], 0.0), Vec::<usize>::new());
    }

    #[test]
    fn mismatched_piece_dimensions_are_rejected() {
        let a = BasicSet::new(1, vec![], vec![]).unwrap();
        let b = BasicSet::new(2, vec![], vec![]).unwrap();
        assert!(PiecewiseDomain::new(vec![a, b]).is_err());
        assert!(PiecewiseDomain::new(vec![]).is_err());
    }
}
