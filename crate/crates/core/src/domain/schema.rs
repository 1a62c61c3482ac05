//! JSON description of domains.

use serde::{Deserialize, Serialize};

use super::{BasicSet, ConstraintKind, PiecewiseDomain, ScalarConstraint, Tolerances};
use crate::error::Result;

/// ```json
/// {
///   "dimension": 2,
///   "tolerances": { "feasibility": 1e-8, "activation": 1e-8 },
///   "pieces": [
///     { "label": "right", "inequalities": [ { "kind": "affine", "coeffs": [-1, 0] } ] }
///   ]
/// }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub dimension: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub pieces: Vec<PieceSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub inequalities: Vec<ConstraintKind>,
    #[serde(default)]
    pub equalities: Vec<ConstraintKind>,
}

impl DomainSpec {
    pub fn build(&self) -> Result<PiecewiseDomain> {
        let n = self.dimension;
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            let ineq = p
                .inequalities
                .iter()
                .map(|k| ScalarConstraint::from_kind(n, k.clone()))
                .collect::<Result<_>>()?;
            let eq = p
                .equalities
                .iter()
                .map(|k| ScalarConstraint::from_kind(n, k.clone()))
                .collect::<Result<_>>()?;
            pieces.push(BasicSet::new(n, ineq, eq)?.with_label(p.label.clone()));
        }
        Ok(PiecewiseDomain::new(pieces)?.with_tolerances(self.tolerances))
    }
}
