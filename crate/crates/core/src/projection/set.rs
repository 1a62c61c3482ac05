//! Projection of points onto the nonlinear domain.
//!
//! Each iteration projects `y` onto the linearization of the piece at the current iterate
//! (a Gauss-Newton step on the constraint system with the active set chosen by the
//! polyhedral solver). Fixed points are KKT points of the nonlinear projection problem.
//! Non-polyhedral pieces without equalities are also started from feasible points of a
//! coarse grid around `y`; when the start at `y` fails, perturbed starts are tried.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{project_system, strictly_closer, DEFAULT_MAX_ITERATIONS};
use crate::domain::{BasicSet, LinearSystem, PiecewiseDomain};
use crate::error::{check_dim, Error, Result};
use crate::linalg;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetProjectionOptions {
    /// Extra starts besides `y` itself.
    pub multistarts: usize,
    pub max_iterations: usize,
    /// Half-width of the seed grid box around `y`.
    pub seed_radius: f64,
    /// Grid points per axis of the seed box.
    pub grid_per_axis: usize,
    /// Relative step length at which the iteration is declared converged.
    pub step_tol: f64,
}

impl Default for SetProjectionOptions {
    fn default() -> Self {
        Self {
            multistarts: 8,
            max_iterations: 200,
            seed_radius: 1.0,
            grid_per_axis: 5,
            step_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetProjection {
    pub point: Vec<f64>,
    pub piece_index: usize,
    pub distance: f64,
    pub iterations: usize,
    /// `‖(x − y) + ∇gᵀλ + ∇hᵀμ‖∞` at the returned point.
    pub kkt_residual: f64,
}

/// Nearest point of `X(t)` to `y`; ties between pieces go to the lowest index.
pub fn project_to_set(
    y: &[f64],
    domain: &PiecewiseDomain,
    t: f64,
    opts: &SetProjectionOptions,
) -> Result<SetProjection> {
    check_dim(domain.dim(), y.len())?;
    if let Some(piece_index) = domain.locate(y, t) {
        return Ok(SetProjection {
            point: y.to_vec(),
            piece_index,
            distance: 0.0,
            iterations: 0,
            kkt_residual: 0.0,
        });
    }
    let mut best: Option<SetProjection> = None;
    let mut best_failed: Option<Vec<f64>> = None;
    for (i, set) in domain.pieces().iter().enumerate() {
        match project_to_piece(y, set, t, opts) {
            Ok(mut p) => {
                p.piece_index = i;
                if best
                    .as_ref()
                    .is_none_or(|b| strictly_closer(p.distance, b.distance))
                {
                    best = Some(p);
                }
            }
            Err(Error::SetProjectionFailed { best: Some(b), .. }) => {
                if best_failed.is_none() {
                    best_failed = Some(b);
                }
            }
            Err(_) => {}
        }
    }
    best.ok_or(Error::SetProjectionFailed {
        best: best_failed,
        t,
    })
}

/// Nearest point of a single piece. `piece_index` of the result is 0.
pub fn project_to_piece(
    y: &[f64],
    set: &BasicSet,
    t: f64,
    opts: &SetProjectionOptions,
) -> Result<SetProjection> {
    check_dim(set.dim(), y.len())?;
    if set.contains(y, t) {
        return Ok(SetProjection {
            point: y.to_vec(),
            piece_index: 0,
            distance: 0.0,
            iterations: 0,
            kkt_residual: 0.0,
        });
    }
    let mut best: Option<SetProjection> = None;
    let mut closest_failure: Option<(f64, Vec<f64>)> = None;
    let mut consider = |outcome: LocalOutcome, best: &mut Option<SetProjection>| match outcome {
        LocalOutcome::Converged(p) => {
            let better = best.as_ref().is_none_or(|b| {
                strictly_closer(p.distance, b.distance)
                    || (!strictly_closer(b.distance, p.distance) && lex_greater(&p.point, &b.point))
            });
            if better {
                *best = Some(p);
            }
        }
        LocalOutcome::Failed(Some(x)) => {
            let r = set.residual(&x, t);
            if closest_failure.as_ref().is_none_or(|(rr, _)| r < *rr) {
                closest_failure = Some((r, x));
            }
        }
        LocalOutcome::Failed(None) => {}
    };

    consider(local_solve(y, set, t, y, opts), &mut best);
    if set.is_polyhedral() {
        if let Some(found) = best {
            return Ok(found);
        }
    }
    if set.equalities.is_empty() && !set.is_polyhedral() {
        for seed in grid_seeds(y, set, t, opts) {
            consider(local_solve(y, set, t, &seed, opts), &mut best);
        }
    }
    if best.is_none() {
        for seed in perturbed_seeds(y, opts) {
            consider(local_solve(y, set, t, &seed, opts), &mut best);
        }
    }
    best.ok_or(Error::SetProjectionFailed {
        best: closest_failure.map(|(_, x)| x),
        t,
    })
}

/// Tie rule between equidistant minimizers of one piece: the lexicographically larger
/// point, so symmetric sets resolve to the positive side.
fn lex_greater(a: &[f64], b: &[f64]) -> bool {
    let tol = 1e-9 * (1.0 + linalg::norm_inf(a).max(linalg::norm_inf(b)));
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > tol {
            return x > y;
        }
    }
    false
}

const STALL_LIMIT: usize = 10;

enum LocalOutcome {
    Converged(SetProjection),
    Failed(Option<Vec<f64>>),
}

fn linearize(set: &BasicSet, x: &[f64], t: f64) -> LinearSystem {
    let n = set.dim();
    let rows = |cs: &[crate::domain::ScalarConstraint]| -> (Vec<Vec<f64>>, Vec<f64>) {
        cs.iter()
            .map(|c| {
                let g = c.gradient_x(x, t);
                let rhs = linalg::dot(&g, x) - c.value(x, t);
                (g, rhs)
            })
            .unzip()
    };
    let (a, b) = rows(&set.inequalities);
    let (e, ev) = rows(&set.equalities);
    LinearSystem {
        a: linalg::from_rows(&a, n),
        b: DVector::from_vec(b),
        e_mat: linalg::from_rows(&e, n),
        e_vec: DVector::from_vec(ev),
    }
}

fn local_solve(
    y: &[f64],
    set: &BasicSet,
    t: f64,
    seed: &[f64],
    opts: &SetProjectionOptions,
) -> LocalOutcome {
    let mut x = seed.to_vec();
    let mut damping = 1.0;
    let mut prev_step = f64::INFINITY;
    let mut last = None;
    let scale = 1.0 + linalg::norm(y);
    let mut converged = false;
    let mut iterations = 0;
    let mut best_residual = f64::INFINITY;
    let mut stalled = 0;
    for it in 0..opts.max_iterations {
        iterations = it + 1;
        let system = linearize(set, &x, t);
        let Ok(sol) = project_system(y, &system, DEFAULT_MAX_ITERATIONS) else {
            return LocalOutcome::Failed(if it > 0 { Some(x) } else { None });
        };
        let step = linalg::dist(&sol.vector, &x);
        if it > 2 && step > 0.9 * prev_step {
            damping = (damping * 0.5f64).max(1.0 / 16.0);
        }
        prev_step = step;
        for (xi, zi) in x.iter_mut().zip(&sol.vector) {
            *xi += damping * (zi - *xi);
        }
        last = Some(sol);
        if step <= opts.step_tol * scale {
            converged = true;
            break;
        }
        // give up on starts whose infeasibility stops shrinking
        let residual = set.residual(&x, t);
        if residual <= set.tolerances.feasibility || residual < 0.99 * best_residual {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                break;
            }
        }
        best_residual = best_residual.min(residual);
    }
    let residual = set.residual(&x, t);
    let feasible = residual <= set.tolerances.feasibility;
    // Slow linear convergence near curved, degenerate corners is accepted once the step
    // is far below the feasibility tolerance.
    let settled = converged || prev_step <= 1e-3 * set.tolerances.feasibility;
    if !(feasible && settled) {
        return LocalOutcome::Failed(Some(x));
    }
    let sol = last.expect("at least one iteration");
    let kkt_residual = kkt_at(set, y, &x, t, &sol.multipliers, &sol.equality_multipliers);
    LocalOutcome::Converged(SetProjection {
        distance: linalg::dist(&x, y),
        point: x,
        piece_index: 0,
        iterations,
        kkt_residual,
    })
}

fn kkt_at(set: &BasicSet, y: &[f64], x: &[f64], t: f64, lambda: &[f64], mu: &[f64]) -> f64 {
    let mut r: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    for (g, l) in set.inequalities.iter().zip(lambda) {
        if *l != 0.0 {
            for (ri, gi) in r.iter_mut().zip(g.gradient_x(x, t)) {
                *ri += l * gi;
            }
        }
    }
    for (h, m) in set.equalities.iter().zip(mu) {
        for (ri, gi) in r.iter_mut().zip(h.gradient_x(x, t)) {
            *ri += m * gi;
        }
    }
    linalg::norm_inf(&r)
}

/// Feasible points of a coarse grid around `y`, nearest first.
fn grid_seeds(y: &[f64], set: &BasicSet, t: f64, opts: &SetProjectionOptions) -> Vec<Vec<f64>> {
    let n = y.len();
    let k = opts.grid_per_axis.max(2);
    if n > 4 || opts.multistarts == 0 {
        return Vec::new();
    }
    let total = k.pow(n as u32);
    let h = 2.0 * opts.seed_radius / (k - 1) as f64;
    let mut feasible: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut p = vec![0.0; n];
    for idx in 0..total {
        let mut rem = idx;
        for (d, pd) in p.iter_mut().enumerate() {
            *pd = y[d] - opts.seed_radius + (rem % k) as f64 * h;
            rem /= k;
        }
        if set.contains(&p, t) {
            feasible.push((linalg::dist(&p, y), p.clone()));
        }
    }
    feasible.sort_by(|a, b| a.0.total_cmp(&b.0));
    feasible
        .into_iter()
        .take(opts.multistarts)
        .map(|(_, p)| p)
        .collect()
}

fn perturbed_seeds(y: &[f64], opts: &SetProjectionOptions) -> Vec<Vec<f64>> {
    let r = 0.5 * opts.seed_radius;
    let mut seeds = Vec::new();
    'outer: for d in 0..y.len() {
        for sign in [1.0, -1.0] {
            if seeds.len() >= opts.multistarts {
                break 'outer;
            }
            let mut s = y.to_vec();
            s[d] += sign * r;
            seeds.push(s);
        }
    }
    seeds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn radial_projection_onto_disk() {
        let disk = scenarios::unit_disk();
        let p = project_to_set(&[2.0, 0.0], &disk, 0.0, &SetProjectionOptions::default()).unwrap();
        assert!(linalg::dist(&p.point, &[1.0, 0.0]) < 1e-10, "{:?}", p.point);
        assert!(p.kkt_residual <= 1e-7);
    }

    #[test]
    fn parabola_projection_prefers_positive_branch() {
        let d = scenarios::parabola_domain();
        let p = project_to_set(&[0.0, 0.0], &d, 0.01, &SetProjectionOptions::default()).unwrap();
        assert!(linalg::dist(&p.point, &[0.1, 0.0]) < 1e-9, "{:?}", p.point);
        assert!((p.distance - 0.1).abs() < 1e-9);
    }

    #[test]
    fn feasible_point_is_fixed() {
        let d = scenarios::wedge_domain();
        let p = project_to_set(&[2.0, 1.0], &d, 0.5, &SetProjectionOptions::default()).unwrap();
        assert_eq!(p.point, vec![2.0, 1.0]);
        assert_eq!(p.distance, 0.0);
    }

    #[test]
    fn wedge_tie_goes_to_piece_zero() {
        let d = scenarios::wedge_domain();
        let p = project_to_set(&[0.0, 0.0], &d, 0.01, &SetProjectionOptions::default()).unwrap();
        assert_eq!(p.piece_index, 0);
        assert!(linalg::dist(&p.point, &[0.01, 0.0]) < 1e-14);
    }

    #[test]
    fn equality_manifold_projection() {
        // circle x1^2 + x2^2 = 1 as an equality
        let c = crate::domain::ScalarConstraint::from_kind(
            2,
            crate::domain::ConstraintKind::Quadratic {
                matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                linear: vec![],
                time: 0.0,
                offset: -1.0,
            },
        )
        .unwrap();
        let set = BasicSet::new(2, vec![], vec![c]).unwrap();
        let p = project_to_piece(&[0.3, 0.4], &set, 0.0, &SetProjectionOptions::default()).unwrap();
        assert!(linalg::dist(&p.point, &[0.6, 0.8]) < 1e-9, "{:?}", p.point);
    }
}
