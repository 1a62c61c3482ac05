//! Dual active-set projection onto an intersection of half-spaces.
//!
//! Goldfarb-Idnani specialised to the identity Hessian: start from the unconstrained
//! minimiser, repeatedly add the most violated row and take primal/dual steps, dropping
//! rows whose multiplier would turn negative. Finite termination; infeasibility shows up
//! as a row that can neither be reached by a primal step nor by a dual step.

use nalgebra::{DMatrix, DVector};

pub(crate) struct HalfspaceProjection {
    pub z: DVector<f64>,
    /// One multiplier per row of `g`, zero for rows not in the final active set.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

pub(crate) enum QpFailure {
    Infeasible,
    IterationCap {
        best: DVector<f64>,
        iterations: usize,
    },
}

const VIOLATION_RTOL: f64 = 1e-13;

/// Projects `z0` onto `{z | g z <= h}`.
pub(crate) fn project_halfspaces(
    z0: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    max_iterations: usize,
) -> Result<HalfspaceProjection, QpFailure> {
    let m = g.nrows();
    let n = g.ncols();
    let rows: Vec<DVector<f64>> = (0..m).map(|i| g.row(i).transpose()).collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.norm()).collect();
    let scale = 1.0 + z0.amax() + h.amax();

    // Zero rows are constant constraints 0 <= h_i.
    for i in 0..m {
        if norms[i] <= 1e-14 * scale && h[i] < -VIOLATION_RTOL * scale {
            return Err(QpFailure::Infeasible);
        }
    }
    let usable: Vec<bool> = (0..m).map(|i| norms[i] > 1e-14 * scale).collect();

    let mut z = z0.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut iterations = 0;

    let tol =
        |i: usize, z: &DVector<f64>| VIOLATION_RTOL * (1.0 + z.amax() + h[i].abs() / norms[i]);

    loop {
        // Most violated row, normalised by its length.
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..m {
            if !usable[i] || active.contains(&i) {
                continue;
            }
            let viol = (rows[i].dot(&z) - h[i]) / norms[i];
            if viol > tol(i, &z) && pick.is_none_or(|(_, v)| viol > v) {
                pick = Some((i, viol));
            }
        }
        let Some((p, _)) = pick else { break };
        let ap = &rows[p];
        let mut up = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iterations {
                return Err(QpFailure::IterationCap {
                    best: z,
                    iterations: iterations - 1,
                });
            }
            let (r, dir) = step_direction(&rows, &active, ap, n);

            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (j, &rj) in r.iter().enumerate() {
                if rj > 1e-14 {
                    let ratio = u[j] / rj;
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(j);
                    }
                }
            }
            let s = ap.dot(&z) - h[p];
            if s <= tol(p, &z) * norms[p] {
                if up > 0.0 {
                    active.push(p);
                    u.push(up);
                }
                break;
            }
            let dd = dir.norm_squared();
            let t2 = if dir.norm() <= 1e-11 * norms[p] {
                f64::INFINITY
            } else {
                s / dd
            };

            if t1.is_infinite() && t2.is_infinite() {
                return Err(QpFailure::Infeasible);
            }
            if t2.is_infinite() {
                for (uj, rj) in u.iter_mut().zip(&r) {
                    *uj -= t1 * rj;
                }
                up += t1;
                let k = drop.expect("finite t1 has a blocking row");
                active.remove(k);
                u.remove(k);
                continue;
            }
            let step = t1.min(t2);
            z.axpy(step, &dir, 1.0);
            for (uj, rj) in u.iter_mut().zip(&r) {
                *uj = (*uj - step * rj).max(0.0);
            }
            up += step;
            if t2 <= t1 {
                active.push(p);
                u.push(up);
                break;
            }
            let k = drop.expect("t1 < t2 has a blocking row");
            active.remove(k);
            u.remove(k);
        }
    }

    let mut multipliers = vec![0.0; m];
    for (&i, &ui) in active.iter().zip(&u) {
        multipliers[i] = ui;
    }
    Ok(HalfspaceProjection {
        z,
        multipliers,
        iterations,
    })
}

/// Dual direction `r = (NᵀN)⁻¹Nᵀa` and primal direction `−(a − N r)` for the active rows `N`.
fn step_direction(
    rows: &[DVector<f64>],
    active: &[usize],
    ap: &DVector<f64>,
    n: usize,
) -> (Vec<f64>, DVector<f64>) {
    if active.is_empty() {
        return (Vec::new(), -ap.clone());
    }
    let q = active.len();
    let mut nm = DMatrix::zeros(n, q);
    for (c, &i) in active.iter().enumerate() {
        nm.set_column(c, &rows[i]);
    }
    let gram = nm.transpose() * &nm;
    let rhs = nm.transpose() * ap;
    let r = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => crate::linalg::lstsq(&gram, &rhs),
    };
    let dir = -(ap - &nm * &r);
    (r.iter().copied().collect(), dir)
}
