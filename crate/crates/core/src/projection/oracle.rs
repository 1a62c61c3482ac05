//! Exhaustive grid search used as an independent reference for the projections.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::TemporalTangentPolyhedron;
use crate::domain::PiecewiseDomain;
use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Largest dimension the grid oracle accepts.
pub const MAX_ORACLE_DIM: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl GridBox {
    pub fn centered(c: &[f64], half_width: f64) -> Self {
        Self {
            lo: c.iter().map(|v| v - half_width).collect(),
            hi: c.iter().map(|v| v + half_width).collect(),
        }
    }
}

/// Feasible grid point nearest to `target`, over `lo + k·resolution` inside the box.
///
/// Ties are broken by linear grid index, so the answer does not depend on how the
/// parallel reduction splits the work.
pub fn grid_argmin<F>(
    target: &[f64],
    bounds: &GridBox,
    resolution: f64,
    feasible: F,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let n = target.len();
    check_dim(n, bounds.lo.len())?;
    check_dim(n, bounds.hi.len())?;
    if n > MAX_ORACLE_DIM {
        return Err(Error::InvalidArgument(format!(
            "grid oracle supports at most {MAX_ORACLE_DIM} dimensions"
        )));
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let counts: Vec<u64> = (0..n)
        .map(|d| {
            (((bounds.hi[d] - bounds.lo[d]) / resolution + 1e-9)
                .floor()
                .max(0.0) as u64)
                + 1
        })
        .collect();
    let total = counts.iter().try_fold(1u64, |acc, &c| acc.checked_mul(c));
    let total = match total {
        Some(t) if t <= 1 << 34 => t,
        _ => return Err(Error::InvalidArgument("grid too large".into())),
    };

    let point = |idx: u64, buf: &mut Vec<f64>| {
        let mut rem = idx;
        for d in 0..n {
            buf[d] = bounds.lo[d] + (rem % counts[d]) as f64 * resolution;
            rem /= counts[d];
        }
    };
    let chunk = 1u64 << 14;
    let chunks = total.div_ceil(chunk);
    let best = (0..chunks)
        .into_par_iter()
        .filter_map(|c| {
            let mut buf = vec![0.0; n];
            let mut best: Option<(f64, u64)> = None;
            for idx in c * chunk..((c + 1) * chunk).min(total) {
                point(idx, &mut buf);
                if feasible(&buf) {
                    let d = linalg::dist(&buf, target);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, idx));
                    }
                }
            }
            best
        })
        .reduce_with(|a, b| if (b.0, b.1) < (a.0, a.1) { b } else { a });
    let (_, idx) = best.ok_or(Error::OracleEmpty)?;
    let mut out = vec![0.0; n];
    point(idx, &mut out);
    Ok(out)
}

/// Coarse-to-fine grid search: a `cells`-per-axis grid over the box, then repeated
/// zooms around the incumbent until the spacing reaches `resolution`.
pub fn refined_grid_argmin<F>(
    target: &[f64],
    bounds: &GridBox,
    resolution: f64,
    cells: usize,
    feasible: F,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let width = bounds
        .lo
        .iter()
        .zip(&bounds.hi)
        .map(|(l, h)| h - l)
        .fold(0.0, f64::max);
    let cells = cells.max(8) as f64;
    let mut res = (width / cells).max(resolution);
    let mut best = grid_argmin(target, bounds, res, &feasible)?;
    while res > resolution {
        let next = (res * 8.0 / cells).max(resolution);
        let zoom = GridBox::centered(&best, 4.0 * res);
        best = grid_argmin(target, &zoom, next, &feasible)?;
        res = next;
    }
    Ok(best)
}

/// Grid reference for [`super::project_to_set`]: nearest grid point of `X(t)` in `bounds`.
pub fn oracle_project(
    y: &[f64],
    domain: &PiecewiseDomain,
    t: f64,
    bounds: &GridBox,
    resolution: f64,
) -> Result<Vec<f64>> {
    check_dim(domain.dim(), y.len())?;
    grid_argmin(y, bounds, resolution, |p| domain.contains(p, t))
}

/// Random bounded-below polyhedron `{v | aᵢ·(v − c) <= bᵢ}` with unit normals and
/// `bᵢ ∈ [0.2, 1]`, so it contains the ball of radius 0.2 around `c`, plus a point to
/// project drawn from `c + [−2, 2]ⁿ`.
pub fn random_polyhedron_instance<R: Rng>(
    rng: &mut R,
    dim: usize,
) -> (TemporalTangentPolyhedron, Vec<f64>) {
    let rows = rng.random_range(1..=2 * dim + 1);
    let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut a = Vec::with_capacity(rows);
    let mut b = Vec::with_capacity(rows);
    for _ in 0..rows {
        let dir: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = linalg::norm(&dir).max(1e-12);
        let dir: Vec<f64> = dir.iter().map(|v| v / norm).collect();
        b.push(rng.random_range(0.2..1.0) + linalg::dot(&dir, &center));
        a.push(dir);
    }
    let f = center
        .iter()
        .map(|c| c + rng.random_range(-2.0..2.0))
        .collect();
    (super::polyhedron(&a, &b), f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn refinement_does_not_increase_distance() {
        let d = scenarios::parabola_domain();
        let y = [0.0, 0.0];
        let bx = GridBox::centered(&y, 0.5);
        let coarse = oracle_project(&y, &d, 0.01, &bx, 0.02).unwrap();
        let fine = oracle_project(&y, &d, 0.01, &bx, 0.01).unwrap();
        assert!(linalg::dist(&fine, &y) <= linalg::dist(&coarse, &y) + 1e-15);
    }

    #[test]
    fn grid_aligned_feasible_point_is_returned() {
        let d = scenarios::wedge_domain();
        let y = [2.0, 1.0];
        let p = oracle_project(
            &y,
            &d,
            0.5,
            &GridBox {
                lo: vec![1.0, 0.0],
                hi: vec![3.0, 2.0],
            },
            0.25,
        )
        .unwrap();
        assert_eq!(p, vec![2.0, 1.0]);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let d = scenarios::wedge_domain();
        let r = oracle_project(
            &[0.0, 5.0],
            &d,
            0.0,
            &GridBox::centered(&[0.0, 5.0], 0.5),
            0.1,
        );
        assert!(matches!(r, Err(Error::OracleEmpty)));
    }

    #[test]
    fn chunking_does_not_change_the_answer() {
        let d = scenarios::wedge_domain();
        let y = [0.0, 0.0];
        let bx = GridBox::centered(&y, 1.0);
        let a = oracle_project(&y, &d, 0.01, &bx, 1e-3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| oracle_project(&y, &d, 0.01, &bx, 1e-3).unwrap());
        assert_eq!(a, b);
    }
}
