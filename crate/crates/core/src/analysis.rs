//! Sampling diagnostics: forward Lipschitz certification, tangent emptiness and the
//! constraint-violation distance bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{sample_ball, temporal_tangent_union};
use crate::domain::{BasicSet, PiecewiseDomain, QualificationStatus};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::projection::{
    project_to_piece, project_to_set, project_union, refined_grid_argmin, GridBox,
    SetProjectionOptions,
};

pub const DEFAULT_DELTA_GRID: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
pub const DIVERGENCE_SLOPE: f64 = -0.1;
pub const DIVERGENCE_GROWTH: f64 = 10.0;
/// Ratios below this count as a violated lower bound.
pub const RATIO_FLOOR: f64 = 1e-12;

/// Draws feasible points of `X(t)` around a center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointSampler {
    pub center: Vec<f64>,
    pub radius: f64,
    pub count: usize,
    /// Probability that a draw is pushed onto the boundary.
    pub boundary_bias: f64,
    pub seed: u64,
}

impl Default for PointSampler {
    fn default() -> Self {
        Self {
            center: Vec::new(),
            radius: 0.5,
            count: 200,
            boundary_bias: 0.8,
            seed: 0,
        }
    }
}

impl PointSampler {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self {
            center,
            radius,
            ..Self::default()
        }
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The first point is the center itself (projected onto `X(t)` if needed). Boundary
    /// draws are the projections of infeasible ball samples; interior draws are kept only
    /// when feasible.
    pub fn sample(
        &self,
        domain: &PiecewiseDomain,
        t: f64,
        opts: &SetProjectionOptions,
    ) -> Result<Vec<Vec<f64>>> {
        check_dim(domain.dim(), self.center.len())?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.count);
        if self.count == 0 {
            return Ok(out);
        }
        if let Ok(p) = project_to_set(&self.center, domain, t, opts) {
            out.push(p.point);
        }
        let max_draws = 100 * self.count;
        let mut draws = 0;
        while out.len() < self.count && draws < max_draws {
            draws += 1;
            let boundary = rng.random::<f64>() < self.boundary_bias;
            let mut y = sample_ball(&mut rng, &self.center, self.radius);
            if boundary {
                for _ in 0..8 {
                    if !domain.contains(&y, t) {
                        break;
                    }
                    y = sample_ball(&mut rng, &self.center, self.radius);
                }
            }
            if domain.contains(&y, t) {
                out.push(y);
            } else if boundary || domain.pieces().iter().any(|p| !p.equalities.is_empty()) {
                if let Ok(p) = project_to_set(&y, domain, t, opts) {
                    out.push(p.point);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::NoFeasibleSample { draws });
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    ForwardLipschitz,
    Divergent,
    Inconclusive,
}

/// Grid-search recomputation of one sampled distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub point_id: usize,
    pub delta: f64,
    pub solver_distance: f64,
    pub oracle_distance: f64,
    pub resolution: f64,
}

impl OracleCheck {
    /// The solver may not lose to a feasible grid point by more than the grid spacing.
    pub fn consistent(&self, dim: usize) -> bool {
        self.solver_distance
            <= self.oracle_distance + 2.0 * self.resolution * (dim as f64).sqrt() + 1e-12
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProfile {
    pub t: f64,
    pub sample_points: Vec<Vec<f64>>,
    pub delta_grid: Vec<f64>,
    /// `ratios[point][delta]`; `+∞` marks a failed projection.
    #[serde(with = "ratio_matrix")]
    pub ratios: Vec<Vec<f64>>,
    /// Max over points, per delta.
    #[serde(with = "ratio_row")]
    pub max_ratios: Vec<f64>,
    pub l_hat: f64,
    pub slope: f64,
    /// Horizon over which the sampled bound applies: the largest delta.
    pub horizon: f64,
    pub verdict: Verdict,
    pub oracle_checks: Vec<OracleCheck>,
}

impl LipschitzProfile {
    pub fn max_ratio_at(&self, delta: f64) -> Option<f64> {
        self.delta_grid
            .iter()
            .position(|&d| d == delta)
            .map(|j| self.max_ratios[j])
    }

    pub fn failed_projections(&self) -> usize {
        self.ratios
            .iter()
            .flatten()
            .filter(|r| !r.is_finite())
            .count()
    }
}

/// JSON has no infinity; failed projections are written as `null`.
mod ratio_row {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|r| r.is_finite().then_some(*r))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?
            .into_iter()
            .map(|r| r.unwrap_or(f64::INFINITY))
            .collect())
    }
}

mod ratio_matrix {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|row| {
                row.iter()
                    .map(|r| r.is_finite().then_some(*r))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        Ok(Vec::<Vec<Option<f64>>>::deserialize(d)?
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|r| r.unwrap_or(f64::INFINITY))
                    .collect()
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyOptions {
    pub projection: SetProjectionOptions,
    /// Points re-checked by the grid oracle (domains of dimension at most 3 only).
    pub oracle_points: usize,
    /// Grid cells per axis of the coarse oracle pass.
    pub oracle_cells: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            projection: SetProjectionOptions::default(),
            oracle_points: 3,
            oracle_cells: 40,
        }
    }
}

/// Least-squares slope through `(x, y)` pairs; `None` with fewer than two distinct `x`.
pub fn log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Ratios `d(x, X(t+δ))/δ` over sampled points of `X(t)`.
pub fn forward_lipschitz_profile(
    domain: &PiecewiseDomain,
    t: f64,
    sampler: &PointSampler,
    delta_grid: &[f64],
    opts: &CertifyOptions,
) -> Result<LipschitzProfile> {
    if delta_grid.is_empty()
        || delta_grid.iter().any(|d| !(*d > 0.0))
        || delta_grid.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(Error::InvalidArgument(
            "delta grid must be positive and strictly decreasing".into(),
        ));
    }
    let points = sampler.sample(domain, t, &opts.projection)?;
    let ratios: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x| {
            delta_grid
                .iter()
                .map(
                    |&d| match project_to_set(x, domain, t + d, &opts.projection) {
                        Ok(p) => p.distance / d,
                        Err(_) => f64::INFINITY,
                    },
                )
                .collect()
        })
        .collect();
    let max_ratios: Vec<f64> = (0..delta_grid.len())
        .map(|j| ratios.iter().map(|r| r[j]).fold(0.0, f64::max))
        .collect();
    let l_hat = ratios
        .iter()
        .flatten()
        .copied()
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max);
    let fit: Vec<(f64, f64)> = delta_grid
        .iter()
        .zip(&max_ratios)
        .filter(|(_, r)| r.is_finite() && **r > 0.0)
        .map(|(d, r)| (d.ln(), r.ln()))
        .collect();
    let slope = log_slope(&fit).unwrap_or(0.0);
    let all_finite = max_ratios.iter().all(|r| r.is_finite());
    let growth = max_ratios[max_ratios.len() - 1] > DIVERGENCE_GROWTH * max_ratios[0];
    let verdict = if slope <= DIVERGENCE_SLOPE && growth {
        Verdict::Divergent
    } else if all_finite && slope >= DIVERGENCE_SLOPE {
        Verdict::ForwardLipschitz
    } else {
        Verdict::Inconclusive
    };

    let mut oracle_checks = Vec::new();
    if domain.dim() <= 3 {
        for (i, x) in points.iter().enumerate().take(opts.oracle_points) {
            for (j, &d) in delta_grid.iter().enumerate() {
                let solver = ratios[i][j] * d;
                if !solver.is_finite() || solver == 0.0 {
                    continue;
                }
                let half = 1.5 * solver;
                let resolution = solver * 1e-3;
                let bx = GridBox::centered(x, half);
                if let Ok(o) = refined_grid_argmin(x, &bx, resolution, opts.oracle_cells, |z| {
                    domain.contains(z, t + d)
                }) {
                    oracle_checks.push(OracleCheck {
                        point_id: i,
                        delta: d,
                        solver_distance: solver,
                        oracle_distance: linalg::dist(&o, x),
                        resolution,
                    });
                }
            }
        }
    }

    Ok(LipschitzProfile {
        t,
        sample_points: points,
        delta_grid: delta_grid.to_vec(),
        ratios,
        max_ratios,
        l_hat,
        slope,
        horizon: delta_grid[0],
        verdict,
        oracle_checks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentReport {
    pub nonempty: bool,
    /// `Π 0` onto the tangent union: its smallest-norm element.
    pub witness: Option<Vec<f64>>,
    pub witness_norm: Option<f64>,
    pub witness_piece: Option<usize>,
    pub within_bound: bool,
    pub statuses: Vec<(usize, QualificationStatus)>,
}

/// Slack allowed on top of `l_hat` when comparing the witness norm.
pub const WITNESS_TOLERANCE: f64 = 1e-6;

pub fn tangent_nonempty_check(
    domain: &PiecewiseDomain,
    x: &[f64],
    t: f64,
    l_hat: f64,
) -> Result<TangentReport> {
    let union = temporal_tangent_union(domain, x, t)?;
    let statuses = union
        .members
        .iter()
        .map(|(i, p)| (*i, p.qualification.status))
        .collect();
    let zero = vec![0.0; domain.dim()];
    Ok(match project_union(&zero, &union) {
        Ok(p) => TangentReport {
            nonempty: true,
            within_bound: p.distance <= l_hat + WITNESS_TOLERANCE,
            witness_norm: Some(p.distance),
            witness_piece: p.piece_index,
            witness: Some(p.vector),
            statuses,
        },
        Err(Error::EmptyTangent { .. }) => TangentReport {
            nonempty: false,
            witness: None,
            witness_norm: None,
            witness_piece: None,
            within_bound: false,
            statuses,
        },
        Err(e) => return Err(e),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Sample {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    /// Smallest observed `‖g_I(x)(y)‖ / ‖y − x‖`.
    pub fitted_l: f64,
    pub samples: Vec<Lemma2Sample>,
    pub violation: bool,
}

/// `‖(g_I(x)(y, t), h(y, t))‖ / ‖y − x‖` with `x` the projection of `y` and `I(x)` the
/// inequalities active at `x`.
pub fn lemma2_ratio(set: &BasicSet, t: f64, y: &[f64], x: &[f64]) -> Result<f64> {
    let active = set.active_indices(x, t, set.tolerances.activation.max(1e-7))?;
    let mut viol: Vec<f64> = active
        .indices
        .iter()
        .map(|&i| set.inequalities[i].value(y, t))
        .collect();
    viol.extend(set.equality_values(y, t));
    let d = linalg::dist(y, x);
    Ok(if d > 0.0 {
        linalg::norm(&viol) / d
    } else {
        f64::INFINITY
    })
}

/// Draws infeasible `y` within `radius` of the sampled points of the set and reports the
/// smallest violation-to-distance ratio.
pub fn lemma2_probe(
    set: &BasicSet,
    t: f64,
    sampler: &PointSampler,
    radius: f64,
    opts: &SetProjectionOptions,
) -> Result<Lemma2Report> {
    let domain = PiecewiseDomain::single(set.clone());
    let anchors = sampler.sample(&domain, t, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed.wrapping_add(1));
    let ys: Vec<Vec<f64>> = anchors
        .iter()
        .filter_map(|a| {
            (0..16)
                .map(|_| sample_ball(&mut rng, a, radius))
                .find(|y| !set.contains(y, t))
        })
        .collect();
    if ys.is_empty() {
        return Err(Error::NoFeasibleSample {
            draws: 16 * anchors.len(),
        });
    }
    let samples: Vec<Lemma2Sample> = ys
        .into_par_iter()
        .filter_map(|y| {
            let x = project_to_piece(&y, set, t, opts).ok()?.point;
            let ratio = lemma2_ratio(set, t, &y, &x).ok()?;
            Some(Lemma2Sample { y, x, ratio })
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::SetProjectionFailed { best: None, t });
    }
    let fitted_l = samples
        .iter()
        .map(|s| s.ratio)
        .fold(f64::INFINITY, f64::min);
    Ok(Lemma2Report {
        fitted_l,
        violation: fitted_l < RATIO_FLOOR,
        samples,
    })
}
