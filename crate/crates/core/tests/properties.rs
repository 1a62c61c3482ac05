use pdsflow::analysis::{
    forward_lipschitz_profile, tangent_nonempty_check, CertifyOptions, PointSampler, Verdict,
};
use pdsflow::cones::{krasovskii_hull_sample, temporal_tangent, temporal_tangent_union};
use pdsflow::domain::{PiecewiseDomain, QualificationStatus};
use pdsflow::integrator::{simulate, Scheme, SimulationConfig, VectorField};
use pdsflow::projection::{
    project_polyhedron, project_to_set, project_union, random_polyhedron_instance,
    refined_grid_argmin, GridBox, SetProjectionOptions,
};
use pdsflow::scenarios::{self, Scenario, TwoBusParams, REGIME_X1};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn builtin() -> Vec<(&'static str, PiecewiseDomain, Vec<f64>, f64)> {
    [
        "wedge",
        "parabola",
        "two-bus",
        "half-line",
        "moving-wall",
        "unit-disk",
        "half-plane",
    ]
    .into_iter()
    .map(|n| {
        let s = Scenario::by_name(n).unwrap();
        let t = if n == "two-bus" { 0.5 } else { 0.0 };
        let mut x0 = s.x0.clone();
        if n == "unit-disk" {
            x0 = vec![0.8, 0.0];
        }
        (n, s.build_domain().unwrap(), x0, t)
    })
    .collect()
}

#[test]
fn analytic_jacobians_match_central_differences() {
    let opts = SetProjectionOptions::default();
    let h = 1e-6;
    for (name, domain, x0, t) in builtin() {
        let pts = PointSampler::new(x0, 0.5)
            .with_count(100)
            .sample(&domain, t, &opts)
            .unwrap();
        assert!(pts.len() >= 50, "{name}: {} points", pts.len());
        for set in domain.pieces() {
            for c in set.inequalities.iter().chain(&set.equalities) {
                for x in &pts {
                    let g = c.gradient_x(x, t);
                    for i in 0..x.len() {
                        let (mut xp, mut xm) = (x.clone(), x.clone());
                        xp[i] += h;
                        xm[i] -= h;
                        let fd = (c.value(&xp, t) - c.value(&xm, t)) / (2.0 * h);
                        assert!(
                            (fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()),
                            "{name} d/dx{i}: {fd} vs {}",
                            g[i]
                        );
                    }
                    let fd = (c.value(x, t + h) - c.value(x, t - h)) / (2.0 * h);
                    let pt = c.partial_t(x, t);
                    assert!(
                        (fd - pt).abs() <= 1e-5 * (1.0 + pt.abs()),
                        "{name} d/dt: {fd} vs {pt}"
                    );
                }
            }
        }
    }
}

#[test]
fn no_empty_grade_where_the_set_can_be_followed() {
    let opts = SetProjectionOptions::default();
    for (name, domain, x0, t) in builtin() {
        let pts = PointSampler::new(x0, 0.5)
            .with_count(40)
            .sample(&domain, t, &opts)
            .unwrap();
        for x in &pts {
            for (_, poly) in temporal_tangent_union(&domain, x, t).unwrap().members {
                if poly.qualification.status != QualificationStatus::Empty {
                    continue;
                }
                let r = |d: f64| project_to_set(x, &domain, t + d, &opts).unwrap().distance / d;
                assert!(
                    r(1e-4) > 10.0 * r(1e-2).max(1e-3),
                    "{name} at {x:?}: EMPTY but ratios bounded"
                );
            }
        }
    }
}

#[test]
fn two_bus_pv_regime_is_full_rank_at_sampled_states() {
    let p = TwoBusParams::default();
    let domain = scenarios::two_bus_domain(&p);
    let set = domain.piece(REGIME_X1);
    for k in 0..20 {
        let theta = -0.3 + 0.03 * k as f64;
        let t = 0.05 * k as f64;
        let x = scenarios::PowerFlowState::balanced(1.0, theta, p.load.value(t));
        if !set.contains(&x.to_vec(), t) {
            continue;
        }
        let poly = temporal_tangent(set, &x.to_vec(), t).unwrap();
        assert_eq!(
            poly.qualification.status,
            QualificationStatus::FullRank,
            "θ = {theta}"
        );
    }
}

#[test]
fn tangent_sequences_follow_the_moving_set() {
    // Full-rank boundary points with a polyhedron member v: d(x + δv, X(t+δ))/δ → 0.
    let cases: Vec<(PiecewiseDomain, Vec<f64>, f64, Vec<f64>)> = vec![
        (scenarios::unit_disk(), vec![1.0, 0.0], 0.0, vec![0.0, 1.0]),
        (scenarios::unit_disk(), vec![0.6, 0.8], 0.0, vec![-0.8, 0.6]),
        (scenarios::moving_wall(), vec![0.0], 0.0, vec![1.0]),
        (
            scenarios::wedge_domain(),
            vec![1.0, 0.5],
            0.5,
            vec![0.0, -1.0],
        ),
    ];
    for (domain, x, t, v) in cases {
        let poly = temporal_tangent(domain.piece(domain.locate(&x, t).unwrap()), &x, t).unwrap();
        assert_eq!(poly.qualification.status, QualificationStatus::FullRank);
        assert!(poly.contains(&v, 1e-12));
        let mut prev = f64::INFINITY;
        for d in [1e-2, 1e-3, 1e-4] {
            let z: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + d * b).collect();
            let bx = GridBox::centered(&z, 4.0 * d);
            let o =
                refined_grid_argmin(&z, &bx, d * 1e-4, 40, |p| domain.contains(p, t + d)).unwrap();
            let ratio = dist(&o, &z) / d;
            assert!(ratio <= prev + 1e-6, "{ratio} after {prev}");
            prev = ratio;
        }
        assert!(prev <= 1e-2 * (1.0 + v.iter().map(|c| c * c).sum::<f64>().sqrt()));
    }
}

#[test]
fn static_cones_are_positively_homogeneous() {
    let opts = SetProjectionOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for domain in [
        scenarios::unit_disk(),
        scenarios::half_plane(),
        scenarios::half_line(),
    ] {
        let n = domain.dim();
        let pts = PointSampler::new(vec![0.9; n], 0.5)
            .with_count(30)
            .sample(&domain, 0.0, &opts)
            .unwrap();
        for x in &pts {
            let u = temporal_tangent_union(&domain, x, 0.0).unwrap();
            for (_, p) in &u.members {
                assert!(p.b().iter().chain(p.e_vec().iter()).all(|c| *c == 0.0));
            }
            for _ in 0..10 {
                let v: Vec<f64> = (0..n)
                    .map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0))
                    .collect();
                if !u.contains(&v, 1e-12) {
                    continue;
                }
                for lambda in [0.0, 0.5, 2.0, 10.0] {
                    let w: Vec<f64> = v.iter().map(|c| lambda * c).collect();
                    assert!(u.contains(&w, 1e-9), "λ = {lambda}");
                }
            }
        }
    }
}

#[test]
fn krasovskii_cloud_contains_the_point_projection() {
    let domain = scenarios::half_line();
    let field = VectorField::constant(vec![1.0]);
    let s = krasovskii_hull_sample(&field, &domain, &[1.0], 0.0, 0.1, 50, 0).unwrap();
    assert_eq!(s[0], vec![0.0]);
    assert!(s.iter().all(|v| v[0] == 0.0 || v[0] == 1.0));
    let s0 = krasovskii_hull_sample(&field, &domain, &[1.0], 0.0, 0.0, 1, 0).unwrap();
    assert_eq!(s0, vec![vec![0.0]]);
}

#[test]
fn union_bound_on_wedge_pieces() {
    let opts = CertifyOptions::default();
    let sampler = PointSampler::new(vec![0.0, 0.0], 0.3).with_count(60);
    let wedge = scenarios::wedge_domain();
    let grid = [1e-1, 1e-2, 1e-3];
    let union = forward_lipschitz_profile(&wedge, 0.0, &sampler, &grid, &opts).unwrap();
    let mut max_piece: f64 = 0.0;
    for set in wedge.pieces() {
        let p = forward_lipschitz_profile(
            &PiecewiseDomain::single(set.clone()),
            0.0,
            &sampler,
            &grid,
            &opts,
        )
        .unwrap();
        assert_eq!(p.verdict, Verdict::ForwardLipschitz);
        max_piece = max_piece.max(p.l_hat);
    }
    assert!(
        union.l_hat <= 1.2 * max_piece,
        "{} vs {max_piece}",
        union.l_hat
    );
}

#[test]
fn lipschitz_in_time_scenarios_never_diverge() {
    let opts = CertifyOptions::default();
    let p = TwoBusParams::default();
    let cases = vec![
        (scenarios::wedge_domain(), vec![0.0, 0.0], 0.0),
        (scenarios::wedge_domain(), vec![0.3, 0.0], 0.2),
        (scenarios::moving_wall(), vec![0.0], 0.0),
        (
            scenarios::two_bus_domain(&p),
            scenarios::PowerFlowState::balanced(1.0, -0.1, p.load.value(0.2)).to_vec(),
            0.2,
        ),
        (
            scenarios::two_bus_domain(&p),
            scenarios::PowerFlowState::balanced(1.0, -0.2, p.load.value(0.5)).to_vec(),
            0.5,
        ),
    ];
    for (domain, c, t) in cases {
        let sampler = PointSampler::new(c, 0.2).with_count(30);
        let prof =
            forward_lipschitz_profile(&domain, t, &sampler, &[1e-1, 1e-2, 1e-3, 1e-4], &opts)
                .unwrap();
        assert_eq!(
            prof.verdict,
            Verdict::ForwardLipschitz,
            "t = {t}: slope {}",
            prof.slope
        );
        for x in &prof.sample_points {
            let r = tangent_nonempty_check(&domain, x, t, prof.l_hat).unwrap();
            assert!(r.nonempty, "{x:?}");
            assert!(
                r.witness_norm.unwrap() <= 1.2 * prof.l_hat + 1e-9,
                "{x:?}: {:?} vs {}",
                r.witness_norm,
                prof.l_hat
            );
        }
    }
}

#[test]
fn schemes_agree_to_first_order() {
    for name in [
        "half-line",
        "moving-wall",
        "unit-disk",
        "half-plane",
        "two-bus",
    ] {
        let s = Scenario::by_name(name).unwrap();
        let d = s.build_domain().unwrap();
        let f = s.build_field().unwrap();
        let dev = |dt: f64| {
            let a = simulate(
                &d,
                &f,
                &s.x0,
                &SimulationConfig::new(s.t0, s.t_end, dt, Scheme::CatchingUp),
            )
            .unwrap();
            let b = simulate(
                &d,
                &f,
                &s.x0,
                &SimulationConfig::new(s.t0, s.t_end, dt, Scheme::TangentEuler),
            )
            .unwrap();
            a.states
                .iter()
                .zip(&b.states)
                .map(|(x, y)| dist(x, y))
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (dev(1e-2), dev(1e-3));
        assert!(fine <= coarse + 1e-12, "{name}: {fine} vs {coarse}");
    }
}

#[test]
fn simulations_are_deterministic_and_viable() {
    let s = Scenario::by_name("wedge-flow").unwrap();
    let d = s.build_domain().unwrap();
    let f = s.build_field().unwrap();
    let cfg = SimulationConfig::new(0.0, 1.0, 1e-2, Scheme::CatchingUp);
    let a = simulate(&d, &f, &s.x0, &cfg).unwrap();
    let b = simulate(&d, &f, &s.x0, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a
        .feas_residuals
        .iter()
        .all(|r| *r <= d.tolerances().feasibility));
}

#[test]
fn certification_does_not_depend_on_thread_count() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                forward_lipschitz_profile(
                    &scenarios::parabola_domain(),
                    0.0,
                    &PointSampler::new(vec![0.0, 0.0], 0.2).with_count(30),
                    &[1e-1, 1e-2],
                    &CertifyOptions::default(),
                )
                .unwrap()
            })
    };
    assert_eq!(
        serde_json::to_string(&run(1)).unwrap(),
        serde_json::to_string(&run(4)).unwrap()
    );
}

fn small_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn activation_sets_grow_with_tolerance(x in small_vec(2), t in 0.0..0.5f64, a in 1e-10..1e-2f64, b in 1e-10..1e-2f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let domain = scenarios::wedge_domain();
        let opts = SetProjectionOptions::default();
        let x = project_to_set(&x, &domain, t, &opts).unwrap().point;
        for set in domain.pieces() {
            if let (Ok(s1), Ok(s2)) = (set.active_indices(&x, t, lo), set.active_indices(&x, t, hi)) {
                prop_assert!(s1.indices.iter().all(|i| s2.indices.contains(i)));
                for (i, g) in set.inequality_values(&x, t).iter().enumerate() {
                    prop_assert_eq!(s2.indices.contains(&i), g.abs() <= hi);
                }
            }
        }
    }

    #[test]
    fn union_membership_is_the_disjunction(v in small_vec(2), px in -1.0..1.0f64, t in 0.0..0.3f64) {
        let domain = scenarios::wedge_domain();
        let x = vec![px, 0.0];
        if let Ok(u) = temporal_tangent_union(&domain, &x, t) {
            let any = u.members.iter().any(|(_, p)| p.contains(&v, 1e-9));
            prop_assert_eq!(u.contains(&v, 1e-9), any);
        }
    }

    #[test]
    fn polyhedral_projection_is_nonexpansive(seed in any::<u64>(), dim in 2usize..=3, g in small_vec(3)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (poly, f1) = random_polyhedron_instance(&mut rng, dim);
        let f2: Vec<f64> = f1.iter().zip(&g).map(|(a, b)| a + b).collect();
        let p1 = project_polyhedron(&f1, &poly).unwrap();
        let p2 = project_polyhedron(&f2, &poly).unwrap();
        prop_assert!(dist(&p1.vector, &p2.vector) <= dist(&f1, &f2) + 1e-9);
        prop_assert!(poly.contains(&p1.vector, 1e-9));
        prop_assert!((p1.distance - dist(&p1.vector, &f1)).abs() <= 1e-12);
        let again = project_polyhedron(&p1.vector, &poly).unwrap();
        prop_assert!(dist(&again.vector, &p1.vector) <= 1e-9);
    }

    #[test]
    fn union_projection_is_the_best_member(f in small_vec(2)) {
        let domain = scenarios::wedge_domain();
        let u = temporal_tangent_union(&domain, &[0.0, 0.0], 0.0).unwrap();
        let best = project_union(&f, &u).unwrap();
        for (_, p) in &u.members {
            let m = project_polyhedron(&f, p).unwrap();
            prop_assert!(best.distance <= m.distance + 1e-12);
        }
    }

    #[test]
    fn projected_velocity_is_bounded(f in small_vec(2), k in 0usize..40) {
        // the wedge certifies with L_hat = 1
        let domain = scenarios::wedge_domain();
        let opts = SetProjectionOptions::default();
        let pts = PointSampler::new(vec![0.0, 0.0], 0.5).with_count(40).sample(&domain, 0.0, &opts).unwrap();
        let x = &pts[k % pts.len()];
        let u = temporal_tangent_union(&domain, x, 0.0).unwrap();
        let v = project_union(&f, &u).unwrap().vector;
        let nf = f.iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!(v.iter().map(|c| c * c).sum::<f64>().sqrt() <= 1.0 + nf + 1e-9);
    }

    #[test]
    fn set_projection_lands_in_the_set(y in small_vec(2), t in 0.0..0.5f64) {
        let opts = SetProjectionOptions::default();
        for domain in [scenarios::wedge_domain(), scenarios::parabola_domain(), scenarios::unit_disk()] {
            let p = project_to_set(&y, &domain, t, &opts).unwrap();
            prop_assert!(domain.contains(&p.point, t));
            prop_assert!((p.distance - dist(&p.point, &y)).abs() <= 1e-12);
            let again = project_to_set(&p.point, &domain, t, &opts).unwrap();
            prop_assert_eq!(again.distance, 0.0);
        }
    }
}
