//! Cross-module property tests for the geometry layer: invariants that
//! hold for every manifold over many seeded samples, plus randomized
//! checks of the closed-form subproblem machinery.

use proptest::prelude::*;
use rbgm::bregman::ReferenceFunction;
use rbgm::manifolds::Manifold;
use rbgm::numerics::{positive_cubic_root, AmbientTensor, Rng};
use rbgm::subproblem::{solve_tangent, SubproblemSpec};

fn all_manifolds() -> Vec<Manifold> {
    vec![
        Manifold::Sphere { dim: 15 },
        Manifold::Stiefel { rows: 12, cols: 4 },
        // p > r, so the tangent space is a proper subspace.
        Manifold::FixedRank {
            rows: 10,
            cols: 7,
            rank: 3,
        },
        // Full-column-rank case: tangent space is the whole ambient space.
        Manifold::FixedRank {
            rows: 9,
            cols: 3,
            rank: 3,
        },
    ]
}

fn ambient_shape(m: &Manifold) -> (usize, usize) {
    m.ambient_shape()
}

/// Least-squares slope of log(err) against log(t).
fn log_log_slope(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(t, e) in samples {
        let (x, y) = (t.ln(), e.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[test]
fn retraction_agrees_with_the_identity_to_second_order() {
    // ||retract(x, t v) - (x + t v)|| must shrink like t^2: a log-log fit
    // over four decades of t has slope ~2.
    let mut rng = Rng::new(1201);
    for manifold in all_manifolds() {
        let x = manifold.random_point(&mut rng).unwrap();
        let (r, c) = ambient_shape(&manifold);
        let v = manifold
            .project_tangent(&x, &rng.normal_matrix(r, c))
            .unwrap();
        let v = v.scale(1.0 / v.norm());
        let mut samples = Vec::new();
        for k in 2..=5 {
            let t = 10f64.powi(-k);
            let stepped = manifold.retract(&x, &v.scale(t)).unwrap();
            let straight = x.ambient().add(v.scale(t).ambient());
            samples.push((t, stepped.ambient().sub(&straight).norm()));
        }
        // A flat manifold patch (e.g. full-column-rank fixed-rank, where the
        // tangent space is all of the ambient space) retracts exactly; only
        // rounding noise remains and the fit is meaningless. Exactness
        // trivially satisfies second-order agreement.
        let floor = 1e-13 * (x.ambient().norm() + 1.0);
        if samples.iter().all(|&(_, e)| e <= floor) {
            continue;
        }
        let slope = log_log_slope(&samples);
        assert!(
            (slope - 2.0).abs() <= 0.1,
            "{}: retraction error slope {slope:.3}, expected ~2",
            manifold.name()
        );
    }
}

#[test]
fn retracting_the_zero_tangent_is_the_identity() {
    let mut rng = Rng::new(1202);
    for manifold in all_manifolds() {
        let x = manifold.random_point(&mut rng).unwrap();
        let (r, c) = ambient_shape(&manifold);
        let zero = manifold
            .project_tangent(&x, &AmbientTensor::zeros(r, c))
            .unwrap();
        let back = manifold.retract(&x, &zero).unwrap();
        assert_eq!(
            back.ambient().data_row_major(),
            x.ambient().data_row_major(),
            "{}: retract(x, 0) must be exactly x",
            manifold.name()
        );
    }
}

#[test]
fn tangent_and_normal_projections_decompose_every_ambient_vector() {
    // 100 seeded (x, w) pairs per manifold: P_T(w) + P_N(w) = w and the
    // two parts are orthogonal.
    let mut rng = Rng::new(1203);
    for manifold in all_manifolds() {
        for trial in 0..100 {
            let x = manifold.random_point(&mut rng).unwrap();
            let (r, c) = ambient_shape(&manifold);
            let w = rng.normal_matrix(r, c);
            let t = manifold.project_tangent(&x, &w).unwrap();
            let n = manifold.project_normal(&x, &w).unwrap();
            let recombined = t.ambient().add(n.ambient());
            let scale = w.norm().max(1.0);
            assert!(
                recombined.sub(&w).norm() <= 1e-12 * scale,
                "{} trial {trial}: projections do not sum to the identity",
                manifold.name()
            );
            assert!(
                t.ambient().dot(n.ambient()).abs() <= 1e-10 * scale * scale,
                "{} trial {trial}: projections are not orthogonal",
                manifold.name()
            );
            // Idempotence of the tangent projection.
            let tt = manifold.project_tangent(&x, t.ambient()).unwrap();
            assert!(
                tt.ambient().sub(t.ambient()).norm() <= 1e-12 * scale,
                "{} trial {trial}: tangent projection is not idempotent",
                manifold.name()
            );
        }
    }
}

#[test]
fn manifold_projection_is_idempotent() {
    let mut rng = Rng::new(1204);
    for manifold in all_manifolds() {
        for _ in 0..20 {
            let (r, c) = ambient_shape(&manifold);
            let w = rng.normal_matrix(r, c);
            let once = match manifold.project_manifold(&w) {
                Ok(point) => point,
                // Random matrices can be outside the projection domain
                // (rank-deficient); those are rejected, not projected.
                Err(_) => continue,
            };
            let twice = manifold.project_manifold(once.ambient()).unwrap();
            let defect = twice.ambient().sub(once.ambient()).norm();
            assert!(
                defect <= 1e-12 * once.ambient().norm().max(1.0),
                "{}: projection moved an on-manifold point by {defect:.3e}",
                manifold.name()
            );
        }
    }
}

#[test]
fn projecting_back_normal_offsets_returns_the_base_point() {
    // For a normal offset u with ||u|| <= 0.01 ||x||, the nearest-point
    // projection of x + u is x again (to second order in ||u||).
    let mut rng = Rng::new(1205);

    let sphere = Manifold::Sphere { dim: 15 };
    let x = sphere.random_point(&mut rng).unwrap();
    let u = x.ambient().scale(0.01); // radial = normal on the sphere
    let back = sphere.project_manifold(&x.ambient().add(&u)).unwrap();
    assert!(back.ambient().sub(x.ambient()).norm() <= 1e-9);

    let stiefel = Manifold::Stiefel { rows: 12, cols: 4 };
    let q = stiefel.random_point(&mut rng).unwrap();
    let g = rng.normal_matrix(4, 4);
    let s = g.add(&g.transpose()).scale(0.5);
    let u = q.ambient().matmul(&s); // X S, S symmetric: a normal direction
    let u = u.scale(0.01 * q.ambient().norm() / u.norm());
    let back = stiefel.project_manifold(&q.ambient().add(&u)).unwrap();
    assert!(
        back.ambient().sub(q.ambient()).norm() <= 1e-9,
        "stiefel normal offset moved the projection by {:.3e}",
        back.ambient().sub(q.ambient()).norm()
    );

    let fixed_rank = Manifold::FixedRank {
        rows: 10,
        cols: 7,
        rank: 3,
    };
    let y = fixed_rank.random_point(&mut rng).unwrap();
    let w = rng.normal_matrix(10, 7);
    let n = fixed_rank.project_normal(&y, &w).unwrap();
    let u = n.scale(0.01 * y.ambient().norm() / n.norm().max(1e-300));
    let back = fixed_rank
        .project_manifold(&y.ambient().add(u.ambient()))
        .unwrap();
    assert!(
        back.ambient().sub(y.ambient()).norm() <= 1e-9 * y.ambient().norm().max(1.0),
        "fixed-rank normal offset moved the projection by {:.3e}",
        back.ambient().sub(y.ambient()).norm()
    );
}

#[test]
fn zero_riemannian_gradient_yields_a_zero_bregman_direction() {
    // When grad f(x) = 0 (the ambient gradient is purely normal) and
    // g = 0, the tangent subproblem returns v = 0 for both reference
    // functions on every manifold.
    let mut rng = Rng::new(1206);
    for manifold in all_manifolds() {
        let x = manifold.random_point(&mut rng).unwrap();
        let (r, c) = ambient_shape(&manifold);
        let normal_grad = manifold
            .project_normal(&x, &rng.normal_matrix(r, c))
            .unwrap()
            .into_ambient();
        for h in [ReferenceFunction::quadratic(), ReferenceFunction::quartic()] {
            let spec = SubproblemSpec {
                base: &x,
                euclid_grad: &normal_grad,
                gamma: 0.7,
                h: &h,
                g: None,
            };
            let sol = solve_tangent(&spec).unwrap();
            assert!(
                sol.direction.norm() <= 1e-10,
                "{} {:?}: stationary point produced ||v|| = {:.3e}",
                manifold.name(),
                h.kind(),
                sol.direction.norm()
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// The cubic θ: a θ³ + b θ = 1 root is positive, certified by its
    /// residual, and lies in (0, 1/b] (since φ is increasing in θ). The
    /// domain matches the documented contract: a ≥ 0, b ≥ 1.
    #[test]
    fn cubic_root_is_positive_and_certified(
        a in 0.0f64..1e8,
        b in 1.0f64..1e6,
    ) {
        let theta = positive_cubic_root(a, b).unwrap();
        prop_assert!(theta > 0.0);
        prop_assert!(theta <= 1.0 / b + 1e-12);
        let residual = a * theta * theta * theta + b * theta - 1.0;
        let scale = (a + b).max(1.0);
        prop_assert!(residual.abs() <= 1e-12 * scale);
    }

    /// Rayleigh-quotient bound: the Bregman distance of the quartic
    /// reference dominates the quadratic one, which is exactly half the
    /// squared distance (strong convexity with λ = 1 for both).
    #[test]
    fn quartic_bregman_dominates_the_quadratic_one(
        x in prop::collection::vec(-3.0f64..3.0, 4),
        y in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let xt = AmbientTensor::from_vec(x).unwrap();
        let yt = AmbientTensor::from_vec(y).unwrap();
        let quadratic = ReferenceFunction::quadratic()
            .bregman(&yt, &xt)
            .unwrap()
            .value;
        let quartic = ReferenceFunction::quartic()
            .bregman(&yt, &xt)
            .unwrap()
            .value;
        let half_sq = 0.5 * yt.sub(&xt).norm_squared();
        prop_assert!((quadratic - half_sq).abs() <= 1e-10 * half_sq.max(1.0));
        prop_assert!(quartic >= half_sq - 1e-10 * half_sq.max(1.0));
    }

    /// Tangent projection is a contraction in the ambient norm.
    #[test]
    fn tangent_projection_never_grows_vectors(seed in 0u64..500) {
        let mut rng = Rng::new(seed);
        for manifold in all_manifolds() {
            let x = manifold.random_point(&mut rng).unwrap();
            let (r, c) = manifold.ambient_shape();
            let w = rng.normal_matrix(r, c);
            let t = manifold.project_tangent(&x, &w).unwrap();
            prop_assert!(t.norm() <= w.norm() * (1.0 + 1e-12));
        }
    }
}
