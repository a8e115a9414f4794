mod common;

use std::f64::consts::{PI, TAU};

use common::*;
use dcflow::calculus::{fd_gradient, potential_increment};
use dcflow::geometry::{
    coshl_bounds, edge_length, extended_triangle_angles, f_to_u, face_lengths, u_to_f,
};
use dcflow::prelude::*;
use dcflow::surface::FaceWeights;
use proptest::prelude::*;

fn geometry() -> impl Strategy<Value = Geometry> {
    prop_oneof![Just(Geometry::Euclidean), Just(Geometry::Hyperbolic)]
}

/// Face weights meeting both structure conditions, with possibly negative η.
fn face_weights() -> impl Strategy<Value = FaceWeights> {
    (prop::array::uniform3(0u8..=1), prop::array::uniform3(-0.9f64..2.5))
        .prop_map(|(epsilon, eta)| FaceWeights { epsilon, eta })
        .prop_filter("structure conditions", |fw| {
            (0..3).all(|q| {
                let (s, t) = ((q + 1) % 3, (q + 2) % 3);
                fw.eps(s) * fw.eps(t) + fw.eta[q] > 0.0
                    && fw.eps(q) * fw.eta[q] + fw.eta[s] * fw.eta[t] >= 0.0
            })
        })
}

fn extended(geometry: Geometry, fw: &FaceWeights, f: [f64; 3]) -> [f64; 3] {
    let l = face_lengths(geometry, fw, f).unwrap();
    extended_triangle_angles(geometry, l[2], l[1], l[0]).unwrap()
}

fn u_for(geometry: Geometry, fw: &FaceWeights, f: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|a| f_to_u(geometry, fw.epsilon[a], f[a]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn coordinate_round_trip(g in geometry(), eps in 0u8..=1, f in -30.0f64..30.0) {
        let u = f_to_u(g, eps, f).unwrap();
        let back = u_to_f(g, eps, u).unwrap();
        prop_assert!((back - f).abs() <= 1e-12 * (1.0 + f.abs()), "{f} -> {u} -> {back}");
    }

    #[test]
    fn euclidean_angles_are_scale_invariant(
        fw in face_weights(),
        f in prop::array::uniform3(-2.0f64..2.0),
        t in -5.0f64..5.0,
    ) {
        let a = extended(Geometry::Euclidean, &fw, f);
        let b = extended(Geometry::Euclidean, &fw, f.map(|x| x + t));
        for k in 0..3 {
            prop_assert!((a[k] - b[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn extended_angle_sums(
        g in geometry(),
        fw in face_weights(),
        f in prop::array::uniform3(-3.0f64..3.0),
    ) {
        let th = extended(g, &fw, f);
        let sum = th[0] + th[1] + th[2];
        prop_assert!(th.iter().all(|&x| (0.0..=PI).contains(&x)));
        match g {
            Geometry::Euclidean => prop_assert!((sum - PI).abs() < 1e-12),
            Geometry::Hyperbolic => prop_assert!(sum <= PI + 1e-12),
        }
    }

    #[test]
    fn hyperbolic_cosh_bounds(
        eps_j in 0u8..=1,
        eta in -0.99f64..4.0,
        fi in -6.0f64..6.0,
        fj in -6.0f64..6.0,
    ) {
        prop_assume!(f64::from(eps_j) + eta > 0.0);
        let (lambda, mu) = coshl_bounds(1, eps_j, eta).unwrap();
        prop_assert!(lambda > 0.0 && mu > 0.0);
        let ch = edge_length(Geometry::Hyperbolic, 1, eps_j, eta, fi, fj).unwrap().cosh();
        let (si, sj) = (fi.exp(), fj.exp());
        let p = (1.0 + si * si).sqrt() * (1.0 + f64::from(eps_j) * sj * sj).sqrt() + si * sj;
        prop_assert!(lambda * p <= ch * (1.0 + 1e-12));
        prop_assert!(ch <= mu * p * (1.0 + 1e-12));
    }

    #[test]
    fn large_factor_gives_small_hyperbolic_angle(
        fw in face_weights(),
        fi in 10.0f64..50.0,
        fj in -3.0f64..3.0,
        fk in -3.0f64..3.0,
    ) {
        let mut fw = fw;
        fw.epsilon[0] = 1;
        prop_assume!((0..3).all(|q| {
            let (s, t) = ((q + 1) % 3, (q + 2) % 3);
            fw.eps(s) * fw.eps(t) + fw.eta[q] > 0.0 && fw.eps(q) * fw.eta[q] + fw.eta[s] * fw.eta[t] >= 0.0
        }));
        let th = extended(Geometry::Hyperbolic, &fw, [fi, fj, fk]);
        prop_assert!(th[0] < 1e-3, "θ = {}", th[0]);
    }

    #[test]
    fn triangle_jacobian_structure(
        g in geometry(),
        fw in face_weights(),
        f in prop::array::uniform3(-1.5f64..1.5),
    ) {
        let u = u_for(g, &fw, f);
        let l = face_lengths(g, &fw, f).unwrap();
        let deg = dcflow::geometry::classify_triangle(l[2], l[1], l[0]);
        prop_assume!(!deg.is_degenerate());
        let p = l[0] + l[1] + l[2];
        prop_assume!((0..3).all(|a| (l[(a + 1) % 3] + l[(a + 2) % 3] - l[a]) / p > 1e-3));
        let j = triangle_jacobian(g, &fw, u).unwrap();
        prop_assert!(j.asymmetry() < 1e-8);
        let ev = j.eigenvalues();
        match g {
            Geometry::Euclidean => {
                prop_assert!(j.row_sums().iter().all(|s| s.abs() < 1e-9));
                prop_assert!(ev[2].abs() <= 1e-10 && ev[1] < -1e-10);
            }
            Geometry::Hyperbolic => prop_assert!(ev[2] < 0.0),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn gauss_bonnet_holds(seed in any::<u64>(), mesh in 0usize..4, g in geometry()) {
        let mut rng = rng(seed);
        let (_, s) = &meshes()[mesh];
        let w = random_weights(&mut rng, s);
        let st = random_state(&mut rng, s, &w, g, 0.8, 0.0);
        let r = curvature(s, &w, &st, false).unwrap();
        prop_assert!(gauss_bonnet_residual(&r, s.euler_characteristic()).abs() < 1e-10);
    }

    #[test]
    fn extended_curvature_sum_is_topological(seed in any::<u64>(), mesh in 0usize..4) {
        // Holds for arbitrary generalized factors, degenerate faces included.
        let mut rng = rng(seed);
        let (_, s) = &meshes()[mesh];
        let w = WeightConfig::uniform(s, 0, 1.0).unwrap();
        let u = random_ball(&mut rng, s.vertex_count(), 6.0);
        let st = ConformalState::new(Geometry::Euclidean, &w, u).unwrap();
        let r = curvature(s, &w, &st, true).unwrap();
        let total: f64 = r.curvature.iter().sum();
        prop_assert!((total - TAU * s.euler_characteristic() as f64).abs() < 1e-10);
    }

    #[test]
    fn curvature_jacobian_is_symmetric_with_kernel(
        seed in any::<u64>(),
        mesh in 0usize..4,
        g in geometry(),
    ) {
        let mut rng = rng(seed);
        let (_, s) = &meshes()[mesh];
        let w = random_weights(&mut rng, s);
        let st = random_state(&mut rng, s, &w, g, 0.5, 1e-3);
        let jac = curvature_jacobian(s, &w, &st).unwrap();
        prop_assert!(jac.asymmetry() < 1e-8);
        match g {
            Geometry::Euclidean => {
                let ones = jac.mul_vec(&vec![1.0; s.vertex_count()]);
                prop_assert!(ones.iter().all(|x| x.abs() < 1e-9));
                prop_assert!(jac.min_restricted_eigenvalue(g) > 0.0);
            }
            Geometry::Hyperbolic => prop_assert!(jac.cholesky().is_some()),
        }
    }

    #[test]
    fn extended_potential_gradient_including_degenerate_states(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let s = generate(SurfaceKind::TorusGrid { n: 3, m: 3 }).unwrap();
        let w = WeightConfig::uniform(&s, 0, 1.0).unwrap();
        let e = Geometry::Euclidean;
        let u = random_ball(&mut rng, 9, 3.0);
        let kbar = vec![0.0; 9];
        let base = ConformalState::base(e, &w);
        let h = |p: &[f64]| {
            let st = ConformalState::new(e, &w, p.to_vec())?;
            Ok(surface_energies(&s, &w, &st, &kbar, &base, true)?.potential)
        };
        let g = fd_gradient(h, &u, 1e-5).unwrap();
        let st = ConformalState::new(e, &w, u).unwrap();
        let k = curvature(&s, &w, &st, true).unwrap().curvature;
        prop_assert!(max_abs_diff(&g, &k) < 1e-5, "{g:?} vs {k:?}");
    }

    #[test]
    fn extended_curvature_is_monotone_along_segments(seed in any::<u64>(), hyperbolic in any::<bool>()) {
        let mut rng = rng(seed);
        let g = if hyperbolic { Geometry::Hyperbolic } else { Geometry::Euclidean };
        let s = generate(SurfaceKind::TorusGrid { n: 3, m: 3 }).unwrap();
        let w = WeightConfig::uniform(&s, 0, 1.0).unwrap();
        let a = random_ball(&mut rng, 9, 3.0);
        let b = random_ball(&mut rng, 9, 3.0);
        let d: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..50 {
            let t = k as f64 / 49.0;
            let p: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + t * y).collect();
            let st = ConformalState::new(g, &w, p).unwrap();
            let kv = curvature(&s, &w, &st, true).unwrap().curvature;
            let proj: f64 = kv.iter().zip(&d).map(|(x, y)| x * y).sum();
            prop_assert!(proj >= prev - 1e-12);
            prev = proj;
        }
    }

    #[test]
    fn potential_increment_is_additive(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let s = generate(SurfaceKind::Octahedron).unwrap();
        let w = WeightConfig::uniform(&s, 0, 1.0).unwrap();
        let e = Geometry::Euclidean;
        let kbar = vec![4.0 * PI / 6.0; 6];
        let a = random_ball(&mut rng, 6, 2.0);
        let m = random_ball(&mut rng, 6, 2.0);
        let b = random_ball(&mut rng, 6, 2.0);
        let direct = potential_increment(&s, &w, e, &kbar, &a, &b).unwrap();
        let split = potential_increment(&s, &w, e, &kbar, &a, &m).unwrap()
            + potential_increment(&s, &w, e, &kbar, &m, &b).unwrap();
        prop_assert!((direct - split).abs() < 1e-9);
    }
}
