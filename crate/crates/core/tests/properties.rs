use std::f64::consts::PI;

use ccspectra::carnot::{d_infty, dilate, h_inv, h_mul, homogeneous_norm, HeisenbergPoint};
use ccspectra::cheeger::{horizontal_perimeter, Segment};
use ccspectra::discretization::{assemble, build_grid, BoundarySpec, Condition};
use ccspectra::geometry::{builtin_euclidean, builtin_grushin_cylinder, CCStructure, Chart2D, Interval, VectorField};
use ccspectra::grushin::{shoot, ModeProblem};
use proptest::prelude::*;

fn point(n: usize) -> impl Strategy<Value = HeisenbergPoint> {
    (prop::collection::vec(-3.0..3.0f64, 2 * n), -5.0..5.0f64).prop_map(|(z, t)| HeisenbergPoint::new(z, t).unwrap())
}

fn triple() -> impl Strategy<Value = (HeisenbergPoint, HeisenbergPoint, HeisenbergPoint)> {
    (1usize..=3).prop_flat_map(|n| (point(n), point(n), point(n)))
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-10 * scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn d_infty_is_a_left_invariant_metric((p, q, r) in triple()) {
        let dpq = d_infty(&p, &q).unwrap();
        prop_assert!(dpq >= 0.0);
        prop_assert!(close(dpq, d_infty(&q, &p).unwrap(), dpq));
        prop_assert!(d_infty(&p, &p).unwrap() == 0.0);
        let (rp, rq) = (h_mul(&r, &p).unwrap(), h_mul(&r, &q).unwrap());
        prop_assert!(close(d_infty(&rp, &rq).unwrap(), dpq, dpq));
        let (dpr, drq) = (d_infty(&p, &r).unwrap(), d_infty(&r, &q).unwrap());
        prop_assert!(dpq <= dpr + drq + 1e-10 * (dpr + drq).max(1.0));
    }

    #[test]
    fn dilations_scale_distance_and_respect_the_product((p, q, _) in triple(), r in 0.05..20.0f64) {
        let (dp, dq) = (dilate(r, &p).unwrap(), dilate(r, &q).unwrap());
        let d = d_infty(&p, &q).unwrap();
        prop_assert!(close(d_infty(&dp, &dq).unwrap(), r * d, r * d));
        let lhs = dilate(r, &h_mul(&p, &q).unwrap()).unwrap();
        let rhs = h_mul(&dp, &dq).unwrap();
        for (a, b) in lhs.z().iter().zip(rhs.z()) {
            prop_assert!(close(*a, *b, a.abs()));
        }
        prop_assert!(close(lhs.t, rhs.t, lhs.t.abs()));
    }

    #[test]
    fn group_axioms((p, q, r) in triple()) {
        let e = HeisenbergPoint::identity(p.n());
        prop_assert_eq!(h_mul(&p, &e).unwrap(), p.clone());
        prop_assert!(homogeneous_norm(&h_mul(&p, &h_inv(&p)).unwrap()) < 1e-12);
        let a = h_mul(&h_mul(&p, &q).unwrap(), &r).unwrap();
        let b = h_mul(&p, &h_mul(&q, &r).unwrap()).unwrap();
        prop_assert!(close(a.t, b.t, a.t.abs()));
    }
}

fn random_structure(c: [f64; 3]) -> CCStructure {
    let chart = Chart2D::new(Interval::new(0.0, 1.0).unwrap(), Interval::new(0.0, 2.0).unwrap(), false, c[2] > 0.0);
    CCStructure::new(
        "random",
        chart,
        vec![
            VectorField::new(|_, _| 1.0, move |x, _| c[0] * x),
            VectorField::new(|_, _| 0.0, move |x, y| x * x + c[1] * (y * x).sin()),
        ],
        move |x, y| 1.0 + 0.5 * (x + y).cos().abs() * c[0].abs(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn assembled_forms_are_symmetric_psd(
        c in [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64],
        nx in 3usize..9,
        ny in 4usize..10,
        dirichlet in any::<bool>(),
        u in prop::collection::vec(-1.0..1.0f64, 100),
    ) {
        let s = random_structure(c);
        let g = build_grid(s.chart, nx, ny).unwrap();
        let bc = if dirichlet { BoundarySpec::all_dirichlet(&s.chart) } else { BoundarySpec::all_neumann() };
        let f = assemble(&s, &g, &bc).unwrap();
        prop_assert_eq!(f.a.max_asymmetry(), 0.0);
        prop_assert!(f.mass.iter().all(|m| *m > 0.0));
        let v: Vec<f64> = (0..f.active_count()).map(|i| u[i % u.len()]).collect();
        prop_assert!(f.a.quadratic_form(&v) >= -1e-12 * f.a.frobenius_norm());
        if !dirichlet {
            let ones = vec![1.0; f.active_count()];
            let r = f.a.matvec(&ones);
            prop_assert!(r.iter().all(|x| x.abs() < 1e-12 * f.a.frobenius_norm()));
        }
    }
}

proptest! {
    #[test]
    fn perimeter_is_additive_and_matches_euclidean_length(
        pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 2..6),
        split in 0.05..0.95f64,
    ) {
        let e = builtin_euclidean((0.0, 1.0), (0.0, 1.0)).unwrap();
        let segs: Vec<Segment> = pts.windows(2).map(|w| Segment::new([w[0].0, w[0].1], [w[1].0, w[1].1])).collect();
        let len: f64 = segs.iter().map(Segment::length).sum();
        let p = horizontal_perimeter(&e, &segs).unwrap();
        prop_assert!((p - len).abs() <= 1e-9 * len.max(1e-3));

        let g = builtin_grushin_cylinder();
        let (a, b) = ([pts[0].0, pts[0].1 * PI], [pts[1].0, pts[1].1 * PI]);
        let m = [a[0] + split * (b[0] - a[0]), a[1] + split * (b[1] - a[1])];
        let whole = horizontal_perimeter(&g, &[Segment::new(a, b)]).unwrap();
        let parts = horizontal_perimeter(&g, &[Segment::new(a, m), Segment::new(m, b)]).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-6 * whole.max(1e-6));
    }

    #[test]
    fn shooting_is_continuous_in_lambda(lambda in 0.5..60.0f64, n in 0u32..4) {
        let p = ModeProblem::new(n, Condition::Neumann);
        let a = shoot(&p, lambda).unwrap();
        let b = shoot(&p, lambda + 1e-7).unwrap();
        prop_assert!((a - b).abs() < 1e-4 * (1.0 + a.abs()));
    }
}
