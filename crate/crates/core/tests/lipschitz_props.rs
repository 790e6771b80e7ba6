mod common;

use common::path;
use proptest::prelude::*;
use roughpath::lipschitz::{
    ball_subdivision, by_name, compose_jets, finite_difference_defect, lip_norm_estimate, symmetry_defect,
    taylor_remainder, Ball, LIBRARY,
};
use roughpath::variation::l1_dist;

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d)
}

fn jet_and_point() -> impl Strategy<Value = (&'static str, usize, Vec<f64>)> {
    (prop::sample::select(LIBRARY.to_vec()), 1usize..=3).prop_flat_map(|(name, d)| (Just(name), Just(d), point(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jets_are_symmetric((name, d, x) in jet_and_point()) {
        let f = by_name(name, d).unwrap();
        for k in 2..=f.n() {
            prop_assert!(symmetry_defect(&f, &x, k) <= 1e-10, "{} k={}", name, k);
        }
    }

    #[test]
    fn jets_match_difference_quotients((name, d, x) in jet_and_point()) {
        let f = by_name(name, d).unwrap();
        for k in 0..f.n() {
            let coarse = finite_difference_defect(&f, &x, k, 1e-2);
            let fine = finite_difference_defect(&f, &x, k, 1e-3);
            prop_assert!(fine <= 1e-4, "{} k={} defect={}", name, k, fine);
            prop_assert!(fine <= coarse + 1e-9);
        }
    }

    #[test]
    fn remainders_respect_the_estimated_norm(
        (name, d) in (prop::sample::select(LIBRARY.to_vec()), 1usize..=2),
        samples in prop::collection::vec(point(2), 2..6),
    ) {
        let samples: Vec<Vec<f64>> = samples.into_iter().map(|s| s[..d].to_vec()).collect();
        let f = by_name(name, d).unwrap();
        let m = lip_norm_estimate(&f, &samples).unwrap();
        let gamma = f.gamma();
        for x in &samples {
            for y in &samples {
                let dist = l1_dist(x, y);
                if dist == 0.0 {
                    continue;
                }
                for k in 0..=f.n() {
                    let width = d.pow(k as u32);
                    for c in 0..width {
                        let mut v = vec![0.0; width];
                        v[c] = 1.0;
                        let r: f64 = taylor_remainder(&f, k, x, y, &v).unwrap().iter().map(|a| a.abs()).sum();
                        prop_assert!(r <= m * dist.powf(gamma - k as f64) * (1.0 + 1e-9) + 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn polynomials_have_no_remainder(x in point(2), y in point(2)) {
        for name in ["identity", "square", "cube", "norm2"] {
            let f = by_name(name, 2).unwrap();
            for k in 0..=f.n() {
                let v = vec![1.0; 2usize.pow(k as u32)];
                let r = taylor_remainder(&f, k, &x, &y, &v).unwrap();
                prop_assert!(r.iter().all(|c| c.abs() <= 1e-12), "{} k={} {:?}", name, k, r);
            }
        }
    }

    #[test]
    fn composition_matches_pointwise_composition(x in point(2), a in prop::sample::select(LIBRARY.to_vec()), b in prop::sample::select(LIBRARY.to_vec())) {
        let f = by_name(a, 2).unwrap();
        let g = by_name(b, f.dim_out()).unwrap();
        let (gf, ratio) = compose_jets(&g, &f, &[x.clone(), vec![0.1, 0.2]]).unwrap();
        prop_assert!(ratio.is_finite() || f.norm() == 0.0 || g.norm() == 0.0);
        let direct = g.value(&f.value(&x));
        for (u, v) in gf.value(&x).iter().zip(&direct) {
            prop_assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
        prop_assert!(symmetry_defect(&gf, &x, 2) <= 1e-9);
    }

    #[test]
    fn ball_subdivision_is_subordinate(x in path(2, 12)) {
        let centres = [[-0.5, -0.5], [0.5, -0.5], [-0.5, 0.5], [0.5, 0.5]];
        let balls: Vec<Ball> = centres.iter().map(|c| Ball::new(c.to_vec(), 1.6).unwrap()).collect();
        let sub = ball_subdivision(&x, &balls).unwrap();
        prop_assert_eq!(sub.points.first().copied(), Some(0.0));
        prop_assert_eq!(sub.points.last().copied(), Some(1.0));
        prop_assert_eq!(sub.balls.len(), sub.pieces());
        for (k, &b) in sub.balls.iter().enumerate() {
            let piece = x.restrict(sub.points[k], sub.points[k + 1]).unwrap();
            for q in piece.points() {
                prop_assert!(balls[b].contains(q));
            }
        }
    }
}

#[test]
fn unknown_names_are_rejected() {
    assert!(by_name("tanh", 2).is_err());
    assert!(by_name("scale:x", 2).is_err());
    assert_eq!(by_name("const:1,2,3", 2).unwrap().dim_out(), 3);
}
