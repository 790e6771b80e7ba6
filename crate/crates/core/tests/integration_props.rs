mod common;

use common::path;
use proptest::prelude::*;
use roughpath::integration::{integrate, integrate_local_oneform, pushforward, LocalOneForm};
use roughpath::lipschitz::{by_name, compose_jets, Ball, LIBRARY};
use roughpath::manifold::aligned_distance;
use roughpath::rough::{concat_functionals, window_deviation};
use roughpath::{GridFunctional, OneForm, RoughPath, SampledPath, SewOptions, TruncTensor};

fn opts() -> SewOptions {
    SewOptions::with_tol(1e-12)
}

/// A level-2 rough path over `x` whose cells carry extra area.
fn with_area(x: &SampledPath, areas: &[f64]) -> RoughPath {
    let f = GridFunctional::from_path(x, 2).unwrap();
    let cells = f
        .cells()
        .iter()
        .zip(areas.iter().cycle())
        .map(|(c, a)| {
            let mut levels = c.levels().to_vec();
            levels[2][1] += a;
            levels[2][2] -= a;
            TruncTensor::from_levels(2, levels).unwrap()
        })
        .collect();
    RoughPath::new(2.5, x.start().to_vec(), GridFunctional::new(x.times().to_vec(), cells).unwrap()).unwrap()
}

fn rough_input() -> impl Strategy<Value = RoughPath> {
    prop_oneof![
        path(2, 6).prop_map(|x| RoughPath::from_bv_path(&x, 1.5).unwrap()),
        (path(2, 6), prop::collection::vec(-0.1f64..0.1, 1..4)).prop_map(|(x, a)| with_area(&x, &a)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn additivity_over_time(x in rough_input(), cut in 1usize..6) {
        prop_assume!(cut < x.times().len() - 1);
        let alpha = OneForm::gradient(&by_name("sin", 2).unwrap()).unwrap();
        let u = x.times()[cut];
        let (a, b) = x.span();
        let whole = integrate(&alpha, &x, &opts()).unwrap();
        let left = integrate(&alpha, &x.restrict(a, u).unwrap(), &opts()).unwrap();
        let right = integrate(&alpha, &x.restrict(u, b).unwrap(), &opts()).unwrap();
        let glued = concat_functionals(left.functional(), right.functional()).unwrap();
        prop_assert!(glued.max_cell_diff(whole.functional()).unwrap() <= 1e-12);
    }

    #[test]
    fn linearity_at_level_one(x in rough_input(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let alpha = OneForm::gradient(&by_name("cos", 2).unwrap()).unwrap();
        let beta = OneForm::gradient(&by_name("square", 2).unwrap()).unwrap();
        let mix = OneForm::combine(a, &alpha, b, &beta).unwrap();
        let ia = integrate(&alpha, &x, &opts()).unwrap();
        let ib = integrate(&beta, &x, &opts()).unwrap();
        let im = integrate(&mix, &x, &opts()).unwrap();
        for k in 0..im.functional().cells().len() {
            let (ca, cb, cm) = (&ia.functional().cells()[k], &ib.functional().cells()[k], &im.functional().cells()[k]);
            for o in 0..cm.dim() {
                let expected = a * ca.level(1)[o] + b * cb.level(1)[o];
                prop_assert!((cm.level(1)[o] - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn gradient_integrals_are_increments(x in rough_input(), name in prop::sample::select(LIBRARY.to_vec())) {
        let f = by_name(name, 2).unwrap();
        let y = integrate(&OneForm::gradient(&f).unwrap(), &x, &opts()).unwrap();
        let tr = x.trace();
        let yt = y.trace();
        let f0 = f.value(tr.start());
        for k in 0..tr.len() {
            let fk = f.value(tr.point(k));
            for o in 0..fk.len() {
                let expected = fk[o] - f0[o];
                prop_assert!((yt.point(k)[o] - expected).abs() <= 1e-9 * (1.0 + expected.abs()), "{} {}", name, k);
            }
        }
    }

    #[test]
    fn bv_pushforward_is_the_image_lift(x in path(2, 6), name in prop::sample::select(LIBRARY.to_vec())) {
        let f = by_name(name, 2).unwrap();
        let lift = RoughPath::from_bv_path(&x, 1.5).unwrap();
        let y = pushforward(&f, &lift, &opts()).unwrap();
        let oracle = RoughPath::from_bv_path(&f.map_path(&x).unwrap(), 1.5).unwrap();
        prop_assert!(aligned_distance(&y, &oracle).unwrap() <= 1e-9);
    }

    #[test]
    fn functoriality_on_bv_lifts(x in path(2, 5), a in prop::sample::select(LIBRARY.to_vec()), b in prop::sample::select(LIBRARY.to_vec())) {
        let f = by_name(a, 2).unwrap();
        let g = by_name(b, f.dim_out()).unwrap();
        let samples: Vec<Vec<f64>> = x.points().map(<[f64]>::to_vec).collect();
        let (gf, _) = compose_jets(&g, &f, &samples).unwrap();
        let lift = RoughPath::from_bv_path(&x, 1.5).unwrap();
        let composite = pushforward(&gf, &lift, &opts()).unwrap();
        let stepwise = pushforward(&g, &pushforward(&f, &lift, &opts()).unwrap(), &opts()).unwrap();
        prop_assert!(aligned_distance(&composite, &stepwise).unwrap() <= 1e-8);
    }

    #[test]
    fn identity_pushforward(x in rough_input()) {
        let id = by_name("identity", 2).unwrap();
        let y = pushforward(&id, &x, &opts()).unwrap();
        prop_assert!(window_deviation(&y, &x).unwrap() <= 1e-12);
    }

    #[test]
    fn one_ball_local_form_is_global(x in rough_input()) {
        let alpha = OneForm::area();
        let local = LocalOneForm::new(vec![(Ball::new(vec![0.0, 0.0], 10.0).unwrap(), alpha.clone())]).unwrap();
        let a = integrate(&alpha, &x, &opts()).unwrap();
        let b = integrate_local_oneform(&local, &x, &opts()).unwrap();
        prop_assert!(window_deviation(&a, &b).unwrap() <= 1e-12);
    }
}

#[test]
fn area_of_a_square() {
    let x = SampledPath::uniform(
        0.0,
        1.0,
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![0.0, 0.0]],
    )
    .unwrap();
    let y = integrate(&OneForm::area(), &RoughPath::from_bv_path(&x, 1.0).unwrap(), &opts()).unwrap();
    assert!((y.trace().end()[0] - 1.0).abs() < 1e-14);
}

#[test]
fn large_p_is_rejected() {
    let x = SampledPath::uniform(0.0, 1.0, vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let f = GridFunctional::from_path(&x, 3).unwrap();
    let r = RoughPath::new(3.2, vec![0.0, 0.0], f).unwrap();
    assert!(integrate(&OneForm::area(), &r, &opts()).is_err());
}
