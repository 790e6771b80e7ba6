mod common;

use common::{any_path, close, path};
use proptest::prelude::*;
use roughpath::signature::{
    chen_check_all, concat_paths, factorial_decay_check, signature, signature_full, signature_indices,
};
use roughpath::tensor::{apply_form, shuffle};
use roughpath::{FormCombination, SampledPath, TruncTensor, Word};

fn reversed(x: &SampledPath) -> SampledPath {
    let points: Vec<Vec<f64>> = (0..x.len()).rev().map(|k| x.point(k).to_vec()).collect();
    let (a, b) = x.span();
    let times: Vec<f64> = x.times().iter().rev().map(|t| a + b - t).collect();
    SampledPath::new(times, points).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chen_identity_on_all_triples(x in any_path(3, 12), n in 1usize..=4) {
        prop_assert!(chen_check_all(&x, n).unwrap() <= 1e-12);
    }

    #[test]
    fn projection_commutes_with_signature(x in any_path(3, 10), n in 1usize..=5, m in 0usize..=5) {
        prop_assume!(m <= n);
        let s = signature_full(&x, n).unwrap();
        prop_assert_eq!(s.scalar(), 1.0);
        let direct = signature_full(&x, m).unwrap();
        prop_assert!(close(&s.project(m).unwrap(), &direct, 1e-13));
    }

    #[test]
    fn level_one_is_the_increment(x in any_path(3, 10)) {
        let s = signature_full(&x, 2).unwrap();
        let inc = x.increment(0, x.len() - 1);
        for (a, b) in s.level(1).iter().zip(&inc) {
            prop_assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn signature_is_group_like(x in path(2, 8), u in prop::collection::vec(1usize..=2, 0..4), v in prop::collection::vec(1usize..=2, 0..4)) {
        let n = 6;
        prop_assume!(u.len() + v.len() <= n);
        let s = signature_full(&x, n).unwrap();
        let e = FormCombination::word(Word::new(u).unwrap());
        let f = FormCombination::word(Word::new(v).unwrap());
        let lhs = apply_form(&shuffle(&e, &f), &s).unwrap();
        let rhs = apply_form(&e, &s).unwrap() * apply_form(&f, &s).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn log_signature_round_trip(x in any_path(3, 8)) {
        let s = signature_full(&x, 4).unwrap();
        prop_assert!(close(&s.log().unwrap().exp().unwrap(), &s, 1e-12));
    }

    #[test]
    fn factorial_decay(x in any_path(3, 10), n in 1usize..=5) {
        let report = factorial_decay_check(&x, n).unwrap();
        prop_assert!(report.holds, "{}", report.worst_ratio);
        prop_assert!(report.worst_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn concatenation_multiplies(x in path(2, 6), y in path(2, 6)) {
        let shift: Vec<f64> = x.end().iter().zip(y.start()).map(|(a, b)| a - b).collect();
        let y = y.translate(&shift).unwrap();
        let later: Vec<f64> = y.times().iter().map(|t| t + 1.0).collect();
        let y = SampledPath::new(later, y.points().map(<[f64]>::to_vec).collect()).unwrap();
        let xy = concat_paths(&x, &y).unwrap();
        let lhs = signature_full(&xy, 4).unwrap();
        let rhs = signature_full(&x, 4).unwrap().mul(&signature_full(&y, 4).unwrap()).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn reversal_inverts(x in any_path(3, 8)) {
        let s = signature_full(&x, 4).unwrap();
        let r = signature_full(&reversed(&x), 4).unwrap();
        let one = TruncTensor::unit(x.dim(), 4).unwrap();
        prop_assert!(close(&s.mul(&r).unwrap(), &one, 1e-12));
    }

    #[test]
    fn time_change_invariance(x in any_path(2, 8), a in 0.1f64..3.0) {
        let times: Vec<f64> = x.times().iter().map(|t| t.powf(a) * 5.0 - 2.0).collect();
        let y = SampledPath::new(times, x.points().map(<[f64]>::to_vec).collect()).unwrap();
        prop_assert_eq!(signature_full(&x, 3).unwrap(), signature_full(&y, 3).unwrap());
    }

    #[test]
    fn window_signatures_are_restrictions(x in path(2, 10), i in 0usize..10, j in 0usize..10) {
        let n = x.len() - 1;
        let (i, j) = (i.min(j).min(n), i.max(j).min(n));
        let w = signature_indices(&x, 3, i, j).unwrap();
        if i < j {
            let sub = x.slice(i, j).unwrap();
            prop_assert!(close(&w, &signature_full(&sub, 3).unwrap(), 1e-13));
        } else {
            prop_assert_eq!(w, TruncTensor::unit(2, 3).unwrap());
        }
    }
}

#[test]
fn straight_line_is_an_exponential() {
    let x = SampledPath::uniform(0.0, 1.0, vec![vec![0.0, 0.0], vec![0.5, -1.0], vec![1.0, -2.0]]).unwrap();
    let s = signature(&x, 4, 0.0, 1.0).unwrap();
    let e = TruncTensor::exp_vector(&[1.0, -2.0], 4).unwrap();
    assert!(close(&s, &e, 1e-15));
}

#[test]
fn degree_cap_and_off_grid_times() {
    let x = SampledPath::uniform(0.0, 1.0, vec![vec![0.0], vec![1.0]]).unwrap();
    assert!(signature(&x, 7, 0.0, 1.0).is_err());
    assert!(signature(&x, 2, 0.0, 0.3).is_err());
    assert!(signature(&x, 2, 1.0, 0.0).is_err());
}
