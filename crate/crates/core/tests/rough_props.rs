mod common;

use common::{any_path, close, path};
use proptest::prelude::*;
use roughpath::rough::{
    dp_metric, equivalent, extend, functional_control, pvar_control_check, window_deviation, RefineOptions,
};
use roughpath::signature::signature_indices;
use roughpath::{GridFunctional, RoughPath};

fn opts(base: usize) -> RefineOptions {
    RefineOptions {
        tol: 1e-13,
        max_depth: 16,
        base,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn evaluation_is_multiplicative(x in any_path(3, 10), n in 1usize..=3) {
        let f = GridFunctional::from_path(&x, n).unwrap();
        let t = f.times();
        for i in 0..t.len() {
            for u in i..t.len() {
                for j in u..t.len() {
                    let lhs = f.evaluate(t[i], t[j]).unwrap();
                    let rhs = f.evaluate(t[i], t[u]).unwrap().mul(&f.evaluate(t[u], t[j]).unwrap()).unwrap();
                    prop_assert!(close(&lhs, &rhs, 1e-12));
                }
            }
        }
    }

    #[test]
    fn off_grid_evaluation_is_multiplicative(x in path(2, 6), s in 0.0f64..1.0, u in 0.0f64..1.0, t in 0.0f64..1.0) {
        let mut w = [s, u, t];
        w.sort_by(f64::total_cmp);
        let f = GridFunctional::from_path(&x, 2).unwrap();
        let lhs = f.evaluate(w[0], w[2]).unwrap();
        let rhs = f.evaluate(w[0], w[1]).unwrap().mul(&f.evaluate(w[1], w[2]).unwrap()).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn trace_matches_level_one(x in any_path(3, 10), p in 1.0f64..2.99) {
        let r = RoughPath::from_bv_path(&x, p).unwrap();
        let tr = r.trace();
        for k in 0..x.len() {
            for (a, b) in tr.point(k).iter().zip(x.point(k)) {
                prop_assert!((a - b).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn metric_axioms(x in path(2, 8), y in path(2, 8), z in path(2, 8), p in 1.0f64..2.99) {
        let grid = x.times().to_vec();
        let lift = |q: &roughpath::SampledPath| {
            let pts = grid.iter().map(|&t| q.value_at(t).unwrap()).collect();
            GridFunctional::from_path(&roughpath::SampledPath::new(grid.clone(), pts).unwrap(), p.floor() as usize).unwrap()
        };
        let (fx, fy, fz) = (lift(&x), lift(&y), lift(&z));
        prop_assert_eq!(dp_metric(&fx, &fx, p).unwrap(), 0.0);
        let dxy = dp_metric(&fx, &fy, p).unwrap();
        prop_assert!((dxy - dp_metric(&fy, &fx, p).unwrap()).abs() <= 1e-14 * dxy.max(1.0));
        let dxz = dp_metric(&fx, &fz, p).unwrap();
        let dzy = dp_metric(&fz, &fy, p).unwrap();
        if p < 2.0 {
            prop_assert!(dxy <= (dxz + dzy) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn extension_of_a_lift_is_the_signature(x in any_path(2, 6), p in 1.0f64..2.99, n in 3usize..=4) {
        let m = p.floor() as usize;
        let f = GridFunctional::from_path(&x, m).unwrap();
        let (ext, stats) = extend(&f, n, &opts(2)).unwrap();
        prop_assert!(stats.max_delta() <= 1e-13);
        for (k, cell) in ext.cells().iter().enumerate() {
            let exact = signature_indices(&x, n, k, k + 1).unwrap();
            prop_assert!(close(cell, &exact, 1e-11));
        }
    }

    #[test]
    fn extension_is_schedule_independent(x in path(2, 4), area in -0.5f64..0.5) {
        let cells = x.segments();
        let f = GridFunctional::from_path(&x, 2).unwrap();
        let bumped: Vec<_> = f.cells().iter().map(|c| {
            let mut levels = c.levels().to_vec();
            levels[2][1] += area / cells as f64;
            levels[2][2] -= area / cells as f64;
            roughpath::TruncTensor::from_levels(2, levels).unwrap()
        }).collect();
        let g = GridFunctional::new(f.times().to_vec(), bumped).unwrap();
        let (a, _) = extend(&g, 4, &opts(2)).unwrap();
        let (b, _) = extend(&g, 4, &opts(3)).unwrap();
        prop_assert!(a.max_cell_diff(&b).unwrap() <= 1e-10);
        prop_assert!(a.project(2).unwrap().max_cell_diff(&g).unwrap() <= 1e-15);
    }

    #[test]
    fn functional_control_controls(x in any_path(2, 8), p in 1.0f64..2.99) {
        let f = GridFunctional::from_path(&x, p.floor() as usize).unwrap();
        let w = functional_control(&f, p).unwrap();
        prop_assert!(w.check_invariants().is_ok());
        prop_assert!(pvar_control_check(&f, p, &w).unwrap().holds);
    }

    #[test]
    fn restriction_and_concatenation(x in path(2, 10), cut in 1usize..9) {
        prop_assume!(cut < x.len() - 1);
        let r = RoughPath::from_bv_path(&x, 2.5).unwrap();
        let t = x.times()[cut];
        let (a, b) = (r.restrict(0.0, t).unwrap(), r.restrict(t, 1.0).unwrap());
        let glued = a.concat(&b).unwrap();
        prop_assert!(window_deviation(&glued, &r).unwrap() <= 1e-13);
        prop_assert!(equivalent(&glued, &r));
    }

    #[test]
    fn json_round_trip(x in any_path(3, 6), p in 1.0f64..2.99) {
        let r = RoughPath::from_bv_path(&x, p).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: RoughPath = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, r);
    }
}

#[test]
fn malformed_json_is_rejected() {
    let bad_degree = r#"{"p": 2.5, "start": [0], "times": [0, 1],
        "cells": [{"dim": 1, "degree": 1, "levels": [[1], [0.5]]}]}"#;
    assert!(serde_json::from_str::<RoughPath>(bad_degree).is_err());
    let bad_times = r#"{"p": 1.5, "start": [0], "times": [1, 0],
        "cells": [{"dim": 1, "degree": 1, "levels": [[1], [0.5]]}]}"#;
    assert!(serde_json::from_str::<RoughPath>(bad_times).is_err());
}
