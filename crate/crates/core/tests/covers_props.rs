use proptest::prelude::*;
use roughpath::covers::{
    compose_covers, extract_subdivision, make_cover, make_cover_truncated, refine_from_open_cover,
    refinement_is_subordinate, subdivision_is_subordinate, CompactCover, Interval, OpenInterval,
};

fn span() -> impl Strategy<Value = Interval> {
    (-5.0f64..5.0, 0.1f64..10.0).prop_map(|(lo, len)| Interval::new(lo, lo + len).unwrap())
}

/// Open intervals around a random partition of the span, widened by
/// random overlaps so that they cover it.
fn open_cover(span: Interval) -> impl Strategy<Value = Vec<OpenInterval>> {
    (
        prop::collection::vec(0.0f64..1.0, 0..8),
        prop::collection::vec(0.01f64..0.3, 9),
    )
        .prop_map(move |(cuts, pads)| {
            let mut pts: Vec<f64> = cuts.iter().map(|c| span.lo + c * span.len()).collect();
            pts.push(span.lo);
            pts.push(span.hi);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            pts.windows(2)
                .zip(pads.iter().cycle())
                .map(|(w, pad)| OpenInterval::new(w[0] - pad * span.len(), w[1] + pad * span.len()))
                .collect()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mesh_covers_are_valid(j in span(), mesh in 0.05f64..4.0) {
        let c = make_cover(j, mesh).unwrap();
        prop_assert!(c.check().is_ok());
        prop_assert!(c.intervals().iter().all(|k| k.len() <= 2.0 * mesh * (1.0 + 1e-12)));
    }

    #[test]
    fn truncated_covers_meet_the_window(a in -10.0f64..10.0, len in 0.1f64..5.0, mesh in 0.1f64..2.0) {
        let window = Interval::new(a, a + len).unwrap();
        let c = make_cover_truncated(f64::NEG_INFINITY, f64::INFINITY, mesh, window).unwrap();
        prop_assert!(c.intervals().iter().all(|k| k.intersect(&window).is_some() || k.hi == window.lo || k.lo == window.hi));
    }

    #[test]
    fn refinements_are_subordinate((j, opens) in span().prop_flat_map(|j| (Just(j), open_cover(j)))) {
        let r = refine_from_open_cover(j, &opens).unwrap();
        prop_assert!(r.cover.check().is_ok());
        prop_assert!(refinement_is_subordinate(&r, &opens));
        let sub = extract_subdivision(&r.cover);
        prop_assert_eq!(sub.points.first().copied(), Some(j.lo));
        prop_assert_eq!(sub.points.last().copied(), Some(j.hi));
        prop_assert!(subdivision_is_subordinate(&r.cover, &sub));
    }

    #[test]
    fn gaps_are_reported((j, mut opens) in span().prop_flat_map(|j| (Just(j), open_cover(j))), hole in 0.2f64..0.8) {
        let t = j.lo + hole * j.len();
        opens.retain(|o| !o.contains(t));
        prop_assert!(refine_from_open_cover(j, &opens).is_err());
    }

    #[test]
    fn nested_covers_compose(j in span(), outer_mesh in 0.5f64..3.0, inner_mesh in 0.05f64..1.0) {
        let outer = make_cover(j, outer_mesh).unwrap();
        let inners: Vec<CompactCover> = outer.intervals().iter().map(|k| make_cover(*k, inner_mesh).unwrap()).collect();
        let flat = compose_covers(&outer, &inners).unwrap();
        prop_assert!(flat.check().is_ok());
        prop_assert_eq!(flat.len(), inners.iter().map(|c| c.len()).sum::<usize>());
    }
}

#[test]
fn covers_reject_holes_and_strays() {
    let j = Interval::new(0.0, 3.0).unwrap();
    let hole = vec![Interval::new(0.0, 1.0).unwrap(), Interval::new(1.5, 3.0).unwrap()];
    assert!(CompactCover::new(j, hole).is_err());
    let stray = vec![Interval::new(-1.0, 3.0).unwrap()];
    assert!(CompactCover::new(j, stray).is_err());
    assert!(Interval::new(1.0, 1.0).is_err());
}

#[test]
fn json_round_trip() {
    let c = make_cover(Interval::new(0.0, 1.0).unwrap(), 0.25).unwrap();
    let text = serde_json::to_string(&c).unwrap();
    assert_eq!(serde_json::from_str::<CompactCover>(&text).unwrap(), c);
}
