//! Compact covers of intervals.
//!
//! A compact cover of `J` is a finite family of closed intervals whose union
//! is `J`. Covers are produced directly from a mesh, or refined from an open
//! cover, and yield subdivisions of `J` whose pieces each sit inside a single
//! cover element.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary tolerance for interval comparisons.
const EPS: f64 = 1e-12;

fn tol(x: f64) -> f64 {
    EPS * x.abs().max(1.0)
}

/// A closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidCover(format!("[{lo}, {hi}] is not a proper interval")));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo - tol(self.lo) && t <= self.hi + tol(self.hi)
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.contains(other.lo) && self.contains(other.hi)
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (hi > lo).then_some(Interval { lo, hi })
    }
}

/// An open interval `(lo, hi)`; either end may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenInterval {
    pub lo: f64,
    pub hi: f64,
}

impl OpenInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, t: f64) -> bool {
        t > self.lo && t < self.hi
    }

    /// Containment of a closed interval, relative to the span `J`: an end
    /// of the open set lying beyond the matching end of `J` counts as open
    /// in `J`.
    fn contains_in(&self, k: &Interval, span: &Interval) -> bool {
        let left = k.lo > self.lo || (self.lo < span.lo && k.lo >= span.lo - tol(span.lo));
        let right = k.hi < self.hi || (self.hi > span.hi && k.hi <= span.hi + tol(span.hi));
        left && right
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactCover {
    intervals: Vec<Interval>,
    span: Interval,
}

impl CompactCover {
    pub fn new(span: Interval, intervals: Vec<Interval>) -> Result<Self> {
        let cover = Self { intervals, span };
        cover.check()?;
        Ok(cover)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn span(&self) -> Interval {
        self.span
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Nonempty elements inside the span whose union is the span.
    pub fn check(&self) -> Result<()> {
        if self.intervals.is_empty() {
            return Err(Error::InvalidCover("no intervals".into()));
        }
        for k in &self.intervals {
            if !(k.lo < k.hi) {
                return Err(Error::InvalidCover(format!("[{}, {}] is empty", k.lo, k.hi)));
            }
            if !self.span.contains_interval(k) {
                return Err(Error::InvalidCover(format!(
                    "[{}, {}] leaves the span [{}, {}]",
                    k.lo, k.hi, self.span.lo, self.span.hi
                )));
            }
        }
        if let Some(w) = first_gap_closed(&self.span, &self.intervals) {
            return Err(Error::CoverageGap { witness: w });
        }
        Ok(())
    }
}

/// First point of `span` not covered by the closed intervals.
fn first_gap_closed(span: &Interval, intervals: &[Interval]) -> Option<f64> {
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut reach = span.lo;
    if sorted.first().is_none_or(|k| k.lo > span.lo + tol(span.lo)) {
        return Some(span.lo);
    }
    for k in sorted {
        if k.lo > reach + tol(reach) {
            return Some(0.5 * (reach + k.lo));
        }
        reach = reach.max(k.hi);
    }
    (reach < span.hi - tol(span.hi)).then_some(0.5 * (reach + span.hi))
}

/// First point of `span` not covered by the open intervals, if any.
fn first_gap_open(span: &Interval, opens: &[OpenInterval]) -> Option<f64> {
    let covered = |t: f64| opens.iter().any(|o| o.contains(t));
    let mut t = span.lo;
    loop {
        if !covered(t) {
            return Some(t);
        }
        // Jump to the furthest right end among opens containing t.
        let reach = opens
            .iter()
            .filter(|o| o.contains(t))
            .map(|o| o.hi)
            .fold(f64::NEG_INFINITY, f64::max);
        if reach > span.hi {
            return None;
        }
        t = reach;
    }
}

/// Cover of `[a, b]` by `[a + k mesh, a + (k + 2) mesh] ∩ [a, b]`.
pub fn make_cover(span: Interval, mesh: f64) -> Result<CompactCover> {
    if !(mesh > 0.0) || !mesh.is_finite() {
        return Err(Error::InvalidParameter(format!("mesh must be positive, got {mesh}")));
    }
    if mesh >= span.len() {
        return CompactCover::new(span, vec![span]);
    }
    let mut intervals = Vec::new();
    let mut k = 0u64;
    loop {
        let lo = span.lo + k as f64 * mesh;
        let hi = (span.lo + (k + 2) as f64 * mesh).min(span.hi);
        intervals.push(Interval { lo, hi });
        if hi >= span.hi {
            break;
        }
        k += 1;
    }
    CompactCover::new(span, intervals)
}

/// The countable mesh cover of an unbounded span `(lo, hi)` (ends may be
/// infinite), truncated to the elements meeting `window`.
pub fn make_cover_truncated(lo: f64, hi: f64, mesh: f64, window: Interval) -> Result<CompactCover> {
    if !(mesh > 0.0) || !mesh.is_finite() {
        return Err(Error::InvalidParameter(format!("mesh must be positive, got {mesh}")));
    }
    let a = window.lo.max(lo);
    let b = window.hi.min(hi);
    let clipped = Interval::new(a, b)?;
    let anchor = if lo.is_finite() { lo } else { 0.0 };
    let k0 = ((a - anchor) / mesh).floor() as i64 - 1;
    let mut intervals = Vec::new();
    let mut k = k0;
    loop {
        let start = anchor + k as f64 * mesh;
        let end = anchor + (k + 2) as f64 * mesh;
        if start >= b {
            break;
        }
        if end > a {
            intervals.push(Interval {
                lo: start.max(a),
                hi: end.min(b),
            });
        }
        k += 1;
    }
    CompactCover::new(clipped, intervals)
}

/// A compact refinement of an open cover, with the index of an open set
/// containing each element.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Refinement {
    pub cover: CompactCover,
    pub sources: Vec<usize>,
}

/// Halved-radius construction: from the current point `x`, take the open
/// set admitting the largest radius `α` around `x` (within `J`), emit
/// `[x - α/2, x + α/2] ∩ J` and continue from `x + α/2`.
pub fn refine_from_open_cover(span: Interval, opens: &[OpenInterval]) -> Result<Refinement> {
    if let Some(w) = first_gap_open(&span, opens) {
        return Err(Error::CoverageGap { witness: w });
    }
    let radius = |o: &OpenInterval, x: f64| -> f64 {
        if !(o.contains(x) || (x <= span.lo && o.lo < span.lo && o.hi > x)) {
            return 0.0;
        }
        let left = if o.lo < span.lo { f64::INFINITY } else { x - o.lo };
        let right = if o.hi > span.hi { f64::INFINITY } else { o.hi - x };
        left.min(right)
    };
    let mut intervals = Vec::new();
    let mut sources = Vec::new();
    let mut x = span.lo;
    let cap = 1_000_000;
    for _ in 0..cap {
        let (best, alpha) = opens
            .iter()
            .enumerate()
            .map(|(i, o)| (i, radius(o, x)))
            .fold((usize::MAX, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best == usize::MAX {
            return Err(Error::CoverageGap { witness: x });
        }
        let half = if alpha.is_finite() { alpha / 2.0 } else { span.len() };
        let k = Interval {
            lo: (x - half).max(span.lo),
            hi: (x + half).min(span.hi),
        };
        if k.hi > k.lo {
            intervals.push(k);
            sources.push(best);
        }
        if k.hi >= span.hi {
            let cover = CompactCover::new(span, intervals)?;
            return Ok(Refinement { cover, sources });
        }
        x = k.hi;
    }
    Err(Error::InvalidCover("refinement did not terminate".into()))
}

/// Checks that every element of a refinement sits inside its source open.
pub fn refinement_is_subordinate(r: &Refinement, opens: &[OpenInterval]) -> bool {
    let span = r.cover.span();
    r.cover
        .intervals()
        .iter()
        .zip(&r.sources)
        .all(|(k, &s)| opens[s].contains_in(k, &span))
}

/// Subdivision points with, for each piece, the index of a cover element
/// containing it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Subdivision {
    pub points: Vec<f64>,
    pub owners: Vec<usize>,
}

/// Greedy chain of elements reaching furthest right; consecutive elements
/// are cut at the midpoint of their overlap.
pub fn extract_subdivision(cover: &CompactCover) -> Subdivision {
    let span = cover.span();
    let ks = cover.intervals();
    let mut chain: Vec<usize> = Vec::new();
    let mut reach = span.lo;
    loop {
        // Among elements starting at or before the current reach (or
        // containing the left end), pick the one extending furthest.
        let pick = ks
            .iter()
            .enumerate()
            .filter(|(_, k)| {
                if chain.is_empty() {
                    k.lo <= span.lo + tol(span.lo)
                } else {
                    k.lo <= reach + tol(reach) && k.hi > reach
                }
            })
            .max_by(|a, b| a.1.hi.total_cmp(&b.1.hi).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("cover invariants guarantee a continuation");
        chain.push(pick);
        reach = ks[pick].hi;
        if reach >= span.hi - tol(span.hi) {
            break;
        }
    }
    let mut points = vec![span.lo];
    for w in chain.windows(2) {
        let (a, b) = (ks[w[0]], ks[w[1]]);
        let cut = 0.5 * (b.lo.max(a.lo) + a.hi);
        points.push(cut);
    }
    points.push(span.hi);
    Subdivision {
        points,
        owners: chain,
    }
}

/// Checks that piece `j` of the subdivision lies inside `owners[j]`.
pub fn subdivision_is_subordinate(cover: &CompactCover, sub: &Subdivision) -> bool {
    sub.points.windows(2).all(|w| w[0] < w[1])
        && sub.points.windows(2).zip(&sub.owners).all(|(w, &o)| {
            cover.intervals()[o].contains_interval(&Interval { lo: w[0], hi: w[1] })
        })
}

/// Flattened union of covers of the elements of `outer`.
pub fn compose_covers(outer: &CompactCover, inners: &[CompactCover]) -> Result<CompactCover> {
    if inners.len() != outer.len() {
        return Err(Error::InvalidCover(format!(
            "{} inner covers for {} elements",
            inners.len(),
            outer.len()
        )));
    }
    let mut intervals = Vec::new();
    for (k, inner) in outer.intervals().iter().zip(inners) {
        let s = inner.span();
        if (s.lo - k.lo).abs() > tol(k.lo) || (s.hi - k.hi).abs() > tol(k.hi) {
            return Err(Error::InvalidCover(format!(
                "inner span [{}, {}] differs from [{}, {}]",
                s.lo, s.hi, k.lo, k.hi
            )));
        }
        inner.check()?;
        intervals.extend_from_slice(inner.intervals());
    }
    CompactCover::new(outer.span(), intervals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn mesh_covers() {
        let c = make_cover(unit(), 1.0).unwrap();
        assert_eq!(c.intervals(), &[unit()]);
        let c = make_cover(unit(), 0.3).unwrap();
        assert!(c.len() >= 2);
        assert!(c.intervals().iter().all(|k| k.len() <= 0.6 + 1e-12));
        assert!(make_cover(unit(), 0.0).is_err());
        assert!(make_cover(unit(), -1.0).is_err());
    }

    #[test]
    fn truncated_cover_of_the_line() {
        let w = Interval::new(-2.5, 3.25).unwrap();
        let c = make_cover_truncated(f64::NEG_INFINITY, f64::INFINITY, 0.5, w).unwrap();
        assert_eq!(c.span(), w);
        assert!(c.intervals().iter().all(|k| k.len() <= 1.0 + 1e-12));
    }

    #[test]
    fn refine_single_open() {
        let opens = [OpenInterval::new(-0.1, 1.1)];
        let r = refine_from_open_cover(unit(), &opens).unwrap();
        assert_eq!(r.cover.intervals(), &[unit()]);
    }

    #[test]
    fn refine_two_opens() {
        let opens = [OpenInterval::new(-0.1, 0.6), OpenInterval::new(0.4, 1.1)];
        let r = refine_from_open_cover(unit(), &opens).unwrap();
        assert!(refinement_is_subordinate(&r, &opens));
        r.cover.check().unwrap();
    }

    #[test]
    fn refine_reports_gap() {
        let opens = [OpenInterval::new(-0.1, 0.4), OpenInterval::new(0.6, 1.1)];
        match refine_from_open_cover(unit(), &opens) {
            Err(Error::CoverageGap { witness }) => assert!((0.4..=0.6).contains(&witness)),
            other => panic!("expected a gap, got {other:?}"),
        }
    }

    #[test]
    fn subdivision_cuts_at_overlap_midpoint() {
        let c = CompactCover::new(
            unit(),
            vec![Interval::new(0.0, 0.6).unwrap(), Interval::new(0.4, 1.0).unwrap()],
        )
        .unwrap();
        let s = extract_subdivision(&c);
        assert_eq!(s.points, vec![0.0, 0.5, 1.0]);
        assert_eq!(s.owners, vec![0, 1]);
        let single = extract_subdivision(&CompactCover::new(unit(), vec![unit()]).unwrap());
        assert_eq!(single.points, vec![0.0, 1.0]);
    }

    #[test]
    fn cover_rejects_gap() {
        let r = CompactCover::new(
            unit(),
            vec![Interval::new(0.0, 0.4).unwrap(), Interval::new(0.6, 1.0).unwrap()],
        );
        assert!(matches!(r, Err(Error::CoverageGap { .. })));
    }

    #[test]
    fn composition() {
        let outer = make_cover(unit(), 0.3).unwrap();
        let identity: Vec<_> = outer
            .intervals()
            .iter()
            .map(|k| CompactCover::new(*k, vec![*k]).unwrap())
            .collect();
        assert_eq!(compose_covers(&outer, &identity).unwrap(), outer);
        let halved: Vec<_> = outer
            .intervals()
            .iter()
            .map(|k| make_cover(*k, k.len() / 2.0).unwrap())
            .collect();
        let c = compose_covers(&outer, &halved).unwrap();
        assert!(c.len() <= 2 * outer.len());
        let bad = vec![CompactCover::new(unit(), vec![unit()]).unwrap(); outer.len()];
        assert!(compose_covers(&outer, &bad).is_err());
    }
}
