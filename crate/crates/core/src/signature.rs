//! Signatures of piecewise-linear paths.
//!
//! The signature of a linear segment with increment `v` is `exp(v)`; the
//! signature of a polygon is the left-to-right product of its segment
//! exponentials.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::TruncTensor;
use crate::variation::{l1_dist, leq_with_slack, SampledPath};
use crate::DEFAULT_MAX_DEGREE;

fn check_degree(degree: usize, cap: usize) -> Result<()> {
    if degree > cap {
        return Err(Error::DegreeTooLarge {
            requested: degree,
            cap,
        });
    }
    Ok(())
}

/// `exp(x_(k+1) - x_k)` for every segment of `x`.
pub fn segment_signatures(x: &SampledPath, degree: usize) -> Result<Vec<TruncTensor>> {
    par::try_map_range(x.segments(), |k| {
        TruncTensor::exp_vector(&x.increment(k, k + 1), degree)
    })
}

/// Signature over the grid indices `i..=j`.
pub fn signature_indices(x: &SampledPath, degree: usize, i: usize, j: usize) -> Result<TruncTensor> {
    if i > j || j >= x.len() {
        return Err(Error::InvalidParameter(format!("bad window {i}..={j}")));
    }
    let unit = TruncTensor::unit(x.dim(), degree)?;
    let pieces = par::try_map_range(j - i, |k| {
        TruncTensor::exp_vector(&x.increment(i + k, i + k + 1), degree)
    })?;
    Ok(par::reduce_ordered(pieces, unit, |a, b| a.mul_unchecked(&b)))
}

/// Signature of `x` truncated at `degree` over the grid window `[s, t]`.
pub fn signature(x: &SampledPath, degree: usize, s: f64, t: f64) -> Result<TruncTensor> {
    signature_with_cap(x, degree, s, t, DEFAULT_MAX_DEGREE)
}

pub fn signature_with_cap(
    x: &SampledPath,
    degree: usize,
    s: f64,
    t: f64,
    cap: usize,
) -> Result<TruncTensor> {
    check_degree(degree, cap)?;
    let i = x.index_of(s)?;
    let j = x.index_of(t)?;
    if i > j {
        return Err(Error::InvalidParameter(format!("reversed window [{s}, {t}]")));
    }
    signature_indices(x, degree, i, j)
}

/// Signature over the whole path.
pub fn signature_full(x: &SampledPath, degree: usize) -> Result<TruncTensor> {
    check_degree(degree, DEFAULT_MAX_DEGREE)?;
    signature_indices(x, degree, 0, x.len() - 1)
}

/// Signatures `S_(i,j)` for every pair of grid indices `i <= j`.
#[derive(Clone, Debug)]
pub struct WindowSignatures {
    n: usize,
    rows: Vec<Vec<TruncTensor>>,
}

impl WindowSignatures {
    pub fn new(x: &SampledPath, degree: usize) -> Result<Self> {
        let segs = segment_signatures(x, degree)?;
        let n = x.len();
        let unit = TruncTensor::unit(x.dim(), degree)?;
        let rows = par::map_range(n, |i| {
            let mut row = Vec::with_capacity(n - i);
            let mut acc = unit.clone();
            row.push(acc.clone());
            for seg in &segs[i..] {
                acc = acc.mul_unchecked(seg);
                row.push(acc.clone());
            }
            row
        });
        Ok(Self { n, rows })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> &TruncTensor {
        &self.rows[i][j - i]
    }
}

/// Concatenation `(x * y)_u = y_u - y_t + x_t`.
pub fn concat_paths(x: &SampledPath, y: &SampledPath) -> Result<SampledPath> {
    let (_, t) = x.span();
    let (t2, _) = y.span();
    if (t - t2).abs() > 1e-12 * t.abs().max(1.0) {
        return Err(Error::NotAdjacent(t, t2));
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(x.dim(), y.dim()));
    }
    let shift: Vec<f64> = x.end().iter().zip(y.start()).map(|(a, b)| a - b).collect();
    let mut times = x.times().to_vec();
    let mut values = x.values().to_vec();
    for k in 1..y.len() {
        times.push(y.times()[k]);
        values.extend(y.point(k).iter().zip(&shift).map(|(v, s)| v + s));
    }
    SampledPath::from_flat(times, x.dim(), values)
}

/// Per-level `l1` norm of `S_(s,t) - S_(s,u) S_(u,t)`.
pub fn chen_check(x: &SampledPath, degree: usize, s: f64, u: f64, t: f64) -> Result<Vec<f64>> {
    let (i, k, j) = (x.index_of(s)?, x.index_of(u)?, x.index_of(t)?);
    if !(i <= k && k <= j) {
        return Err(Error::InvalidParameter("need s <= u <= t".into()));
    }
    let whole = signature_indices(x, degree, i, j)?;
    let left = signature_indices(x, degree, i, k)?;
    let right = signature_indices(x, degree, k, j)?;
    whole.level_distances(&left.mul_unchecked(&right))
}

/// Largest coordinate deviation from Chen's identity over all grid triples.
pub fn chen_check_all(x: &SampledPath, degree: usize) -> Result<f64> {
    let table = WindowSignatures::new(x, degree)?;
    let n = x.len();
    let worst = par::map_range(n, |i| {
        let mut worst = 0.0f64;
        for k in i..n {
            for j in k..n {
                let prod = table.get(i, k).mul_unchecked(table.get(k, j));
                let dev = table.get(i, j).max_abs_diff(&prod).unwrap_or(f64::INFINITY);
                worst = worst.max(dev);
            }
        }
        worst
    });
    Ok(worst.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub holds: bool,
    /// Largest `||S^n|| n! / ||x||_1^n` over windows and levels `n >= 1`.
    pub worst_ratio: f64,
    /// Window and level at which `worst_ratio` is reached.
    pub worst_at: (usize, usize, usize),
}

/// Checks `||S^n_(s,t)|| <= ||x||_(1,[s,t])^n / n!` on every grid window.
pub fn factorial_decay_check(x: &SampledPath, degree: usize) -> Result<DecayReport> {
    let table = WindowSignatures::new(x, degree)?;
    let n = x.len();
    let seg_len: Vec<f64> = (0..x.segments())
        .map(|k| l1_dist(x.point(k), x.point(k + 1)))
        .collect();
    let rows = par::map_range(n, |i| {
        let mut holds = true;
        let mut worst = (0.0f64, (i, i, 0));
        let mut length = 0.0;
        for j in i + 1..n {
            length += seg_len[j - 1];
            let norms = table.get(i, j).level_norms();
            let mut bound = 1.0;
            for (level, norm) in norms.iter().enumerate().skip(1) {
                bound *= length / level as f64;
                if !leq_with_slack(*norm, bound) {
                    holds = false;
                }
                let ratio = if bound > 0.0 { norm / bound } else if *norm > 0.0 { f64::INFINITY } else { 0.0 };
                if ratio > worst.0 {
                    worst = (ratio, (i, j, level));
                }
            }
        }
        (holds, worst)
    });
    let holds = rows.iter().all(|r| r.0);
    let (worst_ratio, worst_at) = rows
        .into_iter()
        .map(|r| r.1)
        .fold((0.0, (0, 0, 0)), |a, b| if b.0 > a.0 { b } else { a });
    Ok(DecayReport {
        holds,
        worst_ratio,
        worst_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(points: &[[f64; 2]]) -> SampledPath {
        SampledPath::uniform(0.0, 1.0, points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn single_segment_is_exponential() {
        let x = path(&[[0.0, 0.0], [1.0, -2.0]]);
        let s = signature(&x, 4, 0.0, 1.0).unwrap();
        let e = TruncTensor::exp_vector(&[1.0, -2.0], 4).unwrap();
        assert!(s.max_abs_diff(&e).unwrap() < 1e-15);
    }

    #[test]
    fn two_segments_level_two() {
        let (d1, d2) = ([1.0, 0.5], [-0.25, 2.0]);
        let x = path(&[[0.0, 0.0], d1, [d1[0] + d2[0], d1[1] + d2[1]]]);
        let s = signature(&x, 2, 0.0, 1.0).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let expected = d1[a] * d1[b] / 2.0 + d1[a] * d2[b] + d2[a] * d2[b] / 2.0;
                assert!((s.level(2)[a * 2 + b] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn signature_errors() {
        let x = path(&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]]);
        assert!(matches!(signature(&x, 2, 0.25, 1.0), Err(Error::OffGrid(_))));
        assert!(matches!(signature(&x, 7, 0.0, 1.0), Err(Error::DegreeTooLarge { .. })));
        assert_eq!(signature(&x, 3, 0.5, 0.5).unwrap(), TruncTensor::unit(2, 3).unwrap());
    }

    #[test]
    fn concatenation() {
        let x = SampledPath::new(vec![0.0, 1.0], vec![vec![0.0], vec![2.0]]).unwrap();
        let y = SampledPath::new(vec![1.0, 2.0, 3.0], vec![vec![5.0], vec![4.0], vec![7.0]]).unwrap();
        let z = concat_paths(&x, &y).unwrap();
        assert_eq!(z.times(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(z.values(), &[0.0, 2.0, 1.0, 4.0]);
        let far = SampledPath::new(vec![1.5, 2.0], vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(concat_paths(&x, &far), Err(Error::NotAdjacent(..))));
        let w = SampledPath::new(vec![3.0, 4.0], vec![vec![1.0], vec![-1.0]]).unwrap();
        let left = concat_paths(&concat_paths(&x, &y).unwrap(), &w).unwrap();
        let right = concat_paths(&x, &concat_paths(&y, &w).unwrap()).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn chen_on_a_small_path() {
        let x = path(&[[0.0, 0.0], [0.3, 0.1], [0.2, -0.4], [0.9, 0.0], [1.0, 1.0]]);
        let dev = chen_check(&x, 4, 0.0, 0.5, 1.0).unwrap();
        assert!(dev.iter().all(|&d| d < 1e-14));
        assert!(chen_check_all(&x, 4).unwrap() < 1e-14);
        let s0s = signature(&x, 4, 0.0, 0.25).unwrap();
        let s0t = signature(&x, 4, 0.0, 1.0).unwrap();
        let sst = signature(&x, 4, 0.25, 1.0).unwrap();
        let via_inverse = s0s.inverse().unwrap().mul(&s0t).unwrap();
        assert!(via_inverse.max_abs_diff(&sst).unwrap() < 1e-13);
    }

    #[test]
    fn factorial_decay_is_tight_for_a_segment() {
        let x = SampledPath::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.7]]).unwrap();
        let r = factorial_decay_check(&x, 5).unwrap();
        assert!(r.holds);
        assert!((r.worst_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zigzag_has_growing_slack() {
        let values: Vec<Vec<f64>> = (0..9).map(|k| vec![if k % 2 == 0 { 0.0 } else { 1.0 }]).collect();
        let x = SampledPath::uniform(0.0, 1.0, values).unwrap();
        let s = signature_full(&x, 3).unwrap();
        let length: f64 = 8.0;
        let ratios: Vec<f64> = (1..=3)
            .map(|n| {
                let bound = length.powi(n as i32) / (1..=n).product::<usize>() as f64;
                s.level_norm(n) / bound
            })
            .collect();
        assert!(ratios[0] < 1e-15);
        assert!(factorial_decay_check(&x, 3).unwrap().holds);
    }
}
