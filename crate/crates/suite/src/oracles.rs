//! Reference computations written independently of the library kernels.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use roughpath::tensor::TruncTensor;
use roughpath::{LipJet, Result, SampledPath};

/// p-th power of the p-variation by enumerating every subdivision of the
/// sample grid. Sums run left to right.
pub fn brute_force_pvar_pow(x: &SampledPath, p: f64) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let inner = n - 2;
    let mut best = 0.0f64;
    for mask in 0u64..(1u64 << inner) {
        let mut prev = 0;
        let mut sum = 0.0;
        for k in 1..n {
            if k == n - 1 || mask & (1 << (k - 1)) != 0 {
                let d: f64 = x.point(k).iter().zip(x.point(prev)).map(|(a, b)| (a - b).abs()).sum();
                sum += d.powf(p);
                prev = k;
            }
        }
        best = best.max(sum);
    }
    best
}

/// Area enclosed by a closed polygon (counterclockwise positive).
pub fn shoelace_area(x: &SampledPath) -> f64 {
    let pts: Vec<&[f64]> = x.points().collect();
    pts.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum::<f64>() / 2.0
}

/// Area of the regular `n`-gon inscribed in the unit circle.
pub fn inscribed_area(n: usize) -> f64 {
    0.5 * n as f64 * (2.0 * std::f64::consts::PI / n as f64).sin()
}

/// Area of the regular `n`-gon circumscribed about the unit circle.
pub fn circumscribed_area(n: usize) -> f64 {
    n as f64 * (std::f64::consts::PI / n as f64).tan()
}

/// Level 1 and 2 iterated integrals of `u -> f(a + u (b - a))`, `u` in
/// `[0, 1]`, by Gauss-Legendre quadrature on `pieces` equal sub-intervals.
pub fn image_segment_signature(f: &LipJet, a: &[f64], b: &[f64], pieces: usize, nodes: usize) -> Result<TruncTensor> {
    let quad = GaussLegendre::new(NonZeroUsize::new(nodes).expect("positive"));
    let d = a.len();
    let e = f.dim_out();
    let v: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let at = |u: f64| -> Vec<f64> { a.iter().zip(&v).map(|(p, q)| p + u * q).collect() };
    let velocity = |u: f64| -> Vec<f64> {
        let jac = f.derivative(&at(u), 1);
        (0..e).map(|i| (0..d).map(|j| jac[i * d + j] * v[j]).sum()).collect()
    };
    let y0 = f.value(a);
    let mut level2 = vec![0.0; e * e];
    for k in 0..pieces {
        let (lo, hi) = (k as f64 / pieces as f64, (k + 1) as f64 / pieces as f64);
        let ylo = f.value(&at(lo));
        let yhi = f.value(&at(hi));
        for i in 0..e {
            for j in 0..e {
                let inner = quad.integrate(lo, hi, |u| (f.value(&at(u))[i] - ylo[i]) * velocity(u)[j]);
                level2[i * e + j] += inner + (ylo[i] - y0[i]) * (yhi[j] - ylo[j]);
            }
        }
    }
    let level1: Vec<f64> = f.value(b).iter().zip(&y0).map(|(p, q)| p - q).collect();
    TruncTensor::from_levels(e, vec![vec![1.0], level1, level2])
}

/// Cellwise quadrature signatures of `f ∘ x` truncated at `degree <= 2`.
pub fn image_cells(f: &LipJet, x: &SampledPath, degree: usize) -> Result<Vec<TruncTensor>> {
    (0..x.segments())
        .map(|k| image_segment_signature(f, x.point(k), x.point(k + 1), 8, 24)?.project(degree))
        .collect()
}
