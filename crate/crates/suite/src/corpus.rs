//! Deterministic test paths.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roughpath::tensor::TruncTensor;
use roughpath::{GridFunctional, Result, RoughPath, SampledPath};

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Random walk on `[0, 1]` with uniform grid and steps `U(-1, 1) / sqrt(n)`.
pub fn random_walk<R: Rng>(rng: &mut R, dim: usize, segments: usize) -> SampledPath {
    let scale = 1.0 / (segments as f64).sqrt();
    let mut point = vec![0.0; dim];
    let mut points = vec![point.clone()];
    for _ in 0..segments {
        for v in &mut point {
            *v += scale * rng.gen_range(-1.0..1.0);
        }
        points.push(point.clone());
    }
    SampledPath::uniform(0.0, 1.0, points).expect("valid walk")
}

/// Random walk with jittered sample times.
pub fn random_walk_jittered<R: Rng>(rng: &mut R, dim: usize, segments: usize) -> SampledPath {
    let walk = random_walk(rng, dim, segments);
    let mut times: Vec<f64> = (0..=segments)
        .map(|k| (k as f64 + if k == 0 || k == segments { 0.0 } else { rng.gen_range(-0.3..0.3) }) / segments as f64)
        .collect();
    times[0] = 0.0;
    SampledPath::new(times, walk.points().map(<[f64]>::to_vec).collect()).expect("increasing times")
}

/// Zigzag between random turning points in `[-1, 1]^dim`.
pub fn zigzag<R: Rng>(rng: &mut R, dim: usize, turns: usize) -> SampledPath {
    let points = (0..=turns)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (0..dim).map(|_| sign * rng.gen_range(0.2..1.0)).collect()
        })
        .collect();
    SampledPath::uniform(0.0, 1.0, points).expect("valid zigzag")
}

/// The regular `n`-gon inscribed in the unit circle, run once
/// counterclockwise from `(1, 0)`.
pub fn inscribed_polygon(n: usize) -> SampledPath {
    let points = (0..=n)
        .map(|k| {
            let a = 2.0 * PI * (k % n) as f64 / n as f64;
            vec![a.cos(), a.sin()]
        })
        .collect();
    SampledPath::uniform(0.0, 1.0, points).expect("valid polygon")
}

/// Samples of `t -> (cos, sin)(a + 2π turns t)`.
pub fn circle_path(turns: f64, phase: f64, samples: usize) -> SampledPath {
    let points = (0..=samples)
        .map(|k| {
            let a = phase + 2.0 * PI * turns * k as f64 / samples as f64;
            vec![a.cos(), a.sin()]
        })
        .collect();
    SampledPath::uniform(0.0, 1.0, points).expect("valid circle path")
}

/// A wiggly path from near the south pole to near the north pole of the
/// unit sphere, crossing the equator several times in longitude.
pub fn sphere_path(samples: usize) -> SampledPath {
    let points = (0..=samples)
        .map(|k| {
            let t = k as f64 / samples as f64;
            let lat = -1.2 + 2.4 * t + 0.1 * (9.0 * PI * t).sin();
            let lon = 3.0 * PI * t;
            vec![lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
        })
        .collect();
    SampledPath::uniform(0.0, 1.0, points).expect("valid sphere path")
}

/// Ambient representatives in `[0, 1)^2` of a path winding around the torus.
pub fn torus_path(samples: usize) -> SampledPath {
    let points = (0..=samples)
        .map(|k| {
            let t = k as f64 / samples as f64;
            let x = 0.1 + 2.3 * t + 0.05 * (11.0 * t).sin();
            let y = 0.7 - 1.6 * t + 0.04 * (7.0 * t).cos();
            vec![x.rem_euclid(1.0), y.rem_euclid(1.0)]
        })
        .collect();
    SampledPath::uniform(0.0, 1.0, points).expect("valid torus path")
}

/// A degree-2 lift of a planar random walk whose cells carry extra area
/// `a_k (e1 e2 - e2 e1)` on top of the increment: a rough path that is not
/// the lift of its trace.
pub fn level2_test_lift<R: Rng>(rng: &mut R, segments: usize, area: f64) -> Result<RoughPath> {
    let walk = random_walk(rng, 2, segments);
    let cells = (0..segments)
        .map(|k| {
            let inc = walk.increment(k, k + 1);
            let a = area * rng.gen_range(-1.0..1.0) / segments as f64;
            let log = TruncTensor::from_levels(2, vec![vec![0.0], inc, vec![0.0, a, -a, 0.0]])?;
            log.exp()
        })
        .collect::<Result<Vec<_>>>()?;
    let f = GridFunctional::new(walk.times().to_vec(), cells)?;
    RoughPath::new(2.5, walk.start().to_vec(), f)
}
