#![allow(dead_code)]

use proptest::prelude::*;
use roughpath::{SampledPath, TruncTensor};

/// Piecewise-linear paths on a jittered grid of `[0, 1]`.
pub fn path(dim: usize, max_segments: usize) -> impl Strategy<Value = SampledPath> {
    (1..=max_segments).prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), n + 1),
            prop::collection::vec(0.2f64..1.0, n),
        )
            .prop_map(|(points, gaps)| {
                let total: f64 = gaps.iter().sum();
                let mut times = vec![0.0];
                let mut acc = 0.0;
                for g in &gaps {
                    acc += g / total;
                    times.push(acc);
                }
                *times.last_mut().unwrap() = 1.0;
                SampledPath::new(times, points).unwrap()
            })
    })
}

pub fn any_path(max_dim: usize, max_segments: usize) -> impl Strategy<Value = SampledPath> {
    (1..=max_dim).prop_flat_map(move |d| path(d, max_segments))
}

/// Tensors with scalar part bounded away from zero.
pub fn tensor(dim: usize, degree: usize) -> impl Strategy<Value = TruncTensor> {
    let sizes: Vec<usize> = (1..=degree).map(|i| dim.pow(i as u32)).collect();
    let levels: Vec<_> = sizes.into_iter().map(|s| prop::collection::vec(-1.0f64..1.0, s)).collect();
    (prop_oneof![0.5f64..2.0, -2.0f64..-0.5], levels).prop_map(move |(s, rest)| {
        let mut all = vec![vec![s]];
        all.extend(rest);
        TruncTensor::from_levels(dim, all).unwrap()
    })
}

/// Group-like tensors: products of exponentials of vectors.
pub fn group_element(dim: usize, degree: usize) -> impl Strategy<Value = TruncTensor> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), 1..5).prop_map(move |vs| {
        vs.iter().fold(TruncTensor::unit(dim, degree).unwrap(), |acc, v| {
            acc.mul(&TruncTensor::exp_vector(v, degree).unwrap()).unwrap()
        })
    })
}

pub fn close(a: &TruncTensor, b: &TruncTensor, tol: f64) -> bool {
    let scale = 1.0 + a.norm().max(b.norm());
    a.max_abs_diff(b).unwrap() <= tol * scale
}
