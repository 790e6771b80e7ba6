//! Lipschitz jets in the sense of Stein.
//!
//! A map `f: R^d -> R^e` of degree `n + ε` comes with its derivatives
//! `f^0, ..., f^n`. The `k`-th derivative at `x` is a symmetric `k`-linear
//! map stored as an `e x d^k` row-major array (output index first, then the
//! argument multi-index with the last letter varying fastest).
//!
//! Norms on `R^d` are `l1`, so the norm of a multilinear map is the largest
//! `l1` column norm over argument multi-indices.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::covers::{extract_subdivision, refine_from_open_cover, Interval, OpenInterval};
use crate::error::{Error, Result};
use crate::variation::{l1_dist, natural_control, p_variation_pow_indices, SampledPath};

/// Derivatives beyond this order are never requested.
pub const MAX_JET_ORDER: usize = 3;

/// A smooth map with derivatives available up to `max_order`.
pub trait JetMap: Send + Sync + fmt::Debug {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn max_order(&self) -> usize;
    /// `f^k(x)` as an `e x d^k` row-major array.
    fn derivative(&self, x: &[f64], k: usize) -> Vec<f64>;
    fn in_domain(&self, _x: &[f64]) -> bool {
        true
    }
}

fn pow_usize(d: usize, k: usize) -> usize {
    d.pow(k as u32)
}

/// Letters of the flat multi-index `idx` of length `k`.
fn digits(mut idx: usize, d: usize, k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for slot in out.iter_mut().rev() {
        *slot = idx % d;
        idx /= d;
    }
    out
}

fn flat(letters: &[usize], d: usize) -> usize {
    letters.iter().fold(0, |acc, &l| acc * d + l)
}

/// A constant map.
#[derive(Clone, Debug)]
pub struct Constant {
    pub dim_in: usize,
    pub value: Vec<f64>,
}

impl JetMap for Constant {
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.value.len()
    }
    fn max_order(&self) -> usize {
        usize::MAX
    }
    fn derivative(&self, _x: &[f64], k: usize) -> Vec<f64> {
        if k == 0 {
            self.value.clone()
        } else {
            vec![0.0; self.value.len() * pow_usize(self.dim_in, k)]
        }
    }
}

/// `x -> A x + b` with `A` stored row-major (`e x d`).
#[derive(Clone, Debug)]
pub struct Affine {
    pub dim_in: usize,
    pub matrix: Vec<f64>,
    pub offset: Vec<f64>,
}

impl Affine {
    pub fn new(dim_in: usize, matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        if dim_in == 0 || matrix.len() != dim_in * offset.len() {
            return Err(Error::InvalidParameter(format!(
                "matrix of {} entries does not map R^{dim_in} to R^{}",
                matrix.len(),
                offset.len()
            )));
        }
        Ok(Self {
            dim_in,
            matrix,
            offset,
        })
    }

    pub fn identity(d: usize) -> Self {
        let mut matrix = vec![0.0; d * d];
        for i in 0..d {
            matrix[i * d + i] = 1.0;
        }
        Self {
            dim_in: d,
            matrix,
            offset: vec![0.0; d],
        }
    }

    pub fn linear(dim_in: usize, matrix: Vec<f64>) -> Result<Self> {
        let e = matrix.len() / dim_in.max(1);
        Self::new(dim_in, matrix, vec![0.0; e])
    }
}

impl JetMap for Affine {
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.offset.len()
    }
    fn max_order(&self) -> usize {
        usize::MAX
    }
    fn derivative(&self, x: &[f64], k: usize) -> Vec<f64> {
        let d = self.dim_in;
        match k {
            0 => self
                .matrix
                .chunks(d)
                .zip(&self.offset)
                .map(|(row, b)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
                .collect(),
            1 => self.matrix.clone(),
            _ => vec![0.0; self.offset.len() * pow_usize(d, k)],
        }
    }
}

/// A monomial `coef * prod_i x_i^(powers_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// A polynomial map, one list of monomials per output coordinate.
#[derive(Clone, Debug)]
pub struct Polynomial {
    pub dim_in: usize,
    pub components: Vec<Vec<Monomial>>,
}

impl Polynomial {
    pub fn new(dim_in: usize, components: Vec<Vec<Monomial>>) -> Result<Self> {
        if components.iter().flatten().any(|m| m.powers.len() != dim_in) {
            return Err(Error::InvalidParameter("monomial arity differs from the input dimension".into()));
        }
        Ok(Self { dim_in, components })
    }

    /// `x -> (x_1^k, ..., x_d^k)`.
    pub fn componentwise_power(d: usize, k: u32) -> Self {
        let components = (0..d)
            .map(|i| {
                let mut powers = vec![0; d];
                powers[i] = k;
                vec![Monomial { coef: 1.0, powers }]
            })
            .collect();
        Self {
            dim_in: d,
            components,
        }
    }

    /// `x -> sum_i x_i^2`.
    pub fn norm2(d: usize) -> Self {
        let terms = (0..d)
            .map(|i| {
                let mut powers = vec![0; d];
                powers[i] = 2;
                Monomial { coef: 1.0, powers }
            })
            .collect();
        Self {
            dim_in: d,
            components: vec![terms],
        }
    }

    fn monomial_derivative(m: &Monomial, x: &[f64], letters: &[usize]) -> f64 {
        let mut counts = vec![0u32; m.powers.len()];
        for &l in letters {
            counts[l] += 1;
        }
        let mut value = m.coef;
        for ((&a, &c), &xi) in m.powers.iter().zip(&counts).zip(x) {
            if c > a {
                return 0.0;
            }
            for j in 0..c {
                value *= (a - j) as f64;
            }
            value *= xi.powi((a - c) as i32);
        }
        value
    }
}

impl JetMap for Polynomial {
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.components.len()
    }
    fn max_order(&self) -> usize {
        usize::MAX
    }
    fn derivative(&self, x: &[f64], k: usize) -> Vec<f64> {
        let d = self.dim_in;
        let width = pow_usize(d, k);
        let mut out = Vec::with_capacity(self.components.len() * width);
        for comp in &self.components {
            for idx in 0..width {
                let letters = digits(idx, d, k);
                out.push(comp.iter().map(|m| Self::monomial_derivative(m, x, &letters)).sum());
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Elementary {
    Sin,
    Cos,
    Exp,
}

impl Elementary {
    fn derivative(self, t: f64, k: usize) -> f64 {
        match self {
            Elementary::Exp => t.exp(),
            Elementary::Sin => match k % 4 {
                0 => t.sin(),
                1 => t.cos(),
                2 => -t.sin(),
                _ => -t.cos(),
            },
            Elementary::Cos => match k % 4 {
                0 => t.cos(),
                1 => -t.sin(),
                2 => -t.cos(),
                _ => t.sin(),
            },
        }
    }
}

/// `x -> (g(x_1), ..., g(x_d))`.
#[derive(Clone, Debug)]
pub struct Componentwise {
    pub dim: usize,
    pub func: Elementary,
}

impl JetMap for Componentwise {
    fn dim_in(&self) -> usize {
        self.dim
    }
    fn dim_out(&self) -> usize {
        self.dim
    }
    fn max_order(&self) -> usize {
        usize::MAX
    }
    fn derivative(&self, x: &[f64], k: usize) -> Vec<f64> {
        let d = self.dim;
        let width = pow_usize(d, k);
        let mut out = vec![0.0; d * width];
        for o in 0..d {
            let diag = flat(&vec![o; k], d);
            out[o * width + diag] = self.func.derivative(x[o], k);
        }
        out
    }
}

/// `g ∘ f`, with derivatives by the chain rule up to order 3.
#[derive(Clone, Debug)]
pub struct Compose {
    pub outer: Arc<dyn JetMap>,
    pub inner: Arc<dyn JetMap>,
}

impl JetMap for Compose {
    fn dim_in(&self) -> usize {
        self.inner.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.outer.dim_out()
    }
    fn max_order(&self) -> usize {
        self.outer.max_order().min(self.inner.max_order()).min(MAX_JET_ORDER)
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        self.inner.in_domain(x) && self.outer.in_domain(&self.inner.derivative(x, 0))
    }
    fn derivative(&self, x: &[f64], k: usize) -> Vec<f64> {
        assert!(k <= self.max_order(), "derivative order {k} unavailable");
        let (d, m, e) = (self.dim_in(), self.inner.dim_out(), self.dim_out());
        let y = self.inner.derivative(x, 0);
        if k == 0 {
            return self.outer.derivative(&y, 0);
        }
        let f1 = self.inner.derivative(x, 1);
        let df = |a: usize, j: usize| f1[a * d + j];
        let g1 = self.outer.derivative(&y, 1);
        let width = pow_usize(d, k);
        let mut out = vec![0.0; e * width];
        match k {
            1 => {
                for o in 0..e {
                    for j in 0..d {
                        out[o * d + j] = (0..m).map(|a| g1[o * m + a] * df(a, j)).sum();
                    }
                }
            }
            2 => {
                let f2 = self.inner.derivative(x, 2);
                let g2 = self.outer.derivative(&y, 2);
                for o in 0..e {
                    for j1 in 0..d {
                        for j2 in 0..d {
                            let mut v = 0.0;
                            for a in 0..m {
                                v += g1[o * m + a] * f2[(a * d + j1) * d + j2];
                                for b in 0..m {
                                    v += g2[(o * m + a) * m + b] * df(a, j1) * df(b, j2);
                                }
                            }
                            out[(o * d + j1) * d + j2] = v;
                        }
                    }
                }
            }
            _ => {
                let f2 = self.inner.derivative(x, 2);
                let f3 = self.inner.derivative(x, 3);
                let g2 = self.outer.derivative(&y, 2);
                let g3 = self.outer.derivative(&y, 3);
                let d2f = |a: usize, i: usize, j: usize| f2[(a * d + i) * d + j];
                for o in 0..e {
                    for j1 in 0..d {
                        for j2 in 0..d {
                            for j3 in 0..d {
                                let mut v = 0.0;
                                for a in 0..m {
                                    v += g1[o * m + a] * f3[((a * d + j1) * d + j2) * d + j3];
                                    for b in 0..m {
                                        let g = g2[(o * m + a) * m + b];
                                        v += g
                                            * (d2f(a, j1, j2) * df(b, j3)
                                                + d2f(a, j1, j3) * df(b, j2)
                                                + d2f(a, j2, j3) * df(b, j1));
                                        for c in 0..m {
                                            v += g3[((o * m + a) * m + b) * m + c]
                                                * df(a, j1)
                                                * df(b, j2)
                                                * df(c, j3);
                                        }
                                    }
                                }
                                out[((o * d + j1) * d + j2) * d + j3] = v;
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// A map of degree `n + ε` with a claimed Lipschitz norm.
#[derive(Clone)]
pub struct LipJet {
    map: Arc<dyn JetMap>,
    n: usize,
    eps: f64,
    norm: f64,
    name: String,
}

impl fmt::Debug for LipJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LipJet")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("eps", &self.eps)
            .field("norm", &self.norm)
            .finish()
    }
}

impl LipJet {
    pub fn new(map: Arc<dyn JetMap>, n: usize, eps: f64, norm: f64, name: impl Into<String>) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter(format!("ε must lie in (0, 1], got {eps}")));
        }
        if n > MAX_JET_ORDER || n > map.max_order() {
            return Err(Error::DegreeTooLarge {
                requested: n,
                cap: MAX_JET_ORDER.min(map.max_order()),
            });
        }
        if !(norm >= 0.0) || !norm.is_finite() {
            return Err(Error::InvalidParameter(format!("norm must be finite and >= 0, got {norm}")));
        }
        Ok(Self {
            map,
            n,
            eps,
            norm,
            name: name.into(),
        })
    }

    pub fn map(&self) -> &Arc<dyn JetMap> {
        &self.map
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `γ = n + ε`.
    pub fn gamma(&self) -> f64 {
        self.n as f64 + self.eps
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_in(&self) -> usize {
        self.map.dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.map.dim_out()
    }

    pub fn with_norm(&self, norm: f64) -> Self {
        Self {
            norm,
            ..self.clone()
        }
    }

    pub fn with_degree(&self, n: usize, eps: f64) -> Result<Self> {
        Self::new(self.map.clone(), n, eps, self.norm, self.name.clone())
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        self.map.in_domain(x)
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        self.map.derivative(x, 0)
    }

    pub fn derivative(&self, x: &[f64], k: usize) -> Vec<f64> {
        self.map.derivative(x, k)
    }

    /// `f^k(x)` applied to a `k`-tensor `v` (length `d^k`).
    pub fn apply(&self, x: &[f64], k: usize, v: &[f64]) -> Vec<f64> {
        let jet = self.derivative(x, k);
        let width = v.len();
        jet.chunks(width)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn checked_value(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !self.in_domain(x) {
            return Err(Error::DomainExit(x.to_vec()));
        }
        Ok(self.value(x))
    }

    /// Applies the map to every sample of a path.
    pub fn map_path(&self, x: &SampledPath) -> Result<SampledPath> {
        if x.dim() != self.dim_in() {
            return Err(Error::DimensionMismatch(self.dim_in(), x.dim()));
        }
        x.map_points(|p| self.checked_value(p))
    }
}

/// `a (x) b` for flat tensors.
fn outer(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|&u| b.iter().map(move |&v| u * v)).collect()
}

/// `R_k(x, y)(v) = f^k(x)(v) - sum_(j=k..n) f^j(y)(v (x) (x-y)^(j-k) / (j-k)!)`.
pub fn taylor_remainder(f: &LipJet, k: usize, x: &[f64], y: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if k > f.n {
        return Err(Error::DegreeTooLarge { requested: k, cap: f.n });
    }
    let d = f.dim_in();
    if x.len() != d || y.len() != d {
        return Err(Error::DimensionMismatch(d, x.len().max(y.len())));
    }
    if v.len() != pow_usize(d, k) {
        return Err(Error::InvalidParameter(format!("argument must have {} entries", pow_usize(d, k))));
    }
    let h: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut r = f.apply(x, k, v);
    let mut arg = v.to_vec();
    let mut fact = 1.0;
    for j in k..=f.n {
        if j > k {
            arg = outer(&arg, &h);
            fact *= (j - k) as f64;
        }
        for (ri, ti) in r.iter_mut().zip(f.apply(y, j, &arg)) {
            *ri -= ti / fact;
        }
    }
    Ok(r)
}

/// Norm of a multilinear map stored as `e x width`: the largest `l1`
/// column norm.
fn multilinear_norm(jet: &[f64], e: usize) -> f64 {
    let width = jet.len() / e.max(1);
    (0..width)
        .map(|c| (0..e).map(|o| jet[o * width + c].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Norm of `R_k(x, y)` as a `k`-linear map.
fn remainder_norm(f: &LipJet, k: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    let width = pow_usize(f.dim_in(), k);
    let mut basis = vec![0.0; width];
    let mut best = 0.0f64;
    for c in 0..width {
        basis.iter_mut().for_each(|b| *b = 0.0);
        basis[c] = 1.0;
        let r = taylor_remainder(f, k, x, y, &basis)?;
        best = best.max(r.iter().map(|v| v.abs()).sum());
    }
    Ok(best)
}

/// Lower estimate of the Lipschitz norm from a finite sample set: the
/// largest sup-norm of the derivatives and remainder ratio
/// `||R_k(x,y)|| / ||x - y||^(γ - k)` over samples and pairs.
pub fn lip_norm_estimate(f: &LipJet, samples: &[Vec<f64>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("empty sample set".into()));
    }
    let e = f.dim_out();
    let gamma = f.gamma();
    let mut best = 0.0f64;
    for x in samples {
        if x.len() != f.dim_in() {
            return Err(Error::DimensionMismatch(f.dim_in(), x.len()));
        }
        for k in 0..=f.n {
            best = best.max(multilinear_norm(&f.derivative(x, k), e));
        }
    }
    for (a, x) in samples.iter().enumerate() {
        for y in &samples[a + 1..] {
            let dist = l1_dist(x, y);
            if dist == 0.0 {
                continue;
            }
            for k in 0..=f.n {
                let ratio = remainder_norm(f, k, x, y)? / dist.powf(gamma - k as f64);
                let swapped = remainder_norm(f, k, y, x)? / dist.powf(gamma - k as f64);
                best = best.max(ratio).max(swapped);
            }
        }
    }
    Ok(best)
}

/// `g ∘ f` with its norm estimated on `samples`; the second value is the
/// ratio of that estimate to `||g|| max(||f||^γ, 1)`.
pub fn compose_jets(g: &LipJet, f: &LipJet, samples: &[Vec<f64>]) -> Result<(LipJet, f64)> {
    if f.dim_out() != g.dim_in() {
        return Err(Error::DimensionMismatch(g.dim_in(), f.dim_out()));
    }
    let map: Arc<dyn JetMap> = Arc::new(Compose {
        outer: g.map.clone(),
        inner: f.map.clone(),
    });
    let n = g.n.min(f.n);
    let eps = if g.n == f.n { g.eps.min(f.eps) } else if g.n < f.n { g.eps } else { f.eps };
    let provisional = LipJet::new(map, n, eps, 0.0, format!("{}∘{}", g.name, f.name))?;
    let estimate = lip_norm_estimate(&provisional, samples)?;
    let gamma = provisional.gamma();
    let reference = g.norm * f.norm.powf(gamma).max(1.0);
    let ratio = if reference > 0.0 { estimate / reference } else { f64::INFINITY };
    Ok((provisional.with_norm(estimate), ratio))
}

/// Largest asymmetry of `f^k(x)` under transpositions of its arguments.
pub fn symmetry_defect(f: &LipJet, x: &[f64], k: usize) -> f64 {
    let d = f.dim_in();
    let jet = f.derivative(x, k);
    let width = pow_usize(d, k);
    let mut worst = 0.0f64;
    for o in 0..f.dim_out() {
        for idx in 0..width {
            let letters = digits(idx, d, k);
            for a in 0..k {
                for b in a + 1..k {
                    let mut swapped = letters.clone();
                    swapped.swap(a, b);
                    let other = flat(&swapped, d);
                    worst = worst.max((jet[o * width + idx] - jet[o * width + other]).abs());
                }
            }
        }
    }
    worst
}

/// Largest difference between `f^(k+1)(x)` and the central difference
/// quotient of `f^k` with step `h`.
pub fn finite_difference_defect(f: &LipJet, x: &[f64], k: usize, h: f64) -> f64 {
    let d = f.dim_in();
    let width = pow_usize(d, k);
    let next = f.derivative(x, k + 1);
    let mut worst = 0.0f64;
    for j in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (f.derivative(&xp, k), f.derivative(&xm, k));
        for o in 0..f.dim_out() {
            for idx in 0..width {
                let quotient = (fp[o * width + idx] - fm[o * width + idx]) / (2.0 * h);
                let exact = next[(o * width + idx) * d + j];
                worst = worst.max((quotient - exact).abs());
            }
        }
    }
    worst
}

/// A closed `l1` ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    /// `r - ||x - c||`, positive inside.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.radius - l1_dist(&self.center, x)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.margin(x) > 0.0
    }
}

/// A subdivision of the span of a path in which each piece stays inside one
/// ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallSubdivision {
    pub points: Vec<f64>,
    /// Ball index for each piece.
    pub balls: Vec<usize>,
}

impl BallSubdivision {
    pub fn pieces(&self) -> usize {
        self.balls.len()
    }
}

/// Largest open time interval around `t` on which `||x_s - center|| < rho`.
fn exit_interval(x: &SampledPath, t: f64, center: &[f64], rho: f64) -> Result<OpenInterval> {
    let times = x.times();
    let dist = |s: f64| -> Result<f64> { Ok(l1_dist(&x.value_at(s)?, center)) };
    // Crossing on a segment where the distance is below rho at `inside` and
    // at least rho at `outside`; the distance is convex along a segment.
    let crossing = |mut inside: f64, mut outside: f64| -> Result<f64> {
        for _ in 0..80 {
            let mid = 0.5 * (inside + outside);
            if dist(mid)? < rho {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(outside)
    };
    let k = times.partition_point(|&s| s <= t);
    let mut hi = f64::INFINITY;
    let mut prev = t;
    for &s in &times[k..] {
        if dist(s)? >= rho {
            hi = crossing(prev, s)?;
            break;
        }
        prev = s;
    }
    let k = times.partition_point(|&s| s < t);
    let mut lo = f64::NEG_INFINITY;
    let mut prev = t;
    for &s in times[..k].iter().rev() {
        if dist(s)? >= rho {
            lo = crossing(prev, s)?;
            break;
        }
        prev = s;
    }
    Ok(OpenInterval::new(lo, hi))
}

/// Time cover from the r/3 construction: around a time `t`, pick the ball
/// with the largest margin `ρ` at `x_t` and take the time interval on which
/// the path stays within `ρ/3` of `x_t`. Grid times are used first; points
/// left uncovered are added until the opens cover the span. The compact
/// refinement then yields the subdivision, with same-ball neighbours merged.
pub fn ball_subdivision(x: &SampledPath, balls: &[Ball]) -> Result<BallSubdivision> {
    if balls.is_empty() {
        return Err(Error::InvalidParameter("no balls".into()));
    }
    if balls.iter().any(|b| b.center.len() != x.dim()) {
        return Err(Error::DimensionMismatch(x.dim(), balls[0].center.len()));
    }
    let open_at = |t: f64| -> Result<(OpenInterval, usize)> {
        let p = x.value_at(t)?;
        let (best, margin) = balls
            .iter()
            .enumerate()
            .map(|(i, b)| (i, b.margin(&p)))
            .fold((0, f64::NEG_INFINITY), |a, c| if c.1 > a.1 { c } else { a });
        if margin <= 0.0 {
            return Err(Error::DomainExit(p));
        }
        Ok((exit_interval(x, t, &p, margin / 3.0)?, best))
    };
    let mut opens = Vec::new();
    let mut owner = Vec::new();
    for &t in x.times() {
        let (o, b) = open_at(t)?;
        opens.push(o);
        owner.push(b);
    }
    let (lo, hi) = x.span();
    let span = Interval::new(lo, hi)?;
    let mut attempts = 0;
    let refinement = loop {
        match refine_from_open_cover(span, &opens) {
            Ok(r) => break r,
            Err(Error::CoverageGap { witness }) if attempts < 100_000 => {
                attempts += 1;
                let (o, b) = open_at(witness)?;
                opens.push(o);
                owner.push(b);
            }
            Err(e) => return Err(e),
        }
    };
    let sub = extract_subdivision(&refinement.cover);
    let mut points = vec![sub.points[0]];
    let mut chosen: Vec<usize> = Vec::new();
    for (j, &element) in sub.owners.iter().enumerate() {
        let ball = owner[refinement.sources[element]];
        if chosen.last() == Some(&ball) {
            *points.last_mut().unwrap() = sub.points[j + 1];
        } else {
            chosen.push(ball);
            points.push(sub.points[j + 1]);
        }
    }
    Ok(BallSubdivision {
        points,
        balls: chosen,
    })
}

/// Both sides of the image p-variation bound on a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ImageBound {
    /// `M^p n^(p-1) ω(s, t)`.
    pub bound: f64,
    /// p-th power of the p-variation of `f ∘ x` on the window.
    pub actual: f64,
}

impl ImageBound {
    pub fn holds(&self) -> bool {
        crate::variation::leq_with_slack(self.actual, self.bound)
    }
}

/// Compares `||f ∘ x||_(p,[s,t])^p` with `M^p n^(p-1) ω(s, t)` where `ω` is
/// the natural control of `x`. The image is sampled on the grid of `x`
/// refined `oversample` times.
pub fn image_pvar_bound(
    f: &LipJet,
    x: &SampledPath,
    p: f64,
    pieces: usize,
    m: f64,
    window: (f64, f64),
    oversample: usize,
) -> Result<ImageBound> {
    if pieces == 0 {
        return Err(Error::InvalidParameter("need at least one piece".into()));
    }
    let (i, j) = x.window(window.0, window.1)?;
    let w = natural_control(x, p)?;
    let bound = m.powf(p) * (pieces as f64).powf(p - 1.0) * w.value(i, j);
    let fine = oversampled(&x.slice(i, j)?, oversample.max(1))?;
    let image = f.map_path(&fine)?;
    let actual = p_variation_pow_indices(&image, p, 0, image.len() - 1)?;
    Ok(ImageBound { bound, actual })
}

/// Inserts `k - 1` equally spaced points inside every segment.
pub fn oversampled(x: &SampledPath, k: usize) -> Result<SampledPath> {
    if k <= 1 {
        return Ok(x.clone());
    }
    let mut times = Vec::with_capacity(x.segments() * k + 1);
    for s in 0..x.segments() {
        let (a, b) = (x.times()[s], x.times()[s + 1]);
        for r in 0..k {
            times.push(a + (b - a) * r as f64 / k as f64);
        }
    }
    times.push(x.span().1);
    let points = times.iter().map(|&t| x.value_at(t)).collect::<Result<Vec<_>>>()?;
    SampledPath::new(times, points)
}

/// Maps available by name: `identity`, `sin`, `cos`, `exp`, `square`,
/// `cube`, `norm2`, `const:c1,...,ce`, `scale:c`.
pub fn by_name(spec: &str, dim: usize) -> Result<LipJet> {
    let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
    let parse = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::UnknownJet(spec.to_string())))
            .collect()
    };
    let (map, norm): (Arc<dyn JetMap>, f64) = match name {
        "identity" => (Arc::new(Affine::identity(dim)), 1.0),
        "scale" => {
            let c = parse(params)?.first().copied().unwrap_or(1.0);
            let mut a = Affine::identity(dim);
            a.matrix.iter_mut().for_each(|v| *v *= c);
            (Arc::new(a), c.abs())
        }
        "const" => {
            let value = parse(params)?;
            let norm = value.iter().map(|v| v.abs()).sum();
            (Arc::new(Constant { dim_in: dim, value }), norm)
        }
        "sin" => (Arc::new(Componentwise { dim, func: Elementary::Sin }), 1.0),
        "cos" => (Arc::new(Componentwise { dim, func: Elementary::Cos }), 1.0),
        "exp" => (Arc::new(Componentwise { dim, func: Elementary::Exp }), 0.0),
        "square" => (Arc::new(Polynomial::componentwise_power(dim, 2)), 0.0),
        "cube" => (Arc::new(Polynomial::componentwise_power(dim, 3)), 0.0),
        "norm2" => (Arc::new(Polynomial::norm2(dim)), 0.0),
        _ => return Err(Error::UnknownJet(spec.to_string())),
    };
    LipJet::new(map, MAX_JET_ORDER, 1.0, norm, spec)
}

/// Names accepted by [`by_name`] without parameters.
pub const LIBRARY: [&str; 7] = ["identity", "sin", "cos", "exp", "square", "cube", "norm2"];

#[cfg(test)]
mod tests {
    use super::*;

    fn sin1() -> LipJet {
        by_name("sin", 1).unwrap().with_degree(1, 1.0).unwrap()
    }

    #[test]
    fn remainder_vanishes_on_the_diagonal() {
        let f = by_name("sin", 2).unwrap();
        for k in 0..=3 {
            let v = vec![0.3; 2usize.pow(k as u32)];
            let r = taylor_remainder(&f, k, &[0.2, -0.7], &[0.2, -0.7], &v).unwrap();
            assert!(r.iter().all(|&c| c == 0.0));
        }
        assert!(taylor_remainder(&f, 4, &[0.0, 0.0], &[0.0, 0.0], &[0.0; 16]).is_err());
    }

    #[test]
    fn quadratic_remainder() {
        let f = by_name("square", 1).unwrap().with_degree(1, 1.0).unwrap();
        for (x, y) in [(0.3, -1.2), (2.0, 0.5), (-0.4, -0.4)] {
            let r = taylor_remainder(&f, 0, &[x], &[y], &[1.0]).unwrap();
            assert!((r[0] - (x - y) * (x - y)).abs() < 1e-14);
        }
    }

    #[test]
    fn sin_norm_on_the_unit_interval() {
        let f = sin1();
        let samples: Vec<Vec<f64>> = (0..=200).map(|i| vec![i as f64 / 200.0]).collect();
        let m = lip_norm_estimate(&f, &samples).unwrap();
        assert!((m - 1.0).abs() < 1e-3, "{m}");
        let fewer: Vec<Vec<f64>> = samples.iter().step_by(7).cloned().collect();
        assert!(lip_norm_estimate(&f, &fewer).unwrap() <= m);
        assert!(lip_norm_estimate(&f, &[]).is_err());
    }

    #[test]
    fn constant_norm() {
        let c = by_name("const:1.5,-2", 2).unwrap();
        let samples = vec![vec![0.0, 0.0], vec![1.0, 3.0], vec![-2.0, 0.5]];
        assert!((lip_norm_estimate(&c, &samples).unwrap() - 3.5).abs() < 1e-15);
    }

    #[test]
    fn linear_composition() {
        let a: Arc<dyn JetMap> = Arc::new(Affine::linear(2, vec![1.0, 2.0, 0.0, -1.0]).unwrap());
        let b: Arc<dyn JetMap> = Arc::new(Affine::linear(2, vec![0.5, 0.0, 3.0, 1.0]).unwrap());
        let g = LipJet::new(a, 1, 1.0, 3.0, "A").unwrap();
        let f = LipJet::new(b, 1, 1.0, 3.5, "B").unwrap();
        let samples = vec![vec![0.0, 0.0], vec![1.0, -1.0]];
        let (h, _) = compose_jets(&g, &f, &samples).unwrap();
        let x = [0.7, -0.2];
        let ab = [6.5, 2.0, -3.0, -1.0];
        let v = h.value(&x);
        assert!((v[0] - (ab[0] * x[0] + ab[1] * x[1])).abs() < 1e-15);
        assert!((v[1] - (ab[2] * x[0] + ab[3] * x[1])).abs() < 1e-15);
        assert_eq!(h.derivative(&x, 1), ab.to_vec());
    }

    #[test]
    fn sin_of_square_against_finite_differences() {
        let g = by_name("sin", 1).unwrap();
        let f = by_name("square", 1).unwrap();
        let (h, _) = compose_jets(&g, &f, &[vec![0.0], vec![1.0]]).unwrap();
        for x in [-0.8, 0.1, 0.9] {
            for k in 0..3 {
                assert!(finite_difference_defect(&h, &[x], k, 1e-5) < 1e-6);
            }
            let exact = 2.0 * (x * x).cos() - 4.0 * x * x * (x * x).sin();
            assert!((h.derivative(&[x], 2)[0] - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn library_jets_are_symmetric_and_consistent() {
        for name in LIBRARY {
            let f = by_name(name, 2).unwrap();
            let x = [0.3, -0.6];
            for k in 0..=3 {
                assert!(symmetry_defect(&f, &x, k) < 1e-12, "{name} {k}");
            }
            for k in 0..3 {
                assert!(finite_difference_defect(&f, &x, k, 1e-5) < 1e-6, "{name} {k}");
            }
        }
        assert!(matches!(by_name("tan", 1), Err(Error::UnknownJet(_))));
    }

    #[test]
    fn identity_image_bound_is_tight() {
        let x = SampledPath::uniform(0.0, 1.0, vec![vec![0.0], vec![1.0], vec![0.2], vec![0.9]]).unwrap();
        let id = by_name("identity", 1).unwrap();
        let r = image_pvar_bound(&id, &x, 2.0, 1, 1.0, (0.0, 1.0), 1).unwrap();
        assert!((r.bound - r.actual).abs() < 1e-14);
        let twice = by_name("scale:2", 1).unwrap();
        let r2 = image_pvar_bound(&twice, &x, 2.0, 1, 2.0, (0.0, 1.0), 1).unwrap();
        assert!((r2.actual - 4.0 * r.actual).abs() < 1e-13);
        assert!((r2.bound - r2.actual).abs() < 1e-13);
    }

    #[test]
    fn ball_subdivision_pieces_stay_inside() {
        let x = SampledPath::uniform(0.0, 1.0, (0..=8).map(|k| vec![k as f64 / 4.0]).collect()).unwrap();
        let balls = vec![Ball::new(vec![0.0], 1.2).unwrap(), Ball::new(vec![2.0], 1.2).unwrap()];
        let sub = ball_subdivision(&x, &balls).unwrap();
        assert!(sub.pieces() >= 2);
        for (w, &b) in sub.points.windows(2).zip(&sub.balls) {
            let piece = x.restrict(w[0], w[1]).unwrap();
            assert!(piece.points().all(|p| balls[b].contains(p)));
        }
        let lonely = vec![Ball::new(vec![0.0], 0.5).unwrap()];
        assert!(matches!(ball_subdivision(&x, &lonely), Err(Error::DomainExit(_))));
    }
}
