//! Integration of one-forms along rough paths.
//!
//! A one-form `α: R^d -> L(R^d, R^e)` is a [`LipJet`] with values in
//! `R^(e d)` (the matrix of `α(x)`, row-major). Each output cell is the limit
//! of Chen products of local approximations over finer and finer partitions
//! of an input cell, accelerated by Richardson extrapolation:
//!
//! * `p < 2`: `Ξ_(s,t) = α(x_s) X^1_(s,t)`;
//! * `2 <= p < 3`: `Ξ^1 = α(x_s) X^1 + Dα(x_s) X^2`, `Ξ^2 = (α(x_s) ⊗ α(x_s)) X^2`.
//!
//! Values of `X` inside a cell follow the one-parameter subgroup through the
//! cell, so every piece of a cell carries the same increment.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lipschitz::{ball_subdivision, Affine, Ball, JetMap, LipJet};
use crate::par;
use crate::rough::{concat_functionals, refine_limit, GridFunctional, RefineOptions, RefineStats, RoughPath};
use crate::tensor::TruncTensor;

/// `x -> Df(x)`, the jets of `f` shifted by one order.
#[derive(Clone, Debug)]
struct Gradient {
    inner: Arc<dyn JetMap>,
}

impl JetMap for Gradient {
    fn dim_in(&self) -> usize {
        self.inner.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.inner.dim_out() * self.inner.dim_in()
    }
    fn max_order(&self) -> usize {
        self.inner.max_order().saturating_sub(1)
    }
    fn derivative(&self, x: &[f64], k: usize) -> Vec<f64> {
        self.inner.derivative(x, k + 1)
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        self.inner.in_domain(x)
    }
}

#[derive(Clone)]
pub struct OneForm {
    jet: LipJet,
    out_dim: usize,
}

impl fmt::Debug for OneForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OneForm")
            .field("jet", &self.jet)
            .field("out_dim", &self.out_dim)
            .finish()
    }
}

impl OneForm {
    pub fn new(jet: LipJet, out_dim: usize) -> Result<Self> {
        if out_dim == 0 || jet.dim_out() != out_dim * jet.dim_in() {
            return Err(Error::InvalidParameter(format!(
                "a one-form on R^{} with values in R^{out_dim} needs {} components, found {}",
                jet.dim_in(),
                out_dim * jet.dim_in(),
                jet.dim_out()
            )));
        }
        Ok(Self { jet, out_dim })
    }

    /// `df` for a map `f` of degree `n + ε >= 1`.
    pub fn gradient(f: &LipJet) -> Result<Self> {
        if f.n() == 0 {
            return Err(Error::InvalidParameter(format!("{} has no derivative", f.name())));
        }
        let map: Arc<dyn JetMap> = Arc::new(Gradient { inner: f.map().clone() });
        let jet = LipJet::new(map, f.n() - 1, f.eps(), f.norm(), format!("d{}", f.name()))?;
        Self::new(jet, f.dim_out())
    }

    /// The constant form `v -> A v` (`A` is `e x d`, row-major).
    pub fn constant(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        let e = matrix.len() / dim.max(1);
        let norm = (0..dim)
            .map(|i| (0..e).map(|o| matrix[o * dim + i].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let map: Arc<dyn JetMap> = Arc::new(crate::lipschitz::Constant { dim_in: dim, value: matrix });
        Self::new(LipJet::new(map, 3, 1.0, norm, "constant")?, e)
    }

    /// `½ (x dy - y dx)` on `R^2`.
    pub fn area() -> Self {
        let map: Arc<dyn JetMap> =
            Arc::new(Affine::linear(2, vec![0.0, -0.5, 0.5, 0.0]).expect("2 x 2 matrix"));
        let jet = LipJet::new(map, 3, 1.0, 0.5, "area").expect("valid jet");
        Self::new(jet, 1).expect("shape")
    }

    pub fn jet(&self) -> &LipJet {
        &self.jet
    }

    pub fn dim(&self) -> usize {
        self.jet.dim_in()
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// `α(x)` as an `e x d` row-major matrix.
    pub fn matrix(&self, x: &[f64]) -> Vec<f64> {
        self.jet.value(x)
    }

    /// `Dα(x)`: entry `((o d + i) d + j)` is `∂_j α_(o,i)(x)`.
    pub fn derivative(&self, x: &[f64]) -> Vec<f64> {
        self.jet.derivative(x, 1)
    }

    /// Linear combination `a α + b β`.
    pub fn combine(a: f64, alpha: &OneForm, b: f64, beta: &OneForm) -> Result<OneForm> {
        if alpha.dim() != beta.dim() || alpha.out_dim != beta.out_dim {
            return Err(Error::DimensionMismatch(alpha.jet.dim_out(), beta.jet.dim_out()));
        }
        let map: Arc<dyn JetMap> = Arc::new(Combination {
            a,
            b,
            left: alpha.jet.map().clone(),
            right: beta.jet.map().clone(),
        });
        let n = alpha.jet.n().min(beta.jet.n());
        let eps = alpha.jet.eps().min(beta.jet.eps());
        let norm = a.abs() * alpha.jet.norm() + b.abs() * beta.jet.norm();
        Self::new(LipJet::new(map, n, eps, norm, "combination")?, alpha.out_dim)
    }
}

#[derive(Clone, Debug)]
struct Combination {
    a: f64,
    b: f64,
    left: Arc<dyn JetMap>,
    right: Arc<dyn JetMap>,
}

impl JetMap for Combination {
    fn dim_in(&self) -> usize {
        self.left.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.left.dim_out()
    }
    fn max_order(&self) -> usize {
        self.left.max_order().min(self.right.max_order())
    }
    fn derivative(&self, x: &[f64], k: usize) -> Vec<f64> {
        self.left
            .derivative(x, k)
            .iter()
            .zip(self.right.derivative(x, k))
            .map(|(u, v)| self.a * u + self.b * v)
            .collect()
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        self.left.in_domain(x) && self.right.in_domain(x)
    }
}

/// Settings for the refinement limit of an integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SewOptions {
    pub tol: f64,
    pub max_depth: usize,
    /// Start point of the output; zero when absent.
    pub start: Option<Vec<f64>>,
}

impl Default for SewOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_depth: 14,
            start: None,
        }
    }
}

impl SewOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn refine(&self) -> RefineOptions {
        RefineOptions {
            tol: self.tol,
            max_depth: self.max_depth,
            base: 2,
        }
    }
}

fn check_domain(alpha: &OneForm, x: &[f64]) -> Result<()> {
    if alpha.jet.in_domain(x) {
        Ok(())
    } else {
        Err(Error::DomainExit(x.to_vec()))
    }
}

/// Product of the germs over `pieces` equal parts of one cell.
fn cell_product(
    alpha: &OneForm,
    level: usize,
    x0: &[f64],
    piece: &TruncTensor,
    pieces: usize,
) -> Result<TruncTensor> {
    let (d, e) = (alpha.dim(), alpha.out_dim);
    let inc = piece.level(1);
    let mut acc = TruncTensor::unit(e, level)?;
    let mut x = x0.to_vec();
    let mut germ = TruncTensor::zero(e, level)?;
    germ.level_mut(0)[0] = 1.0;
    for _ in 0..pieces {
        check_domain(alpha, &x)?;
        let a = alpha.matrix(&x);
        let g1 = germ.level_mut(1);
        for o in 0..e {
            g1[o] = (0..d).map(|i| a[o * d + i] * inc[i]).sum();
        }
        if level == 2 {
            let x2 = piece.level(2);
            let da = alpha.derivative(&x);
            let g1 = germ.level_mut(1);
            for o in 0..e {
                let mut v = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        v += da[(o * d + i) * d + j] * x2[j * d + i];
                    }
                }
                g1[o] += v;
            }
            // (α ⊗ α) X^2: entry (o1, o2) = sum a[o1, i] a[o2, j] X^2[i, j].
            let mut ax = vec![0.0; e * d];
            for o in 0..e {
                for j in 0..d {
                    ax[o * d + j] = (0..d).map(|i| a[o * d + i] * x2[i * d + j]).sum();
                }
            }
            let g2 = germ.level_mut(2);
            for o1 in 0..e {
                for o2 in 0..e {
                    g2[o1 * e + o2] = (0..d).map(|j| ax[o1 * d + j] * a[o2 * d + j]).sum();
                }
            }
        }
        acc = acc.mul_unchecked(&germ);
        for (xi, di) in x.iter_mut().zip(inc) {
            *xi += di;
        }
    }
    check_domain(alpha, &x)?;
    Ok(acc)
}

fn sew(alpha: &OneForm, x: &RoughPath, level: usize, opts: &SewOptions) -> Result<(RoughPath, RefineStats)> {
    if alpha.dim() != x.dim() {
        return Err(Error::DimensionMismatch(alpha.dim(), x.dim()));
    }
    if alpha.jet.gamma() + 1.0 <= x.p() {
        return Err(Error::InvalidParameter(format!(
            "one-form of degree {} is too rough for p = {}",
            alpha.jet.gamma(),
            x.p()
        )));
    }
    if level == 2 && alpha.jet.n() < 1 {
        return Err(Error::InvalidParameter("level-2 integration needs Dα".into()));
    }
    let trace = x.trace();
    let f = x.functional();
    let ropts = opts.refine();
    let results = par::try_map_range(f.cells().len(), |c| {
        let cell = &f.cells()[c];
        let log = cell.log()?;
        let x0 = trace.point(c);
        let (value, depth, delta, raw) = refine_limit(&ropts, |k| {
            let pieces = 1usize << k;
            let piece = log.scale(1.0 / pieces as f64).exp()?;
            cell_product(alpha, level, x0, &piece, pieces)
        })?;
        Ok::<_, Error>((value, depth, delta, raw))
    })?;
    let mut stats = RefineStats::default();
    let mut cells = Vec::with_capacity(results.len());
    for (k, (mut cell, depth, delta, raw)) in results.into_iter().enumerate() {
        cell.level_mut(0)[0] = 1.0;
        cells.push(cell);
        stats.depths.push(depth);
        stats.deltas.push(delta);
        if k == 0 {
            stats.raw_deltas = raw;
        }
    }
    let start = opts.start.clone().unwrap_or_else(|| vec![0.0; alpha.out_dim]);
    let out = GridFunctional::new(x.times().to_vec(), cells)?;
    Ok((RoughPath::new(x.p(), start, out)?, stats))
}

/// `∫ α(x) dX` for `p < 2`.
pub fn young_integral(alpha: &OneForm, x: &RoughPath, opts: &SewOptions) -> Result<RoughPath> {
    young_integral_with_stats(alpha, x, opts).map(|r| r.0)
}

pub fn young_integral_with_stats(alpha: &OneForm, x: &RoughPath, opts: &SewOptions) -> Result<(RoughPath, RefineStats)> {
    if x.p() >= 2.0 {
        return Err(Error::InvalidParameter(format!("Young integration needs p < 2, got {}", x.p())));
    }
    sew(alpha, x, 1, opts)
}

/// `∫ α(x) dX` for `2 <= p < 3`.
pub fn rough_integral_level2(alpha: &OneForm, x: &RoughPath, opts: &SewOptions) -> Result<RoughPath> {
    rough_integral_level2_with_stats(alpha, x, opts).map(|r| r.0)
}

pub fn rough_integral_level2_with_stats(
    alpha: &OneForm,
    x: &RoughPath,
    opts: &SewOptions,
) -> Result<(RoughPath, RefineStats)> {
    if !(2.0..3.0).contains(&x.p()) {
        return Err(Error::InvalidParameter(format!("level-2 integration needs 2 <= p < 3, got {}", x.p())));
    }
    sew(alpha, x, 2, opts)
}

/// Dispatches on `p`; `p >= 3` is rejected.
pub fn integrate(alpha: &OneForm, x: &RoughPath, opts: &SewOptions) -> Result<RoughPath> {
    integrate_with_stats(alpha, x, opts).map(|r| r.0)
}

pub fn integrate_with_stats(alpha: &OneForm, x: &RoughPath, opts: &SewOptions) -> Result<(RoughPath, RefineStats)> {
    let p = x.p();
    if p < 2.0 {
        young_integral_with_stats(alpha, x, opts)
    } else if p < 3.0 {
        rough_integral_level2_with_stats(alpha, x, opts)
    } else {
        Err(Error::InvalidParameter(format!("integration is implemented for p < 3, got {p}")))
    }
}

/// `f_*(x, X) = (f(x), ∫ df(x) dX)`.
pub fn pushforward(f: &LipJet, x: &RoughPath, opts: &SewOptions) -> Result<RoughPath> {
    Ok(pushforward_with_stats(f, x, opts)?.0)
}

pub fn pushforward_with_stats(f: &LipJet, x: &RoughPath, opts: &SewOptions) -> Result<(RoughPath, RefineStats)> {
    if f.gamma() <= x.p() {
        return Err(Error::InvalidParameter(format!(
            "map of degree {} cannot push forward a {}-rough path",
            f.gamma(),
            x.p()
        )));
    }
    let start = f.checked_value(x.start())?;
    let alpha = OneForm::gradient(f)?;
    let opts = SewOptions {
        start: Some(start),
        ..opts.clone()
    };
    integrate_with_stats(&alpha, x, &opts)
}

/// A one-form given by different jets on different balls.
#[derive(Clone, Debug)]
pub struct LocalOneForm {
    pub pieces: Vec<(Ball, OneForm)>,
}

impl LocalOneForm {
    pub fn new(pieces: Vec<(Ball, OneForm)>) -> Result<Self> {
        let first = pieces
            .first()
            .ok_or_else(|| Error::InvalidParameter("no pieces".into()))?;
        let (d, e) = (first.1.dim(), first.1.out_dim());
        for (ball, form) in &pieces {
            if ball.center.len() != d || form.dim() != d {
                return Err(Error::DimensionMismatch(d, form.dim()));
            }
            if form.out_dim() != e {
                return Err(Error::DimensionMismatch(e, form.out_dim()));
            }
        }
        Ok(Self { pieces })
    }

    pub fn balls(&self) -> Vec<Ball> {
        self.pieces.iter().map(|p| p.0.clone()).collect()
    }
}

/// Integrates a local one-form: the span is cut so that each piece of the
/// trace stays in one ball, each piece is integrated with that ball's jet
/// and the results are concatenated.
pub fn integrate_local_oneform(local: &LocalOneForm, x: &RoughPath, opts: &SewOptions) -> Result<RoughPath> {
    let sub = ball_subdivision(&x.trace(), &local.balls())?;
    integrate_pieces(local, x, &sub.points, &sub.balls, opts)
}

/// Integrates over the pieces `[points[j], points[j+1]]` with the jet of
/// ball `owners[j]`.
pub fn integrate_pieces(
    local: &LocalOneForm,
    x: &RoughPath,
    points: &[f64],
    owners: &[usize],
    opts: &SewOptions,
) -> Result<RoughPath> {
    if points.len() != owners.len() + 1 || owners.is_empty() {
        return Err(Error::InvalidParameter("one owner per piece is required".into()));
    }
    if owners.iter().any(|&o| o >= local.pieces.len()) {
        return Err(Error::InvalidParameter("owner index out of range".into()));
    }
    let piece_opts = SewOptions {
        start: None,
        ..opts.clone()
    };
    let parts = par::try_map_range(owners.len(), |j| {
        let (ball, form) = &local.pieces[owners[j]];
        let piece = x.restrict(points[j], points[j + 1])?;
        if let Some(p) = piece.trace().points().find(|p| !ball.contains(p)) {
            return Err(Error::DomainExit(p.to_vec()));
        }
        integrate(form, &piece, &piece_opts)
    })?;
    let mut functional = parts[0].functional().clone();
    for part in &parts[1..] {
        functional = concat_functionals(&functional, part.functional())?;
    }
    let e = local.pieces[0].1.out_dim();
    let start = opts.start.clone().unwrap_or_else(|| vec![0.0; e]);
    RoughPath::new(x.p(), start, functional)
}
