//! Multiplicative functionals on grids and pointed rough paths.
//!
//! A [`GridFunctional`] stores one group element per grid cell. The value on
//! a pair of grid times is the product of the cells in between, so Chen's
//! identity holds by construction. Inside a cell the functional follows the
//! one-parameter subgroup through the cell: `X_(t_i, t_i + θh) = exp(θ log
//! cell_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::signature::segment_signatures;
use crate::tensor::TruncTensor;
use crate::variation::{
    beta_p, factorial, grid_index, l1_dist, leq_with_slack, max_subdivision_sum, validate_times,
    ControlGrid, SampledPath,
};

const UNIT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFunctional")]
pub struct GridFunctional {
    times: Vec<f64>,
    #[serde(skip)]
    dim: usize,
    #[serde(skip)]
    degree: usize,
    cells: Vec<TruncTensor>,
}

#[derive(Deserialize)]
struct RawFunctional {
    times: Vec<f64>,
    cells: Vec<TruncTensor>,
}

impl TryFrom<RawFunctional> for GridFunctional {
    type Error = Error;

    fn try_from(raw: RawFunctional) -> Result<Self> {
        GridFunctional::new(raw.times, raw.cells)
    }
}

impl GridFunctional {
    pub fn new(times: Vec<f64>, cells: Vec<TruncTensor>) -> Result<Self> {
        validate_times(&times)?;
        if cells.len() + 1 != times.len() {
            return Err(Error::InvalidParameter(format!(
                "{} cells on a grid of {} times",
                cells.len(),
                times.len()
            )));
        }
        let (dim, degree) = (cells[0].dim(), cells[0].degree());
        for c in &cells {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch(dim, c.dim()));
            }
            if c.degree() != degree {
                return Err(Error::DegreeMismatch(degree, c.degree()));
            }
            if !c.is_finite() {
                return Err(Error::InvalidTensor("non-finite cell".into()));
            }
            if (c.scalar() - 1.0).abs() > UNIT_TOL {
                return Err(Error::NotUnital(c.scalar()));
            }
        }
        let mut cells = cells;
        for c in &mut cells {
            c.level_mut(0)[0] = 1.0;
        }
        Ok(Self {
            times,
            dim,
            degree,
            cells,
        })
    }

    /// The signature functional of a piecewise-linear path at `degree`.
    pub fn from_path(x: &SampledPath, degree: usize) -> Result<Self> {
        Self::new(x.times().to_vec(), segment_signatures(x, degree)?)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn cells(&self) -> &[TruncTensor] {
        &self.cells
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    pub fn unit(&self) -> TruncTensor {
        TruncTensor::unit(self.dim, self.degree).expect("valid shape")
    }

    /// Cell index `i` and fraction `θ` with `t = t_i + θ (t_(i+1) - t_i)`;
    /// grid times snap to `θ = 0` (or to the last cell with `θ = 1`).
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (lo, hi) = self.span();
        let n = self.cells.len();
        if let Some(k) = grid_index(&self.times, t) {
            return Ok(if k == n { (n - 1, 1.0) } else { (k, 0.0) });
        }
        if t < lo || t > hi {
            return Err(Error::OutOfSpan { t, lo, hi });
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let theta = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        Ok((i, theta))
    }

    /// `exp(θ log cell_i)`.
    pub fn cell_power(&self, i: usize, theta: f64) -> Result<TruncTensor> {
        if theta == 0.0 {
            return Ok(self.unit());
        }
        if theta == 1.0 {
            return Ok(self.cells[i].clone());
        }
        self.cells[i].log()?.scale(theta).exp()
    }

    /// Product of cells `i..j`.
    pub fn evaluate_indices(&self, i: usize, j: usize) -> TruncTensor {
        self.cells[i..j.max(i)]
            .iter()
            .fold(self.unit(), |acc, c| acc.mul_unchecked(c))
    }

    /// `X_(s,t)` for `s <= t` in the span.
    pub fn evaluate(&self, s: f64, t: f64) -> Result<TruncTensor> {
        if s > t {
            return Err(Error::InvalidParameter(format!("reversed window [{s}, {t}]")));
        }
        let (i, a) = self.locate(s)?;
        let (j, b) = self.locate(t)?;
        if i == j {
            return self.cell_power(i, b - a);
        }
        let head = self.cell_power(i, 1.0 - a)?;
        let tail = self.cell_power(j, b)?;
        Ok(head
            .mul_unchecked(&self.evaluate_indices(i + 1, j))
            .mul_unchecked(&tail))
    }

    /// Values on all pairs of grid indices, row by row: `rows[i][j - i]`.
    pub fn window_table(&self) -> Vec<Vec<TruncTensor>> {
        let n = self.times.len();
        par::map_range(n, |i| {
            let mut row = Vec::with_capacity(n - i);
            let mut acc = self.unit();
            row.push(acc.clone());
            for c in &self.cells[i..] {
                acc = acc.mul_unchecked(c);
                row.push(acc.clone());
            }
            row
        })
    }

    /// The functional on a new grid inside the span.
    pub fn resample(&self, times: &[f64]) -> Result<Self> {
        validate_times(times)?;
        let cells = par::try_map_range(times.len() - 1, |k| self.evaluate(times[k], times[k + 1]))?;
        Self::new(times.to_vec(), cells)
    }

    /// Restriction to `[a, b]`, keeping the grid points strictly inside.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        if a >= b {
            return Err(Error::InvalidParameter(format!("empty window [{a}, {b}]")));
        }
        let (lo, hi) = self.span();
        for t in [a, b] {
            if grid_index(&self.times, t).is_none() && (t < lo || t > hi) {
                return Err(Error::OutOfSpan { t, lo, hi });
            }
        }
        let tol = |t: f64| 1e-12 * t.abs().max(1.0);
        let mut times = vec![a];
        times.extend(
            self.times
                .iter()
                .copied()
                .filter(|&t| t > a + tol(a) && t < b - tol(b)),
        );
        times.push(b);
        self.resample(&times)
    }

    /// Splits each cell into `factor` equal sub-cells.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidParameter("refinement factor must be positive".into()));
        }
        let mut times = Vec::with_capacity(self.cells.len() * factor + 1);
        let mut cells = Vec::with_capacity(self.cells.len() * factor);
        for (i, c) in self.cells.iter().enumerate() {
            let (a, b) = (self.times[i], self.times[i + 1]);
            let piece = if factor == 1 {
                c.clone()
            } else {
                c.log()?.scale(1.0 / factor as f64).exp()?
            };
            for k in 0..factor {
                times.push(a + (b - a) * k as f64 / factor as f64);
                cells.push(piece.clone());
            }
        }
        times.push(self.span().1);
        Self::new(times, cells)
    }

    /// Projection of every cell onto degree `m`.
    pub fn project(&self, m: usize) -> Result<Self> {
        let cells = self.cells.iter().map(|c| c.project(m)).collect::<Result<_>>()?;
        Self::new(self.times.clone(), cells)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.times.len() == other.times.len()
            && self
                .times
                .iter()
                .zip(&other.times)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }

    /// Largest coordinate difference between cells on a shared grid.
    pub fn max_cell_diff(&self, other: &Self) -> Result<f64> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        self.cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| a.max_abs_diff(b))
            .try_fold(0.0f64, |m, d| Ok(m.max(d?)))
    }

    /// Cumulative level-1 increments from `start`.
    pub fn trace_from(&self, start: &[f64]) -> Result<SampledPath> {
        if start.len() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, start.len()));
        }
        if self.degree == 0 {
            return Err(Error::InvalidParameter("degree-0 functional has no trace".into()));
        }
        let mut values = start.to_vec();
        let mut cur = start.to_vec();
        for c in &self.cells {
            for (v, d) in cur.iter_mut().zip(c.level(1)) {
                *v += d;
            }
            values.extend_from_slice(&cur);
        }
        SampledPath::from_flat(self.times.clone(), self.dim, values)
    }
}

/// Concatenation of functionals on adjacent windows: `X_(a,b)` for `b <= u`,
/// `Y_(a,b)` for `a >= u`, and `X_(a,u) Y_(u,b)` across the junction.
pub fn concat_functionals(x: &GridFunctional, y: &GridFunctional) -> Result<GridFunctional> {
    let (_, u) = x.span();
    let (u2, _) = y.span();
    if (u - u2).abs() > 1e-12 * u.abs().max(1.0) {
        return Err(Error::NotAdjacent(u, u2));
    }
    if x.dim != y.dim {
        return Err(Error::DimensionMismatch(x.dim, y.dim));
    }
    if x.degree != y.degree {
        return Err(Error::DegreeMismatch(x.degree, y.degree));
    }
    let mut times = x.times.clone();
    times.extend_from_slice(&y.times[1..]);
    let mut cells = x.cells.clone();
    cells.extend_from_slice(&y.cells);
    GridFunctional::new(times, cells)
}

/// A pointed rough path `(x, X)`: a start point and a functional of degree
/// `[p]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRoughPath", into = "RawRoughPath")]
pub struct RoughPath {
    p: f64,
    start: Vec<f64>,
    functional: GridFunctional,
}

#[derive(Serialize, Deserialize)]
struct RawRoughPath {
    p: f64,
    start: Vec<f64>,
    times: Vec<f64>,
    cells: Vec<TruncTensor>,
}

impl TryFrom<RawRoughPath> for RoughPath {
    type Error = Error;

    fn try_from(raw: RawRoughPath) -> Result<Self> {
        RoughPath::new(raw.p, raw.start, GridFunctional::new(raw.times, raw.cells)?)
    }
}

impl From<RoughPath> for RawRoughPath {
    fn from(r: RoughPath) -> Self {
        RawRoughPath {
            p: r.p,
            start: r.start,
            times: r.functional.times,
            cells: r.functional.cells,
        }
    }
}

pub(crate) fn floor_p(p: f64) -> Result<usize> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    Ok(p.floor() as usize)
}

impl RoughPath {
    pub fn new(p: f64, start: Vec<f64>, functional: GridFunctional) -> Result<Self> {
        let m = floor_p(p)?;
        if functional.degree() != m {
            return Err(Error::DegreeMismatch(m, functional.degree()));
        }
        if start.len() != functional.dim() {
            return Err(Error::DimensionMismatch(functional.dim(), start.len()));
        }
        if start.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite start point".into()));
        }
        Ok(Self {
            p,
            start,
            functional,
        })
    }

    /// The degree-`[p]` signature lift of a piecewise-linear path.
    pub fn from_bv_path(x: &SampledPath, p: f64) -> Result<Self> {
        let m = floor_p(p)?;
        Self::new(p, x.start().to_vec(), GridFunctional::from_path(x, m)?)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn functional(&self) -> &GridFunctional {
        &self.functional
    }

    pub fn into_functional(self) -> GridFunctional {
        self.functional
    }

    pub fn dim(&self) -> usize {
        self.functional.dim()
    }

    pub fn times(&self) -> &[f64] {
        self.functional.times()
    }

    pub fn span(&self) -> (f64, f64) {
        self.functional.span()
    }

    pub fn trace(&self) -> SampledPath {
        self.functional
            .trace_from(&self.start)
            .expect("start and functional share a dimension")
    }

    /// Trace value at any time of the span.
    pub fn point_at(&self, t: f64) -> Result<Vec<f64>> {
        let (lo, _) = self.span();
        let inc = self.functional.evaluate(lo, t)?;
        Ok(self.start.iter().zip(inc.level(1)).map(|(a, b)| a + b).collect())
    }

    pub fn with_start(&self, start: Vec<f64>) -> Result<Self> {
        Self::new(self.p, start, self.functional.clone())
    }

    /// Restriction to `[a, b]`; the start moves to the trace value at `a`.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        let start = self.point_at(a)?;
        Self::new(self.p, start, self.functional.restrict(a, b)?)
    }

    pub fn resample(&self, times: &[f64]) -> Result<Self> {
        let start = self.point_at(times[0])?;
        Self::new(self.p, start, self.functional.resample(times)?)
    }

    pub fn refine(&self, factor: usize) -> Result<Self> {
        Self::new(self.p, self.start.clone(), self.functional.refine(factor)?)
    }

    /// Concatenation; the start of `self` is kept.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.p != other.p {
            return Err(Error::InvalidParameter(format!("p differs: {} vs {}", self.p, other.p)));
        }
        Self::new(
            self.p,
            self.start.clone(),
            concat_functionals(&self.functional, &other.functional)?,
        )
    }
}

/// Equality of functionals cell by cell (to `1e-12`), ignoring start points.
pub fn equivalent(a: &RoughPath, b: &RoughPath) -> bool {
    a.p == b.p && a.functional.max_cell_diff(&b.functional).is_ok_and(|d| d <= 1e-12)
}

/// Grid times present in both functionals.
pub fn common_grid(a: &GridFunctional, b: &GridFunctional) -> Vec<f64> {
    a.times
        .iter()
        .copied()
        .filter(|&t| b.times.iter().any(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0)))
        .collect()
}

/// Both functionals evaluated on their common grid.
pub fn on_common_grid(a: &GridFunctional, b: &GridFunctional) -> Result<(GridFunctional, GridFunctional)> {
    if a.same_grid(b) {
        return Ok((a.clone(), b.clone()));
    }
    let grid = common_grid(a, b);
    if grid.len() < 2 || grid[0] != a.span().0.max(b.span().0) || grid[grid.len() - 1] != a.span().1.min(b.span().1) {
        return Err(Error::GridMismatch);
    }
    Ok((a.resample(&grid)?, b.resample(&grid)?))
}

/// Largest coordinate difference between `X_(s,t)` and `Y_(s,t)` over pairs
/// of common grid times, and between the start points.
pub fn window_deviation(a: &RoughPath, b: &RoughPath) -> Result<f64> {
    let (x, y) = on_common_grid(&a.functional, &b.functional)?;
    let (tx, ty) = (x.window_table(), y.window_table());
    let mut worst = l1_dist(&a.start, &b.start);
    for (rx, ry) in tx.iter().zip(&ty) {
        for (u, v) in rx.iter().zip(ry) {
            worst = worst.max(u.max_abs_diff(v)?);
        }
    }
    Ok(worst)
}

/// Outcome of checking `||X^i_(s,t)|| <= ω(s,t)^(i/p) / (β_p (i/p)!)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlCheck {
    pub holds: bool,
    /// Smallest `c` such that `c ω` satisfies the bound on every pair.
    pub min_scale: f64,
    pub first_violation: Option<(usize, usize, usize)>,
}

/// `(β_p (i/p)! ||X^i||)^(p/i)`: the smallest value of `ω(s,t)` allowed by
/// level `i`.
fn level_mass(beta: f64, p: f64, i: usize, norm: f64) -> f64 {
    let q = i as f64 / p;
    (beta * factorial(q) * norm).powf(1.0 / q)
}

/// Checks the control bound for all grid pairs and levels `1..=degree`.
pub fn pvar_control_check(x: &GridFunctional, p: f64, w: &ControlGrid) -> Result<ControlCheck> {
    let beta = beta_p(p)?;
    if w.len() != x.times().len()
        || w.times().iter().zip(x.times()).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::GridMismatch);
    }
    let table = x.window_table();
    let n = x.times().len();
    let rows = par::map_range(n, |i| {
        let mut scale = 0.0f64;
        let mut first = None;
        for j in i + 1..n {
            let norms = table[i][j - i].level_norms();
            let wij = w.value(i, j);
            for (level, &norm) in norms.iter().enumerate().skip(1) {
                let q = level as f64 / p;
                let bound = wij.powf(q) / (beta * factorial(q));
                if first.is_none() && !leq_with_slack(norm, bound) {
                    first = Some((i, j, level));
                }
                let need = level_mass(beta, p, level, norm);
                let s = if need == 0.0 {
                    0.0
                } else if wij > 0.0 {
                    need / wij
                } else {
                    f64::INFINITY
                };
                scale = scale.max(s);
            }
        }
        (scale, first)
    });
    let min_scale = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let first_violation = rows.iter().find_map(|r| r.1);
    Ok(ControlCheck {
        holds: first_violation.is_none(),
        min_scale,
        first_violation,
    })
}

/// The smallest control on the grid satisfying the bound at every level:
/// the superadditive hull of `max_i (β_p (i/p)! ||X^i_(s,t)||)^(p/i)`.
pub fn functional_control(x: &GridFunctional, p: f64) -> Result<ControlGrid> {
    let beta = beta_p(p)?;
    let table = x.window_table();
    let mass = |a: usize, b: usize| {
        table[a][b - a]
            .level_norms()
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &norm)| level_mass(beta, p, i, norm))
            .fold(0.0, f64::max)
    };
    ControlGrid::superadditive_hull(x.times().to_vec(), mass)
}

/// `d̃_p`: the largest over levels `i = 1..=[p]` of the p-variation of
/// `X^i - Y^i` measured with exponent `p/i`.
pub fn dp_metric(x: &GridFunctional, y: &GridFunctional, p: f64) -> Result<f64> {
    let m = floor_p(p)?;
    if !x.same_grid(y) {
        return Err(Error::GridMismatch);
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(x.dim(), y.dim()));
    }
    if x.degree() < m || y.degree() < m {
        return Err(Error::DegreeMismatch(m, x.degree().min(y.degree())));
    }
    let (tx, ty) = (x.window_table(), y.window_table());
    let n = x.times().len();
    let dist = par::map_range(n, |i| {
        (0..n - i)
            .map(|k| {
                tx[i][k]
                    .project(m)
                    .and_then(|a| a.level_distances(&ty[i][k].project(m)?))
                    .expect("shapes checked")
            })
            .collect::<Vec<_>>()
    });
    let mut best = 0.0f64;
    for level in 1..=m {
        let e = p / level as f64;
        let sum = max_subdivision_sum(0, n - 1, |a, b| dist[a][b - a][level].powf(e));
        best = best.max(sum.powf(1.0 / p));
    }
    Ok(best)
}

/// `d_p((x, X), (y, Y)) = max(||x - y||, d̃_p(X, Y))`.
pub fn dp_product_metric(a: &RoughPath, b: &RoughPath) -> Result<f64> {
    if a.p != b.p {
        return Err(Error::InvalidParameter(format!("p differs: {} vs {}", a.p, b.p)));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let d = dp_metric(&a.functional, &b.functional, a.p)?;
    Ok(l1_dist(&a.start, &b.start).max(d))
}

/// Diagnostics for convergence in the p-variation topology.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopologyReport {
    /// Smallest `a(n)` with `||X^i - X(n)^i|| <= a(n) ω^(i/p)` on every
    /// pair and level.
    pub a: Vec<f64>,
    /// Whether the sequence `a(n)` tends to zero on the evidence available:
    /// it is identically zero, or its last value is well below its first.
    pub decays: bool,
}

/// Builds a common control for `X` and every `X(n)` (the superadditive hull
/// of the largest per-pair requirement over the family) and reports the
/// sequence `a(n)`.
pub fn converges_in_topology(x: &GridFunctional, seq: &[GridFunctional], p: f64) -> Result<TopologyReport> {
    let m = floor_p(p)?;
    let beta = beta_p(p)?;
    for y in seq {
        if !x.same_grid(y) {
            return Err(Error::GridMismatch);
        }
        if y.degree() < m || y.dim() != x.dim() {
            return Err(Error::DegreeMismatch(m, y.degree()));
        }
    }
    let base = x.project(m)?;
    let family: Vec<GridFunctional> = std::iter::once(Ok(base.clone()))
        .chain(seq.iter().map(|y| y.project(m)))
        .collect::<Result<_>>()?;
    let tables: Vec<_> = family.iter().map(GridFunctional::window_table).collect();
    let norms: Vec<Vec<Vec<Vec<f64>>>> = tables
        .iter()
        .map(|t| t.iter().map(|row| row.iter().map(TruncTensor::level_norms).collect()).collect())
        .collect();
    let mass = |a: usize, b: usize| {
        norms
            .iter()
            .flat_map(|nm| {
                nm[a][b - a]
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(i, &v)| level_mass(beta, p, i, v))
            })
            .fold(0.0, f64::max)
    };
    let w = ControlGrid::superadditive_hull(x.times().to_vec(), mass)?;
    let n = x.times().len();
    let a: Vec<f64> = par::map_range(seq.len(), |k| {
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let d = tables[0][i][j - i]
                    .level_distances(&tables[k + 1][i][j - i])
                    .expect("shapes checked");
                let wij = w.value(i, j);
                for (level, &v) in d.iter().enumerate().skip(1) {
                    let r = if v == 0.0 {
                        0.0
                    } else if wij > 0.0 {
                        v / wij.powf(level as f64 / p)
                    } else {
                        f64::INFINITY
                    };
                    worst = worst.max(r);
                }
            }
        }
        worst
    });
    let decays = a.iter().all(|&v| v <= 1e-12)
        || (a.len() >= 2 && a[a.len() - 1] < 0.5 * a[0] && a.iter().all(|v| v.is_finite()));
    Ok(TopologyReport { a, decays })
}

/// Parameters of the refinement limit used by [`extend`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub tol: f64,
    pub max_depth: usize,
    /// Each refinement step splits pieces into `base` parts.
    pub base: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_depth: 14,
            base: 2,
        }
    }
}

/// Convergence record of a refinement limit.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RefineStats {
    /// Depth reached, per cell.
    pub depths: Vec<usize>,
    /// Final delta, per cell.
    pub deltas: Vec<f64>,
    /// Raw deltas between successive unaccelerated products for the first
    /// cell.
    pub raw_deltas: Vec<f64>,
}

impl RefineStats {
    pub fn max_delta(&self) -> f64 {
        self.deltas.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_depth(&self) -> usize {
        self.depths.iter().copied().max().unwrap_or(0)
    }
}

pub(crate) fn power(a: &TruncTensor, k: usize) -> TruncTensor {
    let mut result = TruncTensor::unit(a.dim(), a.degree()).expect("valid shape");
    let mut base = a.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = result.mul_unchecked(&base);
        }
        e >>= 1;
        if e > 0 {
            base = base.mul_unchecked(&base);
        }
    }
    result
}

/// Richardson table over successive refinements: `level(k)` is the
/// approximation with `base^k` pieces, whose error expands in integer
/// powers of `base^-k`.
pub(crate) struct Richardson {
    base: f64,
    prev: Vec<TruncTensor>,
    pub raw: Vec<f64>,
}

impl Richardson {
    pub fn new(base: usize) -> Self {
        Self {
            base: base as f64,
            prev: Vec::new(),
            raw: Vec::new(),
        }
    }

    /// Adds the next approximation; returns the new diagonal entry and its
    /// distance to the previous diagonal entry.
    pub fn push(&mut self, value: TruncTensor) -> (TruncTensor, Option<f64>) {
        if let Some(last) = self.prev.first() {
            self.raw.push(value.sub(last).map(|d| d.norm()).unwrap_or(f64::INFINITY));
        }
        let mut row = Vec::with_capacity(self.prev.len() + 1);
        row.push(value);
        let mut factor = 1.0;
        for j in 1..=self.prev.len() {
            factor *= self.base;
            let hi = &row[j - 1];
            let lo = &self.prev[j - 1];
            let next = hi.zip_with(lo, |a, b| a + (a - b) / (factor - 1.0));
            row.push(next);
        }
        let delta = self
            .prev
            .last()
            .map(|old| row.last().unwrap().sub(old).map(|d| d.norm()).unwrap_or(f64::INFINITY));
        let diag = row.last().unwrap().clone();
        self.prev = row;
        (diag, delta)
    }
}

/// Drives a refinement sequence `approx(k)` until successive accelerated
/// values agree to `tol` relative to `max(1, ||value||)`.
pub(crate) fn refine_limit<F>(opts: &RefineOptions, mut approx: F) -> Result<(TruncTensor, usize, f64, Vec<f64>)>
where
    F: FnMut(usize) -> Result<TruncTensor>,
{
    if opts.base < 2 {
        return Err(Error::InvalidParameter("refinement base must be at least 2".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let mut rich = Richardson::new(opts.base);
    let mut last_delta = f64::INFINITY;
    for k in 0..=opts.max_depth {
        let (diag, delta) = rich.push(approx(k)?);
        if let Some(d) = delta {
            last_delta = d;
            if d <= opts.tol * diag.norm().max(1.0) {
                return Ok((diag, k, d, rich.raw));
            }
        }
    }
    Err(Error::NonConvergence {
        depth: opts.max_depth,
        delta: last_delta,
    })
}

/// The unique degree-`n` multiplicative functional extending `x`.
///
/// Each cell is the limit over `k` of the product of `base^k` equal pieces
/// `exp(log(cell) / base^k)`, truncated at the degree of `x` and padded with
/// zero higher levels. Levels up to the degree of `x` are copied unchanged.
pub fn extend(x: &GridFunctional, n: usize, opts: &RefineOptions) -> Result<(GridFunctional, RefineStats)> {
    let m = x.degree();
    if n < m {
        return Err(Error::InvalidParameter(format!("target degree {n} below current degree {m}")));
    }
    if n == m {
        let cells = x.cells().len();
        return Ok((
            x.clone(),
            RefineStats {
                depths: vec![0; cells],
                deltas: vec![0.0; cells],
                raw_deltas: Vec::new(),
            },
        ));
    }
    let results = par::try_map_range(x.cells().len(), |i| {
        let cell = &x.cells()[i];
        let log = cell.log()?;
        let (value, depth, delta, raw) = refine_limit(opts, |k| {
            let pieces = opts.base.pow(k as u32);
            let piece = log.scale(1.0 / pieces as f64).exp()?.pad_to(n)?;
            Ok(power_base(&piece, opts.base, k))
        })?;
        let mut levels = value.levels().to_vec();
        levels[..=m].clone_from_slice(cell.levels());
        Ok::<_, Error>((TruncTensor::from_levels(x.dim(), levels)?, depth, delta, raw))
    })?;
    let mut stats = RefineStats::default();
    let mut cells = Vec::with_capacity(results.len());
    for (k, (cell, depth, delta, raw)) in results.into_iter().enumerate() {
        cells.push(cell);
        stats.depths.push(depth);
        stats.deltas.push(delta);
        if k == 0 {
            stats.raw_deltas = raw;
        }
    }
    Ok((GridFunctional::new(x.times().to_vec(), cells)?, stats))
}

/// `a^(base^k)` by `k` repeated `base`-th powers.
fn power_base(a: &TruncTensor, base: usize, k: usize) -> TruncTensor {
    (0..k).fold(a.clone(), |acc, _| power(&acc, base))
}

/// Extension of a rough path to degree `n`, returned as a functional.
pub fn extend_rough_path(x: &RoughPath, n: usize, opts: &RefineOptions) -> Result<(GridFunctional, RefineStats)> {
    extend(x.functional(), n, opts)
}
