//! Sampled paths, p-variation and controls.
//!
//! Suprema over subdivisions are taken over subdivisions drawn from grid
//! points. For a piecewise-linear path this loses nothing: moving a
//! subdivision point inside a segment changes a sum of convex functions of
//! its position, so the supremum is reached at segment endpoints.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::par;

/// Relative slack used when comparing floating-point sums that are equal in
/// exact arithmetic.
pub const REL_SLACK: f64 = 1e-12;

pub(crate) fn leq_with_slack(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + REL_SLACK * rhs.abs().max(lhs.abs()) + f64::MIN_POSITIVE
}

pub fn l1_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn l1_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

/// A path sampled on a strictly increasing time grid, read piecewise-linearly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    times: Vec<f64>,
    dim: usize,
    values: Vec<f64>,
}

pub(crate) fn validate_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidPath("need at least two samples".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidPath("non-finite time".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidPath("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Position of `t` on a grid, up to a relative tolerance.
pub(crate) fn grid_index(times: &[f64], t: f64) -> Option<usize> {
    let tol = 1e-12 * t.abs().max(1.0);
    let pos = times.partition_point(|&s| s < t - tol);
    (pos < times.len() && (times[pos] - t).abs() <= tol).then_some(pos)
}

impl SampledPath {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() != times.len() {
            return Err(Error::InvalidPath(format!(
                "{} times but {} points",
                times.len(),
                points.len()
            )));
        }
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidPath("points have different dimensions".into()));
        }
        Self::from_flat(times, dim, points.concat())
    }

    pub fn from_flat(times: Vec<f64>, dim: usize, values: Vec<f64>) -> Result<Self> {
        validate_times(&times)?;
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be positive".into()));
        }
        if values.len() != dim * times.len() {
            return Err(Error::InvalidPath("value count does not match the grid".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite value".into()));
        }
        Ok(Self { times, dim, values })
    }

    /// Uniform grid on `[t0, t1]`.
    pub fn uniform(t0: f64, t1: f64, points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::InvalidPath("need at least two samples".into()));
        }
        let times = (0..n)
            .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
            .collect();
        Self::new(times, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn segments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dim)
    }

    pub fn start(&self) -> &[f64] {
        self.point(0)
    }

    pub fn end(&self) -> &[f64] {
        self.point(self.len() - 1)
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    pub fn increment(&self, i: usize, j: usize) -> Vec<f64> {
        self.point(j)
            .iter()
            .zip(self.point(i))
            .map(|(b, a)| b - a)
            .collect()
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        grid_index(&self.times, t).ok_or(Error::OffGrid(t))
    }

    /// Grid indices of a window `[s, t]`.
    pub fn window(&self, s: f64, t: f64) -> Result<(usize, usize)> {
        let i = self.index_of(s)?;
        let j = self.index_of(t)?;
        if i >= j {
            return Err(Error::InvalidParameter(format!("empty window [{s}, {t}]")));
        }
        Ok((i, j))
    }

    /// Linear interpolation at an arbitrary time of the span.
    pub fn value_at(&self, t: f64) -> Result<Vec<f64>> {
        let (lo, hi) = self.span();
        let tol = 1e-12 * t.abs().max(1.0);
        if t < lo - tol || t > hi + tol {
            return Err(Error::OutOfSpan { t, lo, hi });
        }
        let t = t.clamp(lo, hi);
        let k = self.times.partition_point(|&s| s <= t).clamp(1, self.len() - 1) - 1;
        let (a, b) = (self.times[k], self.times[k + 1]);
        let theta = (t - a) / (b - a);
        Ok(self
            .point(k)
            .iter()
            .zip(self.point(k + 1))
            .map(|(x, y)| x + theta * (y - x))
            .collect())
    }

    /// Sub-path on grid indices `i..=j`.
    pub fn slice(&self, i: usize, j: usize) -> Result<Self> {
        if i >= j || j >= self.len() {
            return Err(Error::InvalidParameter(format!("bad slice {i}..={j}")));
        }
        Self::from_flat(
            self.times[i..=j].to_vec(),
            self.dim,
            self.values[i * self.dim..(j + 1) * self.dim].to_vec(),
        )
    }

    /// Sub-path on `[a, b]`, interpolating the end points when they are
    /// off-grid.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        if a >= b {
            return Err(Error::InvalidParameter(format!("empty window [{a}, {b}]")));
        }
        let mut times = vec![a];
        let mut values = self.value_at(a)?;
        let tol = |t: f64| 1e-12 * t.abs().max(1.0);
        for (k, &t) in self.times.iter().enumerate() {
            if t > a + tol(a) && t < b - tol(b) {
                times.push(t);
                values.extend_from_slice(self.point(k));
            }
        }
        times.push(b);
        values.extend(self.value_at(b)?);
        Self::from_flat(times, self.dim, values)
    }

    /// Apply a map to every sample.
    pub fn map_points<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>>,
    {
        let mapped = self.points().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(self.times.clone(), mapped)
    }

    pub fn translate(&self, v: &[f64]) -> Result<Self> {
        self.map_points(|p| Ok(p.iter().zip(v).map(|(a, b)| a + b).collect()))
    }

    /// Largest `l1` distance between two samples.
    pub fn max_increment(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.max(l1_dist(self.point(i), self.point(j)));
            }
        }
        best
    }
}

/// `max over subdivisions i = k_0 < k_1 < ... < k_r = j` of
/// `sum term(k_l, k_(l+1))`, by the O(n^2) recursion
/// `best(b) = max_(a<b) best(a) + term(a, b)`.
pub fn max_subdivision_sum<F>(i: usize, j: usize, term: F) -> f64
where
    F: Fn(usize, usize) -> f64,
{
    if i >= j {
        return 0.0;
    }
    let mut best = vec![f64::NEG_INFINITY; j - i + 1];
    best[0] = 0.0;
    for b in 1..=j - i {
        let mut m = f64::NEG_INFINITY;
        for a in 0..b {
            let cand = best[a] + term(i + a, i + b);
            if cand > m {
                m = cand;
            }
        }
        best[b] = m;
    }
    best[j - i]
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    Ok(())
}

/// `sum ||x_b - x_a||^p` maximised over grid subdivisions of `i..=j`.
pub fn p_variation_pow_indices(x: &SampledPath, p: f64, i: usize, j: usize) -> Result<f64> {
    check_p(p)?;
    if j >= x.len() || i > j {
        return Err(Error::InvalidParameter(format!("bad window {i}..={j}")));
    }
    Ok(max_subdivision_sum(i, j, |a, b| {
        l1_dist(x.point(a), x.point(b)).powf(p)
    }))
}

/// p-variation of `x` over the grid window `[s, t]`.
pub fn p_variation(x: &SampledPath, p: f64, s: f64, t: f64) -> Result<f64> {
    check_p(p)?;
    let (i, j) = x.window(s, t)?;
    Ok(p_variation_pow_indices(x, p, i, j)?.powf(1.0 / p))
}

/// p-variation over the whole path.
pub fn p_variation_full(x: &SampledPath, p: f64) -> Result<f64> {
    Ok(p_variation_pow_indices(x, p, 0, x.len() - 1)?.powf(1.0 / p))
}

/// A nonnegative, superadditive table `w(i, j)` on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlGrid {
    times: Vec<f64>,
    table: Vec<f64>,
}

impl ControlGrid {
    /// Builds a control from a full `n x n` row-major table; entries below
    /// the diagonal are ignored.
    pub fn new(times: Vec<f64>, table: Vec<f64>) -> Result<Self> {
        validate_times(&times)?;
        let n = times.len();
        if table.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "control table needs {} entries, got {}",
                n * n,
                table.len()
            )));
        }
        let grid = Self { times, table };
        grid.check_invariants()?;
        Ok(grid)
    }

    /// The smallest superadditive table dominating `mass` on every pair:
    /// `w(i, j) = max over subdivisions of sum mass(k_l, k_(l+1))`.
    pub fn superadditive_hull<F>(times: Vec<f64>, mass: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> f64 + Sync + Send,
    {
        validate_times(&times)?;
        let n = times.len();
        let rows = par::map_range(n, |i| {
            let mut row = vec![0.0; n];
            let mut best = vec![0.0; n];
            for b in i + 1..n {
                let mut m = f64::NEG_INFINITY;
                for a in i..b {
                    let cand = best[a] + mass(a, b);
                    if cand > m {
                        m = cand;
                    }
                }
                best[b] = m;
                row[b] = m;
            }
            row
        });
        Ok(Self {
            times,
            table: rows.concat(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            0.0
        } else {
            self.table[i * self.times.len() + j]
        }
    }

    /// Value on a pair of grid times.
    pub fn at(&self, s: f64, t: f64) -> Result<f64> {
        let i = grid_index(&self.times, s).ok_or(Error::OffGrid(s))?;
        let j = grid_index(&self.times, t).ok_or(Error::OffGrid(t))?;
        Ok(self.value(i, j))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            times: self.times.clone(),
            table: self.table.iter().map(|v| v * c).collect(),
        }
    }

    /// Zero diagonal, nonnegativity and superadditivity (up to a relative
    /// slack of `REL_SLACK`).
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.times.len();
        for i in 0..n {
            if self.table[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter(format!("w({i},{i}) is not zero")));
            }
            for j in i + 1..n {
                let v = self.value(i, j);
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!("w({i},{j}) = {v}")));
                }
            }
        }
        for i in 0..n {
            for k in i + 1..n {
                for j in k + 1..n {
                    let sum = self.value(i, k) + self.value(k, j);
                    if !leq_with_slack(sum, self.value(i, j)) {
                        return Err(Error::InvalidParameter(format!(
                            "not superadditive at ({i},{k},{j}): {sum} > {}",
                            self.value(i, j)
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `w(i, j) = ||x||_(p, [t_i, t_j])^p`.
pub fn natural_control(x: &SampledPath, p: f64) -> Result<ControlGrid> {
    check_p(p)?;
    ControlGrid::superadditive_hull(x.times().to_vec(), |a, b| {
        l1_dist(x.point(a), x.point(b)).powf(p)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ControlReport {
    Controlled,
    /// `||x_j - x_i||^p > w(i, j)`.
    IncrementViolation { i: usize, j: usize, lhs: f64, rhs: f64 },
    /// `||x||_(p,[t_i,t_j])^p > w(i, j)`.
    VariationViolation { i: usize, j: usize, lhs: f64, rhs: f64 },
}

impl ControlReport {
    pub fn is_controlled(&self) -> bool {
        matches!(self, ControlReport::Controlled)
    }
}

/// Checks that the p-variation of `x` is controlled by `w`.
pub fn verify_controlled(x: &SampledPath, p: f64, w: &ControlGrid) -> Result<ControlReport> {
    check_p(p)?;
    if w.times().len() != x.len()
        || w.times().iter().zip(x.times()).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::GridMismatch);
    }
    let n = x.len();
    for i in 0..n {
        for j in i + 1..n {
            let lhs = l1_dist(x.point(i), x.point(j)).powf(p);
            let rhs = w.value(i, j);
            if !leq_with_slack(lhs, rhs) {
                return Ok(ControlReport::IncrementViolation { i, j, lhs, rhs });
            }
        }
    }
    let natural = natural_control(x, p)?;
    for i in 0..n {
        for j in i + 1..n {
            let lhs = natural.value(i, j);
            let rhs = w.value(i, j);
            if !leq_with_slack(lhs, rhs) {
                return Ok(ControlReport::VariationViolation { i, j, lhs, rhs });
            }
        }
    }
    Ok(ControlReport::Controlled)
}

/// `x! = Gamma(x + 1)` for real `x >= 0`.
pub fn factorial(x: f64) -> f64 {
    ln_gamma(x + 1.0).exp()
}

/// Bernoulli numbers `B_2, B_4, ..., B_16`.
const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// `sum_(k>=1) k^(-a)` for `a > 1`: a direct head sum followed by the
/// Euler-Maclaurin tail (integral term, half end term and Bernoulli
/// corrections).
pub(crate) fn power_series_sum(a: f64) -> f64 {
    const HEAD: usize = 64;
    let head: f64 = (1..HEAD).map(|k| (k as f64).powf(-a)).sum();
    let n = HEAD as f64;
    let mut tail = n.powf(1.0 - a) / (a - 1.0) + 0.5 * n.powf(-a);
    // d^m/dx^m x^-a = (-1)^m a (a+1) ... (a+m-1) x^(-a-m)
    let mut rising = a; // a (a+1) ... (a + 2j - 2)
    let mut fact = 2.0; // (2j)!
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let m = 2 * j + 1;
        let deriv = -rising * n.powf(-a - m as f64);
        tail -= b / fact * deriv;
        rising *= (a + m as f64) * (a + m as f64 + 1.0);
        fact *= ((m + 2) * (m + 3)) as f64;
    }
    head + tail
}

/// `beta_p = p (1 + sum_(k>=1) (2/k)^(([p]+1)/p))`.
pub fn beta_p(p: f64) -> Result<f64> {
    check_p(p)?;
    let a = (p.floor() + 1.0) / p;
    Ok(p * (1.0 + 2f64.powf(a) * power_series_sum(a)))
}

/// Both sides of the neo-classical inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NeoClassical {
    pub lhs: f64,
    pub rhs: f64,
}

impl NeoClassical {
    pub fn holds(&self) -> bool {
        leq_with_slack(self.lhs, self.rhs)
    }
}

fn pow_term(base: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        1.0
    } else {
        base.powf(exponent)
    }
}

/// `(1/p) sum_k a^(k/p) b^((n-k)/p) / ((k/p)! ((n-k)/p)!)` against
/// `(a+b)^(n/p) / (n/p)!`.
pub fn neo_classical(p: f64, n: u32, a: f64, b: f64) -> Result<NeoClassical> {
    check_p(p)?;
    if !(a >= 0.0) || !(b >= 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("a = {a}, b = {b} must be >= 0")));
    }
    let lhs = (0..=n)
        .map(|k| {
            let (x, y) = (k as f64 / p, (n - k) as f64 / p);
            pow_term(a, x) * pow_term(b, y) / (factorial(x) * factorial(y))
        })
        .sum::<f64>()
        / p;
    let e = n as f64 / p;
    let rhs = pow_term(a + b, e) / factorial(e);
    Ok(NeoClassical { lhs, rhs })
}

pub fn neo_classical_check(p: f64, n: u32, a: f64, b: f64) -> Result<bool> {
    Ok(neo_classical(p, n, a, b)?.holds())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> SampledPath {
        SampledPath::uniform(
            0.0,
            (values.len() - 1) as f64,
            values.iter().map(|&v| vec![v]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn path_validation() {
        assert!(SampledPath::new(vec![0.0], vec![vec![0.0]]).is_err());
        assert!(SampledPath::new(vec![0.0, 0.0], vec![vec![0.0], vec![1.0]]).is_err());
        assert!(SampledPath::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0, 2.0]]).is_err());
        assert!(SampledPath::new(vec![0.0, 1.0], vec![vec![0.0], vec![f64::NAN]]).is_err());
    }

    #[test]
    fn monotone_path_has_unit_variation() {
        let x = line(&[0.0, 0.1, 0.5, 0.9, 1.0]);
        assert!((p_variation(&x, 2.0, 0.0, 4.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zigzag_variation() {
        let x = line(&[0.0, 1.0, 0.0]);
        assert!((p_variation(&x, 2.0, 0.0, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn window_errors() {
        let x = line(&[0.0, 1.0, 0.0]);
        assert!(matches!(p_variation(&x, 2.0, 0.5, 2.0), Err(Error::OffGrid(_))));
        assert!(matches!(p_variation(&x, 0.5, 0.0, 2.0), Err(Error::InvalidParameter(_))));
        assert!(p_variation(&x, 2.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn natural_control_of_monotone_path() {
        let x = line(&[0.0, 0.5, 1.5, 1.75]);
        let w = natural_control(&x, 2.5).unwrap();
        for i in 0..4 {
            assert_eq!(w.value(i, i), 0.0);
            for j in i + 1..4 {
                let expected = (x.point(j)[0] - x.point(i)[0]).powf(2.5);
                assert!((w.value(i, j) - expected).abs() < 1e-14);
            }
        }
        w.check_invariants().unwrap();
    }

    #[test]
    fn verify_controlled_cases() {
        let x = line(&[0.0, 1.0, -0.5, 0.25, 2.0]);
        let w = natural_control(&x, 2.0).unwrap();
        assert!(verify_controlled(&x, 2.0, &w).unwrap().is_controlled());
        let zero = ControlGrid::new(x.times().to_vec(), vec![0.0; 25]).unwrap();
        assert!(matches!(
            verify_controlled(&x, 2.0, &zero).unwrap(),
            ControlReport::IncrementViolation { .. }
        ));
        let shrunk = w.scaled(0.99);
        assert!(!verify_controlled(&x, 2.0, &shrunk).unwrap().is_controlled());
        let other = natural_control(&line(&[0.0, 1.0]), 2.0).unwrap();
        assert!(matches!(verify_controlled(&x, 2.0, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn control_grid_rejects_subadditive_table() {
        let times = vec![0.0, 1.0, 2.0];
        #[rustfmt::skip]
        let table = vec![
            0.0, 1.0, 1.5,
            0.0, 0.0, 1.0,
            0.0, 0.0, 0.0,
        ];
        assert!(ControlGrid::new(times, table).is_err());
    }

    #[test]
    fn beta_p_closed_forms() {
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((beta_p(1.0).unwrap() - (1.0 + 2.0 * pi2 / 3.0)).abs() < 1e-12);
        const ZETA_3_2: f64 = 2.612_375_348_685_488;
        let expected = 2.0 * (1.0 + 2f64.powf(1.5) * ZETA_3_2);
        assert!((beta_p(2.0).unwrap() - expected).abs() < 1e-10);
        assert!(beta_p(0.9).is_err());
    }

    #[test]
    fn beta_exponent_exceeds_one() {
        for k in 0..300 {
            let p = 1.0 + k as f64 * 0.01;
            assert!((p.floor() + 1.0) / p > 1.0);
            assert!(beta_p(p).unwrap().is_finite());
        }
    }

    #[test]
    fn neo_classical_basics() {
        let r = neo_classical(2.5, 0, 0.3, 0.7).unwrap();
        assert!((r.lhs - 1.0 / 2.5).abs() < 1e-15);
        assert!(r.holds());
        for n in 0..=20 {
            let r = neo_classical(1.0, n, 0.7, 1.9).unwrap();
            assert!(((r.lhs - r.rhs) / r.rhs).abs() < 1e-12, "n = {n}: {r:?}");
        }
        assert!(neo_classical(1.5, 3, -1.0, 1.0).is_err());
        assert!(neo_classical(0.5, 3, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_endpoints_in_neo_classical() {
        let r = neo_classical(1.7, 5, 0.0, 2.0).unwrap();
        assert!(r.holds());
        let r = neo_classical(1.7, 5, 0.0, 0.0).unwrap();
        assert_eq!(r.lhs, 0.0);
    }
}
