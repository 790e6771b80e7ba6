//! Charts, atlases and chart-local rough paths.
//!
//! Manifold points are ambient coordinates: the circle in `R^2`, the sphere
//! in `R^3`, the flat torus through representatives in `[0, 1)^2`. A path on
//! a manifold is a sequence of samples; inside a chart it is read
//! piecewise-linearly in chart coordinates.
//!
//! A [`LocalRoughPath`] is a family of rough paths, one per element of a
//! compact cover of the time span, each living in one chart. It is
//! consistent when, on every overlap, the transition map pushes one item
//! forward onto the other.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::covers::{extract_subdivision, refine_from_open_cover, Interval, OpenInterval};
use crate::error::{Error, Result};
use crate::integration::{pushforward, SewOptions};
use crate::lipschitz::{Affine, JetMap, LipJet};
use crate::par;
use crate::rough::{concat_functionals, dp_product_metric, on_common_grid, RoughPath};
use crate::variation::{l1_dist, l1_norm, SampledPath};

pub trait Chart: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    /// Dimension of the chart coordinates.
    fn dim(&self) -> usize;
    fn ambient_dim(&self) -> usize;
    /// Whether a manifold point lies in the chart domain.
    fn contains(&self, p: &[f64]) -> bool;
    /// `l1` distance from chart coordinates `y` to the boundary of the chart
    /// image; nonpositive outside.
    fn depth(&self, y: &[f64]) -> f64;
    fn forward(&self, p: &[f64]) -> Vec<f64>;
    fn inverse(&self, y: &[f64]) -> Vec<f64>;
}

/// Angle chart of the unit circle with values in `(lo, lo + 2π)`.
#[derive(Clone, Debug)]
pub struct AngleChart {
    name: String,
    lo: f64,
}

impl AngleChart {
    pub fn new(name: impl Into<String>, lo: f64) -> Self {
        Self { name: name.into(), lo }
    }

    fn angle(&self, p: &[f64]) -> f64 {
        let mut a = p[1].atan2(p[0]);
        while a <= self.lo {
            a += 2.0 * PI;
        }
        while a >= self.lo + 2.0 * PI {
            a -= 2.0 * PI;
        }
        a
    }
}

impl Chart for AngleChart {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        1
    }
    fn ambient_dim(&self) -> usize {
        2
    }
    fn contains(&self, p: &[f64]) -> bool {
        l1_norm(p) > 0.0 && self.depth(&self.forward(p)) > 0.0
    }
    fn depth(&self, y: &[f64]) -> f64 {
        (y[0] - self.lo).min(self.lo + 2.0 * PI - y[0])
    }
    fn forward(&self, p: &[f64]) -> Vec<f64> {
        vec![self.angle(p)]
    }
    fn inverse(&self, y: &[f64]) -> Vec<f64> {
        vec![y[0].cos(), y[0].sin()]
    }
}

/// Stereographic projection of the unit sphere from one pole, restricted to
/// the `l1` ball of radius `radius` in the plane.
#[derive(Clone, Debug)]
pub struct StereoChart {
    name: String,
    /// `+1` projects from the north pole, `-1` from the south pole.
    pole: f64,
    radius: f64,
}

impl StereoChart {
    pub fn new(name: impl Into<String>, pole: f64, radius: f64) -> Self {
        Self {
            name: name.into(),
            pole,
            radius,
        }
    }
}

impl Chart for StereoChart {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        2
    }
    fn ambient_dim(&self) -> usize {
        3
    }
    fn contains(&self, p: &[f64]) -> bool {
        1.0 - self.pole * p[2] > 0.0 && self.depth(&self.forward(p)) > 0.0
    }
    fn depth(&self, y: &[f64]) -> f64 {
        self.radius - l1_norm(y)
    }
    fn forward(&self, p: &[f64]) -> Vec<f64> {
        let s = 1.0 - self.pole * p[2];
        vec![p[0] / s, p[1] / s]
    }
    fn inverse(&self, y: &[f64]) -> Vec<f64> {
        let r2 = y[0] * y[0] + y[1] * y[1];
        vec![
            2.0 * y[0] / (r2 + 1.0),
            2.0 * y[1] / (r2 + 1.0),
            self.pole * (r2 - 1.0) / (r2 + 1.0),
        ]
    }
}

fn wrap_half(v: f64) -> f64 {
    v - (v + 0.5).floor()
}

/// Chart of the flat torus `R^2 / Z^2` centred at `center`, with values in
/// the open square `(-1/2, 1/2)^2`.
#[derive(Clone, Debug)]
pub struct TorusChart {
    name: String,
    center: [f64; 2],
}

impl TorusChart {
    pub fn new(name: impl Into<String>, center: [f64; 2]) -> Self {
        Self {
            name: name.into(),
            center,
        }
    }
}

impl Chart for TorusChart {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        2
    }
    fn ambient_dim(&self) -> usize {
        2
    }
    fn contains(&self, p: &[f64]) -> bool {
        self.depth(&self.forward(p)) > 0.0
    }
    fn depth(&self, y: &[f64]) -> f64 {
        (0.5 - y[0].abs()).min(0.5 - y[1].abs())
    }
    fn forward(&self, p: &[f64]) -> Vec<f64> {
        vec![wrap_half(p[0] - self.center[0]), wrap_half(p[1] - self.center[1])]
    }
    fn inverse(&self, y: &[f64]) -> Vec<f64> {
        vec![
            (y[0] + self.center[0]).rem_euclid(1.0),
            (y[1] + self.center[1]).rem_euclid(1.0),
        ]
    }
}

/// The identity chart of `R^n`.
#[derive(Clone, Debug)]
pub struct IdentityChart {
    dim: usize,
}

impl Chart for IdentityChart {
    fn name(&self) -> &str {
        "identity"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn ambient_dim(&self) -> usize {
        self.dim
    }
    fn contains(&self, _p: &[f64]) -> bool {
        true
    }
    fn depth(&self, _y: &[f64]) -> f64 {
        f64::INFINITY
    }
    fn forward(&self, p: &[f64]) -> Vec<f64> {
        p.to_vec()
    }
    fn inverse(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }
}

/// `φ_k ∘ φ_i^(-1)` computed through the ambient space. Where the charts
/// are related by locally constant translations, derivatives are those of
/// a translation.
#[derive(Clone, Debug)]
struct ChartTranslation {
    from: Arc<dyn Chart>,
    to: Arc<dyn Chart>,
}

impl JetMap for ChartTranslation {
    fn dim_in(&self) -> usize {
        self.from.dim()
    }
    fn dim_out(&self) -> usize {
        self.to.dim()
    }
    fn max_order(&self) -> usize {
        usize::MAX
    }
    fn in_domain(&self, y: &[f64]) -> bool {
        self.from.depth(y) > 0.0 && {
            let p = self.from.inverse(y);
            self.to.contains(&p)
        }
    }
    fn derivative(&self, y: &[f64], k: usize) -> Vec<f64> {
        let n = self.dim_in();
        match k {
            0 => self.to.forward(&self.from.inverse(y)),
            1 => {
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    m[i * n + i] = 1.0;
                }
                m
            }
            _ => vec![0.0; n * n.pow(k as u32)],
        }
    }
}

/// `u -> u / |u|^2` (Euclidean norm) on the punctured plane, restricted to
/// points whose image and preimage lie in the stereographic chart images.
#[derive(Clone, Debug)]
struct Inversion {
    radius: f64,
}

impl JetMap for Inversion {
    fn dim_in(&self) -> usize {
        2
    }
    fn dim_out(&self) -> usize {
        2
    }
    fn max_order(&self) -> usize {
        3
    }
    fn in_domain(&self, u: &[f64]) -> bool {
        let r2 = u[0] * u[0] + u[1] * u[1];
        r2 > 0.0 && l1_norm(u) < self.radius && l1_norm(u) / r2 < self.radius
    }
    fn derivative(&self, u: &[f64], k: usize) -> Vec<f64> {
        let r2 = u[0] * u[0] + u[1] * u[1];
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        match k {
            0 => vec![u[0] / r2, u[1] / r2],
            1 => {
                let mut out = vec![0.0; 4];
                for i in 0..2 {
                    for j in 0..2 {
                        out[i * 2 + j] = delta(i, j) / r2 - 2.0 * u[i] * u[j] / (r2 * r2);
                    }
                }
                out
            }
            2 => {
                let mut out = vec![0.0; 8];
                for i in 0..2 {
                    for j in 0..2 {
                        for l in 0..2 {
                            out[(i * 2 + j) * 2 + l] = -2.0
                                * (delta(i, j) * u[l] + delta(i, l) * u[j] + delta(j, l) * u[i])
                                / (r2 * r2)
                                + 8.0 * u[i] * u[j] * u[l] / (r2 * r2 * r2);
                        }
                    }
                }
                out
            }
            3 => {
                let mut out = vec![0.0; 16];
                let r4 = r2 * r2;
                for i in 0..2 {
                    for j in 0..2 {
                        for l in 0..2 {
                            for m in 0..2 {
                                let pair = delta(i, j) * delta(l, m)
                                    + delta(i, l) * delta(j, m)
                                    + delta(j, l) * delta(i, m);
                                let quad = delta(i, j) * u[l] * u[m]
                                    + delta(i, l) * u[j] * u[m]
                                    + delta(j, l) * u[i] * u[m]
                                    + delta(i, m) * u[j] * u[l]
                                    + delta(j, m) * u[i] * u[l]
                                    + delta(l, m) * u[i] * u[j];
                                out[((i * 2 + j) * 2 + l) * 2 + m] = -2.0 * pair / r4
                                    + 8.0 * quad / (r4 * r2)
                                    - 48.0 * u[i] * u[j] * u[l] * u[m] / (r4 * r4);
                            }
                        }
                    }
                }
                out
            }
            _ => panic!("derivative order {k} unavailable"),
        }
    }
}

/// How the global chart of a flat atlas relates to the chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GlobalChart {
    /// Chart coordinates are global coordinates.
    Identity,
    /// Chart coordinates plus a chart offset are global coordinates up to a
    /// lattice of the given periods.
    Lattice { periods: Vec<f64> },
}

#[derive(Clone)]
pub struct Atlas {
    name: String,
    charts: Vec<Arc<dyn Chart>>,
    transitions: BTreeMap<(usize, usize), LipJet>,
    gamma: f64,
    global: Option<GlobalChart>,
    /// Offset added to chart coordinates to reach global coordinates.
    offsets: Vec<Vec<f64>>,
}

impl fmt::Debug for Atlas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Atlas")
            .field("name", &self.name)
            .field("charts", &self.charts.iter().map(|c| c.name()).collect::<Vec<_>>())
            .field("gamma", &self.gamma)
            .field("global", &self.global)
            .finish()
    }
}

fn translation_transitions(charts: &[Arc<dyn Chart>]) -> BTreeMap<(usize, usize), LipJet> {
    let mut out = BTreeMap::new();
    for (i, a) in charts.iter().enumerate() {
        for (k, b) in charts.iter().enumerate() {
            if i != k {
                let map: Arc<dyn JetMap> = Arc::new(ChartTranslation {
                    from: a.clone(),
                    to: b.clone(),
                });
                let name = format!("{}->{}", a.name(), b.name());
                out.insert((i, k), LipJet::new(map, 3, 1.0, 1.0, name).expect("valid jet"));
            }
        }
    }
    out
}

/// Radius of the stereographic chart images.
pub const SPHERE_CHART_RADIUS: f64 = 2.5;

impl Atlas {
    /// Two angle charts, on `(-π, π)` and `(0, 2π)`.
    pub fn circle() -> Self {
        let charts: Vec<Arc<dyn Chart>> = vec![
            Arc::new(AngleChart::new("angle(-pi,pi)", -PI)),
            Arc::new(AngleChart::new("angle(0,2pi)", 0.0)),
        ];
        Self {
            name: "circle".into(),
            transitions: translation_transitions(&charts),
            charts,
            gamma: f64::INFINITY,
            global: Some(GlobalChart::Lattice {
                periods: vec![2.0 * PI],
            }),
            offsets: vec![vec![0.0], vec![0.0]],
        }
    }

    /// Stereographic projections from both poles.
    pub fn sphere() -> Self {
        let r = SPHERE_CHART_RADIUS;
        let charts: Vec<Arc<dyn Chart>> = vec![
            Arc::new(StereoChart::new("north", 1.0, r)),
            Arc::new(StereoChart::new("south", -1.0, r)),
        ];
        let mut transitions = BTreeMap::new();
        for (i, k) in [(0, 1), (1, 0)] {
            let map: Arc<dyn JetMap> = Arc::new(Inversion { radius: r });
            let name = format!("{}->{}", charts[i].name(), charts[k].name());
            transitions.insert((i, k), LipJet::new(map, 3, 1.0, 0.0, name).expect("valid jet"));
        }
        Self {
            name: "sphere".into(),
            charts,
            transitions,
            gamma: f64::INFINITY,
            global: None,
            offsets: vec![vec![0.0, 0.0]; 2],
        }
    }

    /// Four square charts of `R^2 / Z^2` centred at `(0,0)`, `(1/2,0)`,
    /// `(0,1/2)` and `(1/2,1/2)`.
    pub fn torus() -> Self {
        let centers = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]];
        let charts: Vec<Arc<dyn Chart>> = centers
            .iter()
            .map(|c| Arc::new(TorusChart::new(format!("square({},{})", c[0], c[1]), *c)) as Arc<dyn Chart>)
            .collect();
        Self {
            name: "torus".into(),
            transitions: translation_transitions(&charts),
            charts,
            gamma: f64::INFINITY,
            global: Some(GlobalChart::Lattice {
                periods: vec![1.0, 1.0],
            }),
            offsets: centers.iter().map(|c| c.to_vec()).collect(),
        }
    }

    /// `R^n` with the identity chart.
    pub fn euclidean(n: usize) -> Self {
        Self {
            name: format!("R^{n}"),
            charts: vec![Arc::new(IdentityChart { dim: n })],
            transitions: BTreeMap::new(),
            gamma: f64::INFINITY,
            global: Some(GlobalChart::Identity),
            offsets: vec![vec![0.0; n]],
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "circle" => Ok(Self::circle()),
            "sphere" => Ok(Self::sphere()),
            "torus" => Ok(Self::torus()),
            _ => match name.strip_prefix("R").and_then(|n| n.trim_start_matches('^').parse().ok()) {
                Some(n) if n > 0 => Ok(Self::euclidean(n)),
                _ => Err(Error::InvalidParameter(format!("unknown atlas {name}"))),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn charts(&self) -> &[Arc<dyn Chart>] {
        &self.charts
    }

    pub fn chart(&self, i: usize) -> &Arc<dyn Chart> {
        &self.charts[i]
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn global(&self) -> Option<&GlobalChart> {
        self.global.as_ref()
    }

    pub fn transition(&self, from: usize, to: usize) -> Result<&LipJet> {
        self.transitions
            .get(&(from, to))
            .ok_or(Error::MissingTransition { from, to })
    }

    /// The chart whose image contains `p` deepest.
    pub fn best_chart(&self, p: &[f64]) -> Option<usize> {
        self.charts
            .iter()
            .enumerate()
            .filter(|(_, c)| c.contains(p))
            .map(|(i, c)| (i, c.depth(&c.forward(p))))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    /// Largest violation over `points` of `φ_k φ_i^(-1) = (φ_k φ_j^(-1))
    /// (φ_j φ_i^(-1))` on triple overlaps and of `φ_k φ_i^(-1) φ_i = φ_k`.
    pub fn cocycle_defect(&self, points: &[Vec<f64>]) -> Result<f64> {
        let mut worst = 0.0f64;
        for p in points {
            let inside: Vec<usize> = (0..self.charts.len()).filter(|&i| self.charts[i].contains(p)).collect();
            for &i in &inside {
                let yi = self.charts[i].forward(p);
                for &k in &inside {
                    if i == k {
                        continue;
                    }
                    let direct = self.transition(i, k)?.value(&yi);
                    worst = worst.max(l1_dist(&direct, &self.charts[k].forward(p)));
                    for &j in &inside {
                        if j == i || j == k {
                            continue;
                        }
                        let via = self.transition(j, k)?.value(&self.transition(i, j)?.value(&yi));
                        worst = worst.max(l1_dist(&direct, &via));
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Global coordinates of an ambient point, in a fixed fundamental
    /// domain.
    pub fn global_anchor(&self, p: &[f64]) -> Result<Vec<f64>> {
        match &self.global {
            Some(GlobalChart::Identity) => Ok(p.to_vec()),
            Some(GlobalChart::Lattice { .. }) if self.name == "circle" => Ok(vec![p[1].atan2(p[0])]),
            Some(GlobalChart::Lattice { .. }) => Ok(p.to_vec()),
            None => Err(Error::NoGlobalChart(self.name.clone())),
        }
    }

    /// Translation from chart `i` coordinates to global coordinates.
    fn to_global(&self, i: usize) -> Result<LipJet> {
        if self.global.is_none() {
            return Err(Error::NoGlobalChart(self.name.clone()));
        }
        let n = self.charts[i].dim();
        let mut map = Affine::identity(n);
        map.offset = self.offsets[i].clone();
        LipJet::new(Arc::new(map), 3, 1.0, 1.0, format!("{}->global", self.charts[i].name()))
    }

    /// Shift by a lattice vector bringing `y` closest to `anchor`.
    fn snap(&self, y: &[f64], anchor: &[f64]) -> Vec<f64> {
        match &self.global {
            Some(GlobalChart::Lattice { periods }) => y
                .iter()
                .zip(anchor)
                .zip(periods)
                .map(|((v, a), t)| v + ((a - v) / t).round() * t)
                .collect(),
            _ => y.to_vec(),
        }
    }

    /// Unwraps ambient samples into global coordinates, starting from the
    /// anchor of the first sample and moving each step by the shortest
    /// lattice representative.
    pub fn unwrap_path(&self, x: &SampledPath) -> Result<SampledPath> {
        let mut prev = self.global_anchor(x.start())?;
        let mut points = vec![prev.clone()];
        for p in x.points().skip(1) {
            let next = self.snap(&self.global_anchor(p)?, &prev);
            points.push(next.clone());
            prev = next;
        }
        SampledPath::new(x.times().to_vec(), points)
    }
}

/// One element of a local rough path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalItem {
    pub chart: usize,
    pub interval: Interval,
    pub path: RoughPath,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalRoughPath {
    pub p: f64,
    pub span: Interval,
    pub items: Vec<LocalItem>,
}

impl LocalRoughPath {
    pub fn new(p: f64, span: Interval, items: Vec<LocalItem>) -> Result<Self> {
        let cover: Vec<Interval> = items.iter().map(|i| i.interval).collect();
        crate::covers::CompactCover::new(span, cover)?;
        for item in &items {
            if item.path.p() != p {
                return Err(Error::InvalidParameter("items must share p".into()));
            }
            let (lo, hi) = item.path.span();
            if (lo - item.interval.lo).abs() > 1e-12 * lo.abs().max(1.0)
                || (hi - item.interval.hi).abs() > 1e-12 * hi.abs().max(1.0)
            {
                return Err(Error::InvalidCover("item path span differs from its interval".into()));
            }
        }
        Ok(Self { p, span, items })
    }
}

/// Chart-wise pieces of a sampled manifold path: maximal runs of samples in
/// one chart whose consecutive segments stay inside the chart image.
fn chart_runs(x: &SampledPath, atlas: &Atlas) -> Vec<(usize, usize, usize)> {
    let n = x.len();
    let mut runs = Vec::new();
    for (c, chart) in atlas.charts().iter().enumerate() {
        let coords: Vec<Option<Vec<f64>>> = x
            .points()
            .map(|p| chart.contains(p).then(|| chart.forward(p)))
            .collect();
        let ok = |k: usize| -> bool {
            match (&coords[k], &coords[k + 1]) {
                (Some(a), Some(b)) => {
                    let step = l1_dist(a, b);
                    step < chart.depth(a) && step < chart.depth(b)
                }
                _ => false,
            }
        };
        let mut k = 0;
        while k + 1 < n {
            if ok(k) {
                let start = k;
                while k + 1 < n && ok(k) {
                    k += 1;
                }
                runs.push((c, start, k));
            } else {
                k += 1;
            }
        }
    }
    runs
}

/// Rough path of the chart coordinates of `x` on the grid indices `a..=b`.
fn chart_item(x: &SampledPath, atlas: &Atlas, chart: usize, a: usize, b: usize, p: f64) -> Result<LocalItem> {
    let c = atlas.chart(chart);
    let piece = x.slice(a, b)?;
    if let Some(bad) = piece.points().find(|q| !c.contains(q)) {
        return Err(Error::NoChart(bad.to_vec()));
    }
    let coords = piece.map_points(|q| Ok(c.forward(q)))?;
    Ok(LocalItem {
        chart,
        interval: Interval::new(x.times()[a], x.times()[b])?,
        path: RoughPath::from_bv_path(&coords, p)?,
    })
}

/// Local rough path with prescribed items `(chart, first index, last index)`.
pub fn lift_path_with(x: &SampledPath, atlas: &Atlas, p: f64, items: &[(usize, usize, usize)]) -> Result<LocalRoughPath> {
    let built = items
        .iter()
        .map(|&(c, a, b)| chart_item(x, atlas, c, a, b, p))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = x.span();
    LocalRoughPath::new(p, Interval::new(lo, hi)?, built)
}

/// Rough path extension of a sampled manifold path: the time cover is a
/// compact refinement of the open cover by chart runs, rounded outward to
/// the sampling grid, and each item is the signature lift of the chart
/// coordinates.
pub fn lift_path(x: &SampledPath, atlas: &Atlas, p: f64) -> Result<LocalRoughPath> {
    if let Some(bad) = x.points().find(|q| atlas.best_chart(q).is_none()) {
        return Err(Error::NoChart(bad.to_vec()));
    }
    let runs = chart_runs(x, atlas);
    let times = x.times();
    let n = x.len();
    let opens: Vec<OpenInterval> = runs
        .iter()
        .map(|&(_, a, b)| {
            let lo = if a == 0 { f64::NEG_INFINITY } else { times[a] };
            let hi = if b == n - 1 { f64::INFINITY } else { times[b] };
            OpenInterval::new(lo, hi)
        })
        .collect();
    let (lo, hi) = x.span();
    let span = Interval::new(lo, hi)?;
    let refinement = refine_from_open_cover(span, &opens)?;
    let sub = extract_subdivision(&refinement.cover);
    let mut pieces: Vec<(usize, usize, usize)> = Vec::new();
    for (j, &element) in sub.owners.iter().enumerate() {
        let run = refinement.sources[element];
        let (chart, ra, rb) = runs[run];
        let a = times.partition_point(|&t| t <= sub.points[j] + 1e-12 * sub.points[j].abs().max(1.0)) - 1;
        let b = times.partition_point(|&t| t < sub.points[j + 1] - 1e-12 * sub.points[j + 1].abs().max(1.0));
        let (a, b) = (a.max(ra), b.min(rb));
        match pieces.last_mut() {
            Some(last) if last.0 == chart && last.2 >= a && runs_agree(&runs, chart, last.1, b) => {
                last.2 = last.2.max(b);
            }
            _ => pieces.push((chart, a, b)),
        }
    }
    let kept: Vec<(usize, usize, usize)> = pieces
        .iter()
        .enumerate()
        .filter(|(i, p)| {
            !pieces
                .iter()
                .enumerate()
                .any(|(k, q)| k != *i && q.1 <= p.1 && p.2 <= q.2 && (q.1, q.2) != (p.1, p.2))
        })
        .map(|(_, p)| *p)
        .collect();
    lift_path_with(x, atlas, p, &kept)
}

/// Whether indices `a..=b` lie inside a single run of `chart`.
fn runs_agree(runs: &[(usize, usize, usize)], chart: usize, a: usize, b: usize) -> bool {
    runs.iter().any(|&(c, ra, rb)| c == chart && ra <= a && b <= rb)
}

/// A notion of path attached to charts and pushed forward by admissible
/// maps.
pub trait ColourFunctor {
    type Path: Clone + Send + Sync;

    fn name(&self) -> &str;
    fn admits_object(&self, _chart: &dyn Chart) -> bool {
        true
    }
    fn admits_arrow(&self, map: &LipJet) -> bool;
    fn restrict(&self, path: &Self::Path, a: f64, b: f64) -> Result<Self::Path>;
    fn pushforward(&self, map: &LipJet, path: &Self::Path) -> Result<Self::Path>;
    fn distance(&self, a: &Self::Path, b: &Self::Path) -> Result<f64>;
    fn trace(&self, path: &Self::Path) -> SampledPath;
}

/// Continuous paths, pushed forward by composition and compared in the sup
/// norm.
#[derive(Clone, Debug, Default)]
pub struct ContinuousPaths;

fn union_grid(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * x.abs().max(1.0));
    all
}

impl ColourFunctor for ContinuousPaths {
    type Path = SampledPath;

    fn name(&self) -> &str {
        "continuous"
    }
    fn admits_arrow(&self, _map: &LipJet) -> bool {
        true
    }
    fn restrict(&self, path: &SampledPath, a: f64, b: f64) -> Result<SampledPath> {
        path.restrict(a, b)
    }
    fn pushforward(&self, map: &LipJet, path: &SampledPath) -> Result<SampledPath> {
        map.map_path(path)
    }
    fn distance(&self, a: &SampledPath, b: &SampledPath) -> Result<f64> {
        let grid = union_grid(a.times(), b.times());
        grid.iter().try_fold(0.0f64, |m, &t| Ok(m.max(l1_dist(&a.value_at(t)?, &b.value_at(t)?))))
    }
    fn trace(&self, path: &SampledPath) -> SampledPath {
        path.clone()
    }
}

/// Pointed geometric rough paths, pushed forward by rough integration and
/// compared with `d_p` on a common grid.
#[derive(Clone, Debug)]
pub struct RoughPaths {
    pub p: f64,
    pub opts: SewOptions,
}

impl ColourFunctor for RoughPaths {
    type Path = RoughPath;

    fn name(&self) -> &str {
        "rough"
    }
    fn admits_arrow(&self, map: &LipJet) -> bool {
        map.gamma() > self.p
    }
    fn restrict(&self, path: &RoughPath, a: f64, b: f64) -> Result<RoughPath> {
        path.restrict(a, b)
    }
    fn pushforward(&self, map: &LipJet, path: &RoughPath) -> Result<RoughPath> {
        pushforward(map, path, &self.opts)
    }
    fn distance(&self, a: &RoughPath, b: &RoughPath) -> Result<f64> {
        aligned_distance(a, b)
    }
    fn trace(&self, path: &RoughPath) -> SampledPath {
        path.trace()
    }
}

/// `d_p` on the grid times shared by both paths, where window values are
/// exact products of cells.
pub fn aligned_distance(a: &RoughPath, b: &RoughPath) -> Result<f64> {
    if a.functional().same_grid(b.functional()) {
        return dp_product_metric(a, b);
    }
    let (x, y) = on_common_grid(a.functional(), b.functional())?;
    let a = RoughPath::new(a.p(), a.point_at(x.span().0)?, x)?;
    let b = RoughPath::new(b.p(), b.point_at(y.span().0)?, y)?;
    dp_product_metric(&a, &b)
}

/// A coloured path on one chart over one time interval.
#[derive(Clone, Debug)]
pub struct ColouredItem<P> {
    pub chart: usize,
    pub interval: Interval,
    pub path: P,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverlapReport {
    pub from: usize,
    pub to: usize,
    pub overlap: Interval,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub max_distance: f64,
    pub tol: f64,
    pub overlaps: Vec<OverlapReport>,
}

/// On every ordered pair of items with overlapping intervals, pushes the
/// restriction of the first forward by the transition and measures its
/// distance to the restriction of the second.
pub fn coloured_consistency_check<F>(
    functor: &F,
    items: &[ColouredItem<F::Path>],
    atlas: &Atlas,
    tol: f64,
) -> Result<ConsistencyReport>
where
    F: ColourFunctor + Sync,
{
    let mut pairs = Vec::new();
    for (i, a) in items.iter().enumerate() {
        if !functor.admits_object(atlas.chart(a.chart).as_ref()) {
            return Err(Error::InvalidParameter(format!("chart {} is not admitted", a.chart)));
        }
        for (k, b) in items.iter().enumerate() {
            if i == k {
                continue;
            }
            if let Some(overlap) = a.interval.intersect(&b.interval) {
                pairs.push((i, k, overlap));
            }
        }
    }
    let overlaps = par::try_map_range(pairs.len(), |n| {
        let (i, k, overlap) = pairs[n];
        let (a, b) = (&items[i], &items[k]);
        let left = functor.restrict(&a.path, overlap.lo, overlap.hi)?;
        let right = functor.restrict(&b.path, overlap.lo, overlap.hi)?;
        let moved = if a.chart == b.chart {
            left
        } else {
            let map = atlas.transition(a.chart, b.chart)?;
            if !functor.admits_arrow(map) {
                return Err(Error::InvalidParameter(format!("{} is not an admissible arrow", map.name())));
            }
            if let Some(bad) = functor.trace(&left).points().find(|y| !map.in_domain(y)) {
                return Err(Error::DomainExit(bad.to_vec()));
            }
            functor.pushforward(map, &left)?
        };
        Ok::<_, Error>(OverlapReport {
            from: i,
            to: k,
            overlap,
            distance: functor.distance(&moved, &right)?,
        })
    })?;
    let max_distance = overlaps.iter().map(|o| o.distance).fold(0.0, f64::max);
    Ok(ConsistencyReport {
        consistent: max_distance <= tol,
        max_distance,
        tol,
        overlaps,
    })
}

/// Sewing settings used by consistency checks.
pub fn consistency_options() -> SewOptions {
    SewOptions {
        tol: 1e-12,
        max_depth: 12,
        start: None,
    }
}

/// The consistency condition for a local rough path.
pub fn consistency_check(l: &LocalRoughPath, atlas: &Atlas, tol: f64) -> Result<ConsistencyReport> {
    consistency_check_with(l, atlas, tol, &consistency_options())
}

pub fn consistency_check_with(l: &LocalRoughPath, atlas: &Atlas, tol: f64, opts: &SewOptions) -> Result<ConsistencyReport> {
    let functor = RoughPaths {
        p: l.p,
        opts: opts.clone(),
    };
    let items: Vec<ColouredItem<RoughPath>> = l
        .items
        .iter()
        .map(|it| ColouredItem {
            chart: it.chart,
            interval: it.interval,
            path: it.path.clone(),
        })
        .collect();
    coloured_consistency_check(&functor, &items, atlas, tol)
}

/// Two local rough paths are equivalent when their union is consistent.
pub fn equivalence_check(a: &LocalRoughPath, b: &LocalRoughPath, atlas: &Atlas, tol: f64) -> Result<bool> {
    if a.p != b.p {
        return Err(Error::InvalidParameter(format!("p differs: {} vs {}", a.p, b.p)));
    }
    if a.span != b.span {
        return Err(Error::InvalidParameter("spans differ".into()));
    }
    let mut items = a.items.clone();
    items.extend(b.items.iter().cloned());
    let union = LocalRoughPath::new(a.p, a.span, items)?;
    Ok(consistency_check(&union, atlas, tol)?.consistent)
}

/// The rough path in the global chart of a flat atlas: items are pushed to
/// global coordinates, cut inside their overlaps and concatenated. The
/// start is the global anchor of the first point; each later piece is
/// shifted by a lattice vector to continue the previous one.
pub fn reconstruct(l: &LocalRoughPath, atlas: &Atlas) -> Result<RoughPath> {
    if atlas.global().is_none() {
        return Err(Error::NoGlobalChart(atlas.name().to_string()));
    }
    let mut order: Vec<usize> = (0..l.items.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&l.items[a].interval, &l.items[b].interval);
        x.lo.total_cmp(&y.lo).then(y.hi.total_cmp(&x.hi))
    });
    let mut chain: Vec<usize> = Vec::new();
    for i in order {
        let k = l.items[i].interval;
        if chain.last().is_some_and(|&j| l.items[j].interval.hi >= k.hi) {
            continue;
        }
        chain.push(i);
    }
    let mut cuts = vec![l.span.lo];
    for w in chain.windows(2) {
        let (a, b) = (&l.items[w[0]], &l.items[w[1]]);
        let (lo, hi) = (b.interval.lo, a.interval.hi);
        let mid = 0.5 * (lo + hi);
        let cut = a
            .path
            .times()
            .iter()
            .copied()
            .filter(|&t| t >= lo && t <= hi && t > *cuts.last().unwrap())
            .min_by(|x, y| (x - mid).abs().total_cmp(&(y - mid).abs()))
            .unwrap_or(mid);
        cuts.push(cut);
    }
    cuts.push(l.span.hi);
    let opts = SewOptions::default();
    let mut result: Option<RoughPath> = None;
    for (j, &i) in chain.iter().enumerate() {
        let item = &l.items[i];
        let piece = item.path.restrict(cuts[j], cuts[j + 1])?;
        let moved = pushforward(&atlas.to_global(item.chart)?, &piece, &opts)?;
        let anchor = match &result {
            None => {
                let ambient = atlas.chart(item.chart).inverse(piece.start());
                atlas.global_anchor(&ambient)?
            }
            Some(r) => r.trace().end().to_vec(),
        };
        let start = atlas.snap(moved.start(), &anchor);
        let moved = moved.with_start(start)?;
        result = Some(match result {
            None => moved,
            Some(r) => RoughPath::new(r.p(), r.start().to_vec(), concat_functionals(r.functional(), moved.functional())?)?,
        });
    }
    result.ok_or_else(|| Error::InvalidCover("no items".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_path(turns: f64, n: usize) -> SampledPath {
        let points = (0..=n)
            .map(|k| {
                let a = 2.0 * PI * turns * k as f64 / n as f64 + 0.3;
                vec![a.cos(), a.sin()]
            })
            .collect();
        SampledPath::uniform(0.0, 1.0, points).unwrap()
    }

    #[test]
    fn charts_invert() {
        let atlas = Atlas::sphere();
        let p = [0.48, -0.6, 0.64];
        for c in atlas.charts() {
            assert!(l1_dist(&c.inverse(&c.forward(&p)), &p) < 1e-12);
        }
        let torus = Atlas::torus();
        for c in torus.charts() {
            let q = [0.1, 0.3];
            if c.contains(&q) {
                assert!(l1_dist(&c.inverse(&c.forward(&q)), &q) < 1e-12);
            }
        }
    }

    #[test]
    fn cocycles() {
        let pts: Vec<Vec<f64>> = (0..40).map(|k| {
            let a = k as f64 * 0.157;
            vec![a.cos(), a.sin()]
        }).collect();
        assert!(Atlas::circle().cocycle_defect(&pts).unwrap() < 1e-12);
        let tpts: Vec<Vec<f64>> = (0..50).map(|k| vec![(k as f64 * 0.137) % 1.0, (k as f64 * 0.291) % 1.0]).collect();
        assert!(Atlas::torus().cocycle_defect(&tpts).unwrap() < 1e-12);
    }

    #[test]
    fn single_chart_is_consistent() {
        let x = SampledPath::uniform(0.0, 1.0, vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![0.3, -0.2]]).unwrap();
        let atlas = Atlas::euclidean(2);
        let l = lift_path(&x, &atlas, 1.5).unwrap();
        assert_eq!(l.items.len(), 1);
        assert!(consistency_check(&l, &atlas, 1e-12).unwrap().consistent);
        let r = reconstruct(&l, &atlas).unwrap();
        assert!(crate::rough::equivalent(&r, &RoughPath::from_bv_path(&x, 1.5).unwrap()));
    }

    #[test]
    fn winding_circle_path() {
        let atlas = Atlas::circle();
        let x = circle_path(1.5, 60);
        let l = lift_path(&x, &atlas, 1.5).unwrap();
        assert!(l.items.len() >= 2);
        let report = consistency_check(&l, &atlas, 1e-10).unwrap();
        assert!(report.consistent, "{report:?}");
        for item in &l.items {
            let c = atlas.chart(item.chart);
            let trace = item.path.trace();
            for (k, &t) in trace.times().iter().enumerate() {
                let idx = x.index_of(t).unwrap();
                assert!(l1_dist(trace.point(k), &c.forward(x.point(idx))) < 1e-12);
            }
        }
        assert!(equivalence_check(&l, &l, &atlas, 1e-10).unwrap());
        let other = lift_path(&circle_path(-1.5, 60), &atlas, 1.5).unwrap();
        assert!(!equivalence_check(&l, &other, &atlas, 1e-10).unwrap());
    }

    #[test]
    fn sphere_has_no_global_chart() {
        let atlas = Atlas::sphere();
        let points = (0..=20)
            .map(|k| {
                let a = 0.5 * PI * k as f64 / 20.0;
                vec![a.cos(), a.sin(), 0.0]
            })
            .collect();
        let x = SampledPath::uniform(0.0, 1.0, points).unwrap();
        let l = lift_path(&x, &atlas, 1.5).unwrap();
        assert!(matches!(reconstruct(&l, &atlas), Err(Error::NoGlobalChart(_))));
    }

    #[test]
    fn inversion_jets_match_finite_differences() {
        let map: Arc<dyn JetMap> = Arc::new(Inversion { radius: SPHERE_CHART_RADIUS });
        let jet = LipJet::new(map, 3, 1.0, 0.0, "inversion").unwrap();
        for u in [[0.7, -0.4], [-1.1, 0.2]] {
            for k in 0..3 {
                assert!(crate::lipschitz::finite_difference_defect(&jet, &u, k, 1e-5) < 1e-6);
                assert!(crate::lipschitz::symmetry_defect(&jet, &u, k + 1) < 1e-12);
            }
        }
    }

    #[test]
    fn continuous_instance_on_the_circle() {
        let atlas = Atlas::circle();
        let x = circle_path(1.2, 48);
        let l = lift_path(&x, &atlas, 1.5).unwrap();
        let items: Vec<ColouredItem<SampledPath>> = l
            .items
            .iter()
            .map(|it| ColouredItem {
                chart: it.chart,
                interval: it.interval,
                path: it.path.trace(),
            })
            .collect();
        let report = coloured_consistency_check(&ContinuousPaths, &items, &atlas, 1e-12).unwrap();
        assert!(report.consistent, "{report:?}");
    }
}
