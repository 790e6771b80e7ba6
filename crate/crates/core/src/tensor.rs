//! The truncated tensor algebra `T^(N)(R^d)`.
//!
//! Level `i` of a [`TruncTensor`] is a dense row-major array of `d^i`
//! coordinates. The multi-index `(i_1, ..., i_n)` (letters in `0..d`) maps to
//! `i_1 d^(n-1) + ... + i_n`, so the last letter varies fastest. The product
//! is the truncated convolution `(a b)_n = sum_k a_k (x) b_(n-k)`; the ideal of
//! terms above degree `N` is never materialised.
//!
//! Linear forms on the algebra are [`FormCombination`]s of [`Word`]s; letters
//! of a word are 1-based (`1..=d`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard ceiling on the number of coordinates in a single level.
const MAX_LEVEL_LEN: usize = 1 << 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor")]
pub struct TruncTensor {
    dim: usize,
    degree: usize,
    levels: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawTensor {
    dim: usize,
    degree: usize,
    levels: Vec<Vec<f64>>,
}

impl TryFrom<RawTensor> for TruncTensor {
    type Error = Error;

    fn try_from(raw: RawTensor) -> Result<Self> {
        if raw.levels.len() != raw.degree + 1 {
            return Err(Error::InvalidTensor(format!(
                "degree {} needs {} levels, found {}",
                raw.degree,
                raw.degree + 1,
                raw.levels.len()
            )));
        }
        TruncTensor::from_levels(raw.dim, raw.levels)
    }
}

fn level_len(dim: usize, level: usize) -> Result<usize> {
    let mut len = 1usize;
    for _ in 0..level {
        len = len
            .checked_mul(dim)
            .filter(|&l| l <= MAX_LEVEL_LEN)
            .ok_or_else(|| {
                Error::InvalidTensor(format!("level {level} of dimension {dim} is too large"))
            })?;
    }
    Ok(len)
}

impl TruncTensor {
    pub fn zero(dim: usize, degree: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidTensor("dimension must be positive".into()));
        }
        let levels = (0..=degree)
            .map(|i| level_len(dim, i).map(|n| vec![0.0; n]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim, degree, levels })
    }

    /// The multiplicative unit `(1, 0, ..., 0)`.
    pub fn unit(dim: usize, degree: usize) -> Result<Self> {
        let mut t = Self::zero(dim, degree)?;
        t.levels[0][0] = 1.0;
        Ok(t)
    }

    pub fn from_levels(dim: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidTensor("dimension must be positive".into()));
        }
        if levels.is_empty() {
            return Err(Error::InvalidTensor("at least the scalar level is required".into()));
        }
        for (i, level) in levels.iter().enumerate() {
            let expected = level_len(dim, i)?;
            if level.len() != expected {
                return Err(Error::InvalidTensor(format!(
                    "level {i} has {} entries, expected {expected}",
                    level.len()
                )));
            }
            if level.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidTensor(format!("level {i} has a non-finite entry")));
            }
        }
        Ok(Self {
            dim,
            degree: levels.len() - 1,
            levels,
        })
    }

    /// The tensor `(0, v, 0, ..., 0)`.
    pub fn from_vector(v: &[f64], degree: usize) -> Result<Self> {
        let mut t = Self::zero(v.len(), degree)?;
        if degree >= 1 {
            t.levels[1].copy_from_slice(v);
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn level(&self, i: usize) -> &[f64] {
        &self.levels[i]
    }

    pub fn level_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.levels[i]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn scalar(&self) -> f64 {
        self.levels[0][0]
    }

    pub fn is_finite(&self) -> bool {
        self.levels.iter().flatten().all(|v| v.is_finite())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch(self.degree, other.degree));
        }
        Ok(())
    }

    /// Truncated tensor product `self (x) other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &Self) -> Self {
        let mut out = Self {
            dim: self.dim,
            degree: self.degree,
            levels: self.levels.iter().map(|l| vec![0.0; l.len()]).collect(),
        };
        for n in 0..=self.degree {
            let target = &mut out.levels[n];
            for k in 0..=n {
                let left = &self.levels[k];
                let right = &other.levels[n - k];
                let stride = right.len();
                for (ia, &a) in left.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let row = &mut target[ia * stride..(ia + 1) * stride];
                    for (slot, &b) in row.iter_mut().zip(right) {
                        *slot += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub(crate) fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            dim: self.dim,
            degree: self.degree,
            levels: self
                .levels
                .iter()
                .zip(&other.levels)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            degree: self.degree,
            levels: self
                .levels
                .iter()
                .map(|l| l.iter().map(|v| v * c).collect())
                .collect(),
        }
    }

    /// Inverse via the terminating series `(1/a0) sum_n (1 - a/a0)^n`.
    pub fn inverse(&self) -> Result<Self> {
        let a0 = self.scalar();
        if a0 == 0.0 {
            return Err(Error::ZeroScalar);
        }
        let mut u = self.scale(-1.0 / a0);
        u.levels[0][0] = 0.0;
        let one = Self::unit(self.dim, self.degree)?;
        let mut acc = one.clone();
        for _ in 0..self.degree {
            acc = one.add(&u.mul_unchecked(&acc))?;
        }
        Ok(acc.scale(1.0 / a0))
    }

    /// `exp(v) = sum_n v^(x)n / n!` for a vector `v`.
    pub fn exp_vector(v: &[f64], degree: usize) -> Result<Self> {
        let dim = v.len();
        let mut t = Self::unit(dim, degree)?;
        for n in 1..=degree {
            let prev = std::mem::take(&mut t.levels[n - 1]);
            let scale = 1.0 / n as f64;
            let next: Vec<f64> = prev
                .iter()
                .flat_map(|&p| v.iter().map(move |&x| p * x * scale))
                .collect();
            t.levels[n - 1] = prev;
            t.levels[n] = next;
        }
        Ok(t)
    }

    /// Exponential of a tensor with zero scalar part.
    pub fn exp(&self) -> Result<Self> {
        if self.scalar() != 0.0 {
            return Err(Error::InvalidParameter(
                "exp needs a tensor with zero scalar part".into(),
            ));
        }
        let one = Self::unit(self.dim, self.degree)?;
        let mut acc = one.clone();
        for k in (1..=self.degree).rev() {
            acc = one.add(&self.mul_unchecked(&acc).scale(1.0 / k as f64))?;
        }
        Ok(acc)
    }

    /// Logarithm of a tensor with unit scalar part, through the finite
    /// series `log(1 + u) = sum_k (-1)^(k+1) u^k / k`.
    pub fn log(&self) -> Result<Self> {
        let a0 = self.scalar();
        if (a0 - 1.0).abs() > 1e-12 {
            return Err(Error::NotUnital(a0));
        }
        let mut u = self.clone();
        u.levels[0][0] = 0.0;
        if self.degree == 0 {
            return Ok(u);
        }
        let one = Self::unit(self.dim, self.degree)?;
        let coeff = |k: usize| if k % 2 == 1 { 1.0 / k as f64 } else { -1.0 / k as f64 };
        let mut acc = one.scale(coeff(self.degree));
        for k in (1..self.degree).rev() {
            acc = one.scale(coeff(k)).add(&u.mul_unchecked(&acc))?;
        }
        Ok(u.mul_unchecked(&acc))
    }

    /// Canonical projection onto `T^(m)`.
    pub fn project(&self, m: usize) -> Result<Self> {
        if m > self.degree {
            return Err(Error::DegreeTooLarge {
                requested: m,
                cap: self.degree,
            });
        }
        Ok(Self {
            dim: self.dim,
            degree: m,
            levels: self.levels[..=m].to_vec(),
        })
    }

    /// Embed into a higher degree, padding the new levels with zeros.
    pub fn pad_to(&self, n: usize) -> Result<Self> {
        if n < self.degree {
            return self.project(n);
        }
        let mut levels = self.levels.clone();
        for i in self.degree + 1..=n {
            levels.push(vec![0.0; level_len(self.dim, i)?]);
        }
        Ok(Self {
            dim: self.dim,
            degree: n,
            levels,
        })
    }

    /// Action of a permutation on level `n`: the coordinate of the result at
    /// `(i_1, ..., i_n)` is the coordinate of `self` at `j` with
    /// `j_sigma(k) = i_k`. `sigma` is 0-based.
    pub fn permute_level(&self, n: usize, sigma: &[usize]) -> Result<Self> {
        if n > self.degree {
            return Err(Error::DegreeTooLarge {
                requested: n,
                cap: self.degree,
            });
        }
        if sigma.len() != n {
            return Err(Error::InvalidPermutation(format!(
                "length {} for level {n}",
                sigma.len()
            )));
        }
        let mut seen = vec![false; n];
        for &s in sigma {
            if s >= n || seen[s] {
                return Err(Error::InvalidPermutation(format!("{sigma:?}")));
            }
            seen[s] = true;
        }
        let d = self.dim;
        let src = &self.levels[n];
        let mut dst = vec![0.0; src.len()];
        let mut digits = vec![0usize; n];
        let mut moved = vec![0usize; n];
        for (flat, slot) in dst.iter_mut().enumerate() {
            let mut rest = flat;
            for k in (0..n).rev() {
                digits[k] = rest % d;
                rest /= d;
            }
            for k in 0..n {
                moved[sigma[k]] = digits[k];
            }
            let j = moved.iter().fold(0, |acc, &m| acc * d + m);
            *slot = src[j];
        }
        let mut out = self.clone();
        out.levels[n] = dst;
        Ok(out)
    }

    /// Per-level `l1` norms.
    pub fn level_norms(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|l| l.iter().map(|v| v.abs()).sum())
            .collect()
    }

    pub fn level_norm(&self, i: usize) -> f64 {
        self.levels[i].iter().map(|v| v.abs()).sum()
    }

    /// Sum of the level norms.
    pub fn norm(&self) -> f64 {
        self.level_norms().iter().sum()
    }

    /// Per-level `l1` norm of `self - other`.
    pub fn level_distances(&self, other: &Self) -> Result<Vec<f64>> {
        self.check_compatible(other)?;
        Ok(self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
            .collect())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .levels
            .iter()
            .flatten()
            .zip(other.levels.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Coordinate at a word (1-based letters).
    pub fn coordinate(&self, word: &Word) -> Result<f64> {
        if word.len() > self.degree {
            return Err(Error::WordTooLong {
                len: word.len(),
                degree: self.degree,
            });
        }
        Ok(self.levels[word.len()][word.flat_index(self.dim)?])
    }
}

/// `tensor_mul(a, b) = a (x) b`.
pub fn tensor_mul(a: &TruncTensor, b: &TruncTensor) -> Result<TruncTensor> {
    a.mul(b)
}

/// A word over the alphabet `1..=d`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Word(Vec<usize>);

impl TryFrom<Vec<usize>> for Word {
    type Error = Error;

    fn try_from(letters: Vec<usize>) -> Result<Self> {
        Word::new(letters)
    }
}

impl From<Word> for Vec<usize> {
    fn from(w: Word) -> Self {
        w.0
    }
}

impl Word {
    pub fn new(letters: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = letters.iter().find(|&&l| l == 0) {
            return Err(Error::InvalidLetter { letter: bad, dim: 0 });
        }
        Ok(Self(letters))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn flat_index(&self, dim: usize) -> Result<usize> {
        self.0.iter().try_fold(0usize, |acc, &l| {
            if l > dim {
                Err(Error::InvalidLetter { letter: l, dim })
            } else {
                Ok(acc * dim + (l - 1))
            }
        })
    }

    /// All words of length `len` over `1..=dim`, in coordinate order.
    pub fn all(dim: usize, len: usize) -> Vec<Word> {
        let count = dim.pow(len as u32);
        (0..count)
            .map(|mut flat| {
                let mut letters = vec![0; len];
                for slot in letters.iter_mut().rev() {
                    *slot = flat % dim + 1;
                    flat /= dim;
                }
                Word(letters)
            })
            .collect()
    }
}

/// A finite linear combination of words, i.e. a linear form on the algebra.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FormCombination {
    terms: BTreeMap<Word, f64>,
}

impl FormCombination {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn word(w: Word) -> Self {
        let mut f = Self::new();
        f.add_term(w, 1.0);
        f
    }

    pub fn add_term(&mut self, w: Word, c: f64) {
        let entry = self.terms.entry(w).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.retain(|_, v| *v != 0.0);
        }
    }

    pub fn terms(&self) -> &BTreeMap<Word, f64> {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Bilinear extension of the shuffle product of words.
    pub fn shuffle(&self, other: &Self) -> Self {
        let mut out = Self::new();
        for (u, cu) in &self.terms {
            for (v, cv) in &other.terms {
                for (w, n) in shuffle_words(u.letters(), v.letters()) {
                    out.add_term(Word(w), cu * cv * n as f64);
                }
            }
        }
        out
    }

    /// Dual pairing `<self, a>`.
    pub fn apply(&self, a: &TruncTensor) -> Result<f64> {
        self.terms
            .iter()
            .try_fold(0.0, |acc, (w, c)| Ok(acc + c * a.coordinate(w)?))
    }
}

/// Shuffle of two words with multiplicities, by the recursion
/// `ua ш vb = (u ш vb)a + (ua ш v)b`.
pub fn shuffle_words(u: &[usize], v: &[usize]) -> BTreeMap<Vec<usize>, u64> {
    let mut out = BTreeMap::new();
    if u.is_empty() || v.is_empty() {
        out.insert([u, v].concat(), 1);
        return out;
    }
    let (u_head, a) = (&u[..u.len() - 1], u[u.len() - 1]);
    let (v_head, b) = (&v[..v.len() - 1], v[v.len() - 1]);
    for (mut w, n) in shuffle_words(u_head, v) {
        w.push(a);
        *out.entry(w).or_insert(0) += n;
    }
    for (mut w, n) in shuffle_words(u, v_head) {
        w.push(b);
        *out.entry(w).or_insert(0) += n;
    }
    out
}

/// `shuffle(e, f)` on form combinations.
pub fn shuffle(e: &FormCombination, f: &FormCombination) -> FormCombination {
    e.shuffle(f)
}

/// `apply_form(e, a) = <e, a>`.
pub fn apply_form(e: &FormCombination, a: &TruncTensor) -> Result<f64> {
    e.apply(a)
}
