//! Sparse vectors on a truncated simplex.
//!
//! Indices are 1-based and live in `1..=window`. Zero coordinates are never
//! stored, so the support of a vector is exactly its key set and orthogonality
//! (disjoint supports) is decided structurally.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Dot-product threshold under which two arithmetic results count as orthogonal.
pub const TAU_ORTH: f64 = 1e-12;
/// Allowed deviation of a probability vector's mass from 1.
pub const MASS_TOL: f64 = 1e-9;
/// Values at or below this are treated as arithmetic zeros and dropped.
pub const PRUNE_TOL: f64 = 1e-15;
/// Minimum coordinate of sampled relative-interior points.
pub const INTERIOR_FLOOR: f64 = 1e-6;

/// Nonnegative sparse vector on `1..=window` with its mass tracked.
///
/// `tail` marks a truncation: some of the vector's mass lies beyond the window,
/// so `mass` may be below 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorLiteral", into = "VectorLiteral")]
pub struct SimplexVector {
    window: usize,
    entries: Vec<(usize, f64)>,
    mass: f64,
    tail: bool,
}

/// JSON literal `{"window": N, "entries": [[i, v], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorLiteral {
    pub window: usize,
    pub entries: Vec<(usize, f64)>,
}

impl TryFrom<VectorLiteral> for SimplexVector {
    type Error = Error;

    fn try_from(lit: VectorLiteral) -> Result<Self> {
        make_vector(&lit.entries, lit.window, true)
    }
}

impl From<SimplexVector> for VectorLiteral {
    fn from(v: SimplexVector) -> Self {
        VectorLiteral {
            window: v.window,
            entries: v.entries,
        }
    }
}

/// Validating constructor.
///
/// With `allow_tail` a mass below 1 is accepted and flags the vector as a
/// truncation; a mass above 1 is always rejected.
pub fn make_vector(entries: &[(usize, f64)], window: usize, allow_tail: bool) -> Result<SimplexVector> {
    if window == 0 {
        return Err(Error::EmptyWindow);
    }
    let mut sorted: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for &(index, value) in entries {
        if index == 0 || index > window {
            return Err(Error::IndexOutOfWindow { index, window });
        }
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::NegativeEntry { index, value });
        }
        sorted.push((index, value));
    }
    sorted.sort_by_key(|&(i, _)| i);
    if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateIndex { index: w[0].0 });
    }
    sorted.retain(|&(_, v)| v > PRUNE_TOL);
    let mass: f64 = sorted.iter().map(|&(_, v)| v).sum();
    if mass > 1.0 + MASS_TOL || (!allow_tail && mass < 1.0 - MASS_TOL) {
        return Err(Error::MassNotOne { mass });
    }
    Ok(SimplexVector {
        window,
        entries: sorted,
        mass,
        tail: mass < 1.0 - MASS_TOL,
    })
}

impl SimplexVector {
    /// Standard basis vector `e_k`.
    pub fn basis(k: usize, window: usize) -> Result<Self> {
        make_vector(&[(k, 1.0)], window, false)
    }

    /// Empty truncation: all mass lies outside the window.
    pub fn escaped(window: usize) -> Self {
        SimplexVector {
            window,
            entries: Vec::new(),
            mass: 0.0,
            tail: true,
        }
    }

    /// Uniform vector on `alpha` (the barycenter of the face it spans).
    pub fn barycenter(alpha: &IndexSet, window: usize) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::EmptyAlpha);
        }
        let w = 1.0 / alpha.len() as f64;
        let entries: Vec<(usize, f64)> = alpha.iter().map(|i| (i, w)).collect();
        make_vector(&entries, window, false)
    }

    /// Build from arithmetic output already sorted by index. Near-zeros are
    /// pruned; the tail flag is set when `tail` is requested or mass is short.
    pub(crate) fn from_sorted_parts(
        window: usize,
        entries: impl IntoIterator<Item = (usize, f64)>,
        tail: bool,
    ) -> Self {
        let entries: Vec<(usize, f64)> = entries.into_iter().filter(|&(_, v)| v > PRUNE_TOL).collect();
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|&(i, _)| i >= 1 && i <= window));
        let mass = entries.iter().map(|&(_, v)| v).sum::<f64>();
        SimplexVector {
            window,
            entries,
            mass,
            tail: tail || mass < 1.0 - MASS_TOL,
        }
    }

    /// Build from a dense accumulator indexed `0..=window` (slot 0 unused).
    pub(crate) fn from_dense(window: usize, dense: &[f64], tail: bool) -> Self {
        debug_assert_eq!(dense.len(), window + 1);
        Self::from_sorted_parts(window, dense.iter().enumerate().skip(1).map(|(i, &v)| (i, v)), tail)
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn is_tail(&self) -> bool {
        self.tail
    }

    /// Stored `(index, value)` pairs in increasing index order.
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.entries.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn support(&self) -> IndexSet {
        IndexSet(self.entries.iter().map(|&(i, _)| i).collect())
    }

    /// True when this is exactly some `e_i` (single index, value within 1e-12 of 1).
    pub fn basis_index(&self) -> Option<usize> {
        match self.entries.as_slice() {
            [(i, v)] if (v - 1.0).abs() <= 1e-12 => Some(*i),
            _ => None,
        }
    }

    /// Convex combination `(1 - lambda) * self + lambda * other`.
    pub fn mix(&self, lambda: f64, other: &SimplexVector) -> Result<SimplexVector> {
        check_windows(self, other)?;
        let merged = merge(&self.entries, &other.entries, |a, b| (1.0 - lambda) * a + lambda * b);
        Ok(SimplexVector::from_sorted_parts(
            self.window,
            merged,
            self.tail || other.tail,
        ))
    }
}

impl fmt::Display for SimplexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (n, (i, v)) in self.entries.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{i}:{v}")?;
        }
        write!(f, "]/{}", self.window)
    }
}

fn check_windows(u: &SimplexVector, v: &SimplexVector) -> Result<()> {
    if u.window != v.window {
        return Err(Error::WindowMismatch {
            left: u.window,
            right: v.window,
        });
    }
    Ok(())
}

/// Sorted union of two sparse maps, combining values with `f(a, b)` (missing = 0).
fn merge(a: &[(usize, f64)], b: &[(usize, f64)], f: impl Fn(f64, f64) -> f64) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut p, mut q) = (0, 0);
    while p < a.len() || q < b.len() {
        let next = match (a.get(p), b.get(q)) {
            (Some(&(i, x)), Some(&(j, y))) if i == j => {
                p += 1;
                q += 1;
                (i, f(x, y))
            }
            (Some(&(i, x)), Some(&(j, _))) if i < j => {
                p += 1;
                (i, f(x, 0.0))
            }
            (Some(&(i, x)), None) => {
                p += 1;
                (i, f(x, 0.0))
            }
            (_, Some(&(j, y))) => {
                q += 1;
                (j, f(0.0, y))
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// Dot product of two sorted sparse maps.
pub(crate) fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut p, mut q, mut acc) = (0, 0, 0.0);
    while p < a.len() && q < b.len() {
        match a[p].0.cmp(&b[q].0) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                acc += a[p].1 * b[q].1;
                p += 1;
                q += 1;
            }
        }
    }
    acc
}

pub fn support(v: &SimplexVector) -> IndexSet {
    v.support()
}

pub fn dot(u: &SimplexVector, v: &SimplexVector) -> Result<f64> {
    check_windows(u, v)?;
    Ok(sparse_dot(&u.entries, &v.entries))
}

/// Disjoint supports.
pub fn is_orthogonal(u: &SimplexVector, v: &SimplexVector) -> Result<bool> {
    check_windows(u, v)?;
    let (a, b) = (&u.entries, &v.entries);
    let (mut p, mut q) = (0, 0);
    while p < a.len() && q < b.len() {
        match a[p].0.cmp(&b[q].0) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => return Ok(false),
        }
    }
    Ok(true)
}

pub fn l1_distance(u: &SimplexVector, v: &SimplexVector) -> Result<f64> {
    check_windows(u, v)?;
    Ok(merge(&u.entries, &v.entries, |a, b| (a - b).abs())
        .iter()
        .map(|&(_, d)| d)
        .sum())
}

/// Sorted, deduplicated set of 1-based indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexSet(BTreeSet<usize>);

impl IndexSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Window-checked constructor.
    pub fn within(indices: impl IntoIterator<Item = usize>, window: usize) -> Result<Self> {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        if let Some(&bad) = set.iter().find(|&&i| i == 0 || i > window) {
            return Err(Error::IndexOutOfWindow { index: bad, window });
        }
        Ok(IndexSet(set))
    }

    /// The full range `1..=window`.
    pub fn range(window: usize) -> Self {
        IndexSet((1..=window).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }

    pub fn insert(&mut self, i: usize) -> bool {
        self.0.insert(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn first(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.0.union(&other.0).copied().collect())
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.0.intersection(&other.0).copied().collect())
    }

    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.0.difference(&other.0).copied().collect())
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.0.iter().copied().collect()
    }
}

impl FromIterator<usize> for IndexSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        IndexSet(iter.into_iter().collect())
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Face Γ_α: vectors vanishing outside `alpha`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    alpha: IndexSet,
    window: usize,
}

impl Face {
    /// `alpha` must be a nonempty proper subset of `1..=window`.
    pub fn new(alpha: IndexSet, window: usize) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::EmptyAlpha);
        }
        let alpha = IndexSet::within(alpha.iter(), window)?;
        if alpha.len() == window {
            return Err(Error::ImproperFace(alpha.to_string()));
        }
        Ok(Face { alpha, window })
    }

    pub fn alpha(&self) -> &IndexSet {
        &self.alpha
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn contains(&self, x: &SimplexVector) -> bool {
        x.window() == self.window && x.iter().all(|(i, _)| self.alpha.contains(i))
    }

    pub fn contains_in_interior(&self, x: &SimplexVector) -> bool {
        self.contains(x) && x.support() == self.alpha
    }
}

/// Random point of riΓ_α with every coordinate on `alpha` at least
/// [`INTERIOR_FLOOR`].
pub fn sample_face_interior(face: &Face, seed: u64) -> SimplexVector {
    sample_interior_with(face.alpha(), face.window(), &mut rng::seeded(seed))
        .expect("face alpha is nonempty and in window")
}

/// Same as [`sample_face_interior`] but drawing from a caller-supplied stream
/// and without requiring `alpha` to be proper.
pub fn sample_interior_with<R: Rng + ?Sized>(alpha: &IndexSet, window: usize, rng: &mut R) -> Result<SimplexVector> {
    if alpha.is_empty() {
        return Err(Error::EmptyAlpha);
    }
    let weights = rng::floored_weights(rng, alpha.len(), INTERIOR_FLOOR);
    let entries: Vec<(usize, f64)> = alpha.iter().zip(weights).collect();
    make_vector(&entries, window, false)
}
