//! Heredity coefficients P_{ij,k}.
//!
//! A tensor is a [`CoefficientProvider`] that hands out one sparse row
//! ℙ_ij = (P_{ij,k})_k at a time, so window-parametric families never need a
//! window³ array. [`ExplicitTensor`] is the materialized form used for loaded,
//! constructed and randomly generated tensors.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{ValidationReport, Violation};
use crate::rng;
use crate::simplex::{self, IndexSet, SimplexVector, MASS_TOL};

/// Symmetry tolerance used by [`validate_tensor`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Source of heredity rows.
///
/// `row(i, j)` returns `(k, P_{ij,k})` sorted by `k`, with zero coefficients
/// omitted. `tail_budget(i, j)` is the mass of ℙ_ij that lies beyond the window.
pub trait CoefficientProvider: Send + Sync + fmt::Debug {
    fn window(&self) -> usize;

    fn row(&self, i: usize, j: usize) -> Cow<'_, [(usize, f64)]>;

    fn tail_budget(&self, _i: usize, _j: usize) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TensorKind {
    Explicit,
    Lso,
    Volterra,
    PiVolterra,
    Constructed,
    Shift,
}

/// Shared handle to a coefficient provider.
#[derive(Clone)]
pub struct HeredityTensor {
    provider: Arc<dyn CoefficientProvider>,
    kind: TensorKind,
}

impl fmt::Debug for HeredityTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HeredityTensor")
            .field("kind", &self.kind)
            .field("window", &self.window())
            .finish()
    }
}

impl HeredityTensor {
    pub fn from_provider<P: CoefficientProvider + 'static>(provider: P, kind: TensorKind) -> Self {
        HeredityTensor {
            provider: Arc::new(provider),
            kind,
        }
    }

    pub fn window(&self) -> usize {
        self.provider.window()
    }

    pub fn kind(&self) -> TensorKind {
        self.kind
    }

    pub fn row(&self, i: usize, j: usize) -> Cow<'_, [(usize, f64)]> {
        self.provider.row(i, j)
    }

    pub fn tail_budget(&self, i: usize, j: usize) -> f64 {
        self.provider.tail_budget(i, j)
    }

    pub fn coeff(&self, i: usize, j: usize, k: usize) -> f64 {
        let row = self.row(i, j);
        match row.binary_search_by_key(&k, |&(t, _)| t) {
            Ok(pos) => row[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn row_support(&self, i: usize, j: usize) -> IndexSet {
        self.row(i, j)
            .iter()
            .filter(|&&(_, p)| p > 0.0)
            .map(|&(k, _)| k)
            .collect()
    }

    /// Copy every ordered row into an [`ExplicitTensor`].
    pub fn materialize(&self) -> ExplicitTensor {
        let n = self.window();
        let mut out = ExplicitTensor::new(n);
        for i in 1..=n {
            for j in 1..=n {
                let row = self.row(i, j);
                let tail = self.tail_budget(i, j);
                if !row.is_empty() || tail > 0.0 {
                    out.rows.insert(
                        (i, j),
                        Row {
                            targets: row.into_owned(),
                            tail,
                        },
                    );
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row {
    pub targets: Vec<(usize, f64)>,
    pub tail: f64,
}

/// Materialized tensor keyed by ordered pair `(i, j)`. Missing rows are empty.
///
/// Storage is per ordered pair so asymmetric input survives long enough to be
/// reported by [`validate_tensor`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExplicitTensor {
    window: usize,
    rows: BTreeMap<(usize, usize), Row>,
}

impl ExplicitTensor {
    pub fn new(window: usize) -> Self {
        ExplicitTensor {
            window,
            rows: BTreeMap::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        for idx in [i, j] {
            if idx == 0 || idx > self.window {
                return Err(Error::IndexOutOfWindow {
                    index: idx,
                    window: self.window,
                });
            }
        }
        Ok(())
    }

    /// Replace the ordered row `(i, j)` only.
    pub fn set_row(&mut self, i: usize, j: usize, targets: &[(usize, f64)], tail: f64) -> Result<()> {
        self.check_pair(i, j)?;
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for &(k, p) in targets {
            if k == 0 || k > self.window {
                return Err(Error::IndexOutOfWindow {
                    index: k,
                    window: self.window,
                });
            }
            if merged.insert(k, p).is_some() {
                return Err(Error::DuplicateIndex { index: k });
            }
        }
        let targets: Vec<(usize, f64)> = merged.into_iter().filter(|&(_, p)| p != 0.0).collect();
        if targets.is_empty() && tail == 0.0 {
            self.rows.remove(&(i, j));
        } else {
            self.rows.insert((i, j), Row { targets, tail });
        }
        Ok(())
    }

    /// Replace rows `(i, j)` and `(j, i)`.
    pub fn set_symmetric_row(&mut self, i: usize, j: usize, targets: &[(usize, f64)], tail: f64) -> Result<()> {
        self.set_row(i, j, targets, tail)?;
        if i != j {
            self.set_row(j, i, targets, tail)?;
        }
        Ok(())
    }

    /// Set a single ordered coefficient P_{ij,k}.
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) -> Result<()> {
        self.check_pair(i, j)?;
        let mut row = self.rows.get(&(i, j)).cloned().unwrap_or_default();
        row.targets.retain(|&(t, _)| t != k);
        row.targets.push((k, value));
        self.set_row(i, j, &row.targets, row.tail)
    }

    pub fn set_symmetric(&mut self, i: usize, j: usize, k: usize, value: f64) -> Result<()> {
        self.set(i, j, k, value)?;
        if i != j {
            self.set(j, i, k, value)?;
        }
        Ok(())
    }

    pub fn into_tensor(self, kind: TensorKind) -> HeredityTensor {
        HeredityTensor::from_provider(self, kind)
    }

    pub fn to_literal(&self) -> TensorLiteral {
        let rows = self
            .rows
            .iter()
            .filter(|((i, j), _)| i <= j)
            .map(|(&(i, j), row)| RowLiteral {
                i,
                j,
                targets: row.targets.clone(),
                tail: (row.tail > 0.0).then_some(row.tail),
            })
            .collect();
        TensorLiteral {
            window: self.window,
            rows,
        }
    }

    /// Load a tensor literal. Rows given with `i <= j` are mirrored to `(j, i)`
    /// unless `(j, i)` is listed explicitly as well.
    pub fn from_literal(lit: &TensorLiteral) -> Result<Self> {
        if lit.window == 0 {
            return Err(Error::EmptyWindow);
        }
        let mut t = ExplicitTensor::new(lit.window);
        let mut listed = std::collections::BTreeSet::new();
        for r in &lit.rows {
            if !listed.insert((r.i, r.j)) {
                return Err(Error::Schema(format!("row ({},{}) listed twice", r.i, r.j)));
            }
        }
        for r in &lit.rows {
            let tail = r.tail.unwrap_or(0.0);
            if !(0.0..=1.0).contains(&tail) {
                return Err(Error::Schema(format!(
                    "row ({},{}) tail {} outside [0,1]",
                    r.i, r.j, tail
                )));
            }
            t.set_row(r.i, r.j, &r.targets, tail)?;
            if r.i < r.j && !listed.contains(&(r.j, r.i)) {
                t.set_row(r.j, r.i, &r.targets, tail)?;
            }
        }
        Ok(t)
    }
}

impl CoefficientProvider for ExplicitTensor {
    fn window(&self) -> usize {
        self.window
    }

    fn row(&self, i: usize, j: usize) -> Cow<'_, [(usize, f64)]> {
        match self.rows.get(&(i, j)) {
            Some(r) => Cow::Borrowed(r.targets.as_slice()),
            None => Cow::Borrowed(&[]),
        }
    }

    fn tail_budget(&self, i: usize, j: usize) -> f64 {
        self.rows.get(&(i, j)).map_or(0.0, |r| r.tail)
    }
}

/// JSON tensor literal `{"window": N, "rows": [{"i":, "j":, "targets": [[k, p], ...]}, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorLiteral {
    pub window: usize,
    pub rows: Vec<RowLiteral>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowLiteral {
    pub i: usize,
    pub j: usize,
    pub targets: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<f64>,
}

/// Check symmetry, nonnegativity and row-stochasticity of every row.
///
/// Row sums must lie in `[1 - tail_budget - 1e-9, 1 + 1e-9]`. Violations are
/// listed in row-major order.
pub fn validate_tensor(t: &HeredityTensor) -> ValidationReport {
    let n = t.window();
    let violations: Vec<Violation> = (1..=n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut found = Vec::new();
            for j in 1..=n {
                let row = t.row(i, j);
                let budget = t.tail_budget(i, j);
                for &(k, p) in row.iter() {
                    if k == 0 || k > n {
                        found.push(Violation::TargetOutOfWindow { i, j, k });
                    }
                    if !(p >= 0.0) {
                        found.push(Violation::Negative { i, j, k, value: p });
                    }
                }
                if i < j {
                    let mirror = t.row(j, i);
                    let mut ks: Vec<usize> = row.iter().chain(mirror.iter()).map(|&(k, _)| k).collect();
                    ks.sort_unstable();
                    ks.dedup();
                    for k in ks {
                        let forward = lookup(&row, k);
                        let backward = lookup(&mirror, k);
                        if (forward - backward).abs() > SYMMETRY_TOL {
                            found.push(Violation::Asymmetric {
                                i,
                                j,
                                k,
                                forward,
                                backward,
                            });
                        }
                    }
                }
                let sum: f64 = row.iter().map(|&(_, p)| p).sum();
                if !(sum <= 1.0 + MASS_TOL && sum >= 1.0 - budget - MASS_TOL) {
                    found.push(Violation::NotStochastic {
                        i,
                        j,
                        sum,
                        tail_budget: budget,
                    });
                }
            }
            found
        })
        .collect();
    ValidationReport::from_violations(violations)
}

fn lookup(row: &[(usize, f64)], k: usize) -> f64 {
    row.binary_search_by_key(&k, |&(t, _)| t).map_or(0.0, |pos| row[pos].1)
}

/// ℙ_ij as a simplex vector, tail-flagged when the row declares tail mass.
pub fn p_row(t: &HeredityTensor, i: usize, j: usize) -> Result<SimplexVector> {
    let n = t.window();
    for idx in [i, j] {
        if idx == 0 || idx > n {
            return Err(Error::IndexOutOfWindow { index: idx, window: n });
        }
    }
    let row = t.row(i, j);
    Ok(SimplexVector::from_sorted_parts(
        n,
        row.iter().copied(),
        t.tail_budget(i, j) > 0.0,
    ))
}

/// Row-stochastic matrix (t_ik). Rows may be truncations whose remaining mass
/// leaves the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticMatrix {
    window: usize,
    rows: Vec<SimplexVector>,
}

impl StochasticMatrix {
    pub fn new(rows: Vec<SimplexVector>) -> Result<Self> {
        let window = rows.len();
        if window == 0 {
            return Err(Error::EmptyWindow);
        }
        for (n, r) in rows.iter().enumerate() {
            if r.window() != window {
                return Err(Error::WindowMismatch {
                    left: window,
                    right: r.window(),
                });
            }
            if !r.is_tail() && (r.mass() - 1.0).abs() > MASS_TOL {
                return Err(Error::RowNotStochastic {
                    row: n + 1,
                    mass: r.mass(),
                });
            }
        }
        Ok(StochasticMatrix { window, rows })
    }

    pub fn identity(window: usize) -> Result<Self> {
        Self::new(
            (1..=window)
                .map(|i| SimplexVector::basis(i, window))
                .collect::<Result<_>>()?,
        )
    }

    /// t_{i,i+1} = 1; the last row sends all its mass beyond the window.
    pub fn shift(window: usize) -> Result<Self> {
        let mut rows: Vec<SimplexVector> = (1..window)
            .map(|i| SimplexVector::basis(i + 1, window))
            .collect::<Result<_>>()?;
        rows.push(SimplexVector::escaped(window));
        Self::new(rows)
    }

    /// Row `i` is `e_{sigma(i)}`; `images` lists sigma(1), ..., sigma(n).
    pub fn permutation(images: &[usize]) -> Result<Self> {
        let n = images.len();
        Self::new(
            images
                .iter()
                .map(|&k| SimplexVector::basis(k, n))
                .collect::<Result<_>>()?,
        )
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Row 𝐭_i (1-based).
    pub fn row(&self, i: usize) -> &SimplexVector {
        &self.rows[i - 1]
    }

    pub fn rows(&self) -> &[SimplexVector] {
        &self.rows
    }

    /// x ↦ x𝕋, i.e. (Tx)_k = Σ_i t_ik x_i.
    pub fn apply(&self, x: &SimplexVector) -> Result<SimplexVector> {
        if x.window() != self.window {
            return Err(Error::WindowMismatch {
                left: self.window,
                right: x.window(),
            });
        }
        let mut acc = vec![0.0; self.window + 1];
        let mut tail = x.is_tail();
        for (i, xi) in x.iter() {
            let r = self.row(i);
            tail |= r.is_tail();
            for (k, t) in r.iter() {
                acc[k] += t * xi;
            }
        }
        Ok(SimplexVector::from_dense(self.window, &acc, tail))
    }
}

#[derive(Debug)]
struct LsoProvider {
    matrix: StochasticMatrix,
}

impl CoefficientProvider for LsoProvider {
    fn window(&self) -> usize {
        self.matrix.window()
    }

    fn row(&self, i: usize, j: usize) -> Cow<'_, [(usize, f64)]> {
        let (a, b) = (self.matrix.row(i), self.matrix.row(j));
        if i == j {
            return Cow::Borrowed(a.entries());
        }
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (k, t) in a.iter().chain(b.iter()) {
            *acc.entry(k).or_insert(0.0) += t / 2.0;
        }
        Cow::Owned(acc.into_iter().collect())
    }

    fn tail_budget(&self, i: usize, j: usize) -> f64 {
        let lost = |r: &SimplexVector| if r.is_tail() { 1.0 - r.mass() } else { 0.0 };
        (lost(self.matrix.row(i)) + lost(self.matrix.row(j))) / 2.0
    }
}

/// Embed a linear stochastic operator as the QSO with P_{ij,k} = (t_ik + t_jk)/2.
pub fn lso_embed(m: &StochasticMatrix) -> HeredityTensor {
    HeredityTensor::from_provider(LsoProvider { matrix: m.clone() }, TensorKind::Lso)
}

/// The embedded LSO is orthogonal preserving iff distinct rows are orthogonal.
pub fn lso_is_op(m: &StochasticMatrix) -> bool {
    let rows = m.rows();
    rows.iter().enumerate().all(|(a, ra)| {
        rows[a + 1..]
            .iter()
            .all(|rb| simplex::is_orthogonal(ra, rb).expect("rows share the matrix window"))
    })
}

/// Random valid tensor: each unordered row gets `sparsity` distinct uniform
/// targets with Dirichlet(1, ..., 1) masses, mirrored for symmetry.
pub fn random_tensor(window: usize, sparsity: usize, seed: u64) -> HeredityTensor {
    random_explicit(window, sparsity, &mut rng::seeded(seed)).into_tensor(TensorKind::Explicit)
}

pub(crate) fn random_explicit<R: Rng + ?Sized>(window: usize, sparsity: usize, rng: &mut R) -> ExplicitTensor {
    let sparsity = sparsity.clamp(1, window);
    let mut t = ExplicitTensor::new(window);
    for i in 1..=window {
        for j in i..=window {
            let targets = rng::distinct_indices(rng, window, sparsity);
            let masses = rng::dirichlet_uniform(rng, targets.len());
            let row: Vec<(usize, f64)> = targets.into_iter().zip(masses).collect();
            t.set_symmetric_row(i, j, &row, 0.0)
                .expect("indices drawn inside the window");
        }
    }
    t
}
