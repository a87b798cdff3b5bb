//! Operator evaluation and the Volterra, π-Volterra and shift families.

use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heredity::{CoefficientProvider, HeredityTensor, TensorKind};
use crate::simplex::SimplexVector;

/// Skew-symmetric matrix a with a(k,i) = -a(i,k), zero diagonal, |a| <= 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SkewLiteral", into = "SkewLiteral")]
pub struct SkewMatrix {
    window: usize,
    // keyed by (k, i) with k < i
    upper: BTreeMap<(usize, usize), f64>,
}

/// `{"window": N, "skew": [[k, i, a], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkewLiteral {
    pub window: usize,
    #[serde(default)]
    pub skew: Vec<(usize, usize, f64)>,
}

impl TryFrom<SkewLiteral> for SkewMatrix {
    type Error = Error;

    fn try_from(lit: SkewLiteral) -> Result<Self> {
        SkewMatrix::new(lit.window, &lit.skew)
    }
}

impl From<SkewMatrix> for SkewLiteral {
    fn from(s: SkewMatrix) -> Self {
        SkewLiteral {
            window: s.window,
            skew: s.upper.iter().map(|(&(k, i), &a)| (k, i, a)).collect(),
        }
    }
}

impl SkewMatrix {
    pub fn zero(window: usize) -> Self {
        SkewMatrix {
            window,
            upper: BTreeMap::new(),
        }
    }

    /// Entries `(k, i, a(k,i))`. Giving both `(k,i)` and `(i,k)` is allowed
    /// only when they are negatives of each other.
    pub fn new(window: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        if window == 0 {
            return Err(Error::EmptyWindow);
        }
        let mut upper = BTreeMap::new();
        for &(k, i, a) in entries {
            for idx in [k, i] {
                if idx == 0 || idx > window {
                    return Err(Error::IndexOutOfWindow { index: idx, window });
                }
            }
            if k == i {
                if a != 0.0 {
                    return Err(Error::SkewViolation(format!("a({k},{k}) = {a} must be 0")));
                }
                continue;
            }
            if !(a.abs() <= 1.0) {
                return Err(Error::SkewViolation(format!("|a({k},{i})| = {} exceeds 1", a.abs())));
            }
            let (key, value) = if k < i { ((k, i), a) } else { ((i, k), -a) };
            if let Some(prev) = upper.insert(key, value) {
                if prev != value {
                    return Err(Error::SkewViolation(format!(
                        "a({k},{i}) = {a} conflicts with a({i},{k}) given earlier"
                    )));
                }
            }
        }
        upper.retain(|_, a| *a != 0.0);
        Ok(SkewMatrix { window, upper })
    }

    /// Entries drawn uniformly from [-1, 1].
    pub fn random<R: Rng + ?Sized>(window: usize, rng: &mut R) -> Self {
        let mut upper = BTreeMap::new();
        for k in 1..=window {
            for i in k + 1..=window {
                upper.insert((k, i), rng.random_range(-1.0..=1.0));
            }
        }
        SkewMatrix { window, upper }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// a(k, i).
    pub fn get(&self, k: usize, i: usize) -> f64 {
        use std::cmp::Ordering::*;
        match k.cmp(&i) {
            Equal => 0.0,
            Less => self.upper.get(&(k, i)).copied().unwrap_or(0.0),
            Greater => -self.upper.get(&(i, k)).copied().unwrap_or(0.0),
        }
    }
}

/// Injective map from `1..=window` into `1..=window_out`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMap {
    images: Vec<usize>,
    window_out: usize,
}

impl IndexMap {
    /// `images[k-1]` is the image of `k`.
    pub fn new(images: Vec<usize>, window_out: usize) -> Result<Self> {
        let mut seen = vec![false; window_out + 1];
        for (n, &k) in images.iter().enumerate() {
            if k == 0 || k > window_out {
                return Err(Error::IndexOutOfWindow {
                    index: k,
                    window: window_out,
                });
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::NotInjective(format!(
                    "{} is the image of {} and an earlier index",
                    k,
                    n + 1
                )));
            }
        }
        Ok(IndexMap { images, window_out })
    }

    pub fn identity(window: usize) -> Self {
        IndexMap {
            images: (1..=window).collect(),
            window_out: window,
        }
    }

    /// The transposition swapping `a` and `b`.
    pub fn transposition(window: usize, a: usize, b: usize) -> Result<Self> {
        let mut images: Vec<usize> = (1..=window).collect();
        if a == 0 || a > window || b == 0 || b > window {
            return Err(Error::IndexOutOfWindow {
                index: a.max(b),
                window,
            });
        }
        images.swap(a - 1, b - 1);
        Self::new(images, window)
    }

    pub fn random_permutation<R: Rng + ?Sized>(window: usize, rng: &mut R) -> Self {
        let mut images: Vec<usize> = (1..=window).collect();
        images.shuffle(rng);
        IndexMap {
            images,
            window_out: window,
        }
    }

    /// Uniform injection `1..=window -> 1..=window_out`.
    pub fn random_injection<R: Rng + ?Sized>(window: usize, window_out: usize, rng: &mut R) -> Result<Self> {
        if window > window_out {
            return Err(Error::NotInjective(format!("{window} indices into {window_out}")));
        }
        let mut pool: Vec<usize> = (1..=window_out).collect();
        pool.shuffle(rng);
        pool.truncate(window);
        Ok(IndexMap {
            images: pool,
            window_out,
        })
    }

    /// Size of the domain.
    pub fn window(&self) -> usize {
        self.images.len()
    }

    pub fn window_out(&self) -> usize {
        self.window_out
    }

    pub fn apply(&self, k: usize) -> usize {
        self.images[k - 1]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn is_permutation(&self) -> bool {
        self.images.len() == self.window_out
    }

    /// Preimage of `image`, if any.
    pub fn preimage(&self, image: usize) -> Option<usize> {
        self.images.iter().position(|&k| k == image).map(|p| p + 1)
    }
}

/// V(x)_k = Σ_{i,j} P_{ij,k} x_i x_j, summed over ordered pairs of supp(x).
pub fn evaluate(t: &HeredityTensor, x: &SimplexVector) -> Result<SimplexVector> {
    let n = t.window();
    if x.window() != n {
        return Err(Error::WindowMismatch {
            left: n,
            right: x.window(),
        });
    }
    let mut acc = vec![0.0; n + 1];
    let mut tail = x.is_tail();
    for (i, xi) in x.iter() {
        for (j, xj) in x.iter() {
            let w = xi * xj;
            for &(k, p) in t.row(i, j).iter() {
                acc[k] += p * w;
            }
            tail |= t.tail_budget(i, j) > 0.0;
        }
    }
    Ok(SimplexVector::from_dense(n, &acc, tail))
}

/// Every row (i,j) is supported in {i, j}.
pub fn is_volterra(t: &HeredityTensor) -> bool {
    let n = t.window();
    (1..=n).all(|i| (i..=n).all(|j| t.row(i, j).iter().all(|&(k, p)| p == 0.0 || k == i || k == j)))
}

#[derive(Debug)]
struct PiVolterraProvider {
    skew: SkewMatrix,
    // inverse[p] = π⁻¹(p)
    inverse: Vec<usize>,
}

impl CoefficientProvider for PiVolterraProvider {
    fn window(&self) -> usize {
        self.skew.window()
    }

    fn row(&self, p: usize, q: usize) -> Cow<'_, [(usize, f64)]> {
        if p == q {
            return Cow::Owned(vec![(self.inverse[p], 1.0)]);
        }
        // row (p,q) feeds k = π⁻¹(q) with (1 + a(q,p))/2 and k = π⁻¹(p) with (1 + a(p,q))/2
        let mut row = vec![
            (self.inverse[q], (1.0 + self.skew.get(q, p)) / 2.0),
            (self.inverse[p], (1.0 + self.skew.get(p, q)) / 2.0),
        ];
        row.sort_by_key(|&(k, _)| k);
        row.retain(|&(_, v)| v != 0.0);
        Cow::Owned(row)
    }
}

/// V(x)_k = x_{π(k)} (1 + Σ_i a(π(k), i) x_i).
pub fn pi_volterra_from(a: &SkewMatrix, pi: &IndexMap) -> Result<HeredityTensor> {
    let n = a.window();
    if !pi.is_permutation() || pi.window() != n {
        return Err(Error::NotPermutation { window: n });
    }
    let mut inverse = vec![0; n + 1];
    for k in 1..=n {
        inverse[pi.apply(k)] = k;
    }
    Ok(HeredityTensor::from_provider(
        PiVolterraProvider {
            skew: a.clone(),
            inverse,
        },
        TensorKind::PiVolterra,
    ))
}

/// V(x)_k = x_k (1 + Σ_i a(k, i) x_i).
pub fn volterra_from_skew(a: &SkewMatrix) -> HeredityTensor {
    HeredityTensor::from_provider(
        PiVolterraProvider {
            skew: a.clone(),
            inverse: (0..=a.window()).collect(),
        },
        TensorKind::Volterra,
    )
}

/// What happens to rows whose successor index would leave the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftBoundary {
    /// Row is empty and its whole mass is tail budget. Keeps the operator
    /// orthogonal preserving on the window.
    #[default]
    Leaky,
    /// Row is e_W. Stochastic inside the window but not orthogonal preserving:
    /// {1, W-1} and {2, W} both land on e_W.
    Absorbing,
}

#[derive(Debug)]
struct ShiftProvider {
    window: usize,
    boundary: ShiftBoundary,
}

impl CoefficientProvider for ShiftProvider {
    fn window(&self) -> usize {
        self.window
    }

    fn row(&self, i: usize, j: usize) -> Cow<'_, [(usize, f64)]> {
        let m = i.max(j);
        if m < self.window {
            Cow::Owned(vec![(m + 1, 1.0)])
        } else {
            match self.boundary {
                ShiftBoundary::Leaky => Cow::Borrowed(&[]),
                ShiftBoundary::Absorbing => Cow::Owned(vec![(self.window, 1.0)]),
            }
        }
    }

    fn tail_budget(&self, i: usize, j: usize) -> f64 {
        if i.max(j) == self.window && self.boundary == ShiftBoundary::Leaky {
            1.0
        } else {
            0.0
        }
    }
}

/// Quadratic shift: row (i,j) is e_{max(i,j)+1}, so V(e_i) = e_{i+1}.
pub fn shift_tensor(window: usize) -> Result<HeredityTensor> {
    shift_tensor_with(window, ShiftBoundary::Leaky)
}

pub fn shift_tensor_with(window: usize, boundary: ShiftBoundary) -> Result<HeredityTensor> {
    if window < 3 {
        return Err(Error::WindowTooSmall { window, min: 3 });
    }
    Ok(HeredityTensor::from_provider(
        ShiftProvider { window, boundary },
        TensorKind::Shift,
    ))
}
