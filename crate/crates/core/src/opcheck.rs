//! Orthogonality preservation: exact row-pair scan, randomized trials, and the
//! π-Volterra structure check for operators sending basis vectors to basis
//! vectors.
//!
//! V is OP on the window iff ℙ_ij ⊥ ℙ_uv whenever {i,j} ∩ {u,v} = ∅. A failing
//! quadruple yields the witness x = (e_i + e_j)/2, y = (e_u + e_v)/2.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::heredity::HeredityTensor;
use crate::qso::evaluate;
use crate::rng;
use crate::simplex::{self, make_vector, sample_interior_with, IndexSet, SimplexVector, TAU_ORTH};

/// Cap on reported violations.
pub const MAX_VIOLATIONS: usize = 16;
pub const DEFAULT_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Op,
    NotOp,
}

/// What a verdict covers. `Diagonal` and `Randomized` OP verdicts are only
/// consistency results; their NotOp verdicts are conclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Full,
    Diagonal,
    Randomized,
}

/// ℙ_ij · ℙ_uv > τ with {i,j} ∩ {u,v} = ∅; `i <= j`, `u <= v`, `(i,j) < (u,v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadViolation {
    pub i: usize,
    pub j: usize,
    pub u: usize,
    pub v: usize,
    pub dot: f64,
}

impl QuadViolation {
    fn key(&self) -> (usize, usize, usize, usize) {
        (self.i, self.j, self.u, self.v)
    }
}

/// x ⊥ y with V(x) · V(y) = `dot` > τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: SimplexVector,
    pub y: SimplexVector,
    pub dot: f64,
}

impl Witness {
    /// Recompute both conditions from scratch.
    pub fn verify(&self, t: &HeredityTensor) -> bool {
        let ortho = simplex::is_orthogonal(&self.x, &self.y).unwrap_or(false);
        let images = evaluate(t, &self.x).and_then(|vx| evaluate(t, &self.y).and_then(|vy| simplex::dot(&vx, &vy)));
        ortho && matches!(images, Ok(d) if d > TAU_ORTH)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpReport {
    pub verdict: Verdict,
    pub scope: Scope,
    pub violations: Vec<QuadViolation>,
    pub witness: Option<Witness>,
    pub trials_run: usize,
}

impl OpReport {
    pub fn is_op(&self) -> bool {
        self.verdict == Verdict::Op
    }
}

fn normalized(a: (usize, usize), b: (usize, usize)) -> ((usize, usize), (usize, usize)) {
    let a = (a.0.min(a.1), a.0.max(a.1));
    let b = (b.0.min(b.1), b.0.max(b.1));
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn disjoint(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 != b.0 && a.0 != b.1 && a.1 != b.0 && a.1 != b.1
}

fn pair_witness(t: &HeredityTensor, a: (usize, usize), b: (usize, usize)) -> Option<Witness> {
    let n = t.window();
    let half = |p: (usize, usize)| {
        if p.0 == p.1 {
            SimplexVector::basis(p.0, n)
        } else {
            make_vector(&[(p.0, 0.5), (p.1, 0.5)], n, false)
        }
    };
    let x = half(a).ok()?;
    let y = half(b).ok()?;
    let dot = simplex::dot(&evaluate(t, &x).ok()?, &evaluate(t, &y).ok()?).ok()?;
    let w = Witness { x, y, dot };
    (dot > TAU_ORTH).then_some(w)
}

fn finish(t: &HeredityTensor, scope: Scope, mut found: Vec<QuadViolation>) -> OpReport {
    found.sort_by_key(QuadViolation::key);
    found.dedup_by_key(|q| q.key());
    let witness = found.iter().find_map(|q| pair_witness(t, (q.i, q.j), (q.u, q.v)));
    found.truncate(MAX_VIOLATIONS);
    OpReport {
        verdict: if found.is_empty() { Verdict::Op } else { Verdict::NotOp },
        scope,
        violations: found,
        witness,
        trials_run: 0,
    }
}

/// Exhaustive quadruple scan.
///
/// Rows are bucketed by target coordinate, so only pairs of rows that share a
/// coordinate are ever compared.
pub fn characterize(t: &HeredityTensor) -> OpReport {
    let n = t.window();
    let pairs: Vec<(usize, usize)> = (1..=n).flat_map(|i| (i..=n).map(move |j| (i, j))).collect();
    let rows: Vec<Vec<(usize, f64)>> = pairs.par_iter().map(|&(i, j)| t.row(i, j).into_owned()).collect();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for (r, row) in rows.iter().enumerate() {
        for &(k, p) in row {
            if p > 0.0 && k >= 1 && k <= n {
                buckets[k].push(r);
            }
        }
    }
    let found: Vec<QuadViolation> = buckets
        .par_iter()
        .flat_map_iter(|bucket| {
            let mut local: Vec<QuadViolation> = Vec::new();
            for (p, &ra) in bucket.iter().enumerate() {
                for &rb in &bucket[p + 1..] {
                    let (a, b) = (pairs[ra], pairs[rb]);
                    if !disjoint(a, b) {
                        continue;
                    }
                    let dot = simplex::sparse_dot(&rows[ra], &rows[rb]);
                    if dot > TAU_ORTH {
                        let (a, b) = normalized(a, b);
                        local.push(QuadViolation {
                            i: a.0,
                            j: a.1,
                            u: b.0,
                            v: b.1,
                            dot,
                        });
                    }
                }
                // keep per-bucket memory bounded; the smallest keys survive
                if local.len() > 4 * MAX_VIOLATIONS {
                    local.sort_by_key(QuadViolation::key);
                    local.dedup_by_key(|q| q.key());
                    local.truncate(MAX_VIOLATIONS);
                }
            }
            local
        })
        .collect();
    finish(t, Scope::Full, found)
}

/// Necessary condition ℙ_ii ⊥ ℙ_jj for i ≠ j.
pub fn diag_check(t: &HeredityTensor) -> OpReport {
    let n = t.window();
    let diag: Vec<Vec<(usize, f64)>> = (1..=n).map(|i| t.row(i, i).into_owned()).collect();
    let found: Vec<QuadViolation> = (1..=n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let diag = &diag;
            (i + 1..=n).filter_map(move |j| {
                let dot = simplex::sparse_dot(&diag[i - 1], &diag[j - 1]);
                (dot > TAU_ORTH).then_some(QuadViolation {
                    i,
                    j: i,
                    u: j,
                    v: j,
                    dot,
                })
            })
        })
        .collect();
    finish(t, Scope::Diagonal, found)
}

struct Trial {
    x: SimplexVector,
    y: SimplexVector,
    dot: f64,
    quad: Option<QuadViolation>,
}

fn run_trial(t: &HeredityTensor, max_size: usize, seed: u64) -> Option<Trial> {
    let n = t.window();
    let mut r = rng::seeded(seed);
    let a_len = r.random_range(1..=max_size);
    let b_len = r.random_range(1..=max_size);
    let picked = sample(&mut r, n, a_len + b_len).into_vec();
    let a: IndexSet = picked[..a_len].iter().map(|&i| i + 1).collect();
    let b: IndexSet = picked[a_len..].iter().map(|&i| i + 1).collect();
    let x = sample_interior_with(&a, n, &mut r).ok()?;
    let y = sample_interior_with(&b, n, &mut r).ok()?;
    let dot = simplex::dot(&evaluate(t, &x).ok()?, &evaluate(t, &y).ok()?).ok()?;
    if dot <= TAU_ORTH {
        return None;
    }
    let mut quad = None;
    'scan: for i in a.iter() {
        for j in a.iter().filter(|&j| j >= i) {
            for u in b.iter() {
                for v in b.iter().filter(|&v| v >= u) {
                    let d = simplex::sparse_dot(&t.row(i, j), &t.row(u, v));
                    if d > 0.0 {
                        let (p, q) = normalized((i, j), (u, v));
                        quad = Some(QuadViolation {
                            i: p.0,
                            j: p.1,
                            u: q.0,
                            v: q.1,
                            dot: d,
                        });
                        break 'scan;
                    }
                }
            }
        }
    }
    Some(Trial { x, y, dot, quad })
}

/// Black-box test on random orthogonal pairs with supports of size
/// 1..=min(8, W/2). The first violating trial supplies the witness.
pub fn randomized_op_test(t: &HeredityTensor, trials: usize, seed: u64) -> OpReport {
    let n = t.window();
    let max_size = (n / 2).min(8);
    if max_size == 0 {
        return OpReport {
            verdict: Verdict::Op,
            scope: Scope::Randomized,
            violations: Vec::new(),
            witness: None,
            trials_run: 0,
        };
    }
    let hits: Vec<(usize, Trial)> = (0..trials)
        .into_par_iter()
        .filter_map(|k| run_trial(t, max_size, rng::derive_seed(seed, k as u64)).map(|tr| (k, tr)))
        .collect();
    let mut violations: Vec<QuadViolation> = hits.iter().filter_map(|(_, tr)| tr.quad).collect();
    violations.sort_by_key(QuadViolation::key);
    violations.dedup_by_key(|q| q.key());
    violations.truncate(MAX_VIOLATIONS);
    let witness = hits.into_iter().next().map(|(_, tr)| Witness {
        x: tr.x,
        y: tr.y,
        dot: tr.dot,
    });
    OpReport {
        verdict: if witness.is_some() { Verdict::NotOp } else { Verdict::Op },
        scope: Scope::Randomized,
        violations,
        witness,
        trials_run: trials,
    }
}

/// Outcome of matching a tensor against the π-Volterra pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// Every V(e_k) is a basis vector or escapes the window entirely.
    pub applies: bool,
    /// ρ(k) with V(e_k) = e_ρ(k); `None` when V(e_k) escapes or is not a basis vector.
    pub images: Vec<Option<usize>>,
    /// π = ρ⁻¹ when ρ is a permutation of the window.
    pub permutation: Option<Vec<usize>>,
    /// Images are distinct and every row (i,j) lies in {ρ(i), ρ(j)}.
    pub pattern_ok: Option<bool>,
    pub op_verdict: Verdict,
    /// π-Volterra pattern holds exactly when the operator is OP.
    pub agrees: Option<bool>,
}

pub fn pi_volterra_equivalence(t: &HeredityTensor) -> EquivalenceReport {
    let n = t.window();
    let op_verdict = characterize(t).verdict;
    let mut images = Vec::with_capacity(n);
    let mut applies = true;
    for k in 1..=n {
        let row = t.row(k, k);
        match row.as_ref() {
            [(m, p)] if (p - 1.0).abs() <= 1e-12 => images.push(Some(*m)),
            [] if t.tail_budget(k, k) >= 1.0 - 1e-12 => images.push(None),
            _ => {
                applies = false;
                images.push(None);
            }
        }
    }
    if !applies {
        return EquivalenceReport {
            applies,
            images,
            permutation: None,
            pattern_ok: None,
            op_verdict,
            agrees: None,
        };
    }
    let mut seen = vec![false; n + 1];
    let mut injective = true;
    for &m in images.iter().flatten() {
        injective &= !std::mem::replace(&mut seen[m], true);
    }
    let pattern_ok = injective
        && (1..=n).all(|i| {
            (i + 1..=n).all(|j| {
                t.row(i, j)
                    .iter()
                    .all(|&(k, p)| p == 0.0 || Some(k) == images[i - 1] || Some(k) == images[j - 1])
            })
        });
    let permutation = (injective && images.iter().all(Option::is_some)).then(|| {
        let mut inverse = vec![0; n];
        for (k, m) in images.iter().enumerate() {
            inverse[m.unwrap() - 1] = k + 1;
        }
        inverse
    });
    EquivalenceReport {
        applies,
        images,
        permutation,
        pattern_ok: Some(pattern_ok),
        op_verdict,
        agrees: Some(pattern_ok == (op_verdict == Verdict::Op)),
    }
}
