#![allow(dead_code)]

use std::collections::BTreeSet;

use opqso::construct::{build_op, ComplementRule, ComplementStrategy, ConstructedOp};
use opqso::heredity::HeredityTensor;
use opqso::orthosys::{gen_dyadic, gen_half_half, gen_standard, OrthogonalSystem};
use opqso::qso::IndexMap;
use opqso::rng::{distinct_indices, seeded};
use opqso::simplex::{IndexSet, SimplexVector};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Zero,
    Pair,
    Triangle,
    Fan,
}

pub const RULE_KINDS: [RuleKind; 4] = [RuleKind::Zero, RuleKind::Pair, RuleKind::Triangle, RuleKind::Fan];

pub fn generator_systems(window: usize) -> Vec<(&'static str, OrthogonalSystem)> {
    vec![
        ("standard", gen_standard(window, None).unwrap()),
        ("half-half", gen_half_half(window).unwrap()),
        ("dyadic", gen_dyadic(window).unwrap()),
    ]
}

/// Identity plus one random injection into a member range a quarter larger
/// than the window, so some members go unused.
pub fn index_maps(window: usize, members: usize, seed: u64) -> Vec<(&'static str, IndexMap)> {
    let mut rng = seeded(seed);
    let out = (window + window / 4).max(members);
    vec![
        ("identity", IndexMap::identity(window)),
        ("injection", IndexMap::random_injection(window, out, &mut rng).unwrap()),
    ]
}

fn row(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

/// A rule of `kind` at every complement coordinate, with rows never shared
/// between coordinates. `None` when a nonzero kind has no complement to act on.
pub fn random_strategy(complement: &IndexSet, window: usize, kind: RuleKind, seed: u64) -> Option<ComplementStrategy> {
    if kind != RuleKind::Zero && complement.is_empty() {
        return None;
    }
    let mut rng = seeded(seed);
    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut strategy = ComplementStrategy::new();
    for c in complement.iter() {
        let rule = loop {
            let rule = match kind {
                RuleKind::Zero => ComplementRule::Zero,
                RuleKind::Pair => {
                    let p = distinct_indices(&mut rng, window, 2);
                    ComplementRule::Pair {
                        ic: p[0],
                        jc: p[1],
                        weight: rng.random_range(0.05..=1.0),
                    }
                }
                RuleKind::Triangle => {
                    let p = distinct_indices(&mut rng, window, 3);
                    ComplementRule::Triangle {
                        ic: p[1],
                        jc: p[2],
                        ic0: p[0],
                        weights: [
                            rng.random_range(0.05..=1.0),
                            rng.random_range(0.05..=1.0),
                            rng.random_range(0.05..=1.0),
                        ],
                    }
                }
                RuleKind::Fan => {
                    let spokes = 1 + rng.random_range(0..3usize.min(window - 2));
                    let p = distinct_indices(&mut rng, window, 2 + spokes);
                    ComplementRule::Fan {
                        ic: p[0],
                        jc: p[1],
                        pair_weight: rng.random_range(0.05..=1.0),
                        spokes: p[2..].iter().map(|&i| (i, rng.random_range(0.05..=1.0))).collect(),
                    }
                }
            };
            let rows: Vec<_> = rule.rows().into_iter().map(|(r, _)| row(r.0, r.1)).collect();
            if rows.iter().all(|r| !used.contains(r)) {
                used.extend(rows);
                break rule;
            }
        };
        strategy.insert(c, rule);
    }
    Some(strategy)
}

/// Every (system, π, rule kind) combination at `window` that applies.
pub fn constructed_ops(window: usize, seed: u64) -> Vec<(String, ConstructedOp)> {
    let mut ops = Vec::new();
    for (s, (sname, system)) in generator_systems(window).into_iter().enumerate() {
        for (pname, pi) in index_maps(window, system.len(), seed ^ (s as u64 + 1)) {
            let bare = build_op(&system, &pi, &ComplementStrategy::new()).unwrap();
            let complement = bare.complement();
            for (r, kind) in RULE_KINDS.iter().enumerate() {
                let Some(strategy) = random_strategy(&complement, window, *kind, seed.wrapping_add(r as u64)) else {
                    continue;
                };
                let op = build_op(&system, &pi, &strategy).unwrap_or_else(|e| panic!("{sname}/{pname}/{kind:?}: {e}"));
                ops.push((format!("{sname}/{pname}/{kind:?}"), op));
            }
        }
    }
    ops
}

/// V(x)_k = Σ_{i,j} P_{ij,k} x_i x_j as a dense triple loop.
pub fn dense_evaluate(t: &HeredityTensor, x: &[f64]) -> Vec<f64> {
    let n = t.window();
    let mut out = vec![0.0; n];
    for i in 1..=n {
        for j in 1..=n {
            let w = x[i - 1] * x[j - 1];
            if w == 0.0 {
                continue;
            }
            for k in 1..=n {
                out[k - 1] += t.coeff(i, j, k) * w;
            }
        }
    }
    out
}

pub fn dense(x: &SimplexVector) -> Vec<f64> {
    (1..=x.window()).map(|k| x.get(k)).collect()
}

/// Random point of the simplex with a random support.
pub fn random_point<R: Rng>(rng: &mut R, window: usize) -> SimplexVector {
    let size = rng.random_range(1..=window);
    let alpha = IndexSet::within(distinct_indices(rng, window, size), window).unwrap();
    opqso::simplex::sample_interior_with(&alpha, window, rng).unwrap()
}
