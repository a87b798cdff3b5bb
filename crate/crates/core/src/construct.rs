//! Orthogonal-preserving operators generated by an orthogonal system.
//!
//! V(e_k) = F_π(k). Index `k` of the input window is sent to member π(k);
//! member indices beyond the system's length stand for members supported
//! outside the window, so those basis vectors escape entirely.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heredity::{ExplicitTensor, HeredityTensor, TensorKind};
use crate::orthosys::{validate_system, OrthogonalSystem};
use crate::qso::IndexMap;
use crate::report::{ValidationReport, Violation};
use crate::simplex::{IndexSet, SimplexVector};

const COEFF_TOL: f64 = 1e-12;

/// How a complement coordinate c receives mass.
///
/// Rows that feed c must pairwise share an index: a single pair, a triangle,
/// or a star around `ic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum ComplementRule {
    Zero,
    /// V(x)_c = 2 w x_ic x_jc.
    Pair {
        ic: usize,
        jc: usize,
        weight: f64,
    },
    /// Rows (ic,jc), (ic0,jc), (ic0,ic) with the given weights.
    Triangle {
        ic: usize,
        jc: usize,
        ic0: usize,
        weights: [f64; 3],
    },
    /// Row (ic,jc) plus rows (i, ic) for each spoke `(i, w)`.
    Fan {
        ic: usize,
        jc: usize,
        pair_weight: f64,
        spokes: Vec<(usize, f64)>,
    },
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

impl ComplementRule {
    /// Rows (i < j) with their weight at c.
    pub fn rows(&self) -> Vec<((usize, usize), f64)> {
        match self {
            ComplementRule::Zero => Vec::new(),
            ComplementRule::Pair { ic, jc, weight } => vec![(ordered(*ic, *jc), *weight)],
            ComplementRule::Triangle { ic, jc, ic0, weights } => vec![
                (ordered(*ic, *jc), weights[0]),
                (ordered(*ic0, *jc), weights[1]),
                (ordered(*ic0, *ic), weights[2]),
            ],
            ComplementRule::Fan {
                ic,
                jc,
                pair_weight,
                spokes,
            } => std::iter::once((ordered(*ic, *jc), *pair_weight))
                .chain(spokes.iter().map(|&(i, w)| (ordered(i, *ic), w)))
                .collect(),
        }
    }

    fn indices(&self) -> Vec<usize> {
        match self {
            ComplementRule::Zero => Vec::new(),
            ComplementRule::Pair { ic, jc, .. } => vec![*ic, *jc],
            ComplementRule::Triangle { ic, jc, ic0, .. } => vec![*ic, *jc, *ic0],
            ComplementRule::Fan { ic, jc, spokes, .. } => {
                let mut v = vec![*ic, *jc];
                v.extend(spokes.iter().map(|&(i, _)| i));
                v
            }
        }
    }

    fn check(&self, c: usize, window: usize) -> Result<()> {
        let invalid = |reason: String| Error::InvalidRule { c, reason };
        let idx = self.indices();
        if let Some(&bad) = idx.iter().find(|&&i| i == 0 || i > window) {
            return Err(Error::IndexOutOfWindow { index: bad, window });
        }
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != idx.len() {
            return Err(invalid(format!("indices {idx:?} are not distinct")));
        }
        if let ComplementRule::Fan { spokes, .. } = self {
            if spokes.is_empty() {
                return Err(invalid("fan needs at least one spoke".into()));
            }
        }
        if let Some((_, w)) = self.rows().into_iter().find(|&(_, w)| !(w > 0.0) || !w.is_finite()) {
            return Err(invalid(format!("weight {w} must lie in (0, 1]")));
        }
        Ok(())
    }

    /// V(x)_c = Σ over rule rows of 2 P_{ij,c} x_i x_j, reading P from `t`.
    fn closed_form(&self, t: &HeredityTensor, c: usize, x: &SimplexVector) -> f64 {
        let p = |i: usize, j: usize| t.coeff(i, j, c);
        match self {
            ComplementRule::Zero => 0.0,
            ComplementRule::Pair { ic, jc, .. } => 2.0 * p(*ic, *jc) * x.get(*ic) * x.get(*jc),
            ComplementRule::Triangle { ic, jc, ic0, .. } => {
                let (a, b, z) = (x.get(*ic), x.get(*jc), x.get(*ic0));
                2.0 * (p(*ic, *jc) * a * b + p(*ic0, *jc) * z * b + p(*ic0, *ic) * z * a)
            }
            ComplementRule::Fan { ic, jc, spokes, .. } => {
                let star: f64 = spokes.iter().map(|&(i, _)| p(i, *ic) * x.get(i)).sum();
                2.0 * x.get(*ic) * (p(*ic, *jc) * x.get(*jc) + star)
            }
        }
    }
}

/// One rule per complement coordinate; coordinates not listed use
/// [`ComplementRule::Zero`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComplementStrategy(BTreeMap<usize, ComplementRule>);

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StrategyEntry {
    c: usize,
    #[serde(flatten)]
    rule: ComplementRule,
}

impl Serialize for ComplementStrategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries: Vec<StrategyEntry> = self
            .0
            .iter()
            .map(|(&c, rule)| StrategyEntry { c, rule: rule.clone() })
            .collect();
        entries.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplementStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<StrategyEntry>::deserialize(d)?;
        let mut map = BTreeMap::new();
        for e in entries {
            if map.insert(e.c, e.rule).is_some() {
                return Err(serde::de::Error::custom(format!("coordinate {} listed twice", e.c)));
            }
        }
        Ok(ComplementStrategy(map))
    }
}

impl ComplementStrategy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, c: usize, rule: ComplementRule) -> Self {
        self.0.insert(c, rule);
        self
    }

    pub fn insert(&mut self, c: usize, rule: ComplementRule) -> Option<ComplementRule> {
        self.0.insert(c, rule)
    }

    pub fn rule(&self, c: usize) -> &ComplementRule {
        self.0.get(&c).unwrap_or(&ComplementRule::Zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &ComplementRule)> {
        self.0.iter().map(|(&c, r)| (c, r))
    }
}

#[derive(Debug, Clone)]
pub struct ConstructedOp {
    pub tensor: HeredityTensor,
    pub system: OrthogonalSystem,
    pub pi: IndexMap,
    pub strategy: ComplementStrategy,
}

impl ConstructedOp {
    pub fn window(&self) -> usize {
        self.system.window()
    }

    /// F_π(k), or `None` when the member lies beyond the window.
    pub fn member_image(&self, k: usize) -> Option<&SimplexVector> {
        self.system.member(self.pi.apply(k))
    }

    /// Complement of the supports of the members π actually reaches.
    pub fn complement(&self) -> IndexSet {
        complement_of(&self.system, &self.pi)
    }

    /// ρ(k) = i when V(e_k) = e_i.
    pub fn basis_image(&self, k: usize) -> Option<usize> {
        self.member_image(k).and_then(SimplexVector::basis_index)
    }

    /// Index sets α with {V(e_k)}_{k∈α} = {e_k}_{k∈α}, as the cycles of ρ,
    /// ordered by size and then lexicographically.
    pub fn basis_cycles(&self) -> Vec<IndexSet> {
        let n = self.window();
        let mut seen = vec![false; n + 1];
        let mut cycles = Vec::new();
        for start in 1..=n {
            if seen[start] {
                continue;
            }
            let mut path = vec![start];
            let mut cur = start;
            while let Some(next) = self.basis_image(cur) {
                if next == start {
                    for &k in &path {
                        seen[k] = true;
                    }
                    cycles.push(path.iter().copied().collect::<IndexSet>());
                    break;
                }
                if path.len() > n {
                    break;
                }
                path.push(next);
                cur = next;
            }
        }
        cycles.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        cycles
    }
}

fn complement_of(system: &OrthogonalSystem, pi: &IndexMap) -> IndexSet {
    let used: IndexSet = (1..=pi.window())
        .filter_map(|k| system.member(pi.apply(k)))
        .flat_map(|m| m.support().to_vec())
        .collect();
    IndexSet::range(system.window()).difference(&used)
}

/// Member part of V(e_k): entries and the mass lying beyond the window.
fn member_part<'a>(system: &'a OrthogonalSystem, pi: &IndexMap, k: usize) -> (&'a [(usize, f64)], f64) {
    match system.member(pi.apply(k)) {
        Some(f) if f.is_tail() => (f.entries(), (1.0 - f.mass()).max(0.0)),
        Some(f) => (f.entries(), 0.0),
        None => (&[], 1.0),
    }
}

/// Build the operator with diagonal rows ℙ_kk = F_π(k), cross rows equal to
/// the member midpoint scaled by 1 - w, and strategy weights installed on the
/// complement.
pub fn build_op(system: &OrthogonalSystem, pi: &IndexMap, strategy: &ComplementStrategy) -> Result<ConstructedOp> {
    let n = system.window();
    if pi.window() != n {
        return Err(Error::WindowMismatch {
            left: n,
            right: pi.window(),
        });
    }
    if let Some(Violation::Overlap { a, b, .. }) = validate_system(system).violations.first() {
        return Err(Error::NotOrthogonal { a: *a, b: *b });
    }
    let complement = complement_of(system, pi);

    let mut weights: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for (c, rule) in strategy.iter() {
        if c == 0 || c > n {
            return Err(Error::IndexOutOfWindow { index: c, window: n });
        }
        if !complement.contains(c) {
            return Err(Error::StrategyOnNonComplement { c });
        }
        rule.check(c, n)?;
        for (row, w) in rule.rows() {
            let e = weights.entry(row).or_insert((0.0, 0));
            e.0 += w;
            e.1 += 1;
        }
    }
    if let Some((&(i, j), &(total, _))) = weights.iter().find(|(_, &(t, _))| t > 1.0 + COEFF_TOL) {
        return Err(Error::WeightOverflow { i, j, total });
    }
    if let Some((&(i, j), _)) = weights.iter().find(|(_, &(_, count))| count > 1) {
        return Err(Error::SharedRow { i, j });
    }
    let mut installed: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for (c, rule) in strategy.iter() {
        for (row, w) in rule.rows() {
            installed.entry(row).or_default().push((c, w));
        }
    }

    let mut t = ExplicitTensor::new(n);
    for i in 1..=n {
        let (fi, ti) = member_part(system, pi, i);
        t.set_row(i, i, fi, ti)?;
        for j in i + 1..=n {
            let (fj, tj) = member_part(system, pi, j);
            let extra = installed.get(&(i, j)).map(Vec::as_slice).unwrap_or(&[]);
            let w: f64 = extra.iter().map(|&(_, w)| w).sum();
            let scale = (1.0 - w) / 2.0;
            let mut row: BTreeMap<usize, f64> = BTreeMap::new();
            for &(k, f) in fi.iter().chain(fj) {
                *row.entry(k).or_insert(0.0) += scale * f;
            }
            row.extend(extra.iter().copied());
            let row: Vec<(usize, f64)> = row.into_iter().collect();
            t.set_symmetric_row(i, j, &row, (ti + tj) / 2.0 * (1.0 - w))?;
        }
    }
    Ok(ConstructedOp {
        tensor: t.into_tensor(TensorKind::Constructed),
        system: system.clone(),
        pi: pi.clone(),
        strategy: strategy.clone(),
    })
}

/// Evaluate through the canonical form: on supp F_π(k),
/// V(x)_m = x_k (f_m · mass(x) + Σ_{i≠k} a_ik^(m) x_i) with
/// a_ik^(m) = 2 P_{ik,m} - f_m; on the complement, through the rule.
pub fn canonical_evaluate(op: &ConstructedOp, x: &SimplexVector) -> Result<SimplexVector> {
    let n = op.window();
    if x.window() != n {
        return Err(Error::WindowMismatch {
            left: n,
            right: x.window(),
        });
    }
    let t = &op.tensor;
    let mut out = vec![0.0; n + 1];
    let mut tail = x.is_tail();
    for (k, xk) in x.iter() {
        let Some(f) = op.member_image(k) else {
            tail = true;
            continue;
        };
        tail |= f.is_tail();
        for (m, fm) in f.iter() {
            let mut s = fm * x.mass();
            for (i, xi) in x.iter() {
                if i != k {
                    s += (2.0 * t.coeff(i, k, m) - fm) * xi;
                }
            }
            out[m] = xk * s;
        }
    }
    for c in op.complement().iter() {
        out[c] = op.strategy.rule(c).closed_form(t, c, x);
    }
    Ok(SimplexVector::from_dense(n, &out, tail))
}

type WeightedRow = ((usize, usize), f64);

/// Check the stored tensor against the generating data:
/// diagonal rows equal their member and vanish elsewhere, cross rows stay on
/// member supports off the complement, rows feeding each complement coordinate
/// pairwise share an index and match the declared rule.
pub fn verify_constraints(op: &ConstructedOp) -> ValidationReport {
    let n = op.window();
    let t = &op.tensor;
    let complement = op.complement();
    let support_of = |k: usize| op.member_image(k).map(SimplexVector::support).unwrap_or_default();
    let mut violations = Vec::new();
    let mut feeding: BTreeMap<usize, Vec<WeightedRow>> = BTreeMap::new();

    for i in 1..=n {
        let si = support_of(i);
        let fi = op.member_image(i);
        for m in si.iter() {
            let expected = fi.map_or(0.0, |f| f.get(m));
            let found = t.coeff(i, i, m);
            if (expected - found).abs() > COEFF_TOL {
                violations.push(Violation::DiagonalMismatch {
                    i,
                    k: m,
                    expected,
                    found,
                });
            }
        }
        for &(m, value) in t.row(i, i).iter() {
            if value <= 0.0 || si.contains(m) {
                continue;
            }
            if complement.contains(m) {
                violations.push(Violation::ComplementDiagonal { i, c: m, value });
            } else {
                violations.push(Violation::OutsideSupport { i, j: i, k: m, value });
            }
        }
        for j in i + 1..=n {
            let allowed = si.union(&support_of(j));
            for &(m, value) in t.row(i, j).iter() {
                if value <= 0.0 || allowed.contains(m) {
                    continue;
                }
                if complement.contains(m) {
                    feeding.entry(m).or_default().push(((i, j), value));
                } else {
                    violations.push(Violation::OutsideSupport { i, j, k: m, value });
                }
            }
        }
    }

    for (c, _) in op.strategy.iter() {
        if !complement.contains(c) {
            violations.push(Violation::StrategyMismatch {
                c,
                detail: "rule on a coordinate outside the complement".into(),
            });
        }
    }

    for c in complement.iter() {
        let rows = feeding.get(&c).map(Vec::as_slice).unwrap_or(&[]);
        'pairs: for (p, &((a, b), _)) in rows.iter().enumerate() {
            for &((u, v), _) in &rows[p + 1..] {
                if a != u && a != v && b != u && b != v {
                    violations.push(Violation::DisjointComplementRows {
                        c,
                        first: (a, b),
                        second: (u, v),
                    });
                    break 'pairs;
                }
            }
        }
        let declared: BTreeMap<(usize, usize), f64> = op.strategy.rule(c).rows().into_iter().collect();
        let actual: BTreeMap<(usize, usize), f64> = rows.iter().copied().collect();
        for (&(i, j), &w) in &declared {
            let found = actual.get(&(i, j)).copied().unwrap_or(0.0);
            if (found - w).abs() > COEFF_TOL {
                violations.push(Violation::StrategyMismatch {
                    c,
                    detail: format!("row ({i},{j}) carries {found}, rule declares {w}"),
                });
            }
        }
        for (&(i, j), &v) in &actual {
            if !declared.contains_key(&(i, j)) {
                violations.push(Violation::StrategyMismatch {
                    c,
                    detail: format!("row ({i},{j}) carries {v} but the rule does not use it"),
                });
            }
        }
    }
    ValidationReport::from_violations(violations)
}
